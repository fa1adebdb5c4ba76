#include "topicembed/manifest.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "topicembed/state.hpp"

namespace topicembed {

std::uint64_t fnv1a64(const void* data, std::size_t len) {
    const unsigned char* bytes = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= bytes[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string file_digest_hex(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open for digest: " + path);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        const std::streamsize n = in.gcount();
        for (std::streamsize i = 0; i < n; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
        if (!in) break;
    }
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

void write_manifest(const RunManifest& manifest, const std::string& path) {
    nlohmann::ordered_json j;
    j["version"] = kToolVersion;
    j["command"] = manifest.command;
    j["seed"] = manifest.seed;
    nlohmann::ordered_json cfg;
    for (const auto& [k, v] : config_fields(manifest.config)) cfg[k] = v;
    j["config"] = cfg;
    nlohmann::ordered_json inputs;
    for (const auto& [name, digest] : manifest.inputs) inputs[name] = digest;
    j["inputs"] = inputs;
    nlohmann::ordered_json outputs;
    for (const auto& [name, out_path] : manifest.outputs) outputs[name] = out_path;
    j["outputs"] = outputs;
    nlohmann::ordered_json timings;
    for (const auto& [phase, secs] : manifest.timings) timings[phase] = secs;
    j["timings"] = timings;

    std::ofstream out(path);
    if (!out) throw io_error("cannot write manifest: " + path);
    out << j.dump(2) << '\n';
    if (!out) throw io_error("write failed: " + path);
}

}  // namespace topicembed
