#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "topicembed/config.hpp"

namespace topicembed {

inline constexpr const char* kToolVersion = "topicembed 0.1.0";

// FNV-1a 64-bit over a file's bytes, rendered as 16 hex digits.
std::string file_digest_hex(const std::string& path);

std::uint64_t fnv1a64(const void* data, std::size_t len);

// One manifest per CLI run: the resolved configuration, input digests, and
// per-phase wall-clock timings.  Identity fields (command, config, inputs,
// seed) determine the outputs; timings are informational.
struct RunManifest {
    std::string command;
    ModelConfig config;
    std::vector<std::pair<std::string, std::string>> inputs;   // name -> digest
    std::vector<std::pair<std::string, std::string>> outputs;  // name -> path
    std::vector<std::pair<std::string, double>> timings;       // phase -> seconds
    std::uint64_t seed = 0;
};

void write_manifest(const RunManifest& manifest, const std::string& path);

}  // namespace topicembed
