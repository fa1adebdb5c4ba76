#include "topicembed/state.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace topicembed {

std::string format_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

GlobalState init_params(const ModelConfig& config, std::size_t V, RandomStream& rng) {
    const int K = config.num_topics;
    const int M = config.embed_dim;
    GlobalState state;
    state.num_topics = K;
    state.embed_dim = M;
    state.vocab_size = V;
    state.iteration = 0;

    const double topic_sd = 1.0 / std::sqrt(config.topic_prior_precision);
    state.topic_mean.resize(static_cast<std::size_t>(K) * M);
    for (double& x : state.topic_mean) x = topic_sd * rng.normal();
    state.cov_topic = SymMatrix::identity(M, 1.0 / config.topic_prior_precision);

    const double beta = config.word_prior;
    std::vector<std::vector<std::pair<WordId, double>>> raw(K);
    for (int k = 0; k < K; ++k) {
        raw[k].resize(V);
        for (std::size_t v = 0; v < V; ++v)
            raw[k][v] = {static_cast<WordId>(v), beta + rng.uniform()};
    }
    state.words = rebuild_truncation(std::move(raw), config.topic_topwords,
                                     config.word_min_topics, beta, V);
    state.residual = ResidualSampler(state.words.residual_weights());
    state.cov_doc = doc_covariance(state, config);
    return state;
}

SymMatrix doc_covariance(const GlobalState& state, const ModelConfig& config) {
    const int M = state.embed_dim;
    const double tau = config.weight_noise_precision;
    SymMatrix a = SymMatrix::identity(M, config.doc_prior_precision);
    SymMatrix scaled_cov = state.cov_topic;
    scaled_cov *= tau * state.num_topics;
    a += scaled_cov;
    for (int k = 0; k < state.num_topics; ++k)
        a.add_outer(state.topic_mean_row(k), tau);
    a.symmetrize();
    return sym_inverse(a);
}

namespace {

void write_matrix_rows(std::ofstream& out, const char* tag, const double* data,
                       int rows, int cols) {
    for (int i = 0; i < rows; ++i) {
        out << tag << ' ' << i;
        for (int j = 0; j < cols; ++j)
            out << ' ' << format_double(data[static_cast<std::size_t>(i) * cols + j]);
        out << '\n';
    }
}

std::vector<std::pair<std::string, std::string>> parse_kv_tokens(std::istringstream& ss) {
    std::vector<std::pair<std::string, std::string>> kv;
    std::string tok;
    while (ss >> tok) {
        std::size_t eq = tok.find('=');
        if (eq == std::string::npos)
            throw io_error("model file: malformed config token '" + tok + "'");
        kv.emplace_back(tok.substr(0, eq), tok.substr(eq + 1));
    }
    return kv;
}

}  // namespace

void save_model(const GlobalState& state, const ModelConfig& config,
                const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write model file: " + path);
    out << "topicembed-model embedding 1\n";
    out << "config";
    for (const auto& [k, v] : config_fields(config)) out << ' ' << k << '=' << v;
    out << '\n';
    out << "dims " << state.num_topics << ' ' << state.embed_dim << ' '
        << state.vocab_size << ' ' << state.iteration << '\n';
    write_matrix_rows(out, "mu", state.topic_mean.data(), state.num_topics,
                      state.embed_dim);
    write_matrix_rows(out, "covu", state.cov_topic.data(), state.embed_dim,
                      state.embed_dim);
    write_matrix_rows(out, "cova", state.cov_doc.data(), state.embed_dim,
                      state.embed_dim);
    for (int k = 0; k < state.num_topics; ++k) {
        auto row = state.words.topic_row(k);
        out << "lambda " << k << ' ' << row.size();
        for (const TopicWordEntry& e : row)
            out << ' ' << e.word << ':' << format_double(e.weight);
        out << '\n';
    }
    out << "end\n";
    if (!out) throw io_error("write failed: " + path);
}

LoadedModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open model file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw io_error("empty model file: " + path);
    {
        std::istringstream ss(line);
        std::string magic, kind;
        int version = 0;
        if (!(ss >> magic >> kind >> version) || magic != "topicembed-model")
            throw io_error(path + ": not a model file");
        if (kind != "embedding")
            throw io_error(path + ": format tag mismatch: expected embedding model, found '" +
                           kind + "'");
        if (version != 1)
            throw io_error(path + ": unsupported model version " + std::to_string(version));
    }

    LoadedModel loaded;
    if (!std::getline(in, line)) throw io_error(path + ": truncated model file");
    {
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag != "config") throw io_error(path + ": expected config line");
        try {
            loaded.config = config_from_fields(parse_kv_tokens(ss));
        } catch (const io_error&) {
            throw;
        } catch (const std::exception&) {
            throw io_error(path + ": corrupt config line");
        }
    }

    GlobalState& state = loaded.state;
    if (!std::getline(in, line)) throw io_error(path + ": truncated model file");
    {
        std::istringstream ss(line);
        std::string tag;
        if (!(ss >> tag >> state.num_topics >> state.embed_dim >> state.vocab_size >>
              state.iteration) ||
            tag != "dims")
            throw io_error(path + ": bad dims line");
    }
    const int K = state.num_topics;
    const int M = state.embed_dim;

    auto read_rows = [&](const char* expect, double* data, int rows, int cols) {
        for (int i = 0; i < rows; ++i) {
            if (!std::getline(in, line)) throw io_error(path + ": truncated model file");
            std::istringstream ss(line);
            std::string tag;
            int idx = -1;
            if (!(ss >> tag >> idx) || tag != expect || idx != i)
                throw io_error(path + ": corrupt " + expect + " section");
            for (int j = 0; j < cols; ++j)
                if (!(ss >> data[static_cast<std::size_t>(i) * cols + j]))
                    throw io_error(path + ": corrupt " + expect + " row " +
                                   std::to_string(i));
        }
    };

    state.topic_mean.resize(static_cast<std::size_t>(K) * M);
    read_rows("mu", state.topic_mean.data(), K, M);
    state.cov_topic = SymMatrix(M);
    read_rows("covu", state.cov_topic.data(), M, M);
    state.cov_doc = SymMatrix(M);
    read_rows("cova", state.cov_doc.data(), M, M);

    std::vector<std::vector<std::pair<WordId, double>>> raw(K);
    for (int k = 0; k < K; ++k) {
        if (!std::getline(in, line)) throw io_error(path + ": truncated model file");
        std::istringstream ss(line);
        std::string tag;
        int idx = -1;
        std::size_t count = 0;
        if (!(ss >> tag >> idx >> count) || tag != "lambda" || idx != k)
            throw io_error(path + ": corrupt lambda section");
        raw[k].reserve(count);
        for (std::size_t i = 0; i < count; ++i) {
            std::string tok;
            if (!(ss >> tok)) throw io_error(path + ": corrupt lambda row " +
                                             std::to_string(k));
            std::size_t colon = tok.find(':');
            if (colon == std::string::npos)
                throw io_error(path + ": corrupt lambda entry '" + tok + "'");
            try {
                raw[k].emplace_back(static_cast<WordId>(std::stoul(tok.substr(0, colon))),
                                    std::stod(tok.substr(colon + 1)));
            } catch (const std::exception&) {
                throw io_error(path + ": corrupt lambda entry '" + tok + "'");
            }
        }
    }
    if (!std::getline(in, line) || line != "end")
        throw io_error(path + ": truncated model file (missing end marker)");

    state.words = rebuild_truncation(std::move(raw), loaded.config.topic_topwords,
                                     loaded.config.word_min_topics,
                                     loaded.config.word_prior, state.vocab_size);
    state.residual = ResidualSampler(state.words.residual_weights());
    return loaded;
}

void require_model_shape(const LoadedModel& model, const ModelConfig& expected) {
    std::string errors;
    if (model.state.num_topics != expected.num_topics)
        errors += " model K=" + std::to_string(model.state.num_topics) + " vs expected K=" +
                  std::to_string(expected.num_topics) + ";";
    if (model.state.embed_dim != expected.embed_dim)
        errors += " model M=" + std::to_string(model.state.embed_dim) + " vs expected M=" +
                  std::to_string(expected.embed_dim) + ";";
    if (expected.vocab_size != 0 && model.state.vocab_size != expected.vocab_size)
        errors += " model V=" + std::to_string(model.state.vocab_size) +
                  " vs expected V=" + std::to_string(expected.vocab_size) + ";";
    if (!errors.empty()) throw io_error("shape mismatch:" + errors);
}

}  // namespace topicembed
