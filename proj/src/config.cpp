#include "topicembed/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace topicembed {

std::vector<std::string> validate(const ModelConfig& c) {
    std::vector<std::string> errors;
    if (c.num_topics < 1) errors.push_back("K must be >= 1");
    if (c.embed_dim < 1) errors.push_back("M must be >= 1");
    if (c.num_topics >= 1 && c.embed_dim >= c.num_topics)
        errors.push_back("M must be < K");
    if (!(c.topic_prior_precision > 0.0) || !(c.doc_prior_precision > 0.0) ||
        !(c.weight_noise_precision > 0.0))
        errors.push_back("precision must be positive");
    if (!(c.word_prior > 0.0) && c.word_prior != 0.0)
        errors.push_back("beta must be positive");
    if (c.doc_topk != 0) {
        if (c.doc_topk < 1) errors.push_back("K_s must be >= 1");
        else if (c.doc_topk > c.num_topics) errors.push_back("K_s must be <= K");
    }
    if (c.topic_topwords != 0) {
        if (c.topic_topwords < 1) errors.push_back("V_s must be >= 1");
        else if (c.vocab_size > 0 &&
                 static_cast<std::size_t>(c.topic_topwords) > c.vocab_size)
            errors.push_back("V_s must be <= V");
    }
    if (c.word_min_topics < 1) errors.push_back("s must be >= 1");
    if (c.mc_samples < 1) errors.push_back("T must be >= 1");
    if (c.batch_size < 1) errors.push_back("batch size must be >= 1");
    if (c.max_inner_iters < 1) errors.push_back("max inner iterations must be >= 1");
    if (!(c.inner_tol > 0.0)) errors.push_back("inner tolerance must be positive");
    if (!(c.outer_tol > 0.0)) errors.push_back("outer tolerance must be positive");
    if (c.max_epochs < 1) errors.push_back("max epochs must be >= 1");
    if (c.eval_every < 1) errors.push_back("eval cadence must be >= 1");
    if (c.init_doc_seeds < 0) errors.push_back("init doc seeds must be >= 0");
    if (!(c.adagrad_step > 0.0)) errors.push_back("adagrad step must be positive");
    if (!(c.adagrad_floor > 0.0)) errors.push_back("adagrad floor must be positive");
    if (c.workers < 0) errors.push_back("workers must be >= 0");
    return errors;
}

ModelConfig resolve_config(ModelConfig c, std::size_t V) {
    c.vocab_size = V;
    if (c.word_prior == 0.0 && c.num_topics >= 1)
        c.word_prior = 1.0 / c.num_topics;
    if (c.doc_topk == 0)
        c.doc_topk = std::min(50, c.num_topics);
    if (c.topic_topwords == 0)
        c.topic_topwords = static_cast<int>(std::min<std::size_t>(100, V));
    return c;
}

namespace {

int* int_slot(ModelConfig& c, const std::string& key) {
    if (key == "k") return &c.num_topics;
    if (key == "m") return &c.embed_dim;
    if (key == "ks") return &c.doc_topk;
    if (key == "vs") return &c.topic_topwords;
    if (key == "smin") return &c.word_min_topics;
    if (key == "mc_samples") return &c.mc_samples;
    if (key == "batch") return &c.batch_size;
    if (key == "max_inner") return &c.max_inner_iters;
    if (key == "max_epochs") return &c.max_epochs;
    if (key == "eval_every") return &c.eval_every;
    if (key == "init_docs") return &c.init_doc_seeds;
    if (key == "workers") return &c.workers;
    return nullptr;
}

double* double_slot(ModelConfig& c, const std::string& key) {
    if (key == "alpha") return &c.topic_prior_precision;
    if (key == "beta") return &c.word_prior;
    if (key == "rho") return &c.doc_prior_precision;
    if (key == "tau") return &c.weight_noise_precision;
    if (key == "inner_tol") return &c.inner_tol;
    if (key == "tol") return &c.outer_tol;
    if (key == "adagrad_step") return &c.adagrad_step;
    if (key == "adagrad_floor") return &c.adagrad_floor;
    return nullptr;
}

std::string trimmed(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

void apply_config_file(ModelConfig& c, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trimmed(line);
        if (t.empty() || t[0] == '#') continue;
        std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config file " + path + " line " +
                                     std::to_string(lineno) + ": expected key=value");
        std::string key = trimmed(t.substr(0, eq));
        std::string value = trimmed(t.substr(eq + 1));
        try {
            if (int* slot = int_slot(c, key)) {
                *slot = std::stoi(value);
            } else if (double* slot = double_slot(c, key)) {
                *slot = std::stod(value);
            } else if (key == "seed") {
                c.seed = std::stoull(value);
            } else if (key == "v") {
                c.vocab_size = std::stoull(value);
            } else {
                throw std::runtime_error("config file " + path + " line " +
                                         std::to_string(lineno) + ": unknown key '" +
                                         key + "'");
            }
        } catch (const std::invalid_argument&) {
            throw std::runtime_error("config file " + path + " line " +
                                     std::to_string(lineno) + ": bad value for '" +
                                     key + "'");
        }
    }
}

std::vector<std::pair<std::string, std::string>> config_fields(const ModelConfig& c) {
    char buf[64];
    auto num = [&buf](double x) {
        std::snprintf(buf, sizeof buf, "%.17g", x);
        return std::string(buf);
    };
    std::vector<std::pair<std::string, std::string>> kv;
    kv.emplace_back("k", std::to_string(c.num_topics));
    kv.emplace_back("m", std::to_string(c.embed_dim));
    kv.emplace_back("alpha", num(c.topic_prior_precision));
    kv.emplace_back("beta", num(c.word_prior));
    kv.emplace_back("rho", num(c.doc_prior_precision));
    kv.emplace_back("tau", num(c.weight_noise_precision));
    kv.emplace_back("ks", std::to_string(c.doc_topk));
    kv.emplace_back("vs", std::to_string(c.topic_topwords));
    kv.emplace_back("smin", std::to_string(c.word_min_topics));
    kv.emplace_back("mc_samples", std::to_string(c.mc_samples));
    kv.emplace_back("batch", std::to_string(c.batch_size));
    kv.emplace_back("max_inner", std::to_string(c.max_inner_iters));
    kv.emplace_back("inner_tol", num(c.inner_tol));
    kv.emplace_back("tol", num(c.outer_tol));
    kv.emplace_back("max_epochs", std::to_string(c.max_epochs));
    kv.emplace_back("eval_every", std::to_string(c.eval_every));
    kv.emplace_back("init_docs", std::to_string(c.init_doc_seeds));
    kv.emplace_back("seed", std::to_string(c.seed));
    kv.emplace_back("adagrad_step", num(c.adagrad_step));
    kv.emplace_back("adagrad_floor", num(c.adagrad_floor));
    kv.emplace_back("workers", std::to_string(c.workers));
    kv.emplace_back("v", std::to_string(c.vocab_size));
    return kv;
}

ModelConfig config_from_fields(const std::vector<std::pair<std::string, std::string>>& kv) {
    ModelConfig c;
    for (const auto& [key, value] : kv) {
        if (int* slot = int_slot(c, key)) *slot = std::stoi(value);
        else if (double* slot = double_slot(c, key)) *slot = std::stod(value);
        else if (key == "seed") c.seed = std::stoull(value);
        else if (key == "v") c.vocab_size = std::stoull(value);
        else throw std::runtime_error("unknown config field '" + key + "'");
    }
    return c;
}

}  // namespace topicembed
