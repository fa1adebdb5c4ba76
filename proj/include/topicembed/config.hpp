#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace topicembed {

// Hyperparameters and run knobs.  Fields set to 0 where a value depends on
// the corpus or another field are resolved by resolve_config: word_prior
// becomes 1/K, doc_topk min(50, K), topic_topwords min(100, V).
struct ModelConfig {
    int num_topics = 100;          // K
    int embed_dim = 50;            // M
    double topic_prior_precision = 0.1;   // alpha, prior on topic embeddings
    double word_prior = 0.0;       // beta, Dirichlet prior on topic-word weights
    double doc_prior_precision = 0.1;     // rho, prior on document embeddings
    double weight_noise_precision = 1.0;  // tau, noise around U a_d
    int doc_topk = 0;              // K_s, top topics kept per document
    int topic_topwords = 0;        // V_s, top words kept per topic
    int word_min_topics = 1;       // s, per-word floor on retained topic entries
    int mc_samples = 1;            // T, reparameterization samples per gradient
    int batch_size = 500;          // B
    int max_inner_iters = 20;
    double inner_tol = 1e-3;       // stop when max |delta xi| drops below this
    double outer_tol = 1e-3;       // stop when |delta heldout LL| drops below this
    int max_epochs = 20;
    int eval_every = 10;           // heldout evaluation cadence, in minibatches
    int init_doc_seeds = 0;        // documents blended into each initial lambda row;
                                   // 0 keeps the pure noise init
    std::uint64_t seed = 1;
    double adagrad_step = 0.5;
    double adagrad_floor = 1e-8;
    int workers = 0;               // 0 = all available cores
    std::size_t vocab_size = 0;    // V; 0 until bound to a corpus
};

// Returns every violated invariant, not just the first; empty means ok.
std::vector<std::string> validate(const ModelConfig& c);

// Materializes the corpus-dependent defaults against vocabulary size V.
ModelConfig resolve_config(ModelConfig c, std::size_t V);

// key=value lines; '#' starts a comment.  Unknown keys are an error.
void apply_config_file(ModelConfig& c, const std::string& path);

// All fields in a fixed order, for manifests and model headers.
std::vector<std::pair<std::string, std::string>> config_fields(const ModelConfig& c);
ModelConfig config_from_fields(const std::vector<std::pair<std::string, std::string>>& kv);

}  // namespace topicembed
