#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "topicembed/config.hpp"
#include "topicembed/numerics.hpp"
#include "topicembed/sparsity.hpp"

namespace topicembed {

// Global variational parameters.  Never holds any K x K object; topic
// covariance structure lives entirely in the M-dimensional embeddings.
struct GlobalState {
    int num_topics = 0;
    int embed_dim = 0;
    std::size_t vocab_size = 0;
    std::vector<double> topic_mean;   // mu, K x M row-major
    SymMatrix cov_topic;              // Sigma^(u), shared across topics
    SymMatrix cov_doc;                // Sigma^(a), shared across documents
    TruncatedTopicWords words;        // truncated lambda with aggregates
    ResidualSampler residual;         // over the c_k of words
    long iteration = 0;

    std::span<const double> topic_mean_row(int k) const {
        return {topic_mean.data() + static_cast<std::size_t>(k) * embed_dim,
                static_cast<std::size_t>(embed_dim)};
    }
};

// Per-document variational state, exclusively owned by one worker.
struct DocState {
    std::vector<double> weight_mean;   // xi_d, dense K
    std::vector<double> embed_mean;    // gamma_d, M
    double weight_sd = 1.0;            // sigma_d = tau^-1/2, never updated
    std::vector<double> grad_sq_sum;   // Adagrad accumulator, K
    std::vector<int> assignments;      // hard z per token
    std::vector<double> topic_counts;  // n_dk, sums to N_d
};

// Random initialization: mu_k ~ N(0, alpha^-1 I), Sigma^(u) = alpha^-1 I,
// lambda = beta + Uniform(0,1) per entry then truncated, Sigma^(a) from its
// fixed-point formula given the initial mu and Sigma^(u).
GlobalState init_params(const ModelConfig& config, std::size_t V, RandomStream& rng);

// Recomputes Sigma^(a) = [rho I + tau K Sigma^(u) + tau sum_k mu_k mu_k^T]^-1.
SymMatrix doc_covariance(const GlobalState& state, const ModelConfig& config);

struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct LoadedModel {
    ModelConfig config;
    GlobalState state;
};

// Line-oriented text container, %.17g throughout so load(save(x)) is
// bit-stable.  Header carries a format tag ("embedding" here; the LDA
// baseline writes "lda"), version, resolved config and shapes; a trailing
// "end" line guards against truncation.  Loading a file with the wrong tag
// is an io_error.
void save_model(const GlobalState& state, const ModelConfig& config,
                const std::string& path);
LoadedModel load_model(const std::string& path);

// Shape guard for loading against an existing configuration.
void require_model_shape(const LoadedModel& model, const ModelConfig& expected);

// %.17g rendering used by every writer that must round-trip exactly.
std::string format_double(double x);

}  // namespace topicembed
