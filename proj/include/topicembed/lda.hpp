#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "topicembed/corpus.hpp"
#include "topicembed/evaluation.hpp"

namespace topicembed {

// Variational LDA state: dense K x V word weights and the symmetric
// document Dirichlet prior.  Kept dense; the vocabulary sizes this baseline
// runs at never need the truncation machinery.
struct LdaState {
    int num_topics = 0;
    std::size_t vocab_size = 0;
    std::vector<double> word_weights;  // lambda, K x V row-major
    double doc_prior = 0.0;            // symmetric Dirichlet concentration
    long iteration = 0;

    double weight(int k, WordId v) const {
        return word_weights[static_cast<std::size_t>(k) * vocab_size + v];
    }
};

struct LdaTrainResult {
    LdaState state;
    std::vector<TraceRow> trace;
    bool converged = false;
};

// Stochastic variational LDA with the same minibatch schedule, learning
// rate, and convergence rule as the embedding model.  Per-document fit is
// coordinate ascent on soft responsibilities using digamma expectations.
LdaTrainResult lda_train(const Corpus& corpus, const ModelConfig& config,
                         const Corpus& heldout);

// Document completion with theta = normalized variational Dirichlet mean,
// same split protocol as heldout_perword_ll.
double lda_heldout_ll(const LdaState& state, const Corpus& test,
                      const ModelConfig& config, std::uint64_t seed);

// Expected theta per document (rows sum to 1), same feature-file format.
FeatureMatrix lda_features(const LdaState& state, const Corpus& corpus,
                           const ModelConfig& config);

void lda_save(const LdaState& state, const ModelConfig& config, const std::string& path);
struct LoadedLdaModel {
    ModelConfig config;
    LdaState state;
};
LoadedLdaModel lda_load(const std::string& path);

// Variational document fit: returns the Dirichlet posterior gamma (K).
// When expected_counts (K x V) is given, the document's soft word-topic
// responsibilities are accumulated into it.
std::vector<double> lda_doc_fit(const LdaState& state, const std::vector<double>& elog_word,
                                const Document& doc, const ModelConfig& config,
                                std::vector<double>* expected_counts = nullptr);

// E[log phi] under the current lambda rows, K x V.
std::vector<double> lda_elog_word(const LdaState& state);

}  // namespace topicembed
