#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "topicembed/inference.hpp"

namespace topicembed {

// Dense per-document feature rows (document embeddings here, topic
// proportions for the LDA baseline) with aligned labels (-1 = none).
struct FeatureMatrix {
    std::size_t rows = 0, cols = 0;
    std::vector<double> values;  // row-major
    std::vector<int> labels;

    std::span<const double> row(std::size_t i) const {
        return {values.data() + i * cols, cols};
    }
};

struct PRPoint {
    std::size_t cutoff = 0;
    double recall = 0.0;
    double precision = 0.0;
};

struct PRCurve {
    std::vector<PRPoint> points;  // cutoff ascending; recall nondecreasing
};

// Document-completion likelihood: each test doc is split 80/20 with a seed
// derived from its content (so document order never matters), the observed
// part is fit with local_step, and each held-out token v is scored as
// log sum_k theta_k phi_kv with theta = softmax(xi), phi_kv = lambda_kv /
// Lambda_k.  Returns the token-weighted mean over all held-out tokens.
// Documents with fewer than 2 tokens are skipped.
double heldout_perword_ll(const GlobalState& state, const Corpus& test,
                          const ModelConfig& config, std::uint64_t seed);

// Document embeddings gamma_d from a local_step per document.
FeatureMatrix embedding_features(const GlobalState& state, const Corpus& corpus,
                                 const ModelConfig& config, std::uint64_t seed);

// One line per document: "label 1:v1 2:v2 ...", 1-indexed, label 0 when the
// corpus is unlabeled.
void export_features(const GlobalState& state, const Corpus& corpus,
                     const ModelConfig& config, std::uint64_t seed,
                     const std::string& path);
void write_feature_file(const FeatureMatrix& features, const std::string& path);

// Ranks base rows by inner product with each query row (ties toward the
// smaller base index), then averages precision and recall at each cutoff
// over queries.  A base document is relevant when its label matches the
// query's.  exclude_self skips base index == query index (for evaluating a
// corpus against itself).  Queries whose label has no relevant base
// documents are skipped.
PRCurve retrieval_pr(const FeatureMatrix& queries, const FeatureMatrix& base,
                     const std::vector<std::size_t>& cutoffs, bool exclude_self = false);

// n retained words of topic k with the largest lambda, ties toward the
// smaller word id.
std::vector<WordId> topic_top_words(const GlobalState& state, int k, std::size_t n);

}  // namespace topicembed
