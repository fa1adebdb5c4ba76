#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "topicembed/rng.hpp"

namespace topicembed {

using WordId = std::uint32_t;

// Sparse view of a document's topic weights: the top K_s entries by value
// plus one scalar standing in for everything else.
struct TopKView {
    std::vector<int> indices;      // selected topic ids, ascending
    std::vector<double> values;    // aligned with indices
    double default_value = 0.0;    // mean of the non-selected entries

    bool contains(int k) const;
    // Exact value if selected, default otherwise.
    double value_of(int k) const;
};

// Exact top-K_s selection via a min-heap of (value, id) pairs, O(K log K_s).
// Ties broken toward the smaller topic id.  default = mean of the rest.
TopKView topk_select(std::span<const double> xi, int k_s);

struct TopicWordEntry {
    WordId word;
    double weight;         // lambda_kv
    double sample_weight;  // b_kv = exp(psi(lambda_kv) - psi(Lambda_k))
};

struct WordTopicEntry {
    int topic;
    double weight;
    double sample_weight;
};

// Per-topic truncated word weights with the aggregates the sampler needs:
// totals Lambda_k (retained sum + (V - retained) * beta), residual weights
// c_k = exp(psi(beta) - psi(Lambda_k)), their sum C, and the inverted
// word -> topics index.  Immutable between global steps.
class TruncatedTopicWords {
public:
    TruncatedTopicWords() = default;

    int num_topics() const { return static_cast<int>(rows_.size()); }
    std::size_t vocab_size() const { return vocab_size_; }
    double prior() const { return prior_; }

    std::span<const TopicWordEntry> topic_row(int k) const { return rows_[k]; }
    std::span<const WordTopicEntry> word_topics(WordId v) const { return index_[v]; }

    double total(int k) const { return totals_[k]; }            // Lambda_k
    double residual_weight(int k) const { return residual_[k]; }  // c_k
    double residual_total() const { return residual_sum_; }       // C
    const std::vector<double>& residual_weights() const { return residual_; }

    // lambda_kv, with the implicit beta for unretained entries.
    double weight(int k, WordId v) const;

    friend TruncatedTopicWords rebuild_truncation(
        std::vector<std::vector<std::pair<WordId, double>>> raw,
        int top_words, int min_topics, double beta, std::size_t V);

private:
    std::vector<std::vector<TopicWordEntry>> rows_;
    std::vector<std::vector<WordTopicEntry>> index_;
    std::vector<double> totals_;
    std::vector<double> residual_;
    double residual_sum_ = 0.0;
    double prior_ = 0.0;
    std::size_t vocab_size_ = 0;
};

// Truncates raw per-topic accumulations: keep the top top_words values per
// topic (ties toward the smaller word id), then force-retain dropped entries
// so every word stays in at least min(min_topics, K) topics (largest dropped
// values first, ties toward the smaller topic id).  Values must be >= beta.
TruncatedTopicWords rebuild_truncation(
    std::vector<std::vector<std::pair<WordId, double>>> raw,
    int top_words, int min_topics, double beta, std::size_t V);

// Binary-search sampler over the residual weights c_k.
class ResidualSampler {
public:
    ResidualSampler() = default;
    explicit ResidualSampler(std::span<const double> weights);

    double total() const { return total_; }
    // Draws k with probability c_k / (C - sum over excluded), rejecting
    // excluded ids; exclude must be sorted ascending.
    int draw(std::span<const int> exclude, RandomStream& rng) const;

private:
    std::vector<double> cumulative_;
    double total_ = 0.0;
};

}  // namespace topicembed
