#include "topicembed/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "topicembed/manifest.hpp"
#include "topicembed/state.hpp"

namespace topicembed {

namespace {

// Content signature so per-document eval streams and completion splits do
// not depend on the document's position in the corpus.
std::uint64_t doc_signature(const Document& doc) {
    return fnv1a64(doc.tokens.data(), doc.tokens.size() * sizeof(WordId));
}

}  // namespace

double heldout_perword_ll(const GlobalState& state, const Corpus& test,
                          const ModelConfig& config, std::uint64_t seed) {
    const int K = state.num_topics;
    double ll_sum = 0.0;
    std::size_t token_count = 0;
    std::vector<double> theta;

    for (const Document& doc : test.docs) {
        if (doc.tokens.size() < 2) continue;
        const std::uint64_t sig = doc_signature(doc);
        auto [observed, held] = split_document(doc, 0.8, splitmix64(seed ^ sig));

        RandomStream rng(seed, stream_id(StreamTag::Eval, sig, 0));
        auto [ds, report] = local_step(observed, state, config, rng);
        softmax_into(ds.weight_mean, theta);

        // p(v) = sum_k theta_k lambda_kv / Lambda_k; the shared beta floor
        // is folded into one base term, retained entries correct it.
        double base = 0.0;
        for (int k = 0; k < K; ++k)
            base += theta[k] * config.word_prior / state.words.total(k);
        for (WordId v : held.tokens) {
            double p = base;
            for (const WordTopicEntry& e : state.words.word_topics(v))
                p += theta[e.topic] * (e.weight - config.word_prior) /
                     state.words.total(e.topic);
            ll_sum += std::log(p);
            ++token_count;
        }
    }
    if (token_count == 0)
        throw std::invalid_argument("heldout eval: no documents with >= 2 tokens");
    return ll_sum / static_cast<double>(token_count);
}

FeatureMatrix embedding_features(const GlobalState& state, const Corpus& corpus,
                                 const ModelConfig& config, std::uint64_t seed) {
    FeatureMatrix out;
    out.rows = corpus.num_docs();
    out.cols = static_cast<std::size_t>(state.embed_dim);
    out.values.assign(out.rows * out.cols, 0.0);
    out.labels.resize(out.rows);
    for (std::size_t d = 0; d < corpus.num_docs(); ++d) {
        const Document& doc = corpus.docs[d];
        out.labels[d] = doc.label.value_or(-1);
        if (doc.empty()) continue;  // gamma stays 0 for empty documents
        RandomStream rng(seed, stream_id(StreamTag::Eval, doc_signature(doc), 1));
        auto [ds, report] = local_step(doc, state, config, rng);
        std::copy(ds.embed_mean.begin(), ds.embed_mean.end(),
                  out.values.begin() + d * out.cols);
    }
    return out;
}

void write_feature_file(const FeatureMatrix& features, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write feature file: " + path);
    for (std::size_t i = 0; i < features.rows; ++i) {
        out << (features.labels[i] < 0 ? 0 : features.labels[i]);
        const auto row = features.row(i);
        for (std::size_t j = 0; j < features.cols; ++j)
            out << ' ' << (j + 1) << ':' << format_double(row[j]);
        out << '\n';
    }
    if (!out) throw io_error("write failed: " + path);
}

void export_features(const GlobalState& state, const Corpus& corpus,
                     const ModelConfig& config, std::uint64_t seed,
                     const std::string& path) {
    write_feature_file(embedding_features(state, corpus, config, seed), path);
}

PRCurve retrieval_pr(const FeatureMatrix& queries, const FeatureMatrix& base,
                     const std::vector<std::size_t>& cutoffs, bool exclude_self) {
    if (queries.cols != base.cols)
        throw std::invalid_argument("retrieval_pr: feature dimension mismatch");
    for (int label : queries.labels)
        if (label < 0) throw std::invalid_argument("retrieval_pr: queries lack labels");
    for (int label : base.labels)
        if (label < 0) throw std::invalid_argument("retrieval_pr: base lacks labels");

    std::vector<std::size_t> sorted_cutoffs(cutoffs);
    std::sort(sorted_cutoffs.begin(), sorted_cutoffs.end());

    std::vector<double> recall_sum(sorted_cutoffs.size(), 0.0);
    std::vector<double> precision_sum(sorted_cutoffs.size(), 0.0);
    std::size_t scored_queries = 0;

    std::vector<std::size_t> order;
    std::vector<double> scores(base.rows);
    for (std::size_t q = 0; q < queries.rows; ++q) {
        const auto query_row = queries.row(q);
        std::size_t relevant_total = 0;
        for (std::size_t b = 0; b < base.rows; ++b) {
            if (exclude_self && b == q) continue;
            if (base.labels[b] == queries.labels[q]) ++relevant_total;
        }
        if (relevant_total == 0) continue;
        ++scored_queries;

        for (std::size_t b = 0; b < base.rows; ++b)
            scores[b] = dot(query_row, base.row(b));
        order.clear();
        for (std::size_t b = 0; b < base.rows; ++b)
            if (!(exclude_self && b == q)) order.push_back(b);
        std::sort(order.begin(), order.end(),
                  [&scores](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return a < b;
                  });

        std::size_t hits = 0, rank = 0, ci = 0;
        for (std::size_t b : order) {
            ++rank;
            if (base.labels[b] == queries.labels[q]) ++hits;
            while (ci < sorted_cutoffs.size() && rank == std::min(sorted_cutoffs[ci], order.size())) {
                recall_sum[ci] += static_cast<double>(hits) / relevant_total;
                precision_sum[ci] += static_cast<double>(hits) / rank;
                ++ci;
            }
            if (ci == sorted_cutoffs.size()) break;
        }
        // Cutoffs beyond the base size hit the full ranking.
        for (; ci < sorted_cutoffs.size(); ++ci) {
            recall_sum[ci] += static_cast<double>(hits) / relevant_total;
            precision_sum[ci] += static_cast<double>(hits) / rank;
        }
    }
    if (scored_queries == 0)
        throw std::invalid_argument("retrieval_pr: no query has a relevant base document");

    PRCurve curve;
    for (std::size_t i = 0; i < sorted_cutoffs.size(); ++i)
        curve.points.push_back({sorted_cutoffs[i],
                                recall_sum[i] / scored_queries,
                                precision_sum[i] / scored_queries});
    return curve;
}

std::vector<WordId> topic_top_words(const GlobalState& state, int k, std::size_t n) {
    if (k < 0 || k >= state.num_topics)
        throw std::out_of_range("topic_top_words: topic id out of range");
    auto row = state.words.topic_row(k);
    std::vector<std::pair<double, WordId>> entries;
    entries.reserve(row.size());
    for (const TopicWordEntry& e : row) entries.emplace_back(e.weight, e.word);
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    if (entries.size() > n) entries.resize(n);
    std::vector<WordId> words;
    words.reserve(entries.size());
    for (const auto& [weight, word] : entries) words.push_back(word);
    return words;
}

}  // namespace topicembed
