#include "topicembed/sparsity.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "topicembed/numerics.hpp"

namespace topicembed {

bool TopKView::contains(int k) const {
    return std::binary_search(indices.begin(), indices.end(), k);
}

double TopKView::value_of(int k) const {
    auto it = std::lower_bound(indices.begin(), indices.end(), k);
    if (it != indices.end() && *it == k)
        return values[static_cast<std::size_t>(it - indices.begin())];
    return default_value;
}

TopKView topk_select(std::span<const double> xi, int k_s) {
    if (k_s < 1) throw std::invalid_argument("topk_select: K_s must be >= 1");
    const int k_total = static_cast<int>(xi.size());
    const int keep = std::min(k_s, k_total);

    // Min-heap of the current best `keep`; top is the weakest member, where
    // equal values make the larger id weaker (so smaller ids survive ties).
    using Entry = std::pair<double, int>;
    auto better = [](const Entry& a, const Entry& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    };
    std::priority_queue<Entry, std::vector<Entry>, decltype(better)> heap(better);
    double total = 0.0;
    for (int k = 0; k < k_total; ++k) {
        total += xi[k];
        const Entry e{xi[k], k};
        if (static_cast<int>(heap.size()) < keep) {
            heap.push(e);
        } else if (better(e, heap.top())) {
            heap.pop();
            heap.push(e);
        }
    }

    TopKView view;
    view.indices.resize(keep);
    view.values.resize(keep);
    std::vector<Entry> sorted;
    sorted.reserve(keep);
    while (!heap.empty()) {
        sorted.push_back(heap.top());
        heap.pop();
    }
    std::sort(sorted.begin(), sorted.end(),
              [](const Entry& a, const Entry& b) { return a.second < b.second; });
    double selected_sum = 0.0;
    for (int i = 0; i < keep; ++i) {
        view.indices[i] = sorted[i].second;
        view.values[i] = sorted[i].first;
        selected_sum += sorted[i].first;
    }
    view.default_value =
        keep < k_total ? (total - selected_sum) / (k_total - keep) : 0.0;
    return view;
}

double TruncatedTopicWords::weight(int k, WordId v) const {
    const auto& row = rows_[k];
    auto it = std::lower_bound(row.begin(), row.end(), v,
                               [](const TopicWordEntry& e, WordId w) { return e.word < w; });
    if (it != row.end() && it->word == v) return it->weight;
    return prior_;
}

TruncatedTopicWords rebuild_truncation(
    std::vector<std::vector<std::pair<WordId, double>>> raw,
    int top_words, int min_topics, double beta, std::size_t V) {
    const int K = static_cast<int>(raw.size());
    const int floor_topics = std::min(min_topics, K);

    TruncatedTopicWords out;
    out.prior_ = beta;
    out.vocab_size_ = V;
    out.rows_.resize(K);
    out.index_.assign(V, {});
    out.totals_.assign(K, 0.0);
    out.residual_.assign(K, 0.0);

    // Top-V_s per topic by value, ties toward the smaller word id.
    std::vector<std::vector<std::pair<WordId, double>>> dropped_by_word(V);
    std::vector<int> retained_count(V, 0);
    std::vector<std::vector<std::pair<WordId, double>>> kept(K);
    for (int k = 0; k < K; ++k) {
        auto& entries = raw[k];
        std::sort(entries.begin(), entries.end(),
                  [](const auto& a, const auto& b) {
                      if (a.second != b.second) return a.second > b.second;
                      return a.first < b.first;
                  });
        const std::size_t keep = std::min<std::size_t>(top_words, entries.size());
        for (std::size_t i = 0; i < entries.size(); ++i) {
            if (i < keep) {
                kept[k].push_back(entries[i]);
                ++retained_count[entries[i].first];
            } else {
                dropped_by_word[entries[i].first].emplace_back(
                    static_cast<WordId>(k), entries[i].second);
            }
        }
    }

    // s-floor: top up words short of min(s, K) retentions from their largest
    // dropped entries (ties toward the smaller topic id); words with no
    // leftover candidates get implicit-prior entries on the smallest topics.
    for (std::size_t v = 0; v < V; ++v) {
        int deficit = floor_topics - retained_count[v];
        if (deficit <= 0) continue;
        auto& cands = dropped_by_word[v];
        std::sort(cands.begin(), cands.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        std::size_t i = 0;
        for (; i < cands.size() && deficit > 0; ++i, --deficit)
            kept[cands[i].first].emplace_back(static_cast<WordId>(v), cands[i].second);
        for (int k = 0; deficit > 0 && k < K; ++k) {
            const bool has = std::any_of(kept[k].begin(), kept[k].end(),
                                         [v](const auto& e) { return e.first == v; });
            if (!has) {
                kept[k].emplace_back(static_cast<WordId>(v), beta);
                --deficit;
            }
        }
    }

    const double psi_beta = digamma(beta);
    for (int k = 0; k < K; ++k) {
        std::sort(kept[k].begin(), kept[k].end());
        double sum = 0.0;
        for (const auto& [w, val] : kept[k]) sum += val;
        const double lambda_total =
            sum + (static_cast<double>(V) - static_cast<double>(kept[k].size())) * beta;
        out.totals_[k] = lambda_total;
        const double psi_total = digamma(lambda_total);
        out.residual_[k] = std::exp(psi_beta - psi_total);
        out.rows_[k].reserve(kept[k].size());
        for (const auto& [w, val] : kept[k]) {
            const double b = std::exp(digamma(val) - psi_total);
            out.rows_[k].push_back({w, val, b});
            out.index_[w].push_back({k, val, b});
        }
    }
    double c_sum = 0.0;
    for (int k = 0; k < K; ++k) c_sum += out.residual_[k];
    out.residual_sum_ = c_sum;
    return out;
}

ResidualSampler::ResidualSampler(std::span<const double> weights) {
    cumulative_.resize(weights.size());
    double running = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        running += weights[k];
        cumulative_[k] = running;
    }
    total_ = running;
}

int ResidualSampler::draw(std::span<const int> exclude, RandomStream& rng) const {
    const int K = static_cast<int>(cumulative_.size());
    auto weight_of = [this](int k) {
        return k == 0 ? cumulative_[0] : cumulative_[k] - cumulative_[k - 1];
    };
    double excluded_mass = 0.0;
    for (int k : exclude) excluded_mass += weight_of(k);
    const double available = total_ - excluded_mass;
    if (!(available > 0.0))
        throw std::runtime_error("residual_draw: all sampling mass excluded");

    // Rejection on the full cumulative array; expected C / available tries.
    for (int attempt = 0; attempt < 64; ++attempt) {
        const double u = rng.uniform() * total_;
        const int k = static_cast<int>(
            std::upper_bound(cumulative_.begin(), cumulative_.end(), u) -
            cumulative_.begin());
        if (k >= K) continue;
        if (!std::binary_search(exclude.begin(), exclude.end(), k)) return k;
    }
    // Exclusion mass dominates; walk the complement exactly instead.
    const double u = rng.uniform() * available;
    double running = 0.0;
    int last = -1;
    for (int k = 0; k < K; ++k) {
        if (std::binary_search(exclude.begin(), exclude.end(), k)) continue;
        running += weight_of(k);
        last = k;
        if (u < running) return k;
    }
    if (last < 0) throw std::runtime_error("residual_draw: all sampling mass excluded");
    return last;
}

}  // namespace topicembed
