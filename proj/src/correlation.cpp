#include "topicembed/correlation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "topicembed/evaluation.hpp"

namespace topicembed {

double topic_covariance_entry(const GlobalState& state, double noise_precision,
                              int i, int j) {
    if (i < 0 || i >= state.num_topics || j < 0 || j >= state.num_topics)
        throw std::out_of_range("topic_covariance_entry: topic id out of range");
    double cov = dot(state.topic_mean_row(i), state.topic_mean_row(j));
    if (i == j) cov += state.cov_topic.trace() + 1.0 / noise_precision;
    return cov;
}

CorrelationGraph correlation_graph(const GlobalState& state, double noise_precision,
                                   const std::vector<std::string>& vocab,
                                   double threshold, std::size_t max_degree,
                                   std::size_t label_words) {
    const int K = state.num_topics;
    if (K > 2000)
        throw std::invalid_argument(
            "correlation_graph: full correlation pass is limited to K <= 2000");
    if (!(threshold > 0.0 && threshold < 1.0))
        throw std::invalid_argument("correlation_graph: threshold must be in (0, 1)");

    CorrelationGraph graph;
    graph.nodes.resize(K);
    for (int k = 0; k < K; ++k) {
        graph.nodes[k].topic = k;
        for (WordId w : topic_top_words(state, k, label_words))
            graph.nodes[k].label_words.push_back(
                w < vocab.size() ? vocab[w] : "w" + std::to_string(w));
    }

    std::vector<double> variance(K);
    for (int k = 0; k < K; ++k)
        variance[k] = topic_covariance_entry(state, noise_precision, k, k);

    struct Candidate {
        int a, b;
        double r;
    };
    std::vector<Candidate> candidates;
    for (int i = 0; i < K; ++i)
        for (int j = i + 1; j < K; ++j) {
            const double r = topic_covariance_entry(state, noise_precision, i, j) /
                             std::sqrt(variance[i] * variance[j]);
            if (r >= threshold) candidates.push_back({i, j, r});
        }

    // Degree cap: an edge survives only when it ranks within the max_degree
    // strongest (ties by the smaller partner id) at both endpoints.
    std::vector<std::vector<std::size_t>> incident(K);
    for (std::size_t e = 0; e < candidates.size(); ++e) {
        incident[candidates[e].a].push_back(e);
        incident[candidates[e].b].push_back(e);
    }
    std::vector<char> within_cap(candidates.size(), 1);
    for (int k = 0; k < K; ++k) {
        auto& edges = incident[k];
        if (edges.size() <= max_degree) continue;
        std::sort(edges.begin(), edges.end(), [&](std::size_t x, std::size_t y) {
            if (candidates[x].r != candidates[y].r) return candidates[x].r > candidates[y].r;
            const int px = candidates[x].a == k ? candidates[x].b : candidates[x].a;
            const int py = candidates[y].a == k ? candidates[y].b : candidates[y].a;
            return px < py;
        });
        for (std::size_t i = max_degree; i < edges.size(); ++i)
            within_cap[edges[i]] = 0;
    }
    for (std::size_t e = 0; e < candidates.size(); ++e)
        if (within_cap[e])
            graph.edges.push_back({candidates[e].a, candidates[e].b, candidates[e].r});
    return graph;
}

void export_embeddings(const GlobalState& state, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write embeddings file: " + path);
    for (int k = 0; k < state.num_topics; ++k) {
        out << k;
        for (double x : state.topic_mean_row(k)) out << '\t' << format_double(x);
        out << '\n';
    }
    if (!out) throw io_error("write failed: " + path);
}

void export_graph(const CorrelationGraph& graph, const std::string& edge_path,
                  const std::string& gml_path) {
    {
        std::ofstream out(edge_path);
        if (!out) throw io_error("cannot write edge list: " + edge_path);
        for (const auto& e : graph.edges)
            out << e.a << ' ' << e.b << ' ' << format_double(e.r) << '\n';
        if (!out) throw io_error("write failed: " + edge_path);
    }
    std::ofstream out(gml_path);
    if (!out) throw io_error("cannot write graph file: " + gml_path);
    out << "graph [\n  directed 0\n";
    for (const auto& n : graph.nodes) {
        out << "  node [\n    id " << n.topic << "\n    label \"";
        for (std::size_t i = 0; i < n.label_words.size(); ++i) {
            if (i) out << ' ';
            for (char c : n.label_words[i])
                if (c != '"' && c != '\\') out << c;
        }
        out << "\"\n  ]\n";
    }
    for (const auto& e : graph.edges) {
        out << "  edge [\n    source " << e.a << "\n    target " << e.b
            << "\n    weight " << format_double(e.r) << "\n  ]\n";
    }
    out << "]\n";
    if (!out) throw io_error("write failed: " + gml_path);
}

}  // namespace topicembed
