#pragma once

#include <string>
#include <vector>

#include "topicembed/state.hpp"

namespace topicembed {

struct CorrelationGraph {
    struct Node {
        int topic = 0;
        std::vector<std::string> label_words;  // top words, strongest first
    };
    struct Edge {
        int a = 0, b = 0;   // a < b
        double r = 0.0;
    };
    std::vector<Node> nodes;
    std::vector<Edge> edges;
};

// Marginal covariance of the topic weights under the variational posterior:
// E[u_i^T u_j] + noise = mu_i^T mu_j + [i=j] (tr Sigma^(u) + 1/tau).
double topic_covariance_entry(const GlobalState& state, double noise_precision,
                              int i, int j);

// Pearson-normalized correlations r_ij = cov_ij / sqrt(cov_ii cov_jj);
// keeps edges with r >= threshold, then caps each node at its max_degree
// strongest edges (an edge survives only if it is in the cap of both ends).
// Node labels are the top label_words retained words.  Full-matrix pass,
// guarded to K <= 2000.
CorrelationGraph correlation_graph(const GlobalState& state, double noise_precision,
                                   const std::vector<std::string>& vocab,
                                   double threshold, std::size_t max_degree,
                                   std::size_t label_words = 5);

// One line per topic: id then M values, tab-separated.
void export_embeddings(const GlobalState& state, const std::string& path);

// Edge list ("i j r" per line) and a GML graph with node labels.
void export_graph(const CorrelationGraph& graph, const std::string& edge_path,
                  const std::string& gml_path);

}  // namespace topicembed
