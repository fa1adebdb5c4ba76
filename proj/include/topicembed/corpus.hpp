#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "topicembed/config.hpp"
#include "topicembed/rng.hpp"

namespace topicembed {

using WordId = std::uint32_t;

struct Document {
    std::vector<WordId> tokens;     // expanded from counts, length N_d
    std::optional<int> label;       // class id when a label file was given
    std::size_t size() const { return tokens.size(); }
    bool empty() const { return tokens.empty(); }
};

struct Corpus {
    std::vector<Document> docs;
    std::vector<std::string> vocab;  // index = word id

    std::size_t num_docs() const { return docs.size(); }
    std::size_t vocab_size() const { return vocab.size(); }
    std::size_t total_tokens() const;
};

// Thrown by the corpus readers; the message names the offending line.
struct parse_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// UCI bag-of-words: three header lines (D, V, NNZ), then NNZ lines of
// "docId wordId count", all 1-indexed.  Vocab file: one token per line,
// exactly V lines.  Documents with no entries stay in place, empty.
Corpus load_uci_bow(const std::string& docword_path, const std::string& vocab_path);

// One integer per line, aligned with document order.
void load_labels(Corpus& corpus, const std::string& labels_path);

void write_uci_bow(const Corpus& corpus, const std::string& docword_path,
                   const std::string& vocab_path);
void write_labels(const Corpus& corpus, const std::string& labels_path);

// Keeps the top_n most frequent words not in stopwords, remaps ids densely
// in frequency order (ties by smaller original id), drops removed tokens.
Corpus truncate_vocab(const Corpus& corpus, std::size_t top_n,
                      const std::vector<std::string>& stopwords = {});

// Disjoint uniform partition; deterministic given seed; labels preserved.
std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, double test_fraction,
                                       std::uint64_t seed);

// Token-level uniform split; both sides non-empty.  Requires >= 2 tokens.
std::pair<Document, Document> split_document(const Document& doc,
                                             double observed_fraction,
                                             std::uint64_t seed);

// Ground truth retained from synthetic generation.
struct SyntheticTruth {
    int num_topics = 0, embed_dim = 0;
    std::size_t vocab_size = 0;
    std::vector<double> phi;   // K x V row-stochastic
    std::vector<double> U;     // K x M topic embeddings
    std::vector<std::vector<double>> doc_embed;    // a_d per document
    std::vector<std::vector<double>> doc_weights;  // eta_d per document
    std::vector<std::vector<int>> assignments;     // z_dn per document
};

// Draws a corpus from the generative process: phi_k ~ Dir(beta),
// u_k ~ N(0, alpha^-1 I), a_d ~ N(0, rho^-1 I), eta_d ~ N(U a_d, tau^-1 I),
// theta_d = softmax(eta_d), z ~ Multi(theta), w ~ Multi(phi_z).  Document
// lengths are Poisson(avg_len) clamped to >= 1.  config.vocab_size fixes V.
std::pair<Corpus, SyntheticTruth> generate_synthetic(const ModelConfig& config,
                                                     std::size_t D, double avg_len,
                                                     std::uint64_t seed);

// Building blocks exposed for the generation tests.
std::vector<double> dirichlet_vector(double concentration, std::size_t n,
                                     RandomStream& rng);
std::size_t poisson_clamped(double mean, RandomStream& rng);
std::size_t categorical_draw(const std::vector<double>& probs, RandomStream& rng);

}  // namespace topicembed
