#include "topicembed/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "topicembed/numerics.hpp"

namespace topicembed {

std::size_t Corpus::total_tokens() const {
    std::size_t n = 0;
    for (const Document& d : docs) n += d.tokens.size();
    return n;
}

namespace {

[[noreturn]] void fail_line(const std::string& path, int lineno, const std::string& what) {
    throw parse_error(path + " line " + std::to_string(lineno) + ": " + what);
}

long long header_value(std::ifstream& in, const std::string& path, int lineno) {
    std::string line;
    if (!std::getline(in, line)) fail_line(path, lineno, "missing header line");
    long long v = 0;
    std::istringstream ss(line);
    if (!(ss >> v) || v < 0) fail_line(path, lineno, "bad header value");
    std::string rest;
    if (ss >> rest) fail_line(path, lineno, "trailing content in header");
    return v;
}

}  // namespace

Corpus load_uci_bow(const std::string& docword_path, const std::string& vocab_path) {
    std::ifstream in(docword_path);
    if (!in) throw parse_error("cannot open " + docword_path);
    const long long d_count = header_value(in, docword_path, 1);
    const long long v_count = header_value(in, docword_path, 2);
    const long long nnz = header_value(in, docword_path, 3);

    Corpus corpus;
    corpus.docs.resize(static_cast<std::size_t>(d_count));

    std::string line;
    int lineno = 3;
    long long seen = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
        long long doc = 0, word = 0, count = 0;
        std::istringstream ss(line);
        if (!(ss >> doc >> word >> count))
            fail_line(docword_path, lineno, "expected 'docId wordId count'");
        if (doc < 1 || doc > d_count)
            fail_line(docword_path, lineno, "document id out of range");
        if (word < 1 || word > v_count)
            fail_line(docword_path, lineno, "word id out of range");
        if (count <= 0)
            fail_line(docword_path, lineno, "count must be positive");
        auto& tokens = corpus.docs[static_cast<std::size_t>(doc - 1)].tokens;
        tokens.insert(tokens.end(), static_cast<std::size_t>(count),
                      static_cast<WordId>(word - 1));
        ++seen;
    }
    if (seen != nnz)
        throw parse_error(docword_path + ": header promises " + std::to_string(nnz) +
                          " entries, found " + std::to_string(seen));

    std::ifstream vin(vocab_path);
    if (!vin) throw parse_error("cannot open " + vocab_path);
    corpus.vocab.reserve(static_cast<std::size_t>(v_count));
    int vline = 0;
    while (std::getline(vin, line)) {
        ++vline;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        corpus.vocab.push_back(line);
    }
    if (static_cast<long long>(corpus.vocab.size()) != v_count)
        throw parse_error(vocab_path + ": expected " + std::to_string(v_count) +
                          " words, found " + std::to_string(corpus.vocab.size()));
    return corpus;
}

void load_labels(Corpus& corpus, const std::string& labels_path) {
    std::ifstream in(labels_path);
    if (!in) throw parse_error("cannot open " + labels_path);
    std::string line;
    std::size_t i = 0;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        if (i >= corpus.docs.size())
            fail_line(labels_path, lineno, "more labels than documents");
        int label = 0;
        std::istringstream ss(line);
        if (!(ss >> label)) fail_line(labels_path, lineno, "expected an integer label");
        corpus.docs[i++].label = label;
    }
    if (i != corpus.docs.size())
        throw parse_error(labels_path + ": " + std::to_string(i) + " labels for " +
                          std::to_string(corpus.docs.size()) + " documents");
}

void write_uci_bow(const Corpus& corpus, const std::string& docword_path,
                   const std::string& vocab_path) {
    // Re-derive counts per (doc, word); emission order is doc then word id.
    std::ofstream out(docword_path);
    if (!out) throw parse_error("cannot write " + docword_path);
    std::vector<std::pair<WordId, std::size_t>> counts;
    std::size_t nnz = 0;
    std::ostringstream body;
    for (std::size_t d = 0; d < corpus.docs.size(); ++d) {
        std::vector<WordId> sorted = corpus.docs[d].tokens;
        std::sort(sorted.begin(), sorted.end());
        counts.clear();
        for (std::size_t i = 0; i < sorted.size();) {
            std::size_t j = i;
            while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
            counts.emplace_back(sorted[i], j - i);
            i = j;
        }
        for (const auto& [w, c] : counts) {
            body << (d + 1) << ' ' << (w + 1) << ' ' << c << '\n';
            ++nnz;
        }
    }
    out << corpus.docs.size() << '\n' << corpus.vocab.size() << '\n' << nnz << '\n'
        << body.str();

    std::ofstream vout(vocab_path);
    if (!vout) throw parse_error("cannot write " + vocab_path);
    for (const std::string& w : corpus.vocab) vout << w << '\n';
}

void write_labels(const Corpus& corpus, const std::string& labels_path) {
    std::ofstream out(labels_path);
    if (!out) throw parse_error("cannot write " + labels_path);
    for (const Document& d : corpus.docs) out << d.label.value_or(0) << '\n';
}

Corpus truncate_vocab(const Corpus& corpus, std::size_t top_n,
                      const std::vector<std::string>& stopwords) {
    if (top_n < 1) throw std::invalid_argument("truncate_vocab: top_n must be >= 1");
    std::unordered_set<std::string> stop(stopwords.begin(), stopwords.end());

    std::vector<std::size_t> freq(corpus.vocab_size(), 0);
    for (const Document& d : corpus.docs)
        for (WordId w : d.tokens) ++freq[w];

    std::vector<WordId> order;
    order.reserve(corpus.vocab_size());
    for (WordId w = 0; w < corpus.vocab_size(); ++w)
        if (!stop.count(corpus.vocab[w])) order.push_back(w);
    std::stable_sort(order.begin(), order.end(), [&freq](WordId a, WordId b) {
        if (freq[a] != freq[b]) return freq[a] > freq[b];
        return a < b;
    });
    if (order.size() > top_n) order.resize(top_n);

    std::vector<WordId> remap(corpus.vocab_size(), static_cast<WordId>(-1));
    Corpus out;
    out.vocab.reserve(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        remap[order[i]] = static_cast<WordId>(i);
        out.vocab.push_back(corpus.vocab[order[i]]);
    }
    out.docs.reserve(corpus.docs.size());
    for (const Document& d : corpus.docs) {
        Document nd;
        nd.label = d.label;
        nd.tokens.reserve(d.tokens.size());
        for (WordId w : d.tokens)
            if (remap[w] != static_cast<WordId>(-1)) nd.tokens.push_back(remap[w]);
        out.docs.push_back(std::move(nd));
    }
    return out;
}

std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, double test_fraction,
                                       std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw std::invalid_argument("split_corpus: fraction must be in (0, 1)");
    const std::size_t d_count = corpus.num_docs();
    std::vector<std::size_t> order(d_count);
    std::iota(order.begin(), order.end(), 0);
    RandomStream rng(seed, stream_id(StreamTag::Split, 0));
    for (std::size_t i = d_count; i > 1; --i) {
        std::size_t j = rng.uniform_below(i);
        std::swap(order[i - 1], order[j]);
    }
    std::size_t test_count =
        static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(d_count)));
    test_count = std::max<std::size_t>(1, std::min(test_count, d_count - 1));
    if (d_count < 2)
        throw std::invalid_argument("split_corpus: need at least 2 documents");

    std::vector<bool> is_test(d_count, false);
    for (std::size_t i = 0; i < test_count; ++i) is_test[order[i]] = true;

    Corpus train, test;
    train.vocab = corpus.vocab;
    test.vocab = corpus.vocab;
    for (std::size_t d = 0; d < d_count; ++d)
        (is_test[d] ? test : train).docs.push_back(corpus.docs[d]);
    return {std::move(train), std::move(test)};
}

std::pair<Document, Document> split_document(const Document& doc,
                                             double observed_fraction,
                                             std::uint64_t seed) {
    if (doc.tokens.size() < 2)
        throw std::invalid_argument("split_document: need at least 2 tokens");
    if (!(observed_fraction > 0.0 && observed_fraction < 1.0))
        throw std::invalid_argument("split_document: fraction must be in (0, 1)");
    const std::size_t n = doc.tokens.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    RandomStream rng(seed, stream_id(StreamTag::Split, 1));
    for (std::size_t i = n; i > 1; --i) {
        std::size_t j = rng.uniform_below(i);
        std::swap(order[i - 1], order[j]);
    }
    std::size_t observed_count =
        static_cast<std::size_t>(std::llround(observed_fraction * static_cast<double>(n)));
    observed_count = std::max<std::size_t>(1, std::min(observed_count, n - 1));

    // Keep original token order on both sides.
    std::vector<bool> observed(n, false);
    for (std::size_t i = 0; i < observed_count; ++i) observed[order[i]] = true;
    Document obs, held;
    obs.label = doc.label;
    held.label = doc.label;
    for (std::size_t i = 0; i < n; ++i)
        (observed[i] ? obs : held).tokens.push_back(doc.tokens[i]);
    return {std::move(obs), std::move(held)};
}

std::vector<double> dirichlet_vector(double concentration, std::size_t n,
                                     RandomStream& rng) {
    // Gamma(a, 1) draws via Marsaglia-Tsang, boosted for a < 1.
    auto gamma_draw = [&rng](double a) {
        double boost = 1.0;
        if (a < 1.0) {
            double u;
            do { u = rng.uniform(); } while (u <= 0.0);
            boost = std::pow(u, 1.0 / a);
            a += 1.0;
        }
        const double d = a - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = rng.normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = rng.uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return boost * d * v;
            if (u > 0.0 &&
                std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
                return boost * d * v;
        }
    };
    std::vector<double> out(n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = gamma_draw(concentration);
        sum += out[i];
    }
    for (double& x : out) x /= sum;
    return out;
}

std::size_t poisson_clamped(double mean, RandomStream& rng) {
    // Knuth multiplication for small means, normal approximation above 50.
    std::size_t n;
    if (mean < 50.0) {
        const double limit = std::exp(-mean);
        double p = 1.0;
        n = 0;
        do {
            ++n;
            p *= rng.uniform();
        } while (p > limit);
        --n;
    } else {
        const double x = mean + std::sqrt(mean) * rng.normal();
        n = x < 0.0 ? 0 : static_cast<std::size_t>(std::llround(x));
    }
    return std::max<std::size_t>(1, n);
}

std::size_t categorical_draw(const std::vector<double>& probs, RandomStream& rng) {
    const double u = rng.uniform();
    double cum = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        cum += probs[i];
        if (u < cum) return i;
    }
    return probs.size() - 1;
}

std::pair<Corpus, SyntheticTruth> generate_synthetic(const ModelConfig& config,
                                                     std::size_t D, double avg_len,
                                                     std::uint64_t seed) {
    const int K = config.num_topics;
    const int M = config.embed_dim;
    const std::size_t V = config.vocab_size;
    if (V == 0)
        throw std::invalid_argument("generate_synthetic: config.vocab_size must be set");
    if (avg_len < 1.0)
        throw std::invalid_argument("generate_synthetic: avg_len must be >= 1");
    const double beta = config.word_prior > 0.0 ? config.word_prior : 1.0 / K;
    const double topic_sd = 1.0 / std::sqrt(config.topic_prior_precision);
    const double doc_sd = 1.0 / std::sqrt(config.doc_prior_precision);
    const double noise_sd = 1.0 / std::sqrt(config.weight_noise_precision);

    SyntheticTruth truth;
    truth.num_topics = K;
    truth.embed_dim = M;
    truth.vocab_size = V;
    truth.phi.resize(static_cast<std::size_t>(K) * V);
    truth.U.resize(static_cast<std::size_t>(K) * M);

    RandomStream global_rng(seed, stream_id(StreamTag::Synthetic, 0));
    for (int k = 0; k < K; ++k) {
        std::vector<double> row = dirichlet_vector(beta, V, global_rng);
        std::copy(row.begin(), row.end(), truth.phi.begin() + static_cast<std::size_t>(k) * V);
        for (int m = 0; m < M; ++m)
            truth.U[static_cast<std::size_t>(k) * M + m] = topic_sd * global_rng.normal();
    }

    Corpus corpus;
    corpus.docs.resize(D);
    corpus.vocab.resize(V);
    for (std::size_t v = 0; v < V; ++v) corpus.vocab[v] = "w" + std::to_string(v);
    truth.doc_embed.resize(D);
    truth.doc_weights.resize(D);
    truth.assignments.resize(D);

    std::vector<double> theta;
    for (std::size_t d = 0; d < D; ++d) {
        RandomStream rng(seed, stream_id(StreamTag::Synthetic, 1, d));
        std::vector<double>& a = truth.doc_embed[d];
        a.resize(M);
        for (int m = 0; m < M; ++m) a[m] = doc_sd * rng.normal();

        std::vector<double>& eta = truth.doc_weights[d];
        eta.resize(K);
        for (int k = 0; k < K; ++k)
            eta[k] = dot(std::span<const double>(truth.U).subspan(
                             static_cast<std::size_t>(k) * M, M),
                         a) +
                     noise_sd * rng.normal();
        softmax_into(eta, theta);

        const std::size_t len = poisson_clamped(avg_len, rng);
        Document& doc = corpus.docs[d];
        doc.tokens.resize(len);
        truth.assignments[d].resize(len);
        for (std::size_t n = 0; n < len; ++n) {
            const int z = static_cast<int>(categorical_draw(theta, rng));
            truth.assignments[d][n] = z;
            const double u = rng.uniform();
            double cum = 0.0;
            WordId w = static_cast<WordId>(V - 1);
            const double* phi_row = truth.phi.data() + static_cast<std::size_t>(z) * V;
            for (std::size_t v = 0; v < V; ++v) {
                cum += phi_row[v];
                if (u < cum) { w = static_cast<WordId>(v); break; }
            }
            doc.tokens[n] = w;
        }
    }
    return {std::move(corpus), std::move(truth)};
}

}  // namespace topicembed
