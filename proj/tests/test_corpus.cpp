#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "oracles.hpp"
#include "topicembed/corpus.hpp"
#include "topicembed/numerics.hpp"

using namespace topicembed;

namespace {

std::multiset<WordId> token_multiset(const Document& d) {
    return {d.tokens.begin(), d.tokens.end()};
}

Corpus make_corpus(const std::string& docword, const std::string& vocab,
                   const oracle::TempDir& dir) {
    oracle::write_text(dir.file("docword.txt"), docword);
    oracle::write_text(dir.file("vocab.txt"), vocab);
    return load_uci_bow(dir.file("docword.txt"), dir.file("vocab.txt"));
}

}  // namespace

TEST_CASE("load_uci_bow decodes counts into token lists") {
    oracle::TempDir dir("uci");
    Corpus c = make_corpus("2\n3\n2\n1 1 2\n2 3 1\n", "alpha\nbeta\ngamma\n", dir);
    REQUIRE(c.docs.size() == 2);
    CHECK(c.vocab_size() == 3);
    CHECK(c.docs[0].tokens == std::vector<WordId>{0, 0});
    CHECK(c.docs[1].tokens == std::vector<WordId>{2});
    CHECK(c.vocab[0] == "alpha");
}

TEST_CASE("load_uci_bow rejects out-of-range word ids naming the line") {
    oracle::TempDir dir("uci-range");
    oracle::write_text(dir.file("docword.txt"), "1\n3\n1\n1 4 1\n");
    oracle::write_text(dir.file("vocab.txt"), "a\nb\nc\n");
    try {
        load_uci_bow(dir.file("docword.txt"), dir.file("vocab.txt"));
        FAIL("expected parse_error");
    } catch (const parse_error& e) {
        CHECK(std::string(e.what()).find("4") != std::string::npos);
    }
}

TEST_CASE("load_uci_bow rejects non-positive counts") {
    oracle::TempDir dir("uci-count");
    oracle::write_text(dir.file("docword.txt"), "1\n3\n1\n1 2 0\n");
    oracle::write_text(dir.file("vocab.txt"), "a\nb\nc\n");
    CHECK_THROWS_AS(load_uci_bow(dir.file("docword.txt"), dir.file("vocab.txt")),
                    parse_error);
}

TEST_CASE("load_uci_bow cross-checks the vocabulary line count") {
    oracle::TempDir dir("uci-vocab");
    oracle::write_text(dir.file("docword.txt"), "1\n3\n1\n1 1 1\n");
    oracle::write_text(dir.file("vocab.txt"), "a\nb\n");
    CHECK_THROWS_AS(load_uci_bow(dir.file("docword.txt"), dir.file("vocab.txt")),
                    parse_error);
}

TEST_CASE("corpus round-trips through the UCI writer") {
    oracle::TempDir dir("roundtrip");
    Corpus c = make_corpus("3\n4\n5\n1 1 2\n1 3 1\n2 4 3\n3 2 1\n3 3 2\n",
                           "w1\nw2\nw3\nw4\n", dir);
    write_uci_bow(c, dir.file("out.txt"), dir.file("outv.txt"));
    Corpus back = load_uci_bow(dir.file("out.txt"), dir.file("outv.txt"));
    REQUIRE(back.docs.size() == c.docs.size());
    CHECK(back.vocab == c.vocab);
    for (std::size_t d = 0; d < c.docs.size(); ++d)
        CHECK(token_multiset(back.docs[d]) == token_multiset(c.docs[d]));
}

TEST_CASE("truncate_vocab keeps the most frequent words and drops the rest") {
    oracle::TempDir dir("trunc");
    // a:5 b:3 c:1
    Corpus full = make_corpus("2\n3\n4\n1 1 3\n1 2 3\n2 1 2\n2 3 1\n", "a\nb\nc\n", dir);
    Corpus c = truncate_vocab(full, 2);
    CHECK(c.vocab == std::vector<std::string>{"a", "b"});
    std::size_t total = 0;
    for (const auto& d : c.docs) {
        for (WordId t : d.tokens) CHECK(t < 2);
        total += d.tokens.size();
    }
    CHECK(total == 8);  // the single c token is gone
}

TEST_CASE("truncate_vocab breaks frequency ties toward the smaller id") {
    oracle::TempDir dir("trunc-tie");
    Corpus full = make_corpus("1\n2\n2\n1 1 3\n1 2 3\n", "first\nsecond\n", dir);
    Corpus c = truncate_vocab(full, 1);
    CHECK(c.vocab == std::vector<std::string>{"first"});
}

TEST_CASE("split_corpus partitions by the requested fraction") {
    oracle::TempDir dir("split");
    std::string docword = "10\n2\n10\n";
    for (int d = 1; d <= 10; ++d) docword += std::to_string(d) + " 1 1\n";
    Corpus c = make_corpus(docword, "x\ny\n", dir);
    auto [train, test] = split_corpus(c, 0.1, 7);
    CHECK(test.docs.size() == 1);
    CHECK(train.docs.size() == 9);
    auto [train2, test2] = split_corpus(c, 0.1, 7);
    CHECK(train2.docs.size() == train.docs.size());
    for (std::size_t i = 0; i < train.docs.size(); ++i)
        CHECK(train2.docs[i].tokens == train.docs[i].tokens);
}

TEST_CASE("split_corpus preserves labels and loses no document") {
    oracle::TempDir dir("split-labels");
    std::string docword = "8\n2\n8\n";
    for (int d = 1; d <= 8; ++d)
        docword += std::to_string(d) + " " + std::to_string(1 + d % 2) + " " +
                   std::to_string(d) + "\n";
    Corpus c = make_corpus(docword, "x\ny\n", dir);
    for (std::size_t d = 0; d < c.docs.size(); ++d) c.docs[d].label = static_cast<int>(d);
    auto [train, test] = split_corpus(c, 0.25, 3);
    std::multiset<int> seen;
    for (const auto& d : train.docs) seen.insert(*d.label);
    for (const auto& d : test.docs) seen.insert(*d.label);
    CHECK(seen.size() == 8);
    CHECK(*seen.begin() == 0);
    CHECK(*seen.rbegin() == 7);
    // labels still pair with their documents: doc length encodes the id + 1
    for (const auto& d : test.docs) CHECK(d.tokens.size() == *d.label + 1u);
}

TEST_CASE("split_document divides tokens by the observed fraction") {
    Document d;
    d.tokens = {0, 1, 2, 3};
    auto [obs, held] = split_document(d, 0.5, 11);
    CHECK(obs.tokens.size() == 2);
    CHECK(held.tokens.size() == 2);

    Document ten;
    for (int i = 0; i < 10; ++i) ten.tokens.push_back(i);
    auto [obs8, held2] = split_document(ten, 0.8, 11);
    CHECK(obs8.tokens.size() == 8);
    CHECK(held2.tokens.size() == 2);

    std::multiset<WordId> combined(obs8.tokens.begin(), obs8.tokens.end());
    combined.insert(held2.tokens.begin(), held2.tokens.end());
    CHECK(combined == token_multiset(ten));
}

TEST_CASE("split_document requires at least two tokens") {
    Document d;
    d.tokens = {4};
    CHECK_THROWS_AS(split_document(d, 0.8, 1), std::invalid_argument);
}

TEST_CASE("labels load and align with documents") {
    oracle::TempDir dir("labels");
    Corpus c = make_corpus("2\n2\n2\n1 1 1\n2 2 1\n", "x\ny\n", dir);
    oracle::write_text(dir.file("labels.txt"), "3\n7\n");
    load_labels(c, dir.file("labels.txt"));
    CHECK(*c.docs[0].label == 3);
    CHECK(*c.docs[1].label == 7);
    oracle::write_text(dir.file("short.txt"), "3\n");
    CHECK_THROWS_AS(load_labels(c, dir.file("short.txt")), parse_error);
}

TEST_CASE("synthetic generation with one topic is degenerate") {
    ModelConfig cfg;
    cfg.num_topics = 1;
    cfg.embed_dim = 1;
    cfg.vocab_size = 20;
    auto [corpus, truth] = generate_synthetic(cfg, 30, 10.0, 5);
    for (const auto& z_d : truth.assignments)
        for (int z : z_d) CHECK(z == 0);
    for (const auto& eta : truth.doc_weights) {
        std::vector<double> theta;
        softmax_into(eta, theta);
        CHECK(theta[0] == 1.0);
    }
}

TEST_CASE("synthetic weights approach U a in the noise-free limit") {
    ModelConfig cfg;
    cfg.num_topics = 6;
    cfg.embed_dim = 2;
    cfg.vocab_size = 40;
    cfg.weight_noise_precision = 1e12;
    auto [corpus, truth] = generate_synthetic(cfg, 50, 5.0, 9);
    for (std::size_t d = 0; d < truth.doc_embed.size(); ++d) {
        for (int k = 0; k < cfg.num_topics; ++k) {
            double ua = 0.0;
            for (int m = 0; m < cfg.embed_dim; ++m)
                ua += truth.U[static_cast<std::size_t>(k) * cfg.embed_dim + m] *
                      truth.doc_embed[d][m];
            CHECK(std::fabs(truth.doc_weights[d][k] - ua) < 1e-4);
        }
    }
}

TEST_CASE("empirical covariance of synthetic weights matches U U^T") {
    ModelConfig cfg;
    cfg.num_topics = 5;
    cfg.embed_dim = 2;
    cfg.vocab_size = 30;
    cfg.doc_prior_precision = 1.0;  // unit prior so cov(eta) = UU^T + tau^-1 I
    cfg.weight_noise_precision = 1e8;
    const std::size_t n = 50000;
    auto [corpus, truth] = generate_synthetic(cfg, n, 1.0, 21);
    const int K = cfg.num_topics, M = cfg.embed_dim;

    std::vector<double> mean(K, 0.0);
    for (const auto& eta : truth.doc_weights)
        for (int k = 0; k < K; ++k) mean[k] += eta[k];
    for (double& m : mean) m /= static_cast<double>(n);
    std::vector<double> cov(static_cast<std::size_t>(K) * K, 0.0);
    for (const auto& eta : truth.doc_weights)
        for (int i = 0; i < K; ++i)
            for (int j = 0; j < K; ++j)
                cov[static_cast<std::size_t>(i) * K + j] +=
                    (eta[i] - mean[i]) * (eta[j] - mean[j]);
    for (double& c : cov) c /= static_cast<double>(n - 1);

    for (int i = 0; i < K; ++i)
        for (int j = 0; j < K; ++j) {
            double uu = 0.0;
            for (int m = 0; m < M; ++m)
                uu += truth.U[static_cast<std::size_t>(i) * M + m] *
                      truth.U[static_cast<std::size_t>(j) * M + m];
            const double target = uu + (i == j ? 1e-8 : 0.0);
            const double cii = cov[static_cast<std::size_t>(i) * K + i];
            const double cjj = cov[static_cast<std::size_t>(j) * K + j];
            const double cij = cov[static_cast<std::size_t>(i) * K + j];
            const double se = std::sqrt((cii * cjj + cij * cij) / static_cast<double>(n));
            CAPTURE(i);
            CAPTURE(j);
            CHECK(std::fabs(cij - target) <= 3.0 * se + 1e-9);
        }
}

TEST_CASE("synthetic topic rows have Dirichlet-consistent entropy") {
    ModelConfig cfg;
    cfg.num_topics = 10;
    cfg.embed_dim = 2;
    cfg.vocab_size = 100;
    cfg.word_prior = 0.1;  // 1/K
    auto [corpus, truth] = generate_synthetic(cfg, 5, 5.0, 31);
    const int K = cfg.num_topics;
    const std::size_t V = cfg.vocab_size;

    auto entropy = [&](const double* row) {
        double h = 0.0;
        for (std::size_t v = 0; v < V; ++v)
            if (row[v] > 0.0) h -= row[v] * std::log(row[v]);
        return h;
    };
    std::vector<double> model_h(K);
    for (int k = 0; k < K; ++k) model_h[k] = entropy(&truth.phi[static_cast<std::size_t>(k) * V]);
    const double model_mean =
        std::accumulate(model_h.begin(), model_h.end(), 0.0) / K;

    // independent Dirichlet sampler via std::gamma_distribution
    std::mt19937 gen(999);
    std::gamma_distribution<double> gamma_draw(0.1, 1.0);
    const int reps = 10000;
    double sum = 0.0, sumsq = 0.0;
    std::vector<double> row(V);
    for (int r = 0; r < reps; ++r) {
        double total = 0.0;
        for (auto& x : row) {
            x = gamma_draw(gen);
            total += x;
        }
        for (auto& x : row) x /= total;
        const double h = entropy(row.data());
        sum += h;
        sumsq += h * h;
    }
    const double oracle_mean = sum / reps;
    const double oracle_sd = std::sqrt(sumsq / reps - oracle_mean * oracle_mean);
    const double se = oracle_sd * std::sqrt(1.0 / K + 1.0 / reps);
    CHECK(std::fabs(model_mean - oracle_mean) <= 2.0 * se);
}

TEST_CASE("poisson_clamped never returns zero and dirichlet_vector normalizes") {
    RandomStream rng(8, 2);
    for (int i = 0; i < 200; ++i) CHECK(poisson_clamped(0.2, rng) >= 1);
    const auto p = dirichlet_vector(0.5, 12, rng);
    double s = 0.0;
    for (double x : p) {
        CHECK(x >= 0.0);
        s += x;
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("categorical_draw follows the given distribution") {
    RandomStream rng(77, 4);
    std::vector<double> probs = {0.5, 0.3, 0.2};
    std::vector<std::size_t> counts(3, 0);
    const std::size_t n = 50000;
    for (std::size_t i = 0; i < n; ++i) counts[categorical_draw(probs, rng)]++;
    CHECK(oracle::chi_square_gof(counts, probs) > 0.001);
}
