#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "topicembed/evaluation.hpp"

using namespace topicembed;

namespace {

ModelConfig eval_config(int K, int M, std::size_t V) {
    ModelConfig cfg;
    cfg.num_topics = K;
    cfg.embed_dim = M;
    return resolve_config(cfg, V);
}

GlobalState seeded_state(const ModelConfig& cfg, std::uint64_t seed) {
    RandomStream rng(seed, stream_id(StreamTag::Init, 0, 0));
    return init_params(cfg, cfg.vocab_size, rng);
}

// Replaces the word weights with explicit rows; everything else untouched.
void plant_words(GlobalState& state, std::vector<std::vector<std::pair<WordId, double>>> raw,
                 double beta, std::size_t V) {
    state.words = rebuild_truncation(std::move(raw), static_cast<int>(V), 1, beta, V);
    state.residual = ResidualSampler(state.words.residual_weights());
}

Document same_word_doc(WordId v, std::size_t n, std::optional<int> label = {}) {
    Document d;
    d.tokens.assign(n, v);
    d.label = label;
    return d;
}

std::size_t held_count(std::size_t n) {
    auto obs = static_cast<std::size_t>(std::llround(0.8 * static_cast<double>(n)));
    obs = std::max<std::size_t>(1, std::min(obs, n - 1));
    return n - obs;
}

FeatureMatrix make_features(std::size_t cols, std::vector<std::vector<double>> rows,
                            std::vector<int> labels) {
    FeatureMatrix f;
    f.rows = rows.size();
    f.cols = cols;
    f.labels = std::move(labels);
    for (const auto& r : rows) f.values.insert(f.values.end(), r.begin(), r.end());
    return f;
}

}  // namespace

TEST_CASE("uniform word weights give exactly -log V per word") {
    const std::size_t V = 23;
    ModelConfig cfg = eval_config(3, 2, V);
    GlobalState state = seeded_state(cfg, 5);
    std::vector<std::vector<std::pair<WordId, double>>> raw(3);
    for (int k = 0; k < 3; ++k)
        for (WordId v = 0; v < V; ++v) raw[k].emplace_back(v, cfg.word_prior);
    plant_words(state, std::move(raw), cfg.word_prior, V);

    Corpus test;
    test.vocab.assign(V, "w");
    test.docs.push_back(same_word_doc(4, 9));
    test.docs.push_back(same_word_doc(17, 6));
    Document mixed;
    mixed.tokens = {0, 1, 2, 3, 4, 5, 6, 7};
    test.docs.push_back(mixed);

    const double ll = heldout_perword_ll(state, test, cfg, 99);
    CHECK(ll == doctest::Approx(-std::log(static_cast<double>(V))).epsilon(1e-12));
}

TEST_CASE("single-topic completion reproduces the token-weighted mean") {
    const std::size_t V = 3;
    ModelConfig cfg;
    cfg.num_topics = 1;
    cfg.embed_dim = 1;
    cfg.word_prior = 0.5;
    cfg = resolve_config(cfg, V);
    GlobalState state = seeded_state(cfg, 7);
    // lambda = (5, 2, 1), Lambda = 8
    plant_words(state, {{{0, 5.0}, {1, 2.0}, {2, 1.0}}}, cfg.word_prior, V);

    const std::vector<std::pair<WordId, std::size_t>> spec = {
        {0, 5}, {1, 2}, {2, 10}, {0, 3}};
    Corpus test;
    test.vocab.assign(V, "w");
    for (auto [v, n] : spec) test.docs.push_back(same_word_doc(v, n));

    const std::vector<double> lambda = {5.0, 2.0, 1.0};
    const double beta = cfg.word_prior, total = 8.0;
    double sum = 0.0;
    std::size_t count = 0;
    for (auto [v, n] : spec) {
        const double p = beta / total + (lambda[v] - beta) / total;
        for (std::size_t i = 0; i < held_count(n); ++i) {
            sum += std::log(p);
            ++count;
        }
    }
    const double ll = heldout_perword_ll(state, test, cfg, 1234);
    CHECK(ll == doctest::Approx(sum / static_cast<double>(count)).epsilon(1e-13));
}

TEST_CASE("a model matched to the corpus scores above a uniform one") {
    const std::size_t V = 20;
    ModelConfig cfg;
    cfg.num_topics = 1;
    cfg.embed_dim = 1;
    cfg.word_prior = 0.1;
    cfg = resolve_config(cfg, V);

    Corpus test;
    test.vocab.assign(V, "w");
    for (int d = 0; d < 6; ++d) test.docs.push_back(same_word_doc(0, 10));

    GlobalState matched = seeded_state(cfg, 9);
    std::vector<std::pair<WordId, double>> heavy;
    for (WordId v = 0; v < V; ++v) heavy.emplace_back(v, v == 0 ? 50.0 : 0.1);
    plant_words(matched, {heavy}, cfg.word_prior, V);

    GlobalState flat = seeded_state(cfg, 9);
    std::vector<std::pair<WordId, double>> uniform;
    for (WordId v = 0; v < V; ++v) uniform.emplace_back(v, 0.1);
    plant_words(flat, {uniform}, cfg.word_prior, V);

    const double ll_matched = heldout_perword_ll(matched, test, cfg, 3);
    const double ll_flat = heldout_perword_ll(flat, test, cfg, 3);
    CHECK(ll_matched > ll_flat + 1.0);
    CHECK(ll_flat == doctest::Approx(-std::log(static_cast<double>(V))).epsilon(1e-12));
}

TEST_CASE("documents with fewer than two tokens do not contribute") {
    ModelConfig cfg = eval_config(4, 2, 12);
    GlobalState state = seeded_state(cfg, 11);

    Corpus with_short;
    with_short.vocab.assign(12, "w");
    Document d1;
    d1.tokens = {0, 3, 3, 7, 9, 2, 5, 5};
    with_short.docs.push_back(d1);
    with_short.docs.push_back(same_word_doc(6, 1));
    Document empty;
    with_short.docs.push_back(empty);

    Corpus only_long = with_short;
    only_long.docs.resize(1);

    CHECK(heldout_perword_ll(state, with_short, cfg, 42) ==
          heldout_perword_ll(state, only_long, cfg, 42));

    Corpus all_short;
    all_short.vocab.assign(12, "w");
    all_short.docs.push_back(same_word_doc(1, 1));
    CHECK_THROWS_AS(heldout_perword_ll(state, all_short, cfg, 42),
                    std::invalid_argument);
}

TEST_CASE("heldout likelihood ignores document order") {
    ModelConfig cfg = eval_config(5, 2, 30);
    GlobalState state = seeded_state(cfg, 13);
    Corpus test;
    test.vocab.assign(30, "w");
    RandomStream rng(3, 33);
    for (int d = 0; d < 8; ++d) {
        Document doc;
        const std::size_t len = 4 + rng.uniform_below(10);
        for (std::size_t i = 0; i < len; ++i)
            doc.tokens.push_back(static_cast<WordId>(rng.uniform_below(30)));
        test.docs.push_back(std::move(doc));
    }
    Corpus reversed = test;
    std::reverse(reversed.docs.begin(), reversed.docs.end());
    const double a = heldout_perword_ll(state, test, cfg, 17);
    const double b = heldout_perword_ll(state, reversed, cfg, 17);
    CHECK(a == doctest::Approx(b).epsilon(1e-12));
}

TEST_CASE("feature file lines are exact") {
    oracle::TempDir dir("features");
    const std::string path = dir.path() + "/features.txt";
    FeatureMatrix f = make_features(2, {{0.5, -1.25}, {0.0, 3.0}}, {3, -1});
    write_feature_file(f, path);
    CHECK(oracle::read_text(path) == "3 1:0.5 2:-1.25\n0 1:0 2:3\n");
}

TEST_CASE("embedding features align with documents") {
    ModelConfig cfg = eval_config(4, 3, 15);
    GlobalState state = seeded_state(cfg, 17);
    Corpus corpus;
    corpus.vocab.assign(15, "w");
    corpus.docs.push_back(same_word_doc(2, 6, 4));
    Document empty;
    corpus.docs.push_back(empty);
    corpus.docs.push_back(same_word_doc(9, 3));

    FeatureMatrix f = embedding_features(state, corpus, cfg, 21);
    CHECK(f.rows == 3);
    CHECK(f.cols == 3);
    CHECK(f.labels == std::vector<int>{4, -1, -1});
    // empty document keeps the zero embedding
    for (double v : f.row(1)) CHECK(v == 0.0);
    // non-empty documents move away from it
    CHECK(std::fabs(f.row(0)[0]) + std::fabs(f.row(0)[1]) + std::fabs(f.row(0)[2]) > 0.0);

    FeatureMatrix again = embedding_features(state, corpus, cfg, 21);
    CHECK(f.values == again.values);
}

TEST_CASE("retrieval ranks an exact match first") {
    FeatureMatrix queries = make_features(2, {{1.0, 0.0}}, {1});
    FeatureMatrix base = make_features(2, {{0.0, 1.0}, {1.0, 0.0}}, {2, 1});
    PRCurve curve = retrieval_pr(queries, base, {1, 2});
    REQUIRE(curve.points.size() == 2);
    CHECK(curve.points[0].cutoff == 1);
    CHECK(curve.points[0].precision == 1.0);
    CHECK(curve.points[0].recall == 1.0);
    CHECK(curve.points[1].precision == 0.5);
    CHECK(curve.points[1].recall == 1.0);
}

TEST_CASE("retrieval precision is one when every document shares a label") {
    RandomStream rng(7, 70);
    auto rand_rows = [&](std::size_t n) {
        std::vector<std::vector<double>> rows(n, std::vector<double>(3));
        for (auto& r : rows)
            for (auto& v : r) v = rng.normal();
        return rows;
    };
    FeatureMatrix queries = make_features(3, rand_rows(3), {7, 7, 7});
    FeatureMatrix base = make_features(3, rand_rows(4), {7, 7, 7, 7});
    PRCurve curve = retrieval_pr(queries, base, {1, 2, 4});
    for (const auto& p : curve.points) CHECK(p.precision == 1.0);
    CHECK(curve.points[0].recall == doctest::Approx(0.25));
    CHECK(curve.points[2].recall == 1.0);
}

TEST_CASE("retrieval agrees with a brute-force oracle") {
    RandomStream rng(19, 190);
    const std::size_t nq = 12, nb = 40, dim = 4;
    auto rand_features = [&](std::size_t n) {
        std::vector<std::vector<double>> rows(n, std::vector<double>(dim));
        for (auto& r : rows)
            for (auto& v : r) v = rng.normal();
        return rows;
    };
    std::vector<int> qlabels(nq), blabels(nb);
    for (auto& l : qlabels) l = static_cast<int>(rng.uniform_below(3));
    for (auto& l : blabels) l = static_cast<int>(rng.uniform_below(3));
    FeatureMatrix queries = make_features(dim, rand_features(nq), qlabels);
    FeatureMatrix base = make_features(dim, rand_features(nb), blabels);

    const std::vector<std::size_t> cutoffs = {1, 3, 10, 40};
    PRCurve got = retrieval_pr(queries, base, cutoffs);

    // oracle: full sort per query, same tie rule, independent bookkeeping
    std::vector<double> rec(cutoffs.size(), 0.0), prec(cutoffs.size(), 0.0);
    std::size_t scored = 0;
    for (std::size_t q = 0; q < nq; ++q) {
        std::size_t relevant = 0;
        for (std::size_t b = 0; b < nb; ++b)
            if (blabels[b] == qlabels[q]) ++relevant;
        if (relevant == 0) continue;
        ++scored;
        std::vector<std::pair<double, std::size_t>> ranked;
        for (std::size_t b = 0; b < nb; ++b) {
            double s = 0.0;
            for (std::size_t j = 0; j < dim; ++j)
                s += queries.row(q)[j] * base.row(b)[j];
            ranked.emplace_back(s, b);
        }
        std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        for (std::size_t ci = 0; ci < cutoffs.size(); ++ci) {
            const std::size_t depth = std::min(cutoffs[ci], nb);
            std::size_t hits = 0;
            for (std::size_t r = 0; r < depth; ++r)
                if (blabels[ranked[r].second] == qlabels[q]) ++hits;
            rec[ci] += static_cast<double>(hits) / static_cast<double>(relevant);
            prec[ci] += static_cast<double>(hits) / static_cast<double>(depth);
        }
    }
    REQUIRE(scored > 0);
    REQUIRE(got.points.size() == cutoffs.size());
    for (std::size_t ci = 0; ci < cutoffs.size(); ++ci) {
        CHECK(got.points[ci].cutoff == cutoffs[ci]);
        CHECK(got.points[ci].recall ==
              doctest::Approx(rec[ci] / scored).epsilon(1e-12));
        CHECK(got.points[ci].precision ==
              doctest::Approx(prec[ci] / scored).epsilon(1e-12));
    }
}

TEST_CASE("retrieval is invariant to positive feature scaling") {
    RandomStream rng(23, 230);
    std::vector<std::vector<double>> qrows(6, std::vector<double>(3));
    std::vector<std::vector<double>> brows(15, std::vector<double>(3));
    for (auto& r : qrows)
        for (auto& v : r) v = rng.normal();
    for (auto& r : brows)
        for (auto& v : r) v = rng.normal();
    std::vector<int> ql = {0, 1, 2, 0, 1, 2};
    std::vector<int> bl(15);
    for (std::size_t i = 0; i < bl.size(); ++i) bl[i] = static_cast<int>(i % 3);

    auto scaled = [](std::vector<std::vector<double>> rows, double s) {
        for (auto& r : rows)
            for (auto& v : r) v *= s;
        return rows;
    };
    PRCurve a = retrieval_pr(make_features(3, qrows, ql), make_features(3, brows, bl),
                             {1, 5, 15});
    PRCurve b = retrieval_pr(make_features(3, scaled(qrows, 2.0), ql),
                             make_features(3, scaled(brows, 2.0), bl), {1, 5, 15});
    REQUIRE(a.points.size() == b.points.size());
    for (std::size_t i = 0; i < a.points.size(); ++i) {
        CHECK(a.points[i].precision == b.points[i].precision);
        CHECK(a.points[i].recall == b.points[i].recall);
    }
}

TEST_CASE("self retrieval with exclusion finds the twin document") {
    // two identical vectors per class at orthogonal corners
    FeatureMatrix f = make_features(3,
                                    {{1, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 1, 0},
                                     {0, 0, 1}, {0, 0, 1}},
                                    {0, 0, 1, 1, 2, 2});
    PRCurve curve = retrieval_pr(f, f, {1}, true);
    CHECK(curve.points[0].precision == 1.0);
    CHECK(curve.points[0].recall == 1.0);  // one relevant document remains per query
}

TEST_CASE("cutoffs beyond the base size read the full ranking") {
    FeatureMatrix queries = make_features(1, {{1.0}}, {0});
    FeatureMatrix base = make_features(1, {{0.5}, {0.2}, {0.9}}, {0, 1, 0});
    PRCurve curve = retrieval_pr(queries, base, {100});
    CHECK(curve.points[0].cutoff == 100);
    CHECK(curve.points[0].recall == 1.0);
    CHECK(curve.points[0].precision == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("retrieval rejects malformed inputs") {
    FeatureMatrix labeled = make_features(2, {{1.0, 0.0}}, {1});
    FeatureMatrix unlabeled = make_features(2, {{1.0, 0.0}}, {-1});
    FeatureMatrix wrong_dim = make_features(3, {{1.0, 0.0, 0.0}}, {1});
    CHECK_THROWS_AS(retrieval_pr(unlabeled, labeled, {1}), std::invalid_argument);
    CHECK_THROWS_AS(retrieval_pr(labeled, unlabeled, {1}), std::invalid_argument);
    CHECK_THROWS_AS(retrieval_pr(labeled, wrong_dim, {1}), std::invalid_argument);
    // no query label present in the base
    FeatureMatrix other = make_features(2, {{0.0, 1.0}}, {2});
    CHECK_THROWS_AS(retrieval_pr(labeled, other, {1}), std::invalid_argument);
}

TEST_CASE("topic top words order by weight with id tie-breaks") {
    ModelConfig cfg;
    cfg.num_topics = 2;
    cfg.embed_dim = 1;
    cfg.word_prior = 0.5;
    cfg = resolve_config(cfg, 4);
    GlobalState state = seeded_state(cfg, 29);
    plant_words(state,
                {{{0, 9.0}, {1, 5.0}, {2, 2.0}, {3, 0.5}},
                 {{0, 0.5}, {1, 7.0}, {2, 7.0}, {3, 0.5}}},
                cfg.word_prior, 4);

    CHECK(topic_top_words(state, 0, 2) == std::vector<WordId>{0, 1});
    const auto all = topic_top_words(state, 0, 50);
    CHECK(all.size() == 4);
    CHECK(all[0] == 0);
    // equal weights fall back to the smaller word id
    CHECK(topic_top_words(state, 1, 2) == std::vector<WordId>{1, 2});
    CHECK_THROWS_AS(topic_top_words(state, 5, 2), std::out_of_range);
}
