#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numeric>

#include "oracles.hpp"
#include "topicembed/evaluation.hpp"
#include "topicembed/inference.hpp"

using namespace topicembed;

namespace {

bool stats_identical(const MinibatchStats& a, const MinibatchStats& b) {
    if (a.batch_docs != b.batch_docs || a.token_count != b.token_count) return false;
    if (a.weighted_embed != b.weighted_embed) return false;
    if (a.embed_outer.dim() != b.embed_outer.dim()) return false;
    const int m = a.embed_outer.dim();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            if (a.embed_outer.at(i, j) != b.embed_outer.at(i, j)) return false;
    if (a.counts.size() != b.counts.size()) return false;
    for (std::size_t k = 0; k < a.counts.size(); ++k)
        if (a.counts[k] != b.counts[k]) return false;
    return true;
}

}  // namespace

TEST_CASE("parallel minibatches reproduce the serial reference bit for bit") {
    ModelConfig cfg;
    cfg.num_topics = 12;
    cfg.embed_dim = 3;
    cfg.vocab_size = 80;
    cfg.seed = 31;
    cfg = resolve_config(cfg, 80);
    auto [corpus, truth] = generate_synthetic(cfg, 300, 30.0, 77);

    RandomStream init_rng(cfg.seed, stream_id(StreamTag::Init, 0, 0));
    GlobalState state = init_params(cfg, corpus.vocab_size(), init_rng);

    std::vector<std::size_t> doc_ids(corpus.num_docs());
    std::iota(doc_ids.begin(), doc_ids.end(), std::size_t{0});

    for (long iter = 0; iter < 3; ++iter) {
        ModelConfig serial = cfg;
        serial.workers = 1;
        const MinibatchStats reference =
            process_minibatch_reference(corpus, doc_ids, state, serial, iter);
        for (int workers : {1, 2, 4, 0}) {
            ModelConfig parallel = cfg;
            parallel.workers = workers;
            CAPTURE(iter);
            CAPTURE(workers);
            CHECK(stats_identical(
                reference, process_minibatch(corpus, doc_ids, state, parallel, iter)));
        }
        // advance the state so later iterations test a different regime
        global_step(process_minibatch_reference(corpus, doc_ids, state, cfg, iter), state,
                    lr_schedule(iter), corpus.num_docs(), cfg);
    }
}

TEST_CASE("full training is independent of the worker count") {
    ModelConfig cfg;
    cfg.num_topics = 8;
    cfg.embed_dim = 2;
    cfg.vocab_size = 60;
    cfg.batch_size = 80;
    cfg.max_epochs = 3;
    cfg.eval_every = 2;
    cfg.seed = 13;
    cfg = resolve_config(cfg, 60);
    auto [corpus, truth] = generate_synthetic(cfg, 250, 25.0, 13);
    auto [train_c, heldout] = split_corpus(corpus, 0.2, 5);

    ModelConfig serial = cfg;
    serial.workers = 1;
    ModelConfig wide = cfg;
    wide.workers = 4;

    TrainResult a = train(train_c, serial, heldout);
    TrainResult b = train(train_c, wide, heldout);

    CHECK(a.state.topic_mean == b.state.topic_mean);
    const int m = a.state.cov_topic.dim();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            CHECK(a.state.cov_topic.at(i, j) == b.state.cov_topic.at(i, j));
            CHECK(a.state.cov_doc.at(i, j) == b.state.cov_doc.at(i, j));
        }
    for (int k = 0; k < cfg.num_topics; ++k) {
        const auto ra = a.state.words.topic_row(k);
        const auto rb = b.state.words.topic_row(k);
        REQUIRE(ra.size() == rb.size());
        for (std::size_t i = 0; i < ra.size(); ++i) {
            CHECK(ra[i].word == rb[i].word);
            CHECK(ra[i].weight == rb[i].weight);
        }
    }
    REQUIRE(a.trace.size() == b.trace.size());
    for (std::size_t i = 0; i < a.trace.size(); ++i) {
        CHECK(a.trace[i].iteration == b.trace[i].iteration);
        CHECK(a.trace[i].heldout_ll == b.trace[i].heldout_ll);
    }
    CHECK(a.converged == b.converged);

    // evaluation features are likewise scheduling-free
    FeatureMatrix fa = embedding_features(a.state, heldout, serial, 3);
    FeatureMatrix fb = embedding_features(b.state, heldout, wide, 3);
    CHECK(fa.values == fb.values);
}
