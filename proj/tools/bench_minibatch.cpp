// Times the local-step minibatch kernel: serial reference vs the OpenMP path
// at several worker counts, and checks the merged statistics are bit-identical.
#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "topicembed/inference.hpp"

using namespace topicembed;

namespace {

bool stats_equal(const MinibatchStats& a, const MinibatchStats& b) {
    if (a.token_count != b.token_count || a.batch_docs != b.batch_docs) return false;
    if (a.weighted_embed != b.weighted_embed) return false;
    if (a.embed_outer.dim() != b.embed_outer.dim()) return false;
    const std::size_t n = static_cast<std::size_t>(a.embed_outer.dim());
    for (std::size_t i = 0; i < n * n; ++i)
        if (a.embed_outer.data()[i] != b.embed_outer.data()[i]) return false;
    return a.counts == b.counts;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"minibatch kernel benchmark"};
    std::size_t docs = 2000, avg_len = 80, reps = 3;
    ModelConfig cfg;
    cfg.num_topics = 50;
    cfg.embed_dim = 10;
    cfg.vocab_size = 2000;
    cfg.batch_size = 500;
    std::vector<int> worker_counts = {2, 4, 0};
    app.add_option("--docs", docs, "synthetic corpus size");
    app.add_option("--avg-len", avg_len, "mean document length");
    app.add_option("--reps", reps, "timed repetitions per setting");
    app.add_option("--k", cfg.num_topics, "topic count");
    app.add_option("--batch", cfg.batch_size, "minibatch size");
    app.add_option("--workers", worker_counts, "worker counts to time (0 = all cores)");
    CLI11_PARSE(app, argc, argv);

    cfg = resolve_config(cfg, cfg.vocab_size);
    auto [corpus, truth] = generate_synthetic(cfg, docs, avg_len, cfg.seed);
    RandomStream init_rng(cfg.seed, stream_id(StreamTag::Init, 0, 0));
    GlobalState state = init_params(cfg, corpus.vocab_size(), init_rng);

    const std::size_t batch = std::min<std::size_t>(cfg.batch_size, docs);
    std::vector<std::size_t> doc_ids(batch);
    for (std::size_t d = 0; d < batch; ++d) doc_ids[d] = d;

    auto time_one = [&](bool reference, int workers, MinibatchStats& out_stats) {
        ModelConfig run_cfg = cfg;
        run_cfg.workers = workers;
        double best = 1e300;
        for (std::size_t r = 0; r < reps; ++r) {
            const auto t0 = std::chrono::steady_clock::now();
            MinibatchStats stats =
                reference ? process_minibatch_reference(corpus, doc_ids, state, run_cfg, 0)
                          : process_minibatch(corpus, doc_ids, state, run_cfg, 0);
            const double secs =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            if (secs < best) best = secs;
            out_stats = std::move(stats);
        }
        return best;
    };

    std::printf("minibatch: %zu docs, K=%d, V=%zu\n", batch, cfg.num_topics,
                corpus.vocab_size());
    MinibatchStats base;
    const double serial = time_one(true, 1, base);
    std::printf("%-18s %8.4fs\n", "serial reference", serial);

    bool all_match = true;
    for (int workers : worker_counts) {
        MinibatchStats stats;
        const double secs = time_one(false, workers, stats);
        const bool match = stats_equal(base, stats);
        all_match = all_match && match;
        char label[64];
        std::snprintf(label, sizeof label, "openmp workers=%d", workers);
        std::printf("%-18s %8.4fs  speedup %5.2fx  %s\n", label, secs, serial / secs,
                    match ? "identical" : "MISMATCH");
    }
    return all_match ? 0 : 1;
}
