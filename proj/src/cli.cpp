#include "topicembed/cli.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "topicembed/correlation.hpp"
#include "topicembed/evaluation.hpp"
#include "topicembed/lda.hpp"
#include "topicembed/manifest.hpp"

namespace topicembed {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

void require_valid(const ModelConfig& cfg) {
    const auto errors = validate(cfg);
    if (errors.empty()) return;
    std::string joined;
    for (const auto& e : errors) {
        if (!joined.empty()) joined += "; ";
        joined += e;
    }
    throw std::invalid_argument(joined);
}

std::vector<std::size_t> parse_cutoffs(const std::string& text) {
    std::vector<std::size_t> cutoffs;
    std::istringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        cutoffs.push_back(std::stoull(item));
    }
    if (cutoffs.empty()) throw std::invalid_argument("empty cutoff list");
    return cutoffs;
}

std::vector<std::string> read_vocab_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw parse_error("cannot open " + path);
    std::vector<std::string> vocab;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        vocab.push_back(line);
    }
    return vocab;
}

void write_trace(const std::vector<TraceRow>& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write trace: " + path);
    out << "iteration,learning_rate,heldout_ll,seconds\n";
    char buf[160];
    for (const TraceRow& row : trace) {
        std::snprintf(buf, sizeof buf, "%ld,%.6f,%.6f,%.3f\n", row.iteration, row.rate,
                      row.heldout_ll, row.seconds);
        out << buf;
    }
    if (!out) throw io_error("write failed: " + path);
}

// Applies a --config file before flag values land, so explicit flags win.
void preload_config_file(const std::vector<std::string>& args, ModelConfig& cfg) {
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            apply_config_file(cfg, args[i + 1]);
            return;
        }
        if (args[i].rfind("--config=", 0) == 0) {
            apply_config_file(cfg, args[i].substr(9));
            return;
        }
    }
}

struct CorpusArgs {
    std::string docword, vocab, labels;
};

void add_corpus_options(CLI::App* cmd, CorpusArgs& args, bool required = true) {
    auto* dw = cmd->add_option("--docword", args.docword, "UCI bag-of-words counts file");
    auto* vc = cmd->add_option("--vocab", args.vocab, "vocabulary file, one word per line");
    if (required) {
        dw->required();
        vc->required();
    }
    cmd->add_option("--labels", args.labels, "class labels, one integer per line");
}

Corpus load_corpus(const CorpusArgs& args) {
    Corpus corpus = load_uci_bow(args.docword, args.vocab);
    if (!args.labels.empty()) load_labels(corpus, args.labels);
    return corpus;
}

void add_model_options(CLI::App* cmd, ModelConfig& cfg, std::string& config_file) {
    cmd->add_option("--config", config_file, "key=value config file (flags override)");
    cmd->add_option("--k", cfg.num_topics, "topic count K");
    cmd->add_option("--m", cfg.embed_dim, "embedding dimension M");
    cmd->add_option("--alpha", cfg.topic_prior_precision, "topic embedding prior precision");
    cmd->add_option("--beta", cfg.word_prior, "Dirichlet word prior (0 = 1/K)");
    cmd->add_option("--rho", cfg.doc_prior_precision, "document embedding prior precision");
    cmd->add_option("--tau", cfg.weight_noise_precision, "topic weight noise precision");
    cmd->add_option("--ks", cfg.doc_topk, "top topics kept per document (0 = min(50, K))");
    cmd->add_option("--vs", cfg.topic_topwords, "top words kept per topic (0 = min(100, V))");
    cmd->add_option("--smin", cfg.word_min_topics, "per-word floor on retained topics");
    cmd->add_option("--mc-samples", cfg.mc_samples, "reparameterization samples T");
    cmd->add_option("--batch", cfg.batch_size, "minibatch size");
    cmd->add_option("--max-inner", cfg.max_inner_iters, "max inner iterations per document");
    cmd->add_option("--inner-tol", cfg.inner_tol, "inner stop threshold on max |delta xi|");
    cmd->add_option("--tol", cfg.outer_tol, "outer stop threshold on |delta heldout LL|");
    cmd->add_option("--max-epochs", cfg.max_epochs, "maximum corpus sweeps");
    cmd->add_option("--eval-every", cfg.eval_every, "heldout evaluation cadence (minibatches)");
    cmd->add_option("--init-docs", cfg.init_doc_seeds,
                    "documents blended into each initial topic row (0 = noise init)");
    cmd->add_option("--seed", cfg.seed, "random seed");
    cmd->add_option("--workers", cfg.workers, "worker threads (0 = all cores, 1 = serial)");
}

int cmd_train(const CorpusArgs& corpus_args, const ModelConfig& flag_cfg,
              const std::string& config_file, double test_frac, const std::string& out_dir,
              std::ostream& out) {
    const auto t0 = Clock::now();
    Corpus corpus = load_corpus(corpus_args);
    const double load_secs = seconds_since(t0);

    if (!(test_frac > 0.0 && test_frac < 1.0))
        throw std::invalid_argument("--test-frac must be in (0, 1)");
    ModelConfig cfg = resolve_config(flag_cfg, corpus.vocab_size());
    require_valid(cfg);
    auto [train_corpus, heldout] = split_corpus(corpus, test_frac, cfg.seed);

    const auto t1 = Clock::now();
    TrainResult result = train(train_corpus, cfg, heldout);
    const double train_secs = seconds_since(t1);

    std::filesystem::create_directories(out_dir);
    const std::string model_path = out_dir + "/model.txt";
    const std::string trace_path = out_dir + "/trace.csv";
    const auto t2 = Clock::now();
    save_model(result.state, cfg, model_path);
    write_trace(result.trace, trace_path);

    RunManifest manifest;
    manifest.command = "train";
    manifest.config = cfg;
    manifest.seed = cfg.seed;
    manifest.inputs.emplace_back("docword", file_digest_hex(corpus_args.docword));
    manifest.inputs.emplace_back("vocab", file_digest_hex(corpus_args.vocab));
    if (!corpus_args.labels.empty())
        manifest.inputs.emplace_back("labels", file_digest_hex(corpus_args.labels));
    if (!config_file.empty())
        manifest.inputs.emplace_back("config", file_digest_hex(config_file));
    manifest.outputs.emplace_back("model", model_path);
    manifest.outputs.emplace_back("trace", trace_path);
    manifest.timings.emplace_back("load", load_secs);
    manifest.timings.emplace_back("train", train_secs);
    manifest.timings.emplace_back("save", seconds_since(t2));
    write_manifest(manifest, out_dir + "/manifest.json");

    if (!result.trace.empty())
        out << "final heldout LL " << result.trace.back().heldout_ll << " nats/word after "
            << result.trace.back().iteration << " minibatches"
            << (result.converged ? " (converged)" : "") << "\n";
    out << "model written to " << model_path << "\n";
    return 0;
}

int cmd_eval(const CorpusArgs& corpus_args, const std::string& model_path,
             const std::string& out_dir, const std::string& cutoffs_text, bool retrieval,
             const std::string& features_path, std::uint64_t seed, bool seed_given,
             int workers, bool workers_given, std::ostream& out) {
    const auto t0 = Clock::now();
    LoadedModel model = load_model(model_path);
    Corpus corpus = load_corpus(corpus_args);
    if (model.state.vocab_size != corpus.vocab_size())
        throw io_error("shape mismatch: model V=" + std::to_string(model.state.vocab_size) +
                       " vs corpus V=" + std::to_string(corpus.vocab_size()));
    ModelConfig cfg = model.config;
    if (seed_given) cfg.seed = seed;
    if (workers_given) cfg.workers = workers;
    const double load_secs = seconds_since(t0);

    const bool has_labels = !corpus_args.labels.empty();
    if (retrieval && !has_labels)
        throw std::invalid_argument("--retrieval requires --labels");

    const auto t1 = Clock::now();
    const double ll = heldout_perword_ll(model.state, corpus, cfg, cfg.seed);

    std::filesystem::create_directories(out_dir);
    const std::string metrics_path = out_dir + "/metrics.txt";
    std::ofstream metrics(metrics_path);
    if (!metrics) throw io_error("cannot write metrics: " + metrics_path);
    char buf[160];
    std::snprintf(buf, sizeof buf, "heldout_perword_ll %.6f\n", ll);
    metrics << buf;

    if (retrieval) {
        const FeatureMatrix features =
            embedding_features(model.state, corpus, cfg, cfg.seed);
        const PRCurve curve =
            retrieval_pr(features, features, parse_cutoffs(cutoffs_text), true);
        for (const PRPoint& p : curve.points) {
            std::snprintf(buf, sizeof buf, "pr %zu %.6f %.6f\n", p.cutoff, p.recall,
                          p.precision);
            metrics << buf;
        }
    }
    metrics.close();
    if (!metrics) throw io_error("write failed: " + metrics_path);

    if (!features_path.empty())
        export_features(model.state, corpus, cfg, cfg.seed, features_path);
    const double eval_secs = seconds_since(t1);

    RunManifest manifest;
    manifest.command = "eval";
    manifest.config = cfg;
    manifest.seed = cfg.seed;
    manifest.inputs.emplace_back("model", file_digest_hex(model_path));
    manifest.inputs.emplace_back("docword", file_digest_hex(corpus_args.docword));
    manifest.inputs.emplace_back("vocab", file_digest_hex(corpus_args.vocab));
    if (has_labels)
        manifest.inputs.emplace_back("labels", file_digest_hex(corpus_args.labels));
    manifest.outputs.emplace_back("metrics", metrics_path);
    if (!features_path.empty()) manifest.outputs.emplace_back("features", features_path);
    manifest.timings.emplace_back("load", load_secs);
    manifest.timings.emplace_back("eval", eval_secs);
    write_manifest(manifest, out_dir + "/manifest.json");

    out << "heldout LL " << ll << " nats/word\n";
    return 0;
}

int cmd_export(const std::string& model_path, const std::string& vocab_path,
               double threshold, std::size_t max_degree, std::size_t top_words,
               const std::string& out_dir, std::ostream& out) {
    const auto t0 = Clock::now();
    LoadedModel model = load_model(model_path);
    std::vector<std::string> vocab = read_vocab_file(vocab_path);
    if (vocab.size() != model.state.vocab_size)
        throw io_error("shape mismatch: model V=" + std::to_string(model.state.vocab_size) +
                       " vs vocab file V=" + std::to_string(vocab.size()));

    const CorrelationGraph graph =
        correlation_graph(model.state, model.config.weight_noise_precision, vocab,
                          threshold, max_degree, top_words);

    std::filesystem::create_directories(out_dir);
    const std::string embed_path = out_dir + "/embeddings.tsv";
    const std::string edge_path = out_dir + "/edges.txt";
    const std::string gml_path = out_dir + "/graph.gml";
    export_embeddings(model.state, embed_path);
    export_graph(graph, edge_path, gml_path);

    RunManifest manifest;
    manifest.command = "export";
    manifest.config = model.config;
    manifest.seed = model.config.seed;
    manifest.inputs.emplace_back("model", file_digest_hex(model_path));
    manifest.inputs.emplace_back("vocab", file_digest_hex(vocab_path));
    manifest.outputs.emplace_back("embeddings", embed_path);
    manifest.outputs.emplace_back("edges", edge_path);
    manifest.outputs.emplace_back("graph", gml_path);
    manifest.timings.emplace_back("export", seconds_since(t0));
    write_manifest(manifest, out_dir + "/manifest.json");

    out << graph.edges.size() << " edges at threshold " << threshold << "\n";
    return 0;
}

int cmd_lda(const CorpusArgs& corpus_args, const ModelConfig& flag_cfg,
            const std::string& config_file, double test_frac, const std::string& out_dir,
            std::ostream& out) {
    const auto t0 = Clock::now();
    Corpus corpus = load_corpus(corpus_args);
    const double load_secs = seconds_since(t0);

    if (!(test_frac > 0.0 && test_frac < 1.0))
        throw std::invalid_argument("--test-frac must be in (0, 1)");
    ModelConfig cfg = flag_cfg;
    cfg.embed_dim = 1;  // unused by the baseline; keeps M < K vacuously true
    cfg = resolve_config(cfg, corpus.vocab_size());
    require_valid(cfg);
    auto [train_corpus, heldout] = split_corpus(corpus, test_frac, cfg.seed);

    const auto t1 = Clock::now();
    LdaTrainResult result = lda_train(train_corpus, cfg, heldout);
    const double train_secs = seconds_since(t1);

    std::filesystem::create_directories(out_dir);
    const std::string model_path = out_dir + "/model.txt";
    const std::string trace_path = out_dir + "/trace.csv";
    const auto t2 = Clock::now();
    lda_save(result.state, cfg, model_path);
    write_trace(result.trace, trace_path);

    RunManifest manifest;
    manifest.command = "lda";
    manifest.config = cfg;
    manifest.seed = cfg.seed;
    manifest.inputs.emplace_back("docword", file_digest_hex(corpus_args.docword));
    manifest.inputs.emplace_back("vocab", file_digest_hex(corpus_args.vocab));
    if (!corpus_args.labels.empty())
        manifest.inputs.emplace_back("labels", file_digest_hex(corpus_args.labels));
    if (!config_file.empty())
        manifest.inputs.emplace_back("config", file_digest_hex(config_file));
    manifest.outputs.emplace_back("model", model_path);
    manifest.outputs.emplace_back("trace", trace_path);
    manifest.timings.emplace_back("load", load_secs);
    manifest.timings.emplace_back("train", train_secs);
    manifest.timings.emplace_back("save", seconds_since(t2));
    write_manifest(manifest, out_dir + "/manifest.json");

    if (!result.trace.empty())
        out << "final heldout LL " << result.trace.back().heldout_ll << " nats/word after "
            << result.trace.back().iteration << " minibatches"
            << (result.converged ? " (converged)" : "") << "\n";
    out << "model written to " << model_path << "\n";
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"correlated topic modeling with topic embeddings"};
    app.require_subcommand(1);

    ModelConfig train_cfg, lda_cfg;
    CorpusArgs train_corpus, lda_corpus, eval_corpus;
    std::string train_config_file, lda_config_file;
    std::string train_out = "run", lda_out = "lda-run", eval_out = "eval", export_out = "export";
    double train_frac = 0.1, lda_frac = 0.1;

    CLI::App* train_cmd = app.add_subcommand("train", "train the embedding model");
    add_corpus_options(train_cmd, train_corpus);
    add_model_options(train_cmd, train_cfg, train_config_file);
    train_cmd->add_option("--test-frac", train_frac, "heldout fraction for convergence");
    train_cmd->add_option("--out", train_out, "output directory");

    std::string eval_model, eval_cutoffs = "1,10,100", eval_features;
    bool eval_retrieval = false;
    std::uint64_t eval_seed = 0;
    int eval_workers = 0;
    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a trained model");
    eval_cmd->add_option("--model", eval_model, "model file")->required();
    add_corpus_options(eval_cmd, eval_corpus);
    eval_cmd->add_option("--out", eval_out, "output directory");
    eval_cmd->add_option("--cutoffs", eval_cutoffs, "retrieval rank cutoffs");
    eval_cmd->add_flag("--retrieval", eval_retrieval, "compute retrieval PR (needs labels)");
    eval_cmd->add_option("--features", eval_features, "write document features to this path");
    CLI::Option* eval_seed_opt = eval_cmd->add_option("--seed", eval_seed, "evaluation seed");
    CLI::Option* eval_workers_opt =
        eval_cmd->add_option("--workers", eval_workers, "worker threads");

    std::string export_model, export_vocab;
    double export_threshold = 0.5;
    std::size_t export_degree = 10, export_words = 5;
    CLI::App* export_cmd = app.add_subcommand("export", "export correlations and embeddings");
    export_cmd->add_option("--model", export_model, "model file")->required();
    export_cmd->add_option("--vocab", export_vocab, "vocabulary file")->required();
    export_cmd->add_option("--threshold", export_threshold, "correlation edge threshold");
    export_cmd->add_option("--max-degree", export_degree, "strongest edges kept per node");
    export_cmd->add_option("--top-words", export_words, "label words per node");
    export_cmd->add_option("--out", export_out, "output directory");

    CLI::App* lda_cmd = app.add_subcommand("lda", "train the LDA baseline");
    add_corpus_options(lda_cmd, lda_corpus);
    lda_cmd->add_option("--config", lda_config_file, "key=value config file (flags override)");
    lda_cmd->add_option("--k", lda_cfg.num_topics, "topic count K");
    lda_cmd->add_option("--beta", lda_cfg.word_prior, "Dirichlet word prior (0 = 1/K)");
    lda_cmd->add_option("--batch", lda_cfg.batch_size, "minibatch size");
    lda_cmd->add_option("--max-inner", lda_cfg.max_inner_iters, "max inner iterations");
    lda_cmd->add_option("--tol", lda_cfg.outer_tol, "outer stop threshold");
    lda_cmd->add_option("--max-epochs", lda_cfg.max_epochs, "maximum corpus sweeps");
    lda_cmd->add_option("--eval-every", lda_cfg.eval_every, "evaluation cadence");
    lda_cmd->add_option("--seed", lda_cfg.seed, "random seed");
    lda_cmd->add_option("--workers", lda_cfg.workers, "worker threads");
    lda_cmd->add_option("--test-frac", lda_frac, "heldout fraction for convergence");
    lda_cmd->add_option("--out", lda_out, "output directory");

    try {
        preload_config_file(args, train_cfg);
        preload_config_file(args, lda_cfg);
    } catch (const std::exception& e) {
        err << "config error: " << e.what() << "\n";
        return 1;
    }

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (train_cmd->parsed())
            return cmd_train(train_corpus, train_cfg, train_config_file, train_frac,
                             train_out, out);
        if (eval_cmd->parsed())
            return cmd_eval(eval_corpus, eval_model, eval_out, eval_cutoffs, eval_retrieval,
                            eval_features, eval_seed, eval_seed_opt->count() > 0,
                            eval_workers, eval_workers_opt->count() > 0, out);
        if (export_cmd->parsed())
            return cmd_export(export_model, export_vocab, export_threshold, export_degree,
                              export_words, export_out, out);
        if (lda_cmd->parsed())
            return cmd_lda(lda_corpus, lda_cfg, lda_config_file, lda_frac, lda_out, out);
    } catch (const parse_error& e) {
        err << "parse error: " << e.what() << "\n";
        return 2;
    } catch (const io_error& e) {
        err << "io error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        err << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    err << "error: no subcommand\n";
    return 1;
}

}  // namespace topicembed
