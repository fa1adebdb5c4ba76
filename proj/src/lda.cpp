#include "topicembed/lda.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "topicembed/manifest.hpp"
#include "topicembed/numerics.hpp"
#include "topicembed/state.hpp"

namespace topicembed {

std::vector<double> lda_elog_word(const LdaState& state) {
    const int K = state.num_topics;
    const std::size_t V = state.vocab_size;
    std::vector<double> elog(static_cast<std::size_t>(K) * V);
    for (int k = 0; k < K; ++k) {
        const double* row = state.word_weights.data() + static_cast<std::size_t>(k) * V;
        double total = 0.0;
        for (std::size_t v = 0; v < V; ++v) total += row[v];
        const double psi_total = digamma(total);
        double* out = elog.data() + static_cast<std::size_t>(k) * V;
        for (std::size_t v = 0; v < V; ++v) out[v] = digamma(row[v]) - psi_total;
    }
    return elog;
}

namespace {

// Distinct words of a document with their counts, sorted by word id.
std::vector<std::pair<WordId, double>> word_counts(const Document& doc) {
    std::vector<WordId> sorted = doc.tokens;
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::pair<WordId, double>> counts;
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
        counts.emplace_back(sorted[i], static_cast<double>(j - i));
        i = j;
    }
    return counts;
}

std::uint64_t doc_signature(const Document& doc) {
    return fnv1a64(doc.tokens.data(), doc.tokens.size() * sizeof(WordId));
}

}  // namespace

namespace {

// Core coordinate ascent shared by the public fit and the trainer.  On
// return, final_kappa (distinct-words x K) holds the responsibilities of the
// last iteration weighted by the word counts.
std::vector<double> doc_fit_core(const LdaState& state, const std::vector<double>& elog_word,
                                 const std::vector<std::pair<WordId, double>>& counts,
                                 double n_total, const ModelConfig& config,
                                 std::vector<double>* final_kappa) {
    const int K = state.num_topics;
    const std::size_t V = state.vocab_size;
    const double a0 = state.doc_prior;

    std::vector<double> gamma(K, a0 + n_total / K);
    std::vector<double> elog_theta(K), kappa(K), gamma_next(K);
    if (final_kappa) final_kappa->assign(counts.size() * K, 0.0);

    const double change_scale = a0 + n_total / K;
    for (int it = 0; it < config.max_inner_iters; ++it) {
        double gamma_total = 0.0;
        for (double g : gamma) gamma_total += g;
        const double psi_total = digamma(gamma_total);
        for (int k = 0; k < K; ++k) elog_theta[k] = digamma(gamma[k]) - psi_total;

        std::fill(gamma_next.begin(), gamma_next.end(), a0);
        for (std::size_t i = 0; i < counts.size(); ++i) {
            const auto [v, c] = counts[i];
            for (int k = 0; k < K; ++k)
                kappa[k] = elog_theta[k] + elog_word[static_cast<std::size_t>(k) * V + v];
            softmax_into(kappa, kappa);  // same-size aliasing is safe
            for (int k = 0; k < K; ++k) {
                gamma_next[k] += c * kappa[k];
                if (final_kappa) (*final_kappa)[i * K + k] = c * kappa[k];
            }
        }
        double mean_change = 0.0;
        for (int k = 0; k < K; ++k) mean_change += std::abs(gamma_next[k] - gamma[k]);
        mean_change /= K;
        gamma.swap(gamma_next);
        if (mean_change < config.inner_tol * change_scale) break;
    }
    return gamma;
}

}  // namespace

std::vector<double> lda_doc_fit(const LdaState& state, const std::vector<double>& elog_word,
                                const Document& doc, const ModelConfig& config,
                                std::vector<double>* expected_counts) {
    const auto counts = word_counts(doc);
    std::vector<double> final_kappa;
    std::vector<double> gamma =
        doc_fit_core(state, elog_word, counts, static_cast<double>(doc.tokens.size()),
                     config, expected_counts ? &final_kappa : nullptr);
    if (expected_counts) {
        const std::size_t V = state.vocab_size;
        const std::size_t K = static_cast<std::size_t>(state.num_topics);
        for (std::size_t i = 0; i < counts.size(); ++i)
            for (std::size_t k = 0; k < K; ++k)
                (*expected_counts)[k * V + counts[i].first] += final_kappa[i * K + k];
    }
    return gamma;
}

namespace {

LdaState lda_init(const ModelConfig& config, std::size_t V) {
    LdaState state;
    state.num_topics = config.num_topics;
    state.vocab_size = V;
    state.doc_prior = 1.0 / config.num_topics;
    state.iteration = 0;
    RandomStream rng(config.seed, stream_id(StreamTag::Init, 1));
    state.word_weights.resize(static_cast<std::size_t>(config.num_topics) * V);
    for (double& x : state.word_weights) x = config.word_prior + rng.uniform();
    return state;
}

}  // namespace

LdaTrainResult lda_train(const Corpus& corpus, const ModelConfig& raw_config,
                         const Corpus& heldout) {
    ModelConfig config = resolve_config(raw_config, corpus.vocab_size());
    {
        const auto errors = validate(config);
        if (!errors.empty()) {
            std::string joined;
            for (const auto& e : errors) {
                if (!joined.empty()) joined += "; ";
                joined += e;
            }
            throw std::invalid_argument(joined);
        }
    }
    const std::size_t V = corpus.vocab_size();
    const int K = config.num_topics;

    std::vector<std::size_t> trainable;
    for (std::size_t d = 0; d < corpus.docs.size(); ++d)
        if (!corpus.docs[d].empty()) trainable.push_back(d);
    if (trainable.empty())
        throw std::invalid_argument("lda_train: corpus has no non-empty documents");
    const std::size_t D = trainable.size();
    const std::size_t B = std::min<std::size_t>(config.batch_size, D);
    const long max_iters = static_cast<long>(
        (static_cast<std::size_t>(config.max_epochs) * D + B - 1) / B);

    LdaTrainResult result;
    result.state = lda_init(config, V);

    const auto t0 = std::chrono::steady_clock::now();
    double prev_ll = 0.0;
    bool have_prev = false;
    std::vector<std::size_t> pool(trainable);
    std::vector<std::size_t> batch(B);

    for (long iter = 0; iter < max_iters; ++iter) {
        const double rate = lr_schedule(iter);
        RandomStream pick(config.seed,
                          stream_id(StreamTag::Minibatch, static_cast<std::uint64_t>(iter)));
        std::copy(trainable.begin(), trainable.end(), pool.begin());
        for (std::size_t i = 0; i < B; ++i) {
            const std::size_t j = i + pick.uniform_below(D - i);
            std::swap(pool[i], pool[j]);
            batch[i] = pool[i];
        }

        const std::vector<double> elog = lda_elog_word(result.state);

        // Per-document responsibilities kept sparse (distinct words x K) and
        // merged in document order, so the result does not depend on the
        // worker count.
        std::vector<std::vector<std::pair<WordId, double>>> doc_words(B);
        std::vector<std::vector<double>> doc_kappa(B);
        {
            auto fit_one = [&](std::size_t i) {
                doc_words[i] = word_counts(corpus.docs[batch[i]]);
                doc_fit_core(result.state, elog, doc_words[i],
                             static_cast<double>(corpus.docs[batch[i]].tokens.size()),
                             config, &doc_kappa[i]);
            };
#ifdef _OPENMP
            if (config.workers != 1) {
                int threads = config.workers > 0 ? config.workers : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
                for (std::size_t i = 0; i < B; ++i) fit_one(i);
            } else {
                for (std::size_t i = 0; i < B; ++i) fit_one(i);
            }
#else
            for (std::size_t i = 0; i < B; ++i) fit_one(i);
#endif
        }

        const double scale = static_cast<double>(D) / static_cast<double>(B);
        const double keep = 1.0 - rate;
        std::vector<double> acc(static_cast<std::size_t>(K) * V, 0.0);
        for (std::size_t i = 0; i < B; ++i)
            for (std::size_t w = 0; w < doc_words[i].size(); ++w)
                for (int k = 0; k < K; ++k)
                    acc[static_cast<std::size_t>(k) * V + doc_words[i][w].first] +=
                        doc_kappa[i][w * K + k];
        for (std::size_t x = 0; x < acc.size(); ++x)
            result.state.word_weights[x] =
                keep * result.state.word_weights[x] +
                rate * (config.word_prior + scale * acc[x]);
        result.state.iteration += 1;

        if ((iter + 1) % config.eval_every == 0 || iter + 1 == max_iters) {
            const double ll = lda_heldout_ll(result.state, heldout, config, config.seed);
            const double secs =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            result.trace.push_back({iter + 1, rate, ll, secs});
            if (have_prev && std::abs(ll - prev_ll) < config.outer_tol) {
                result.converged = true;
                break;
            }
            prev_ll = ll;
            have_prev = true;
        }
    }
    return result;
}

double lda_heldout_ll(const LdaState& state, const Corpus& test,
                      const ModelConfig& config, std::uint64_t seed) {
    const int K = state.num_topics;
    const std::size_t V = state.vocab_size;
    const std::vector<double> elog = lda_elog_word(state);

    // Row totals for the mean word distributions.
    std::vector<double> totals(K, 0.0);
    for (int k = 0; k < K; ++k) {
        const double* row = state.word_weights.data() + static_cast<std::size_t>(k) * V;
        for (std::size_t v = 0; v < V; ++v) totals[k] += row[v];
    }

    double ll_sum = 0.0;
    std::size_t token_count = 0;
    for (const Document& doc : test.docs) {
        if (doc.tokens.size() < 2) continue;
        const std::uint64_t sig = doc_signature(doc);
        auto [observed, held] = split_document(doc, 0.8, splitmix64(seed ^ sig));

        std::vector<double> gamma = lda_doc_fit(state, elog, observed, config);
        double gamma_total = 0.0;
        for (double g : gamma) gamma_total += g;

        for (WordId v : held.tokens) {
            double p = 0.0;
            for (int k = 0; k < K; ++k)
                p += (gamma[k] / gamma_total) * (state.weight(k, v) / totals[k]);
            ll_sum += std::log(p);
            ++token_count;
        }
    }
    if (token_count == 0)
        throw std::invalid_argument("heldout eval: no documents with >= 2 tokens");
    return ll_sum / static_cast<double>(token_count);
}

FeatureMatrix lda_features(const LdaState& state, const Corpus& corpus,
                           const ModelConfig& config) {
    const int K = state.num_topics;
    const std::vector<double> elog = lda_elog_word(state);
    FeatureMatrix out;
    out.rows = corpus.num_docs();
    out.cols = static_cast<std::size_t>(K);
    out.values.assign(out.rows * out.cols, 0.0);
    out.labels.resize(out.rows);
    for (std::size_t d = 0; d < corpus.num_docs(); ++d) {
        const Document& doc = corpus.docs[d];
        out.labels[d] = doc.label.value_or(-1);
        double* row = out.values.data() + d * out.cols;
        if (doc.empty()) {
            std::fill(row, row + K, 1.0 / K);
            continue;
        }
        std::vector<double> gamma = lda_doc_fit(state, elog, doc, config);
        double total = 0.0;
        for (double g : gamma) total += g;
        for (int k = 0; k < K; ++k) row[k] = gamma[k] / total;
    }
    return out;
}

void lda_save(const LdaState& state, const ModelConfig& config, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write model file: " + path);
    out << "topicembed-model lda 1\n";
    out << "config";
    for (const auto& [k, v] : config_fields(config)) out << ' ' << k << '=' << v;
    out << '\n';
    out << "dims " << state.num_topics << ' ' << state.vocab_size << ' '
        << state.iteration << ' ' << format_double(state.doc_prior) << '\n';
    for (int k = 0; k < state.num_topics; ++k) {
        out << "lambda " << k;
        const double* row = state.word_weights.data() +
                            static_cast<std::size_t>(k) * state.vocab_size;
        for (std::size_t v = 0; v < state.vocab_size; ++v)
            out << ' ' << format_double(row[v]);
        out << '\n';
    }
    out << "end\n";
    if (!out) throw io_error("write failed: " + path);
}

LoadedLdaModel lda_load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open model file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw io_error("empty model file: " + path);
    {
        std::istringstream ss(line);
        std::string magic, kind;
        int version = 0;
        if (!(ss >> magic >> kind >> version) || magic != "topicembed-model")
            throw io_error(path + ": not a model file");
        if (kind != "lda")
            throw io_error(path + ": format tag mismatch: expected lda model, found '" +
                           kind + "'");
        if (version != 1)
            throw io_error(path + ": unsupported model version " + std::to_string(version));
    }

    LoadedLdaModel loaded;
    if (!std::getline(in, line)) throw io_error(path + ": truncated model file");
    {
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag != "config") throw io_error(path + ": expected config line");
        std::vector<std::pair<std::string, std::string>> kv;
        std::string tok;
        while (ss >> tok) {
            std::size_t eq = tok.find('=');
            if (eq == std::string::npos)
                throw io_error(path + ": malformed config token '" + tok + "'");
            kv.emplace_back(tok.substr(0, eq), tok.substr(eq + 1));
        }
        loaded.config = config_from_fields(kv);
    }

    LdaState& state = loaded.state;
    if (!std::getline(in, line)) throw io_error(path + ": truncated model file");
    {
        std::istringstream ss(line);
        std::string tag;
        if (!(ss >> tag >> state.num_topics >> state.vocab_size >> state.iteration >>
              state.doc_prior) ||
            tag != "dims")
            throw io_error(path + ": bad dims line");
    }
    state.word_weights.resize(static_cast<std::size_t>(state.num_topics) * state.vocab_size);
    for (int k = 0; k < state.num_topics; ++k) {
        if (!std::getline(in, line)) throw io_error(path + ": truncated model file");
        std::istringstream ss(line);
        std::string tag;
        int idx = -1;
        if (!(ss >> tag >> idx) || tag != "lambda" || idx != k)
            throw io_error(path + ": corrupt lambda section");
        double* row = state.word_weights.data() + static_cast<std::size_t>(k) * state.vocab_size;
        for (std::size_t v = 0; v < state.vocab_size; ++v)
            if (!(ss >> row[v]))
                throw io_error(path + ": corrupt lambda row " + std::to_string(k));
    }
    if (!std::getline(in, line) || line != "end")
        throw io_error(path + ": truncated model file (missing end marker)");
    return loaded;
}

}  // namespace topicembed
