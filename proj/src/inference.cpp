#include "topicembed/inference.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "topicembed/evaluation.hpp"

namespace topicembed {

double lr_schedule(long iter) {
    return std::pow(1.0 + static_cast<double>(iter), -0.9);
}

TopicSampler::TopicSampler(const TopKView& topk, const TruncatedTopicWords& words,
                           const ResidualSampler& residual)
    : topk_(topk), words_(words), residual_(residual) {
    double m = topk.default_value;
    for (double v : topk.values) m = std::max(m, v);
    top_exp_.resize(topk.values.size());
    for (std::size_t i = 0; i < topk.values.size(); ++i)
        top_exp_[i] = std::exp(topk.values[i] - m);
    default_exp_ = std::exp(topk.default_value - m);
    slot_of_.assign(words.num_topics(), -1);
    for (std::size_t i = 0; i < topk.indices.size(); ++i)
        slot_of_[topk.indices[i]] = static_cast<int>(i);
    marked_.assign(words.num_topics(), 0);
}

int TopicSampler::draw(WordId v, RandomStream& rng) const {
    support_.clear();
    mass_.clear();
    double mass_sum = 0.0;
    double support_c = 0.0;  // sum of c_k over the explicit support

    // Topics retaining v: exact b_kv, exact or default xi.
    const auto retained = words_.word_topics(v);
    for (const WordTopicEntry& e : retained) {
        const int slot = slot_of_[e.topic];
        const double xi_exp = slot >= 0 ? top_exp_[slot] : default_exp_;
        support_.push_back(e.topic);
        mass_.push_back(xi_exp * e.sample_weight);
        mass_sum += mass_.back();
        support_c += words_.residual_weight(e.topic);
        marked_[e.topic] = 1;
    }
    // Remaining top topics: lambda_kv is the implicit prior, so b_kv = c_k.
    for (std::size_t i = 0; i < topk_.indices.size(); ++i) {
        const int k = topk_.indices[i];
        if (marked_[k]) continue;
        support_.push_back(k);
        mass_.push_back(top_exp_[i] * words_.residual_weight(k));
        mass_sum += mass_.back();
        support_c += words_.residual_weight(k);
    }
    for (const WordTopicEntry& e : retained) marked_[e.topic] = 0;

    const double residual_mass =
        default_exp_ * std::max(0.0, words_.residual_total() - support_c);
    const double total = mass_sum + residual_mass;
    if (!(total > 0.0))
        throw std::runtime_error("sample_topic: non-positive sampling mass");

    const double u = rng.uniform() * total;
    if (u >= mass_sum && residual_mass > 0.0) {
        exclude_.assign(support_.begin(), support_.end());
        std::sort(exclude_.begin(), exclude_.end());
        return residual_.draw(exclude_, rng);
    }
    double cum = 0.0;
    for (std::size_t i = 0; i < support_.size(); ++i) {
        cum += mass_[i];
        if (u < cum) return support_[i];
    }
    return support_.back();
}

int sample_topic(WordId v, const TopKView& topk, const TruncatedTopicWords& words,
                 const ResidualSampler& residual, RandomStream& rng) {
    TopicSampler sampler(topk, words, residual);
    return sampler.draw(v, rng);
}

std::vector<double> update_gamma(std::span<const double> xi, const GlobalState& state,
                                 const ModelConfig& config) {
    const int K = state.num_topics;
    const int M = state.embed_dim;
    std::vector<double> weighted(M, 0.0);
    for (int k = 0; k < K; ++k) {
        const double* mu = state.topic_mean.data() + static_cast<std::size_t>(k) * M;
        const double w = xi[k];
        for (int m = 0; m < M; ++m) weighted[m] += w * mu[m];
    }
    std::vector<double> gamma = state.cov_doc.multiply(weighted);
    for (double& g : gamma) g *= config.weight_noise_precision;
    return gamma;
}

std::vector<double> grad_xi(std::span<const double> topic_counts,
                            std::span<const double> xi, double sigma,
                            std::span<const double> gamma, const GlobalState& state,
                            const ModelConfig& config, int T, RandomStream& rng) {
    const int K = state.num_topics;
    const double tau = config.weight_noise_precision;
    double n_total = 0.0;
    for (double c : topic_counts) n_total += c;

    std::vector<double> grad(K);
    for (int k = 0; k < K; ++k) {
        const double u_proj = dot(state.topic_mean_row(k), gamma);
        grad[k] = tau * (u_proj - xi[k]) + topic_counts[k];
    }

    std::vector<double> eta(K), prob, mc(K, 0.0);
    for (int t = 0; t < T; ++t) {
        for (int k = 0; k < K; ++k) eta[k] = xi[k] + sigma * rng.normal();
        softmax_into(eta, prob);
        for (int k = 0; k < K; ++k) mc[k] += prob[k];
    }
    const double scale = n_total / static_cast<double>(T);
    for (int k = 0; k < K; ++k) grad[k] -= scale * mc[k];
    return grad;
}

std::pair<DocState, LocalStepReport> local_step(const Document& doc,
                                                const GlobalState& state,
                                                const ModelConfig& config,
                                                RandomStream rng) {
    if (doc.empty()) throw std::invalid_argument("local_step: empty document");
    const int K = state.num_topics;
    const std::size_t N = doc.tokens.size();

    DocState ds;
    ds.weight_mean.assign(K, 0.0);
    ds.embed_mean.assign(state.embed_dim, 0.0);
    ds.weight_sd = 1.0 / std::sqrt(config.weight_noise_precision);
    ds.grad_sq_sum.assign(K, 0.0);
    ds.assignments.assign(N, 0);
    ds.topic_counts.assign(K, 0.0);

    LocalStepReport report;
    for (int it = 0; it < config.max_inner_iters; ++it) {
        TopKView topk = topk_select(ds.weight_mean, config.doc_topk);
        TopicSampler sampler(topk, state.words, state.residual);
        std::fill(ds.topic_counts.begin(), ds.topic_counts.end(), 0.0);
        for (std::size_t n = 0; n < N; ++n) {
            const int z = sampler.draw(doc.tokens[n], rng);
            ds.assignments[n] = z;
            ds.topic_counts[z] += 1.0;
        }

        ds.embed_mean = update_gamma(ds.weight_mean, state, config);

        std::vector<double> g =
            grad_xi(ds.topic_counts, ds.weight_mean, ds.weight_sd, ds.embed_mean,
                    state, config, config.mc_samples, rng);
        double delta = 0.0;
        for (int k = 0; k < K; ++k) {
            ds.grad_sq_sum[k] += g[k] * g[k];
            const double step = config.adagrad_step * g[k] /
                                std::sqrt(std::max(ds.grad_sq_sum[k], config.adagrad_floor));
            ds.weight_mean[k] += step;
            delta = std::max(delta, std::abs(step));
        }
        report.iterations = it + 1;
        report.final_delta = delta;
        if (delta < config.inner_tol) break;
    }
    report.elbo = estimate_local_elbo(ds, doc, state, config, rng, 1);
    return {std::move(ds), std::move(report)};
}

namespace {

struct DocResult {
    std::vector<double> xi;
    std::vector<double> gamma;
    std::vector<int> assignments;
};

MinibatchStats merge_results(const Corpus& corpus, std::span<const std::size_t> doc_ids,
                             const std::vector<DocResult>& results, int K, int M) {
    MinibatchStats stats;
    stats.weighted_embed.assign(static_cast<std::size_t>(K) * M, 0.0);
    stats.embed_outer = SymMatrix(M);
    stats.batch_docs = doc_ids.size();

    std::vector<std::vector<std::pair<WordId, double>>> acc(K);
    for (std::size_t i = 0; i < doc_ids.size(); ++i) {
        const DocResult& r = results[i];
        for (int k = 0; k < K; ++k) {
            const double w = r.xi[k];
            double* row = stats.weighted_embed.data() + static_cast<std::size_t>(k) * M;
            for (int m = 0; m < M; ++m) row[m] += w * r.gamma[m];
        }
        stats.embed_outer.add_outer(r.gamma);
        const auto& tokens = corpus.docs[doc_ids[i]].tokens;
        for (std::size_t n = 0; n < tokens.size(); ++n)
            acc[r.assignments[n]].emplace_back(tokens[n], 1.0);
        stats.token_count += tokens.size();
    }
    // Collapse duplicate (topic, word) pairs; the sums are integer counts, so
    // the result is exact regardless of accumulation order.
    for (int k = 0; k < K; ++k) {
        auto& entries = acc[k];
        std::sort(entries.begin(), entries.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        std::vector<std::pair<WordId, double>> merged;
        for (std::size_t i = 0; i < entries.size();) {
            std::size_t j = i;
            double count = 0.0;
            while (j < entries.size() && entries[j].first == entries[i].first) {
                count += entries[j].second;
                ++j;
            }
            merged.emplace_back(entries[i].first, count);
            i = j;
        }
        stats.counts.push_back(std::move(merged));
    }
    return stats;
}

std::vector<DocResult> run_local_steps(const Corpus& corpus,
                                       std::span<const std::size_t> doc_ids,
                                       const GlobalState& state, const ModelConfig& config,
                                       long iter, bool parallel) {
    std::vector<DocResult> results(doc_ids.size());
    std::vector<std::exception_ptr> errors(doc_ids.size());

    auto run_one = [&](std::size_t i) {
        try {
            const std::size_t d = doc_ids[i];
            RandomStream rng(config.seed,
                             stream_id(StreamTag::Doc, static_cast<std::uint64_t>(iter), d));
            auto [ds, report] = local_step(corpus.docs[d], state, config, rng);
            results[i] = {std::move(ds.weight_mean), std::move(ds.embed_mean),
                          std::move(ds.assignments)};
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };

    if (parallel) {
#ifdef _OPENMP
        int threads = config.workers > 0 ? config.workers : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
        for (std::size_t i = 0; i < doc_ids.size(); ++i) run_one(i);
#else
        for (std::size_t i = 0; i < doc_ids.size(); ++i) run_one(i);
#endif
    } else {
        for (std::size_t i = 0; i < doc_ids.size(); ++i) run_one(i);
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    return results;
}

}  // namespace

MinibatchStats process_minibatch(const Corpus& corpus, std::span<const std::size_t> doc_ids,
                                 const GlobalState& state, const ModelConfig& config,
                                 long iter) {
    auto results = run_local_steps(corpus, doc_ids, state, config, iter,
                                   config.workers != 1);
    return merge_results(corpus, doc_ids, results, state.num_topics, state.embed_dim);
}

MinibatchStats process_minibatch_reference(const Corpus& corpus,
                                           std::span<const std::size_t> doc_ids,
                                           const GlobalState& state,
                                           const ModelConfig& config, long iter) {
    auto results = run_local_steps(corpus, doc_ids, state, config, iter, false);
    return merge_results(corpus, doc_ids, results, state.num_topics, state.embed_dim);
}

void global_step(const MinibatchStats& stats, GlobalState& state, double rate,
                 std::size_t D, const ModelConfig& config) {
    const int K = state.num_topics;
    const int M = state.embed_dim;
    const double tau = config.weight_noise_precision;
    const double scale = static_cast<double>(D) / static_cast<double>(stats.batch_docs);
    const double beta = config.word_prior;

    // Sigma^(u)* = [alpha I + tau (D/B) sum_d (Sigma^(a) + gamma gamma^T)]^-1
    SymMatrix target = SymMatrix::identity(M, config.topic_prior_precision);
    {
        SymMatrix sum = state.cov_doc;
        sum *= static_cast<double>(stats.batch_docs);
        sum += stats.embed_outer;
        sum *= tau * scale;
        target += sum;
    }
    target.symmetrize();
    const SymMatrix cov_topic_star = sym_inverse(target);

    const double keep = 1.0 - rate;
    for (int k = 0; k < K; ++k) {
        std::span<const double> sum_row{
            stats.weighted_embed.data() + static_cast<std::size_t>(k) * M,
            static_cast<std::size_t>(M)};
        std::vector<double> mu_star = cov_topic_star.multiply(sum_row);
        double* mu = state.topic_mean.data() + static_cast<std::size_t>(k) * M;
        for (int m = 0; m < M; ++m)
            mu[m] = keep * mu[m] + rate * (tau * scale * mu_star[m]);
    }
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < M; ++j)
            state.cov_topic.at(i, j) =
                keep * state.cov_topic.at(i, j) + rate * cov_topic_star.at(i, j);
    state.cov_topic.symmetrize();

    // lambda rows: blend toward beta + scaled counts over the union of the
    // old retained entries and the minibatch support.
    std::vector<std::vector<std::pair<WordId, double>>> raw(K);
    for (int k = 0; k < K; ++k) {
        const auto old_row = state.words.topic_row(k);
        const auto& fresh = stats.counts[k];
        auto& out = raw[k];
        out.reserve(old_row.size() + fresh.size());
        std::size_t i = 0, j = 0;
        while (i < old_row.size() || j < fresh.size()) {
            WordId w;
            double old_val = beta, count = 0.0;
            if (j >= fresh.size() || (i < old_row.size() && old_row[i].word < fresh[j].first)) {
                w = old_row[i].word;
                old_val = old_row[i].weight;
                ++i;
            } else if (i >= old_row.size() || fresh[j].first < old_row[i].word) {
                w = fresh[j].first;
                count = fresh[j].second;
                ++j;
            } else {
                w = old_row[i].word;
                old_val = old_row[i].weight;
                count = fresh[j].second;
                ++i;
                ++j;
            }
            out.emplace_back(w, keep * old_val + rate * (beta + scale * count));
        }
    }
    state.words = rebuild_truncation(std::move(raw), config.topic_topwords,
                                     config.word_min_topics, beta, state.vocab_size);
    state.residual = ResidualSampler(state.words.residual_weights());
    state.cov_doc = doc_covariance(state, config);
    state.iteration += 1;
}

namespace {

// Sorted sparse count vector of one document plus its Euclidean norm.
struct DocProfile {
    std::vector<std::pair<WordId, double>> counts;
    double norm = 0.0;
};

DocProfile doc_profile(const Document& doc) {
    DocProfile p;
    std::vector<WordId> tokens(doc.tokens);
    std::sort(tokens.begin(), tokens.end());
    for (std::size_t i = 0; i < tokens.size();) {
        std::size_t j = i;
        while (j < tokens.size() && tokens[j] == tokens[i]) ++j;
        p.counts.emplace_back(tokens[i], static_cast<double>(j - i));
        i = j;
    }
    for (const auto& [w, c] : p.counts) p.norm += c * c;
    p.norm = std::sqrt(p.norm);
    return p;
}

double cosine(const DocProfile& a, const DocProfile& b) {
    double dot = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.counts.size() && j < b.counts.size()) {
        if (a.counts[i].first < b.counts[j].first) ++i;
        else if (b.counts[j].first < a.counts[i].first) ++j;
        else dot += a.counts[i++].second * b.counts[j++].second;
    }
    return dot / (a.norm * b.norm);
}

}  // namespace

void seed_topics_from_docs(GlobalState& state, const Corpus& corpus,
                           std::span<const std::size_t> pool, int per_topic,
                           const ModelConfig& config, RandomStream& rng) {
    if (per_topic < 1) throw std::invalid_argument("seed_topics_from_docs: per_topic >= 1");
    if (pool.empty()) throw std::invalid_argument("seed_topics_from_docs: empty pool");
    const int K = state.num_topics;
    const double beta = config.word_prior;
    const std::size_t N = pool.size();

    std::vector<DocProfile> profiles(N);
    for (std::size_t i = 0; i < N; ++i) profiles[i] = doc_profile(corpus.docs[pool[i]]);

    // Farthest-first anchors: the only random draw picks anchor 0; anchor k
    // minimizes the best cosine similarity to the anchors chosen so far
    // (ties toward the smaller pool position).  Spread anchors keep initial
    // rows from landing on the same dominant topic.
    std::vector<char> used(N, 0);
    std::vector<double> closest(N, -1.0);
    std::vector<std::size_t> anchors(K);
    std::size_t free_count = N;
    auto take = [&](std::size_t i) {
        used[i] = 1;
        if (--free_count == 0) {  // demand exceeds the pool: recycle everything
            std::fill(used.begin(), used.end(), 0);
            free_count = N;
        }
    };
    anchors[0] = rng.uniform_below(N);
    take(anchors[0]);
    for (int k = 1; k < K; ++k) {
        for (std::size_t i = 0; i < N; ++i)
            closest[i] = std::max(closest[i], cosine(profiles[i], profiles[anchors[k - 1]]));
        std::size_t best = N;
        for (std::size_t i = 0; i < N; ++i) {
            if (used[i]) continue;
            if (best == N || closest[i] < closest[best]) best = i;
        }
        anchors[k] = best;
        take(best);
    }

    // Each row blends its anchor with the per_topic - 1 docs most similar to
    // it, giving the row mass without re-mixing distant topics.
    std::vector<std::vector<std::pair<WordId, double>>> raw(K);
    std::vector<double> row(state.vocab_size, 0.0);
    for (int k = 0; k < K; ++k) {
        std::fill(row.begin(), row.end(), 0.0);
        std::vector<WordId> touched;
        auto add_doc = [&](std::size_t i) {
            for (const auto& [w, c] : profiles[i].counts) {
                if (row[w] == 0.0) touched.push_back(w);
                row[w] += c;
            }
        };
        add_doc(anchors[k]);
        for (int s = 1; s < per_topic; ++s) {
            std::size_t best = N;
            double best_sim = -2.0;
            for (std::size_t i = 0; i < N; ++i) {
                if (used[i]) continue;
                const double sim = cosine(profiles[i], profiles[anchors[k]]);
                if (sim > best_sim) {
                    best_sim = sim;
                    best = i;
                }
            }
            add_doc(best);
            take(best);
        }
        std::sort(touched.begin(), touched.end());
        raw[k].reserve(touched.size());
        for (WordId w : touched) raw[k].emplace_back(w, beta + row[w]);
    }
    state.words = rebuild_truncation(std::move(raw), config.topic_topwords,
                                     config.word_min_topics, beta, state.vocab_size);
    state.residual = ResidualSampler(state.words.residual_weights());
}

TrainResult train(const Corpus& corpus, const ModelConfig& raw_config,
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

    std::vector<std::size_t> trainable;
    for (std::size_t d = 0; d < corpus.docs.size(); ++d)
        if (!corpus.docs[d].empty()) trainable.push_back(d);
    if (trainable.empty())
        throw std::invalid_argument("train: corpus has no non-empty documents");
    const std::size_t D = trainable.size();
    const std::size_t B = std::min<std::size_t>(config.batch_size, D);
    const long max_iters = static_cast<long>(
        (static_cast<std::size_t>(config.max_epochs) * D + B - 1) / B);

    RandomStream init_rng(config.seed, stream_id(StreamTag::Init, 0));
    TrainResult result;
    result.state = init_params(config, corpus.vocab_size(), init_rng);
    if (config.init_doc_seeds > 0)
        seed_topics_from_docs(result.state, corpus, trainable, config.init_doc_seeds,
                              config, init_rng);

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

        MinibatchStats stats =
            process_minibatch(corpus, batch, result.state, config, iter);
        global_step(stats, result.state, rate, D, config);

        if ((iter + 1) % config.eval_every == 0 || iter + 1 == max_iters) {
            const double ll = heldout_perword_ll(result.state, heldout, config, config.seed);
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

double estimate_local_elbo(const DocState& doc_state, const Document& doc,
                           const GlobalState& state, const ModelConfig& config,
                           RandomStream rng, int samples) {
    const int K = state.num_topics;
    const int M = state.embed_dim;
    const double tau = config.weight_noise_precision;
    const double sigma = doc_state.weight_sd;
    const std::span<const double> xi(doc_state.weight_mean);
    const std::span<const double> gamma(doc_state.embed_mean);

    // E[log p(eta | U, a)]: quadratic in (xi - U~ gamma) plus the variance
    // load of q(eta), q(U), and q(a).
    double quad = 0.0;
    double mu_cov_mu = 0.0;
    for (int k = 0; k < K; ++k) {
        const auto mu = state.topic_mean_row(k);
        const double diff = xi[k] - dot(mu, gamma);
        quad += diff * diff + sigma * sigma;
        mu_cov_mu += dot(mu, state.cov_doc.multiply(mu));
    }
    double gamma_cov_gamma = dot(gamma, state.cov_topic.multiply(gamma));
    double trace_product = 0.0;
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < M; ++j)
            trace_product += state.cov_topic.at(i, j) * state.cov_doc.at(i, j);
    const double two_pi = 6.283185307179586477;
    double elbo = -0.5 * tau *
                      (quad + K * (gamma_cov_gamma + trace_product) + mu_cov_mu) +
                  0.5 * K * std::log(tau / two_pi);

    // E[log p(z | eta)] with hard counts; logsumexp estimated by sampling.
    double n_total = 0.0;
    for (int k = 0; k < K; ++k) {
        elbo += doc_state.topic_counts[k] * xi[k];
        n_total += doc_state.topic_counts[k];
    }
    if (n_total > 0.0) {
        std::vector<double> eta(K);
        double lse_sum = 0.0;
        for (int s = 0; s < samples; ++s) {
            for (int k = 0; k < K; ++k) eta[k] = xi[k] + sigma * rng.normal();
            lse_sum += logsumexp(eta);
        }
        elbo -= n_total * lse_sum / static_cast<double>(samples);
    }

    // E[log p(w | z, phi)] at the hard assignments.
    for (std::size_t n = 0; n < doc.tokens.size(); ++n) {
        const int z = doc_state.assignments[n];
        elbo += digamma(state.words.weight(z, doc.tokens[n])) -
                digamma(state.words.total(z));
    }

    // Entropy of q(eta).
    elbo += 0.5 * K * std::log(two_pi * std::exp(1.0) * sigma * sigma);
    return elbo;
}

}  // namespace topicembed
