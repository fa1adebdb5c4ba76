#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "topicembed/corpus.hpp"
#include "topicembed/state.hpp"

namespace topicembed {

// Sums a minibatch contributes to the global step.  embed_outer holds only
// sum_d gamma_d gamma_d^T; the shared B * Sigma^(a) part is added by
// global_step from the state the minibatch was computed against.
struct MinibatchStats {
    std::vector<double> weighted_embed;  // sum_d xi_dk gamma_d, K x M
    SymMatrix embed_outer;               // sum_d gamma_d gamma_d^T, M x M
    std::vector<std::vector<std::pair<WordId, double>>> counts;  // per topic, sorted by word
    std::size_t batch_docs = 0;
    std::size_t token_count = 0;
};

struct LocalStepReport {
    int iterations = 0;
    double final_delta = 0.0;  // max |delta xi| of the last inner step
    double elbo = 0.0;         // one-sample local ELBO estimate
};

// (1 + iter)^-0.9
double lr_schedule(long iter);

// Per-inner-iteration sampler state: exp(xi - max) for the top topics and
// the default, bound to the truncation structures.  Build once per TopKView,
// then draw per token at O(K_s + deg(v)).  Not shareable across threads.
class TopicSampler {
public:
    TopicSampler(const TopKView& topk, const TruncatedTopicWords& words,
                 const ResidualSampler& residual);
    int draw(WordId v, RandomStream& rng) const;

private:
    const TopKView& topk_;
    const TruncatedTopicWords& words_;
    const ResidualSampler& residual_;
    std::vector<double> top_exp_;     // aligned with topk_.indices
    double default_exp_ = 0.0;
    std::vector<int> slot_of_;        // topic -> position in topk_, -1 if absent
    mutable std::vector<char> marked_;     // per-token retained flags
    mutable std::vector<int> support_;     // scratch: candidate topic ids
    mutable std::vector<double> mass_;     // scratch: aligned weights
    mutable std::vector<int> exclude_;     // scratch: sorted support for rejection
};

// One draw from the sparse approximation of the assignment posterior
// q(z = k) proportional to exp(xi_k) * exp(psi(lambda_kv) - psi(Lambda_k)).
int sample_topic(WordId v, const TopKView& topk, const TruncatedTopicWords& words,
                 const ResidualSampler& residual, RandomStream& rng);

// gamma_d = tau * Sigma^(a) * (sum_k xi_dk mu_k), exact, O(KM).
std::vector<double> update_gamma(std::span<const double> xi, const GlobalState& state,
                                 const ModelConfig& config);

// tau (U~ gamma_d - xi) + n_d - (N_d / T) sum_t softmax(xi + sigma * eps_t).
std::vector<double> grad_xi(std::span<const double> topic_counts,
                            std::span<const double> xi, double sigma,
                            std::span<const double> gamma, const GlobalState& state,
                            const ModelConfig& config, int T, RandomStream& rng);

// Coordinate ascent on one document: sample assignments over the TopKView
// support, refresh gamma, take one Adagrad step on xi; repeat until the xi
// change drops below inner_tol or max_inner_iters is hit.
std::pair<DocState, LocalStepReport> local_step(const Document& doc,
                                                const GlobalState& state,
                                                const ModelConfig& config,
                                                RandomStream rng);

// Local steps for the docs of one minibatch.  The parallel version runs them
// under OpenMP; both accumulate per-document results in document order, so
// their outputs are identical for any worker count.
MinibatchStats process_minibatch(const Corpus& corpus, std::span<const std::size_t> doc_ids,
                                 const GlobalState& state, const ModelConfig& config,
                                 long iter);
MinibatchStats process_minibatch_reference(const Corpus& corpus,
                                           std::span<const std::size_t> doc_ids,
                                           const GlobalState& state,
                                           const ModelConfig& config, long iter);

// Blends mu, Sigma^(u), lambda toward the stochastic optima formed from
// stats scaled by D/B, then recomputes Sigma^(a) and the truncation
// structures.  D is the count of trainable (non-empty) documents.
void global_step(const MinibatchStats& stats, GlobalState& state, double rate,
                 std::size_t D, const ModelConfig& config);

// Replaces each lambda row with beta plus the token counts of per_topic
// documents from pool: one anchor per topic picked farthest-first by cosine
// distance over sparse count vectors, padded with the anchor's nearest
// unused neighbours.  Data-aligned, mutually distant rows break the
// near-symmetry of the noise init, which otherwise invites merged-topic
// optima.  rng supplies a single draw for anchor 0, so the result is a pure
// function of that one stream position.
void seed_topics_from_docs(GlobalState& state, const Corpus& corpus,
                           std::span<const std::size_t> pool, int per_topic,
                           const ModelConfig& config, RandomStream& rng);

struct TraceRow {
    long iteration = 0;
    double rate = 0.0;
    double heldout_ll = 0.0;
    double seconds = 0.0;
};

struct TrainResult {
    GlobalState state;
    std::vector<TraceRow> trace;
    bool converged = false;
};

// Full SVI loop: uniform minibatches without replacement per step, parallel
// local steps, global step, heldout evaluation every eval_every minibatches.
// Stops when |delta heldout LL| < outer_tol or after max_epochs sweeps.
TrainResult train(const Corpus& corpus, const ModelConfig& config, const Corpus& heldout);

// Monte-Carlo estimate of the per-document ELBO terms that depend on the
// local state: Gaussian prior around U~ gamma, assignment and word terms
// with hard counts, and the q(eta) entropy.  Diagnostic only.
double estimate_local_elbo(const DocState& doc_state, const Document& doc,
                           const GlobalState& state, const ModelConfig& config,
                           RandomStream rng, int samples);

}  // namespace topicembed
