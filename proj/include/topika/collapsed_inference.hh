// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "topika/algorithm.hh"
#include "topika/corpus.hh"
#include "topika/model_state.hh"
#include "topika/seeding.hh"

namespace topika {

// Token-level state of a collapsed learner. Which members are populated
// depends on the algorithm: `assignments` for CGS, `resp` for CVB/CVB0,
// `variances` for CVB only.
struct CollapsedState {
  TokenStream tokens;
  CountMatrices counts;
  Responsibilities resp;
  VarianceCounts variances;
  TopicAssignments assignments;
};

CollapsedState init_collapsed(const Corpus& corpus, std::size_t K, Algorithm algorithm,
                              std::uint64_t seed);

// Unnormalized conditional (N_wk + eta) / (N_k + W eta) * (N_kj + alpha) on
// the counts as given (callers exclude the current token first). Returns the sum.
double cgs_conditional(std::uint32_t word, std::uint32_t doc, const CountMatrices& cm,
                       const Hyperparams& h, std::span<double> out);
double cvb0_conditional(std::uint32_t word, std::uint32_t doc, const CountMatrices& cm,
                        const Hyperparams& h, std::span<double> out);

// Removes token t from the counts, samples a topic from the conditional, adds
// the token back under that topic and returns it.
std::uint32_t cgs_step(std::size_t t, CollapsedState& state, const Hyperparams& h, Rng& rng);

// Replaces token t's responsibility by the normalized conditional, updating
// counts in place. With remove_current = false the token's own mass stays in
// the counts while the conditional is computed. Returns max |change|.
double cvb0_step(std::size_t t, CollapsedState& state, const Hyperparams& h,
                 bool remove_current = true);

// Second-order update: the CVB0 conditional times
// exp(-V_kj / 2(N_kj + alpha)^2 - V_wk / 2(N_wk + eta)^2 + V_k / 2(N_k + W eta)^2).
// The exponent is capped at +-50; `capped` is incremented when that happens.
double cvb_step(std::size_t t, CollapsedState& state, const Hyperparams& h, std::size_t& capped);

struct CollapsedSweepStats {
  double max_change = 0.0;      // CVB/CVB0
  std::size_t moved = 0;        // CGS: tokens whose topic changed
  std::size_t capped = 0;       // CVB exponent caps
};

// One in-place pass over all tokens in document-major order.
CollapsedSweepStats collapsed_sweep(Algorithm algorithm, CollapsedState& state,
                                    const Hyperparams& h, Rng& rng, bool remove_current = true);

struct ParallelOptions {
  std::size_t workers = 4;
  std::size_t sync_every = 4096;  // tokens per worker between merges
};

struct ParallelSweepStats {
  double max_change = 0.0;
  std::size_t merges = 0;
  // Largest |sum_k n_k - N| / N seen right after any merge.
  double max_conservation_error = 0.0;
};

// CVB0 over document shards. Each worker reads the shared counts plus its
// private word-topic delta, never removes the current token, and owns the
// document counts of its shard. Deltas are folded into the shared counts
// every `sync_every` tokens per worker.
ParallelSweepStats parallel_cvb0_sweep(CollapsedState& state, const Hyperparams& h,
                                       const ParallelOptions& options);

struct CallenResult {
  Matrix marginals;                // tokens x K, exact P(z_t = k | x)
  double identity_residual = 0.0;  // max |E[conditional] - marginal|
  std::size_t configurations = 0;
};

inline constexpr std::size_t kMaxCallenConfigurations = 10'000'000;

// Exact token marginals of the collapsed posterior by enumerating all K^N
// assignments, plus a check that each marginal equals the posterior
// expectation of the normalized CGS conditional.
CallenResult callen_oracle(const Corpus& corpus, std::size_t K, const Hyperparams& h);

// Empirical P(z_t = k) from a CGS chain: fraction of the `sweeps` post-burn-in
// sweeps in which token t holds topic k (tokens x K).
Matrix cgs_marginals(const Corpus& corpus, std::size_t K, const Hyperparams& h,
                     std::size_t burn_in, std::size_t sweeps, std::uint64_t seed);

}  // namespace topika
