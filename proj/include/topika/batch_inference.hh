// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "topika/algorithm.hh"
#include "topika/corpus.hh"
#include "topika/model_state.hh"

namespace topika {

// Entry-level updates. Each writes the normalized K-distribution for one
// unique (w, j) entry into `out`, reading counts from the previous sweep.

// gamma_k ∝ N_wk N_kj / N_k. A topic with N_k = 0 contributes 0; if every
// topic contributes 0 the result is uniform and the function returns false.
bool ml_update(const Entry& entry, const CountMatrices& cm, std::span<double> out);

// gamma_k ∝ (N_wk + eta - 1)(N_kj + alpha - 1) / (N_k + W eta - W); alpha, eta > 1.
void map_update(const Entry& entry, const CountMatrices& cm, const Hyperparams& h,
                std::span<double> out);

// gamma_k ∝ exp(psi(N_wk + eta)) / exp(psi(N_k + W eta)) * exp(psi(N_kj + alpha)).
void vb_update(const Entry& entry, const CountMatrices& cm, const Hyperparams& h,
               std::span<double> out);

// Diagnostic first-order form of vb_update:
// gamma_k ∝ (N_wk + eta - 0.5)(N_kj + alpha - 0.5) / (N_k + W eta - 0.5),
// with factors below 1e-12 clamped to 1e-12.
void vb_approx_update(const Entry& entry, const CountMatrices& cm, const Hyperparams& h,
                      std::span<double> out);

struct BatchSweepStats {
  double objective = 0.0;   // see batch_objective; NaN when not computed
  double max_change = 0.0;  // max |gamma_new - gamma_old| over all entries
  std::size_t dead_topics = 0;
  std::size_t degenerate_entries = 0;
};

// One synchronous sweep: every entry distribution is recomputed against the
// frozen counts of the previous sweep, then counts are rebuilt from the new
// responsibilities.
BatchSweepStats batch_sweep(Algorithm algorithm, const Corpus& corpus, Responsibilities& resp,
                            CountMatrices& cm, const Hyperparams& h,
                            bool compute_objective = true);

// sum_{jw} N_wj log sum_k phi_wk theta_kj
double log_likelihood(const Corpus& corpus, const TopicEstimates& estimates);

// N_wk / N_k and N_kj / N_j (entries may be zero).
TopicEstimates ml_estimates(const CountMatrices& cm);

// Log-likelihood plus Dirichlet log-prior terms at the MAP estimates.
double map_log_joint(const Corpus& corpus, const CountMatrices& cm, const Hyperparams& h);

// ML: log-likelihood at ML estimates. MAP: map_log_joint. VB: log-likelihood
// at the collapsed-form estimates (free energy is not tracked).
double batch_objective(Algorithm algorithm, const Corpus& corpus, const CountMatrices& cm,
                       const Hyperparams& h);

}  // namespace topika
