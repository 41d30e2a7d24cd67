// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "topika/algorithm.hh"
#include "topika/corpus.hh"
#include "topika/evaluation.hh"
#include "topika/model_state.hh"

namespace topika {

struct TrainConfig {
  Algorithm algorithm = Algorithm::kCVB0;
  std::size_t K = 10;
  Hyperparams h;
  std::optional<Estimator> estimator;  // prediction estimator; per-algorithm default if unset

  std::size_t max_iterations = 500;
  std::size_t eval_every = 2;
  std::size_t patience = 5;
  // A validation evaluation counts as an improvement only if it beats the best
  // so far by this relative margin.
  double min_relative_improvement = 1e-4;
  // Deterministic learners stop once max |gamma change| in a sweep drops below this.
  double convergence_tolerance = 1e-4;
  // Stop at the first validation perplexity at or below this value.
  std::optional<double> stop_below_perplexity;

  bool minka = false;
  std::size_t minka_start = 15;

  std::size_t workers = 4;
  std::size_t sync_every = 4096;

  bool track_objective = true;
  FoldInConfig fold_in;
  std::uint64_t seed = 1;

  Estimator prediction_estimator() const { return estimator.value_or(default_estimator(algorithm)); }
  // Throws ConfigError on invalid combinations (e.g. MAP with alpha <= 1).
  void validate() const;
};

struct TraceRecord {
  std::size_t iteration = 0;
  double objective = 0.0;
  double validation_perplexity = 0.0;  // NaN when not evaluated this iteration
  double alpha = 0.0;
  double eta = 0.0;
  double seconds = 0.0;        // wall clock since training start
  double sweep_seconds = 0.0;  // cumulative time spent inside sweeps only
  double max_change = 0.0;
  std::size_t merges = 0;      // parallel CVB0 only
};

struct TrainResult {
  CountMatrices counts;
  Hyperparams h;  // final values (after Minka updates, if enabled)
  std::vector<TraceRecord> trace;
  std::size_t iterations = 0;
  double seconds = 0.0;
  double sweep_seconds = 0.0;
  bool converged = false;
  bool stopped_early = false;
  // First iteration whose validation perplexity passed stop_below_perplexity.
  std::optional<std::size_t> threshold_iteration;
  double threshold_seconds = 0.0;
  double best_validation_perplexity = 0.0;
  std::size_t parallel_merges = 0;
  double max_conservation_error = 0.0;

  TopicEstimates estimates(Estimator tag) const { return estimate(tag, counts, h); }
};

// Trains on `train`. When `validation` is given, validation perplexity is
// computed every eval_every iterations (fold-in on the observed half, scored on
// the held-out half) and drives early stopping.
TrainResult train(const Corpus& train, const FoldInSplit* validation, const TrainConfig& config);

// Effective worker count: `requested` capped by TOPIKA_THREADS when set.
std::size_t capped_workers(std::size_t requested);

// CSV trace: iteration, objective, validation_perplexity, alpha, eta, seconds
// (+ workers, sync_every, merges for parallel CVB0).
void write_trace_csv(std::ostream& out, const TrainResult& result, const TrainConfig& config);

}  // namespace topika
