// Apache License, Version 2.0, refer to LICENSE.txt

#include "topika/training.hh"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <limits>
#include <ostream>
#include <string>

#include <spdlog/spdlog.h>

#include "topika/batch_inference.hh"
#include "topika/collapsed_inference.hh"
#include "topika/hyperopt.hh"
#include "topika/seeding.hh"

namespace topika {

void TrainConfig::validate() const {
  if (K < 1) throw ConfigError("K must be >= 1");
  if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
  if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
  if (minka_start < 1) throw ConfigError("minka_start must be >= 1");
  h.validate(algorithm == Algorithm::kMAP || prediction_estimator() == Estimator::kMap);
  if (minka && (algorithm == Algorithm::kMAP || algorithm == Algorithm::kML)) {
    throw ConfigError("Minka updates do not apply to " + std::string(to_string(algorithm)));
  }
  if (algorithm == Algorithm::kParallelCVB0) {
    if (workers < 1) throw ConfigError("workers must be >= 1");
    if (sync_every < 1) throw ConfigError("sync_every must be >= 1");
  }
}

std::size_t capped_workers(std::size_t requested) {
  if (const char* env = std::getenv("TOPIKA_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && cap >= 1) return std::min<std::size_t>(requested, static_cast<std::size_t>(cap));
  }
  return requested;
}

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

TrainResult train(const Corpus& corpus, const FoldInSplit* validation, const TrainConfig& config) {
  config.validate();
  const Algorithm alg = config.algorithm;
  const Estimator est = config.prediction_estimator();
  const bool deterministic = alg != Algorithm::kCGS;
  const auto start = Clock::now();

  TrainResult result;
  result.h = config.h;
  Hyperparams& h = result.h;

  Responsibilities resp;
  CollapsedState state;
  CountMatrices* counts = nullptr;
  if (is_batch(alg)) {
    auto [r, cm] = init_random(corpus, config.K, Layout::kEntry, config.seed);
    resp = std::move(r);
    result.counts = std::move(cm);
    counts = &result.counts;
  } else {
    state = init_collapsed(corpus, config.K, alg, config.seed);
    counts = &state.counts;
  }
  Rng sampler(derive_seed(config.seed, "sampler"));
  ParallelOptions parallel{capped_workers(config.workers), config.sync_every};
  const std::uint64_t validation_seed = derive_seed(config.seed, "validation");

  double best = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  for (std::size_t it = 1; it <= config.max_iterations; ++it) {
    TraceRecord rec;
    rec.iteration = it;
    rec.objective = std::numeric_limits<double>::quiet_NaN();
    rec.validation_perplexity = std::numeric_limits<double>::quiet_NaN();

    const auto sweep_start = Clock::now();
    if (is_batch(alg)) {
      rec.max_change = batch_sweep(alg, corpus, resp, *counts, h, false).max_change;
    } else if (alg == Algorithm::kParallelCVB0) {
      const ParallelSweepStats ps = parallel_cvb0_sweep(state, h, parallel);
      rec.max_change = ps.max_change;
      rec.merges = ps.merges;
      result.parallel_merges += ps.merges;
      result.max_conservation_error = std::max(result.max_conservation_error, ps.max_conservation_error);
    } else {
      rec.max_change = collapsed_sweep(alg, state, h, sampler).max_change;
    }
    result.sweep_seconds += since(sweep_start);

    if (config.minka && it > config.minka_start) {
      h.alpha = minka_update_alpha(*counts, h.alpha, h.prior);
      h.eta = minka_update_eta(*counts, h.eta, h.prior);
    }
    if (config.track_objective) {
      rec.objective = is_batch(alg) ? batch_objective(alg, corpus, *counts, h)
                                    : log_likelihood(corpus, estimate(est, *counts, h));
    }

    bool stop = false;
    if (validation != nullptr && it % config.eval_every == 0) {
      const Estimator one[] = {est};
      rec.validation_perplexity =
          heldout_perplexity(*counts, h, alg, one, *validation, config.fold_in, validation_seed)
              .front()
              .perplexity;
      if (config.stop_below_perplexity && rec.validation_perplexity <= *config.stop_below_perplexity &&
          !result.threshold_iteration) {
        result.threshold_iteration = it;
        result.threshold_seconds = since(start);
        stop = true;
      }
      if (rec.validation_perplexity < best * (1.0 - config.min_relative_improvement)) {
        stale = 0;
      } else if (++stale >= config.patience) {
        result.stopped_early = true;
        stop = true;
      }
      best = std::min(best, rec.validation_perplexity);
    }
    if (deterministic && rec.max_change < config.convergence_tolerance) {
      result.converged = true;
      stop = true;
    }

    rec.alpha = h.alpha;
    rec.eta = h.eta;
    rec.seconds = since(start);
    rec.sweep_seconds = result.sweep_seconds;
    result.trace.push_back(rec);
    result.iterations = it;
    if (stop) break;
  }

  if (!is_batch(alg)) result.counts = std::move(state.counts);
  result.best_validation_perplexity = best;
  result.seconds = since(start);
  return result;
}

void write_trace_csv(std::ostream& out, const TrainResult& result, const TrainConfig& config) {
  const bool parallel = config.algorithm == Algorithm::kParallelCVB0;
  out << "iteration,objective,validation_perplexity,alpha,eta,seconds";
  if (parallel) out << ",workers,sync_every,merges";
  out << '\n' << std::setprecision(10);
  for (const TraceRecord& r : result.trace) {
    out << r.iteration << ',';
    if (!std::isnan(r.objective)) out << r.objective;
    out << ',';
    if (!std::isnan(r.validation_perplexity)) out << r.validation_perplexity;
    out << ',' << r.alpha << ',' << r.eta << ',' << r.seconds;
    if (parallel) out << ',' << capped_workers(config.workers) << ',' << config.sync_every << ',' << r.merges;
    out << '\n';
  }
}

}  // namespace topika
