// Apache License, Version 2.0, refer to LICENSE.txt

#include "topika/benchmark.hh"

#include <algorithm>

#include "topika/seeding.hh"

namespace topika {

namespace {

template <typename T>
T median(std::vector<T> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

}  // namespace

std::vector<TimingResult> timing_benchmark(std::span<const TrainConfig> configs,
                                           const Corpus& train, const FoldInSplit& validation,
                                           double threshold, std::size_t runs) {
  std::vector<TimingResult> results;
  for (const TrainConfig& base : configs) {
    TimingResult timing;
    timing.algorithm = base.algorithm;
    std::vector<std::size_t> sweeps;
    std::vector<double> per_sweep;
    for (std::size_t r = 0; r < std::max<std::size_t>(1, runs); ++r) {
      TrainConfig cfg = base;
      cfg.seed = derive_seed(base.seed, "bench", r);
      cfg.stop_below_perplexity = threshold;
      cfg.track_objective = false;
      const TrainResult result = topika::train(train, &validation, cfg);
      per_sweep.push_back(result.sweep_seconds / static_cast<double>(result.iterations));
      if (!result.threshold_iteration) {
        timing.timed_out = true;
        continue;
      }
      timing.run_seconds.push_back(result.threshold_seconds);
      sweeps.push_back(*result.threshold_iteration);
    }
    timing.seconds_per_sweep = median(per_sweep);
    if (!timing.run_seconds.empty()) {
      timing.seconds = median(timing.run_seconds);
      timing.sweeps = median(sweeps);
    }
    results.push_back(timing);
  }
  return results;
}

}  // namespace topika
