// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "topika/corpus.hh"
#include "topika/training.hh"

namespace topika {

struct TimingResult {
  Algorithm algorithm = Algorithm::kCVB0;
  bool timed_out = false;
  double seconds = 0.0;            // median wall clock until the threshold was passed
  std::size_t sweeps = 0;          // median sweeps until the threshold was passed
  double seconds_per_sweep = 0.0;  // median time inside sweeps, per sweep
  std::vector<double> run_seconds;
};

// For each config, trains `runs` times (seeds derived from the config seed)
// until validation perplexity first drops to `threshold` and reports medians.
// A run that never gets there within max_iterations marks the entry timed out.
std::vector<TimingResult> timing_benchmark(std::span<const TrainConfig> configs,
                                           const Corpus& train, const FoldInSplit& validation,
                                           double threshold, std::size_t runs = 3);

}  // namespace topika
