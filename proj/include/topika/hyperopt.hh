// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "topika/algorithm.hh"
#include "topika/corpus.hh"
#include "topika/model_state.hh"
#include "topika/training.hh"

namespace topika {

inline constexpr double kMinHyperparameter = 1e-6;
inline constexpr double kMaxHyperparameter = 1e3;

// One Minka fixed-point step for the symmetric document-topic strength:
//   alpha <- (c - 1 + alpha sum_j sum_k [psi(N_kj + alpha) - psi(alpha)])
//            / (d + K sum_j [psi(N_j + K alpha) - psi(K alpha)])
// clamped to [1e-6, 1e3]. A non-finite step keeps the previous value.
double minka_update_alpha(const CountMatrices& cm, double alpha, const GammaPrior& prior);

// Word-side analogue over (w, k), with W and N_k in place of K and N_j.
double minka_update_eta(const CountMatrices& cm, double eta, const GammaPrior& prior);

// Iterates a step function until the change is below `tolerance`.
double minka_fixed_point(const CountMatrices& cm, double start, const GammaPrior& prior,
                         bool alpha_side, std::size_t max_iterations = 200,
                         double tolerance = 1e-8);

struct GridSpec {
  std::vector<double> alpha_values{0.01, 0.1, 0.25, 0.5, 0.75, 1.0};
  std::vector<double> eta_values{0.01, 0.1, 0.25, 0.5, 0.75, 1.0};
  double map_shift = 1.0;  // added to both axes for MAP

  // Values actually trained for `algorithm`; throws ConfigError if invalid.
  std::vector<double> alphas_for(Algorithm algorithm) const;
  std::vector<double> etas_for(Algorithm algorithm) const;
};

struct GridScore {
  Estimator estimator = Estimator::kCollapsed;
  double validation_perplexity = 0.0;
  double test_perplexity = 0.0;
};

struct GridCell {
  double alpha = 0.0;
  double eta = 0.0;
  bool valid = false;
  std::string error;
  std::vector<GridScore> scores;  // one per requested estimator
  std::size_t iterations = 0;
  double seconds = 0.0;
};

struct GridResult {
  Algorithm algorithm = Algorithm::kCVB0;
  std::vector<GridCell> cells;  // alpha-major, |alphas| x |etas|
  std::vector<Estimator> estimators;

  // Argmin of validation perplexity for `estimator` over valid cells; ties go
  // to larger eta, then larger alpha. nullopt if no cell is valid.
  std::optional<std::size_t> best(Estimator estimator) const;
  std::optional<std::size_t> best() const { return best(estimators.front()); }
};

struct GridOptions {
  std::vector<Estimator> estimators;  // default: the algorithm's estimator
  std::size_t threads = 1;            // cells trained concurrently
  std::uint64_t fold_seed = 7;        // fold-in split of validation/test
  // Cells already evaluated (e.g. loaded from a previous run) are reused.
  std::vector<GridCell> completed;
  // Called once per freshly trained cell, serialized across threads.
  std::function<void(const GridCell&)> on_cell;
};

GridResult grid_search(Algorithm algorithm, const SplitCorpus& split, const GridSpec& grid,
                       const TrainConfig& base, const GridOptions& options = {});

// CSV columns: algorithm, estimator, alpha, eta, K, seed, validation_perplexity,
// test_perplexity, iterations_run, seconds. Invalid cells carry "invalid".
inline constexpr const char* kGridCsvHeader =
    "algorithm,estimator,alpha,eta,K,seed,validation_perplexity,test_perplexity,iterations_run,"
    "seconds";

// One CSV row per estimator for a single cell.
void write_grid_rows(std::ostream& out, Algorithm algorithm, std::span<const Estimator> estimators,
                     const GridCell& cell, const TrainConfig& base);
void write_grid_csv(std::ostream& out, const GridResult& result, const TrainConfig& base,
                    bool header = true);

}  // namespace topika
