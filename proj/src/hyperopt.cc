// Apache License, Version 2.0, refer to LICENSE.txt

#include "topika/hyperopt.hh"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <mutex>
#include <ostream>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "topika/digamma.hh"
#include "topika/evaluation.hh"
#include "topika/seeding.hh"

namespace topika {

namespace {

double finish_step(double numerator, double denominator, double previous, const char* name) {
  const double next = numerator / denominator;
  if (!std::isfinite(next)) {
    spdlog::warn("Minka {} step is not finite ({} / {}); keeping {}", name, numerator, denominator,
                 previous);
    return previous;
  }
  return std::clamp(next, kMinHyperparameter, kMaxHyperparameter);
}

}  // namespace

double minka_update_alpha(const CountMatrices& cm, double alpha, const GammaPrior& prior) {
  const double K = static_cast<double>(cm.K);
  const double psi_alpha = digamma(alpha), psi_k_alpha = digamma(K * alpha);
  double num = 0.0, den = 0.0;
  for (std::size_t j = 0; j < cm.D; ++j) {
    for (double n : cm.n_kj.row(j)) num += digamma(n + alpha) - psi_alpha;
    den += digamma(cm.n_j[j] + K * alpha) - psi_k_alpha;
  }
  return finish_step(prior.c - 1.0 + alpha * num, prior.d + K * den, alpha, "alpha");
}

double minka_update_eta(const CountMatrices& cm, double eta, const GammaPrior& prior) {
  const double W = static_cast<double>(cm.W);
  const double psi_eta = digamma(eta), psi_w_eta = digamma(W * eta);
  double num = 0.0, den = 0.0;
  for (std::size_t w = 0; w < cm.W; ++w) {
    for (double n : cm.n_wk.row(w)) num += digamma(n + eta) - psi_eta;
  }
  for (std::size_t k = 0; k < cm.K; ++k) den += digamma(cm.n_k[k] + W * eta) - psi_w_eta;
  return finish_step(prior.a - 1.0 + eta * num, prior.b + W * den, eta, "eta");
}

double minka_fixed_point(const CountMatrices& cm, double start, const GammaPrior& prior,
                         bool alpha_side, std::size_t max_iterations, double tolerance) {
  double value = start;
  for (std::size_t i = 0; i < max_iterations; ++i) {
    const double next =
        alpha_side ? minka_update_alpha(cm, value, prior) : minka_update_eta(cm, value, prior);
    const bool done = std::abs(next - value) < tolerance;
    value = next;
    if (done) break;
  }
  return value;
}

namespace {

std::vector<double> shifted(const std::vector<double>& values, Algorithm algorithm, double shift,
                            const char* axis) {
  if (values.empty()) throw ConfigError(std::string("grid: no ") + axis + " values");
  std::vector<double> out;
  for (double v : values) {
    if (!(v > 0.0)) throw ConfigError(std::string("grid: ") + axis + " values must be positive");
    out.push_back(algorithm == Algorithm::kMAP ? v + shift : v);
    if (algorithm == Algorithm::kMAP && !(out.back() > 1.0)) {
      throw ConfigError(std::string("grid: shifted MAP ") + axis + " value " +
                        std::to_string(out.back()) + " is not > 1");
    }
  }
  return out;
}

}  // namespace

std::vector<double> GridSpec::alphas_for(Algorithm algorithm) const {
  return shifted(alpha_values, algorithm, map_shift, "alpha");
}

std::vector<double> GridSpec::etas_for(Algorithm algorithm) const {
  return shifted(eta_values, algorithm, map_shift, "eta");
}

std::optional<std::size_t> GridResult::best(Estimator estimator) const {
  std::optional<std::size_t> best_index;
  double best_value = 0.0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const GridCell& c = cells[i];
    if (!c.valid) continue;
    auto score = std::find_if(c.scores.begin(), c.scores.end(),
                              [&](const GridScore& s) { return s.estimator == estimator; });
    if (score == c.scores.end() || !std::isfinite(score->validation_perplexity)) continue;
    const double v = score->validation_perplexity;
    bool better = !best_index || v < best_value;
    if (best_index && v == best_value) {
      const GridCell& b = cells[*best_index];
      better = c.eta > b.eta || (c.eta == b.eta && c.alpha > b.alpha);
    }
    if (better) {
      best_index = i;
      best_value = v;
    }
  }
  return best_index;
}

GridResult grid_search(Algorithm algorithm, const SplitCorpus& split, const GridSpec& grid,
                       const TrainConfig& base, const GridOptions& options) {
  const std::vector<double> alphas = grid.alphas_for(algorithm);
  const std::vector<double> etas = grid.etas_for(algorithm);

  GridResult result;
  result.algorithm = algorithm;
  result.estimators = options.estimators;
  if (result.estimators.empty()) {
    TrainConfig probe = base;
    probe.algorithm = algorithm;
    result.estimators.push_back(probe.prediction_estimator());
  }
  const FoldInSplit validation = fold_in_split(split.validation, derive_seed(options.fold_seed, "validation"));
  const FoldInSplit test = fold_in_split(split.test, derive_seed(options.fold_seed, "test"));

  for (double a : alphas) {
    for (double e : etas) result.cells.push_back({a, e, false, {}, {}, 0, 0.0});
  }

  std::mutex report_mutex;
  auto run_cell = [&](GridCell& cell) {
    for (const GridCell& done : options.completed) {
      if (done.valid && done.alpha == cell.alpha && done.eta == cell.eta &&
          done.scores.size() == result.estimators.size()) {
        cell = done;
        return;
      }
    }
    try {
      TrainConfig cfg = base;
      cfg.algorithm = algorithm;
      cfg.h.alpha = cell.alpha;
      cfg.h.eta = cell.eta;
      cfg.estimator = result.estimators.front();
      const TrainResult trained = train(split.train, &validation, cfg);
      const std::uint64_t eval_seed = derive_seed(cfg.seed, "heldout");
      auto val = heldout_perplexity(trained.counts, trained.h, algorithm, result.estimators,
                                    validation, cfg.fold_in, eval_seed);
      auto tst = heldout_perplexity(trained.counts, trained.h, algorithm, result.estimators, test,
                                    cfg.fold_in, eval_seed);
      cell.scores.clear();
      for (std::size_t i = 0; i < result.estimators.size(); ++i) {
        cell.scores.push_back({result.estimators[i], val[i].perplexity, tst[i].perplexity});
      }
      cell.iterations = trained.iterations;
      cell.seconds = trained.seconds;
      cell.valid = true;
    } catch (const std::exception& ex) {
      cell.valid = false;
      cell.error = ex.what();
      spdlog::warn("grid cell alpha={} eta={} failed: {}", cell.alpha, cell.eta, ex.what());
    }
    if (options.on_cell) {
      std::lock_guard lock(report_mutex);
      options.on_cell(cell);
    }
  };

  const std::size_t threads = std::max<std::size_t>(1, std::min(options.threads, result.cells.size()));
  if (threads == 1) {
    for (GridCell& cell : result.cells) run_cell(cell);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < result.cells.size(); i = next++) run_cell(result.cells[i]);
      });
    }
  }
  return result;
}

void write_grid_rows(std::ostream& out, Algorithm algorithm, std::span<const Estimator> estimators,
                     const GridCell& c, const TrainConfig& base) {
  for (std::size_t i = 0; i < estimators.size(); ++i) {
    out << fmt::format("{},{},{},{},{},{},", to_string(algorithm), to_string(estimators[i]),
                       c.alpha, c.eta, base.K, base.seed);
    if (c.valid) {
      out << fmt::format("{},{}", c.scores[i].validation_perplexity, c.scores[i].test_perplexity);
    } else {
      out << "invalid,invalid";
    }
    out << fmt::format(",{},{}\n", c.iterations, c.seconds);
  }
}

void write_grid_csv(std::ostream& out, const GridResult& result, const TrainConfig& base,
                    bool header) {
  if (header) out << kGridCsvHeader << '\n';
  for (const GridCell& c : result.cells) write_grid_rows(out, result.algorithm, result.estimators, c, base);
}

}  // namespace topika
