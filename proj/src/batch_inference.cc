// Apache License, Version 2.0, refer to LICENSE.txt

#include "topika/batch_inference.hh"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <spdlog/spdlog.h>

#include "topika/digamma.hh"

namespace topika {

namespace {

void normalize(std::span<double> v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  for (double& x : v) x /= sum;
}

}  // namespace

bool ml_update(const Entry& entry, const CountMatrices& cm, std::span<double> out) {
  auto wk = cm.n_wk.row(entry.word);
  auto kj = cm.n_kj.row(entry.doc);
  double sum = 0.0;
  for (std::size_t k = 0; k < cm.K; ++k) {
    out[k] = cm.n_k[k] > 0.0 ? wk[k] * kj[k] / cm.n_k[k] : 0.0;
    sum += out[k];
  }
  if (!(sum > 0.0)) {
    std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(cm.K));
    return false;
  }
  for (double& x : out) x /= sum;
  return true;
}

void map_update(const Entry& entry, const CountMatrices& cm, const Hyperparams& h,
                std::span<double> out) {
  auto wk = cm.n_wk.row(entry.word);
  auto kj = cm.n_kj.row(entry.doc);
  const double W = static_cast<double>(cm.W);
  for (std::size_t k = 0; k < cm.K; ++k) {
    out[k] = (wk[k] + h.eta - 1.0) * (kj[k] + h.alpha - 1.0) / (cm.n_k[k] + W * h.eta - W);
  }
  normalize(out);
}

void vb_update(const Entry& entry, const CountMatrices& cm, const Hyperparams& h,
               std::span<double> out) {
  auto wk = cm.n_wk.row(entry.word);
  auto kj = cm.n_kj.row(entry.doc);
  const double W = static_cast<double>(cm.W);
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < cm.K; ++k) {
    out[k] = digamma(wk[k] + h.eta) - digamma(cm.n_k[k] + W * h.eta) + digamma(kj[k] + h.alpha);
    top = std::max(top, out[k]);
  }
  for (double& x : out) x = std::exp(x - top);
  normalize(out);
}

void vb_approx_update(const Entry& entry, const CountMatrices& cm, const Hyperparams& h,
                      std::span<double> out) {
  constexpr double kFloor = 1e-12;
  auto wk = cm.n_wk.row(entry.word);
  auto kj = cm.n_kj.row(entry.doc);
  const double W = static_cast<double>(cm.W);
  for (std::size_t k = 0; k < cm.K; ++k) {
    const double word = std::max(kFloor, wk[k] + h.eta - 0.5);
    const double doc = std::max(kFloor, kj[k] + h.alpha - 0.5);
    const double topic = std::max(kFloor, cm.n_k[k] + W * h.eta - 0.5);
    out[k] = word * doc / topic;
  }
  normalize(out);
}

BatchSweepStats batch_sweep(Algorithm algorithm, const Corpus& corpus, Responsibilities& resp,
                            CountMatrices& cm, const Hyperparams& h, bool compute_objective) {
  BatchSweepStats stats;
  auto entries = corpus.entries();
  std::vector<double> fresh(cm.K);
  if (algorithm == Algorithm::kML) {
    stats.dead_topics = static_cast<std::size_t>(
        std::count_if(cm.n_k.begin(), cm.n_k.end(), [](double n) { return !(n > 0.0); }));
    if (stats.dead_topics > 0) {
      spdlog::warn("ML sweep: {} topic(s) have zero mass and stay dead", stats.dead_topics);
    }
  }
  for (std::size_t e = 0; e < entries.size(); ++e) {
    switch (algorithm) {
      case Algorithm::kML:
        if (!ml_update(entries[e], cm, fresh)) ++stats.degenerate_entries;
        break;
      case Algorithm::kMAP:
        map_update(entries[e], cm, h, fresh);
        break;
      case Algorithm::kVB:
        vb_update(entries[e], cm, h, fresh);
        break;
      default:
        throw ConfigError("batch_sweep: " + std::string(to_string(algorithm)) +
                          " is not a batch algorithm");
    }
    auto g = resp.at(e);
    for (std::size_t k = 0; k < cm.K; ++k) {
      stats.max_change = std::max(stats.max_change, std::abs(fresh[k] - g[k]));
      g[k] = fresh[k];
    }
  }
  cm = rebuild_counts(corpus, resp);
  stats.objective = compute_objective ? batch_objective(algorithm, corpus, cm, h)
                                      : std::numeric_limits<double>::quiet_NaN();
  return stats;
}

double log_likelihood(const Corpus& corpus, const TopicEstimates& est) {
  const std::size_t K = est.phi.cols();
  double ll = 0.0;
  for (const Entry& e : corpus.entries()) {
    auto phi = est.phi.row(e.word);
    auto theta = est.theta.row(e.doc);
    double p = 0.0;
    for (std::size_t k = 0; k < K; ++k) p += phi[k] * theta[k];
    ll += e.count * std::log(p);
  }
  return ll;
}

TopicEstimates ml_estimates(const CountMatrices& cm) {
  TopicEstimates est{Matrix(cm.W, cm.K), Matrix(cm.D, cm.K), Estimator::kCollapsed};
  for (std::size_t w = 0; w < cm.W; ++w) {
    for (std::size_t k = 0; k < cm.K; ++k) {
      est.phi(w, k) = cm.n_k[k] > 0.0 ? cm.n_wk(w, k) / cm.n_k[k] : 0.0;
    }
  }
  for (std::size_t j = 0; j < cm.D; ++j) {
    for (std::size_t k = 0; k < cm.K; ++k) {
      est.theta(j, k) = cm.n_j[j] > 0.0 ? cm.n_kj(j, k) / cm.n_j[j] : 0.0;
    }
  }
  return est;
}

double map_log_joint(const Corpus& corpus, const CountMatrices& cm, const Hyperparams& h) {
  const TopicEstimates est = estimate_map(cm, h);
  double prior = 0.0;
  for (double v : est.phi.values()) prior += (h.eta - 1.0) * std::log(v);
  for (double v : est.theta.values()) prior += (h.alpha - 1.0) * std::log(v);
  return log_likelihood(corpus, est) + prior;
}

double batch_objective(Algorithm algorithm, const Corpus& corpus, const CountMatrices& cm,
                       const Hyperparams& h) {
  switch (algorithm) {
    case Algorithm::kML:
      return log_likelihood(corpus, ml_estimates(cm));
    case Algorithm::kMAP:
      return map_log_joint(corpus, cm, h);
    default:
      return log_likelihood(corpus, estimate_collapsed(cm, h));
  }
}

}  // namespace topika
