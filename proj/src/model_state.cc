// Apache License, Version 2.0, refer to LICENSE.txt

#include "topika/model_state.hh"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "topika/digamma.hh"
#include "topika/seeding.hh"

namespace topika {

void Hyperparams::validate(bool for_map) const {
  if (!(alpha > 0.0) || !(eta > 0.0)) {
    throw ConfigError("hyperparameters must be positive (alpha=" + std::to_string(alpha) +
                      ", eta=" + std::to_string(eta) + ")");
  }
  if (for_map && (alpha <= 1.0 || eta <= 1.0)) {
    throw ConfigError("MAP requires alpha > 1 and eta > 1 (alpha=" + std::to_string(alpha) +
                      ", eta=" + std::to_string(eta) + ")");
  }
}

CountMatrices CountMatrices::zeros(std::size_t W, std::size_t K, std::size_t D) {
  CountMatrices cm;
  cm.W = W;
  cm.K = K;
  cm.D = D;
  cm.n_wk = Matrix(W, K);
  cm.n_kj = Matrix(D, K);
  cm.n_k.assign(K, 0.0);
  cm.n_j.assign(D, 0.0);
  return cm;
}

double CountMatrices::total() const { return std::accumulate(n_k.begin(), n_k.end(), 0.0); }

double CountMatrices::consistency_error() const {
  auto rel = [](double stored, double rebuilt) {
    return std::abs(stored - rebuilt) / std::max(1.0, std::abs(rebuilt));
  };
  double worst = 0.0;
  std::vector<double> col(K, 0.0);
  for (std::size_t w = 0; w < W; ++w) {
    for (std::size_t k = 0; k < K; ++k) col[k] += n_wk(w, k);
  }
  for (std::size_t k = 0; k < K; ++k) worst = std::max(worst, rel(n_k[k], col[k]));
  for (std::size_t j = 0; j < D; ++j) {
    auto row = n_kj.row(j);
    worst = std::max(worst, rel(n_j[j], std::accumulate(row.begin(), row.end(), 0.0)));
  }
  return worst;
}

void CountMatrices::refresh_totals() {
  std::fill(n_k.begin(), n_k.end(), 0.0);
  for (std::size_t w = 0; w < W; ++w) {
    for (std::size_t k = 0; k < K; ++k) n_k[k] += n_wk(w, k);
  }
  for (std::size_t j = 0; j < D; ++j) {
    auto row = n_kj.row(j);
    n_j[j] = std::accumulate(row.begin(), row.end(), 0.0);
  }
}

std::pair<Responsibilities, CountMatrices> init_random(const Corpus& corpus, std::size_t K,
                                                       Layout layout, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "init"));
  std::exponential_distribution<double> expo(1.0);
  const std::size_t units =
      layout == Layout::kEntry ? corpus.num_entries() : corpus.total_tokens();
  Responsibilities resp{layout, Matrix(units, K)};
  for (std::size_t u = 0; u < units; ++u) {
    auto g = resp.at(u);
    double sum = 0.0;
    for (double& v : g) sum += (v = expo(rng));
    for (double& v : g) v /= sum;
  }
  CountMatrices cm = rebuild_counts(corpus, resp);
  return {std::move(resp), std::move(cm)};
}

CountMatrices rebuild_counts(const Corpus& corpus, const Responsibilities& resp) {
  const std::size_t K = resp.K();
  auto cm = CountMatrices::zeros(corpus.vocab_size(), K, corpus.num_docs());
  auto add = [&](std::uint32_t w, std::uint32_t j, std::span<const double> g, double weight) {
    auto wk = cm.n_wk.row(w);
    auto kj = cm.n_kj.row(j);
    for (std::size_t k = 0; k < K; ++k) {
      wk[k] += weight * g[k];
      kj[k] += weight * g[k];
    }
  };
  if (resp.layout == Layout::kEntry) {
    auto entries = corpus.entries();
    for (std::size_t e = 0; e < entries.size(); ++e) {
      add(entries[e].word, entries[e].doc, resp.at(e), entries[e].count);
    }
  } else {
    std::size_t t = 0;
    for (const Entry& e : corpus.entries()) {
      for (std::uint32_t c = 0; c < e.count; ++c, ++t) add(e.word, e.doc, resp.at(t), 1.0);
    }
  }
  cm.refresh_totals();
  return cm;
}

CountMatrices rebuild_counts(const TokenStream& tokens, const TopicAssignments& za,
                             std::size_t W, std::size_t K, std::size_t D) {
  auto cm = CountMatrices::zeros(W, K, D);
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const auto k = za.z[t];
    cm.n_wk(tokens.word[t], k) += 1.0;
    cm.n_kj(tokens.doc[t], k) += 1.0;
    cm.n_k[k] += 1.0;
    cm.n_j[tokens.doc[t]] += 1.0;
  }
  return cm;
}

VarianceCounts rebuild_variances(const TokenStream& tokens, const Responsibilities& resp,
                                 std::size_t W, std::size_t D) {
  const std::size_t K = resp.K();
  VarianceCounts v{Matrix(W, K), Matrix(D, K), std::vector<double>(K, 0.0)};
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    auto g = resp.at(t);
    for (std::size_t k = 0; k < K; ++k) {
      const double var = g[k] * (1.0 - g[k]);
      v.v_wk(tokens.word[t], k) += var;
      v.v_kj(tokens.doc[t], k) += var;
      v.v_k[k] += var;
    }
  }
  return v;
}

namespace {

void normalize_columns(Matrix& m) {
  std::vector<double> sums(m.cols(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) sums[c] += m(r, c);
  }
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) m(r, c) /= sums[c];
  }
}

void normalize_rows(Matrix& m) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    const double sum = std::accumulate(row.begin(), row.end(), 0.0);
    for (double& v : row) v /= sum;
  }
}

// offset 0 for collapsed, 1 for MAP.
Matrix phi_offset(const CountMatrices& cm, double eta, double offset) {
  Matrix phi(cm.W, cm.K);
  const double W = static_cast<double>(cm.W);
  for (std::size_t w = 0; w < cm.W; ++w) {
    for (std::size_t k = 0; k < cm.K; ++k) {
      phi(w, k) = (cm.n_wk(w, k) + eta - offset) / (cm.n_k[k] + W * eta - W * offset);
    }
  }
  return phi;
}

Matrix phi_vb_alternative(const CountMatrices& cm, double eta) {
  Matrix phi(cm.W, cm.K);
  const double W = static_cast<double>(cm.W);
  for (std::size_t w = 0; w < cm.W; ++w) {
    for (std::size_t k = 0; k < cm.K; ++k) {
      phi(w, k) = std::exp(digamma(cm.n_wk(w, k) + eta) - digamma(cm.n_k[k] + W * eta));
    }
  }
  normalize_columns(phi);
  return phi;
}

}  // namespace

Matrix estimate_theta(Estimator tag, const Matrix& n_kj, std::span<const double> n_j,
                      double alpha) {
  const std::size_t D = n_kj.rows(), K = n_kj.cols();
  const double Kd = static_cast<double>(K);
  Matrix theta(D, K);
  for (std::size_t j = 0; j < D; ++j) {
    for (std::size_t k = 0; k < K; ++k) {
      const double n = n_kj(j, k);
      switch (tag) {
        case Estimator::kCollapsed:
          theta(j, k) = (n + alpha) / (n_j[j] + Kd * alpha);
          break;
        case Estimator::kMap:
          theta(j, k) = (n + alpha - 1.0) / (n_j[j] + Kd * alpha - Kd);
          break;
        case Estimator::kVbAlternative:
          theta(j, k) = std::exp(digamma(n + alpha) - digamma(n_j[j] + Kd * alpha));
          break;
      }
    }
  }
  if (tag == Estimator::kVbAlternative) normalize_rows(theta);
  return theta;
}

TopicEstimates estimate_collapsed(const CountMatrices& cm, const Hyperparams& h) {
  return {phi_offset(cm, h.eta, 0.0), estimate_theta(Estimator::kCollapsed, cm.n_kj, cm.n_j, h.alpha),
          Estimator::kCollapsed};
}

TopicEstimates estimate_map(const CountMatrices& cm, const Hyperparams& h) {
  h.validate(/*for_map=*/true);
  return {phi_offset(cm, h.eta, 1.0), estimate_theta(Estimator::kMap, cm.n_kj, cm.n_j, h.alpha),
          Estimator::kMap};
}

TopicEstimates estimate_vb_alternative(const CountMatrices& cm, const Hyperparams& h) {
  return {phi_vb_alternative(cm, h.eta),
          estimate_theta(Estimator::kVbAlternative, cm.n_kj, cm.n_j, h.alpha),
          Estimator::kVbAlternative};
}

TopicEstimates estimate(Estimator tag, const CountMatrices& cm, const Hyperparams& h) {
  switch (tag) {
    case Estimator::kMap:
      return estimate_map(cm, h);
    case Estimator::kVbAlternative:
      return estimate_vb_alternative(cm, h);
    case Estimator::kCollapsed:
      break;
  }
  return estimate_collapsed(cm, h);
}

}  // namespace topika
