// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "topika/algorithm.hh"
#include "topika/corpus.hh"
#include "topika/matrix.hh"

namespace topika {

// Gamma priors eta ~ G[a, b], alpha ~ G[c, d]. (1, 0, 1, 0) is flat.
struct GammaPrior {
  double a = 1.0;
  double b = 0.0;
  double c = 1.0;
  double d = 0.0;
};

// Symmetric Dirichlet strengths: alpha on document-topic, eta on topic-word.
struct Hyperparams {
  double alpha = 0.5;
  double eta = 0.5;
  GammaPrior prior;

  // Throws ConfigError unless alpha, eta > 0 (and > 1 when `for_map`).
  void validate(bool for_map = false) const;
};

// Sufficient statistics shared by every learner.
//
// n_kj is stored document-major: row j holds the K topic counts of document j,
// so one document's counts are contiguous.
struct CountMatrices {
  std::size_t W = 0;
  std::size_t K = 0;
  std::size_t D = 0;
  Matrix n_wk;  // W x K
  Matrix n_kj;  // D x K
  std::vector<double> n_k;
  std::vector<double> n_j;

  static CountMatrices zeros(std::size_t W, std::size_t K, std::size_t D);

  double total() const;
  // Largest relative violation of n_k = sum_w n_wk and n_j = sum_k n_kj.
  double consistency_error() const;
  // Recomputes n_k and n_j from n_wk and n_kj.
  void refresh_totals();
};

enum class Layout { kEntry, kToken };

// One K-distribution per unit: a unique (w, j) entry for kEntry, a token of
// Corpus::tokens() for kToken.
struct Responsibilities {
  Layout layout = Layout::kEntry;
  Matrix gamma;  // units x K

  std::size_t units() const { return gamma.rows(); }
  std::size_t K() const { return gamma.cols(); }
  std::span<double> at(std::size_t u) { return gamma.row(u); }
  std::span<const double> at(std::size_t u) const { return gamma.row(u); }
};

// Second-moment counts for CVB: sums of gamma (1 - gamma).
struct VarianceCounts {
  Matrix v_wk;  // W x K
  Matrix v_kj;  // D x K, document-major like CountMatrices::n_kj
  std::vector<double> v_k;
};

struct TopicAssignments {
  std::vector<std::uint32_t> z;
};

// phi is W x K with columns summing to one. theta is stored D x K (row j is
// the topic distribution of document j).
struct TopicEstimates {
  Matrix phi;
  Matrix theta;
  Estimator tag = Estimator::kCollapsed;
};

// Dirichlet(1) draws for every responsibility, plus the counts they imply.
std::pair<Responsibilities, CountMatrices> init_random(const Corpus& corpus, std::size_t K,
                                                       Layout layout, std::uint64_t seed);

CountMatrices rebuild_counts(const Corpus& corpus, const Responsibilities& resp);
CountMatrices rebuild_counts(const TokenStream& tokens, const TopicAssignments& za,
                             std::size_t W, std::size_t K, std::size_t D);
VarianceCounts rebuild_variances(const TokenStream& tokens, const Responsibilities& resp,
                                 std::size_t W, std::size_t D);

// (N_wk + eta) / (N_k + W eta), (N_kj + alpha) / (N_j + K alpha).
TopicEstimates estimate_collapsed(const CountMatrices& cm, const Hyperparams& h);
// (N_wk + eta - 1) / (N_k + W eta - W), analogously for theta. Needs alpha, eta > 1.
TopicEstimates estimate_map(const CountMatrices& cm, const Hyperparams& h);
// exp(psi(N_wk + eta)) / exp(psi(N_k + W eta)), column-normalized; likewise theta.
TopicEstimates estimate_vb_alternative(const CountMatrices& cm, const Hyperparams& h);

TopicEstimates estimate(Estimator tag, const CountMatrices& cm, const Hyperparams& h);

// Row-stochastic document-topic matrix (D x K) from document counts.
Matrix estimate_theta(Estimator tag, const Matrix& n_kj, std::span<const double> n_j,
                      double alpha);

}  // namespace topika
