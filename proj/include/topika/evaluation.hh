// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "topika/algorithm.hh"
#include "topika/corpus.hh"
#include "topika/matrix.hh"
#include "topika/model_state.hh"

namespace topika {

struct FoldInConfig {
  // Deterministic learners stop early on `tolerance`; CGS always runs
  // max_sweeps and averages the document counts of the second half.
  std::size_t max_sweeps = 50;
  double tolerance = 1e-5;  // max change of theta between sweeps
};

// The frozen word-side factor an algorithm uses during fold-in, built from the
// training counts:
//   ML, CVB, CVB0, CGS  (N_wk + eta) / (N_k + W eta)
//   MAP                 (N_wk + eta - 1) / (N_k + W eta - W)
//   VB                  exp(psi(N_wk + eta) - psi(N_k + W eta))
Matrix fold_in_word_factor(Algorithm algorithm, const CountMatrices& train_counts,
                           const Hyperparams& h);

// Learns document-topic counts (D x K) for every document of `observed` with
// the word side held fixed at `word_factor`, using the document-side update of
// `algorithm`. Documents are processed independently.
Matrix fold_in_counts(const Corpus& observed, const Matrix& word_factor, Algorithm algorithm,
                      const Hyperparams& h, const FoldInConfig& config, std::uint64_t seed);

// fold_in_counts followed by the estimator's theta formula (D x K, rows sum to 1).
Matrix fold_in(const Corpus& observed, const Matrix& word_factor, Algorithm algorithm,
               const Hyperparams& h, Estimator estimator, const FoldInConfig& config,
               std::uint64_t seed);

struct PerplexityReport {
  double perplexity = 0.0;
  double log_likelihood = 0.0;
  std::size_t heldout_tokens = 0;
  Estimator estimator = Estimator::kCollapsed;
  std::size_t samples = 1;
};

// log p = sum_{jw} N_jw log (1/S) sum_s sum_k theta^s_kj phi^s_wk,
// perplexity = exp(-log p / N). Every sample's theta covers the documents of
// `heldout`.
PerplexityReport perplexity(const Corpus& heldout, std::span<const TopicEstimates> samples);

// Fold-in on the observed half and perplexity on the held-out half, once per
// requested estimator (the fold-in itself is shared).
std::vector<PerplexityReport> heldout_perplexity(const CountMatrices& train_counts,
                                                 const Hyperparams& h, Algorithm algorithm,
                                                 std::span<const Estimator> estimators,
                                                 const FoldInSplit& fold,
                                                 const FoldInConfig& config, std::uint64_t seed);

struct ClassificationReport {
  double mean_auc = 0.0;
  double mean_average_precision = 0.0;
  std::vector<int> classes;  // classes that were scored
  std::vector<double> per_class_auc;
  std::vector<double> per_class_average_precision;
};

// Area under the ROC curve of `scores` against binary `positive`, ties by midrank.
double roc_auc(std::span<const double> scores, std::span<const char> positive);
double average_precision(std::span<const double> scores, std::span<const char> positive);

// Scores each test document against each class by cosine similarity between
// its theta row and the mean theta of that class's training documents, then
// reports one-vs-rest AUC and average precision.
ClassificationReport classify_and_score(const Matrix& train_theta, std::span<const int> train_labels,
                                        const Matrix& test_theta, std::span<const int> test_labels);

std::vector<int> load_labels(const std::filesystem::path& path);

}  // namespace topika
