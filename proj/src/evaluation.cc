// Apache License, Version 2.0, refer to LICENSE.txt

#include "topika/evaluation.hh"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include <spdlog/spdlog.h>

#include "topika/digamma.hh"
#include "topika/seeding.hh"

namespace topika {

Matrix fold_in_word_factor(Algorithm algorithm, const CountMatrices& cm, const Hyperparams& h) {
  Matrix f(cm.W, cm.K);
  const double W = static_cast<double>(cm.W);
  for (std::size_t w = 0; w < cm.W; ++w) {
    for (std::size_t k = 0; k < cm.K; ++k) {
      const double n = cm.n_wk(w, k);
      switch (algorithm) {
        case Algorithm::kMAP:
          f(w, k) = (n + h.eta - 1.0) / (cm.n_k[k] + W * h.eta - W);
          break;
        case Algorithm::kVB:
          f(w, k) = std::exp(digamma(n + h.eta) - digamma(cm.n_k[k] + W * h.eta));
          break;
        default:
          f(w, k) = (n + h.eta) / (cm.n_k[k] + W * h.eta);
          break;
      }
    }
  }
  return f;
}

namespace {

// Fold-in of a single document; `nkj` receives its K topic counts.
class DocFolder {
 public:
  DocFolder(const Matrix& factor, Algorithm algorithm, const Hyperparams& h,
            const FoldInConfig& config)
      : factor_(factor), algorithm_(algorithm), h_(h), config_(config), K_(factor.cols()),
        prev_(K_), fresh_(K_) {}

  void run(std::span<const Entry> doc, std::span<double> nkj, Rng& rng) {
    std::fill(nkj.begin(), nkj.end(), 0.0);
    if (doc.empty()) return;
    switch (algorithm_) {
      case Algorithm::kML:
      case Algorithm::kMAP:
      case Algorithm::kVB:
        run_batch(doc, nkj, rng);
        break;
      case Algorithm::kCGS:
        run_cgs(doc, nkj, rng);
        break;
      default:
        run_token(doc, nkj, rng);
        break;
    }
  }

 private:
  void draw_dirichlet(std::span<double> g, Rng& rng) {
    std::exponential_distribution<double> expo(1.0);
    double sum = 0.0;
    for (double& v : g) sum += (v = expo(rng));
    for (double& v : g) v /= sum;
  }

  // Max change of the normalized document counts since the last call.
  double theta_change(std::span<const double> nkj) {
    const double total = std::accumulate(nkj.begin(), nkj.end(), 0.0);
    double change = 0.0;
    for (std::size_t k = 0; k < K_; ++k) {
      const double v = nkj[k] / total;
      change = std::max(change, std::abs(v - prev_[k]));
      prev_[k] = v;
    }
    return change;
  }

  void run_batch(std::span<const Entry> doc, std::span<double> nkj, Rng& rng) {
    gamma_.assign(doc.size() * K_, 0.0);
    for (std::size_t e = 0; e < doc.size(); ++e) {
      auto g = std::span<double>(gamma_).subspan(e * K_, K_);
      draw_dirichlet(g, rng);
      for (std::size_t k = 0; k < K_; ++k) nkj[k] += doc[e].count * g[k];
    }
    std::fill(prev_.begin(), prev_.end(), 0.0);
    theta_change(nkj);
    for (std::size_t sweep = 0; sweep < config_.max_sweeps; ++sweep) {
      for (std::size_t k = 0; k < K_; ++k) {
        switch (algorithm_) {
          case Algorithm::kML:
            fresh_[k] = nkj[k];
            break;
          case Algorithm::kMAP:
            fresh_[k] = nkj[k] + h_.alpha - 1.0;
            break;
          default:
            fresh_[k] = std::exp(digamma(nkj[k] + h_.alpha));
            break;
        }
      }
      std::fill(nkj.begin(), nkj.end(), 0.0);
      for (std::size_t e = 0; e < doc.size(); ++e) {
        auto g = std::span<double>(gamma_).subspan(e * K_, K_);
        auto f = factor_.row(doc[e].word);
        double sum = 0.0;
        for (std::size_t k = 0; k < K_; ++k) sum += (g[k] = f[k] * fresh_[k]);
        if (!(sum > 0.0)) {
          std::fill(g.begin(), g.end(), 1.0 / static_cast<double>(K_));
          sum = 1.0;
        }
        for (std::size_t k = 0; k < K_; ++k) {
          g[k] /= sum;
          nkj[k] += doc[e].count * g[k];
        }
      }
      if (theta_change(nkj) < config_.tolerance) break;
    }
  }

  void run_token(std::span<const Entry> doc, std::span<double> nkj, Rng& rng) {
    const bool second_order = algorithm_ == Algorithm::kCVB;
    words_.clear();
    for (const Entry& e : doc) words_.insert(words_.end(), e.count, e.word);
    const std::size_t n = words_.size();
    gamma_.assign(n * K_, 0.0);
    var_.assign(K_, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
      auto g = std::span<double>(gamma_).subspan(t * K_, K_);
      draw_dirichlet(g, rng);
      for (std::size_t k = 0; k < K_; ++k) {
        nkj[k] += g[k];
        var_[k] += g[k] * (1.0 - g[k]);
      }
    }
    std::fill(prev_.begin(), prev_.end(), 0.0);
    theta_change(nkj);
    for (std::size_t sweep = 0; sweep < config_.max_sweeps; ++sweep) {
      for (std::size_t t = 0; t < n; ++t) {
        auto g = std::span<double>(gamma_).subspan(t * K_, K_);
        auto f = factor_.row(words_[t]);
        double sum = 0.0;
        for (std::size_t k = 0; k < K_; ++k) {
          nkj[k] = std::max(0.0, nkj[k] - g[k]);
          double v = f[k] * (nkj[k] + h_.alpha);
          if (second_order) {
            var_[k] = std::max(0.0, var_[k] - g[k] * (1.0 - g[k]));
            const double a = nkj[k] + h_.alpha;
            v *= std::exp(std::max(-50.0, -var_[k] / (2.0 * a * a)));
          }
          sum += (fresh_[k] = v);
        }
        for (std::size_t k = 0; k < K_; ++k) {
          g[k] = fresh_[k] / sum;
          nkj[k] += g[k];
          if (second_order) var_[k] += g[k] * (1.0 - g[k]);
        }
      }
      if (theta_change(nkj) < config_.tolerance) break;
    }
  }

  // Document counts averaged over the second half of the sweeps.
  void run_cgs(std::span<const Entry> doc, std::span<double> nkj, Rng& rng) {
    words_.clear();
    for (const Entry& e : doc) words_.insert(words_.end(), e.count, e.word);
    z_.resize(words_.size());
    counts_.assign(K_, 0.0);
    std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(K_ - 1));
    for (auto& z : z_) counts_[z = pick(rng)] += 1.0;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const std::size_t burn_in = config_.max_sweeps / 2;
    std::size_t kept = 0;
    for (std::size_t sweep = 0; sweep < std::max<std::size_t>(1, config_.max_sweeps); ++sweep) {
      for (std::size_t t = 0; t < words_.size(); ++t) {
        counts_[z_[t]] -= 1.0;
        auto f = factor_.row(words_[t]);
        double sum = 0.0;
        for (std::size_t k = 0; k < K_; ++k) sum += (fresh_[k] = f[k] * (counts_[k] + h_.alpha));
        double u = unif(rng) * sum;
        std::uint32_t k = 0;
        for (; k + 1 < K_; ++k) {
          u -= fresh_[k];
          if (u < 0.0) break;
        }
        z_[t] = k;
        counts_[k] += 1.0;
      }
      if (sweep >= burn_in) {
        for (std::size_t k = 0; k < K_; ++k) nkj[k] += counts_[k];
        ++kept;
      }
    }
    for (std::size_t k = 0; k < K_; ++k) nkj[k] /= static_cast<double>(kept);
  }

  const Matrix& factor_;
  Algorithm algorithm_;
  Hyperparams h_;
  FoldInConfig config_;
  std::size_t K_;
  std::vector<double> prev_, fresh_, gamma_, var_, counts_;
  std::vector<std::uint32_t> words_, z_;
};

}  // namespace

Matrix fold_in_counts(const Corpus& observed, const Matrix& word_factor, Algorithm algorithm,
                      const Hyperparams& h, const FoldInConfig& config, std::uint64_t seed) {
  if (word_factor.rows() != observed.vocab_size()) {
    throw std::invalid_argument("fold_in: vocabulary size " +
                                std::to_string(observed.vocab_size()) +
                                " does not match model W=" + std::to_string(word_factor.rows()));
  }
  Matrix nkj(observed.num_docs(), word_factor.cols());
  DocFolder folder(word_factor, algorithm, h, config);
  Rng rng(derive_seed(seed, "fold-in"));
  for (std::size_t j = 0; j < observed.num_docs(); ++j) {
    folder.run(observed.doc_entries(j), nkj.row(j), rng);
  }
  return nkj;
}

Matrix fold_in(const Corpus& observed, const Matrix& word_factor, Algorithm algorithm,
               const Hyperparams& h, Estimator estimator, const FoldInConfig& config,
               std::uint64_t seed) {
  const Matrix nkj = fold_in_counts(observed, word_factor, algorithm, h, config, seed);
  std::vector<double> nj(observed.num_docs());
  for (std::size_t j = 0; j < nj.size(); ++j) nj[j] = static_cast<double>(observed.doc_length(j));
  return estimate_theta(estimator, nkj, nj, h.alpha);
}

PerplexityReport perplexity(const Corpus& heldout, std::span<const TopicEstimates> samples) {
  if (samples.empty()) throw std::invalid_argument("perplexity: need at least one sample");
  if (heldout.total_tokens() == 0) throw std::invalid_argument("perplexity: no held-out tokens");
  const double S = static_cast<double>(samples.size());
  const std::size_t K = samples.front().phi.cols();
  double ll = 0.0;
  for (const Entry& e : heldout.entries()) {
    double p = 0.0;
    for (const TopicEstimates& s : samples) {
      auto phi = s.phi.row(e.word);
      auto theta = s.theta.row(e.doc);
      for (std::size_t k = 0; k < K; ++k) p += theta[k] * phi[k];
    }
    p /= S;
    if (!(p > 0.0)) {
      throw std::domain_error("perplexity: zero predictive probability for word " +
                              std::to_string(e.word) + " in document " + std::to_string(e.doc));
    }
    ll += e.count * std::log(p);
  }
  PerplexityReport report;
  report.log_likelihood = ll;
  report.heldout_tokens = heldout.total_tokens();
  report.perplexity = std::exp(-ll / static_cast<double>(report.heldout_tokens));
  report.estimator = samples.front().tag;
  report.samples = samples.size();
  return report;
}

std::vector<PerplexityReport> heldout_perplexity(const CountMatrices& train_counts,
                                                 const Hyperparams& h, Algorithm algorithm,
                                                 std::span<const Estimator> estimators,
                                                 const FoldInSplit& fold,
                                                 const FoldInConfig& config, std::uint64_t seed) {
  const Matrix factor = fold_in_word_factor(algorithm, train_counts, h);
  const Matrix nkj = fold_in_counts(fold.observed_half, factor, algorithm, h, config, seed);
  std::vector<double> nj(fold.observed_half.num_docs());
  for (std::size_t j = 0; j < nj.size(); ++j) {
    nj[j] = static_cast<double>(fold.observed_half.doc_length(j));
  }
  std::vector<PerplexityReport> reports;
  for (Estimator est : estimators) {
    TopicEstimates sample{estimate(est, train_counts, h).phi, estimate_theta(est, nkj, nj, h.alpha),
                          est};
    reports.push_back(perplexity(fold.heldout_half, std::span(&sample, 1)));
  }
  return reports;
}

double roc_auc(std::span<const double> scores, std::span<const char> positive) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t end = i;
    while (end < n && scores[order[end]] == scores[order[i]]) ++end;
    const double midrank = 0.5 * static_cast<double>(i + 1 + end);
    for (std::size_t m = i; m < end; ++m) {
      if (positive[order[m]]) {
        rank_sum += midrank;
        ++pos;
      }
    }
    i = end;
  }
  const double P = static_cast<double>(pos), Nn = static_cast<double>(n - pos);
  if (pos == 0 || pos == n) return std::numeric_limits<double>::quiet_NaN();
  return (rank_sum - P * (P + 1.0) / 2.0) / (P * Nn);
}

double average_precision(std::span<const double> scores, std::span<const char> positive) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](auto a, auto b) { return scores[a] > scores[b]; });
  double hits = 0.0, sum = 0.0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (positive[order[r]]) {
      hits += 1.0;
      sum += hits / static_cast<double>(r + 1);
    }
  }
  return hits > 0.0 ? sum / hits : std::numeric_limits<double>::quiet_NaN();
}

ClassificationReport classify_and_score(const Matrix& train_theta, std::span<const int> train_labels,
                                        const Matrix& test_theta, std::span<const int> test_labels) {
  if (train_labels.size() != train_theta.rows() || test_labels.size() != test_theta.rows()) {
    throw std::invalid_argument("classify_and_score: label count does not match documents");
  }
  const std::size_t K = train_theta.cols();
  std::vector<int> classes(train_labels.begin(), train_labels.end());
  classes.insert(classes.end(), test_labels.begin(), test_labels.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());

  auto norm = [](std::span<const double> v) {
    return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
  };

  ClassificationReport report;
  std::vector<double> centroid(K), scores(test_theta.rows());
  std::vector<char> positive(test_theta.rows());
  for (int c : classes) {
    std::fill(centroid.begin(), centroid.end(), 0.0);
    std::size_t members = 0;
    for (std::size_t j = 0; j < train_theta.rows(); ++j) {
      if (train_labels[j] != c) continue;
      auto row = train_theta.row(j);
      for (std::size_t k = 0; k < K; ++k) centroid[k] += row[k];
      ++members;
    }
    if (members == 0) {
      spdlog::warn("class {} has no training documents; excluded", c);
      continue;
    }
    const double cnorm = norm(centroid);
    for (std::size_t j = 0; j < test_theta.rows(); ++j) {
      auto row = test_theta.row(j);
      scores[j] = std::inner_product(row.begin(), row.end(), centroid.begin(), 0.0) /
                  (norm(row) * cnorm);
      positive[j] = test_labels[j] == c;
    }
    const double auc = roc_auc(scores, positive);
    if (std::isnan(auc)) {
      spdlog::warn("class {} has no positive or no negative test documents; excluded", c);
      continue;
    }
    report.classes.push_back(c);
    report.per_class_auc.push_back(auc);
    report.per_class_average_precision.push_back(average_precision(scores, positive));
  }
  if (!report.classes.empty()) {
    const double n = static_cast<double>(report.classes.size());
    report.mean_auc =
        std::accumulate(report.per_class_auc.begin(), report.per_class_auc.end(), 0.0) / n;
    report.mean_average_precision = std::accumulate(report.per_class_average_precision.begin(),
                                                    report.per_class_average_precision.end(), 0.0) /
                                    n;
  }
  return report;
}

std::vector<int> load_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open labels file " + path.string());
  std::vector<int> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      labels.push_back(std::stoi(line));
    } catch (const std::exception&) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": expected an integer class label");
    }
  }
  return labels;
}

}  // namespace topika
