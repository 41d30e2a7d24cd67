// Apache License, Version 2.0, refer to LICENSE.txt

#include <doctest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <numeric>

#include "support/synthetic.hh"
#include "topika/collapsed_inference.hh"

using namespace topika;

namespace {

Hyperparams hp(double alpha, double eta) {
  Hyperparams h;
  h.alpha = alpha;
  h.eta = eta;
  return h;
}

// Upper tail probability of Pearson's statistic for observed counts against
// expected probabilities.
double chi_squared_p(const std::vector<double>& observed, const std::vector<double>& p) {
  const double n = std::accumulate(observed.begin(), observed.end(), 0.0);
  double stat = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double e = n * p[i];
    stat += (observed[i] - e) * (observed[i] - e) / e;
  }
  boost::math::chi_squared_distribution<double> dist(static_cast<double>(p.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

// Draws topics for token t from the conditional on the counts with t removed,
// restoring the state after every draw.
std::vector<double> cgs_draws(const CollapsedState& frozen, std::size_t t, const Hyperparams& h,
                              std::size_t draws, std::uint64_t seed) {
  std::vector<double> hist(frozen.counts.K, 0.0);
  Rng rng(seed);
  for (std::size_t d = 0; d < draws; ++d) {
    CollapsedState s = frozen;
    hist[cgs_step(t, s, h, rng)] += 1.0;
  }
  return hist;
}

Corpus asymmetric_corpus() {
  return Corpus(2, 3, {{0, 0, 3}, {0, 1, 1}, {1, 1, 2}, {1, 2, 4}});
}

}  // namespace

TEST_CASE("single topic") {
  const Corpus c = testing::tiny_corpus();
  CollapsedState cgs = init_collapsed(c, 1, Algorithm::kCGS, 1);
  Rng rng(1);
  for (std::size_t t = 0; t < cgs.tokens.size(); ++t) CHECK(cgs_step(t, cgs, hp(0.1, 0.1), rng) == 0);
  CollapsedState cvb0 = init_collapsed(c, 1, Algorithm::kCVB0, 1);
  cvb0_step(2, cvb0, hp(0.1, 0.1));
  CHECK(cvb0.resp.gamma(2, 0) == 1.0);
}

TEST_CASE("CGS and CVB0 conditionals agree on frozen counts") {
  const CollapsedState s = init_collapsed(asymmetric_corpus(), 4, Algorithm::kCVB0, 3);
  std::vector<double> a(4), b(4);
  for (std::uint32_t w = 0; w < 3; ++w) {
    for (std::uint32_t j = 0; j < 2; ++j) {
      const double sa = cgs_conditional(w, j, s.counts, hp(0.3, 0.05), a);
      const double sb = cvb0_conditional(w, j, s.counts, hp(0.3, 0.05), b);
      CHECK(std::abs(sa - sb) <= 1e-14 * sa);
      for (int k = 0; k < 4; ++k) CHECK(std::abs(a[k] - b[k]) <= 1e-14 * a[k]);
    }
  }
}

TEST_CASE("CGS draws follow the symmetric conditional") {
  // Topics tie once token 0 is removed, so the law is uniform.
  const Corpus c7(1, 1, {{0, 0, 7}});
  CollapsedState u = init_collapsed(c7, 3, Algorithm::kCGS, 1);
  u.assignments.z = {0, 0, 0, 1, 1, 2, 2};
  u.counts = rebuild_counts(u.tokens, u.assignments, 1, 3, 1);
  CHECK(chi_squared_p(cgs_draws(u, 0, hp(0.5, 0.5), 100000, 5), {1.0 / 3, 1.0 / 3, 1.0 / 3}) > 0.01);
}

TEST_CASE("CGS draws match the CVB0 responsibility on asymmetric counts") {
  const Corpus c = asymmetric_corpus();
  CollapsedState cgs = init_collapsed(c, 3, Algorithm::kCGS, 7);
  const Hyperparams h = hp(0.2, 0.1);
  const std::size_t t = 4;

  // The same hard assignments expressed as one-hot responsibilities.
  CollapsedState cvb0 = init_collapsed(c, 3, Algorithm::kCVB0, 7);
  cvb0.resp.gamma.fill(0.0);
  for (std::size_t i = 0; i < cgs.tokens.size(); ++i) cvb0.resp.gamma(i, cgs.assignments.z[i]) = 1.0;
  cvb0.counts = cgs.counts;
  cvb0_step(t, cvb0, h);
  std::vector<double> gamma(cvb0.resp.at(t).begin(), cvb0.resp.at(t).end());

  CHECK(chi_squared_p(cgs_draws(cgs, t, h, 100000, 99), gamma) > 0.01);
}

TEST_CASE("CVB0 converges to a self-consistent fixed point") {
  const Corpus c = testing::tiny_corpus();
  CollapsedState s = init_collapsed(c, 2, Algorithm::kCVB0, 2);
  Rng rng(0);
  const Hyperparams h = hp(0.3, 0.2);
  for (int sweep = 0; sweep < 10000; ++sweep) {
    if (collapsed_sweep(Algorithm::kCVB0, s, h, rng).max_change < 1e-13) break;
  }
  CHECK(collapsed_sweep(Algorithm::kCVB0, s, h, rng).max_change < 1e-10);
}

TEST_CASE("CVB0 reaches the same fixed point from different seeds") {
  const Corpus c(2, 2, {{0, 0, 3}, {1, 1, 2}, {1, 0, 1}});
  const Hyperparams h = hp(0.1, 0.1);
  std::vector<Matrix> fixed;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    CollapsedState s = init_collapsed(c, 2, Algorithm::kCVB0, seed);
    Rng rng(0);
    for (int sweep = 0; sweep < 100000; ++sweep) {
      if (collapsed_sweep(Algorithm::kCVB0, s, h, rng).max_change < 1e-14) break;
    }
    fixed.push_back(s.resp.gamma);
  }
  for (const Matrix& g : fixed) {
    double same = 0.0, swapped = 0.0;
    for (std::size_t t = 0; t < g.rows(); ++t) {
      for (std::size_t k = 0; k < 2; ++k) {
        same = std::max(same, std::abs(g(t, k) - fixed[0](t, k)));
        swapped = std::max(swapped, std::abs(g(t, k) - fixed[0](t, 1 - k)));
      }
    }
    CHECK(std::min(same, swapped) < 1e-6);
  }
}

TEST_CASE("CVB reduces to CVB0 without variance") {
  const Corpus c = asymmetric_corpus();
  CollapsedState s = init_collapsed(c, 3, Algorithm::kCVB, 4);
  // One-hot responsibilities carry no variance.
  for (std::size_t t = 0; t < s.tokens.size(); ++t) {
    auto g = s.resp.at(t);
    std::fill(g.begin(), g.end(), 0.0);
    g[t % 3] = 1.0;
  }
  s.counts = [&] {
    CountMatrices cm = CountMatrices::zeros(3, 3, 2);
    for (std::size_t t = 0; t < s.tokens.size(); ++t) {
      for (std::size_t k = 0; k < 3; ++k) {
        cm.n_wk(s.tokens.word[t], k) += s.resp.gamma(t, k);
        cm.n_kj(s.tokens.doc[t], k) += s.resp.gamma(t, k);
      }
    }
    cm.refresh_totals();
    return cm;
  }();
  s.variances = rebuild_variances(s.tokens, s.resp, 3, 2);
  for (double v : s.variances.v_wk.values()) CHECK(v == 0.0);

  CollapsedState a = s, b = s;
  std::size_t capped = 0;
  cvb_step(5, a, hp(0.4, 0.3), capped);
  cvb0_step(5, b, hp(0.4, 0.3));
  for (std::size_t k = 0; k < 3; ++k) CHECK(a.resp.gamma(5, k) == doctest::Approx(b.resp.gamma(5, k)).epsilon(1e-15));
  CHECK(capped == 0);
}

TEST_CASE("CVB document variance multiplier") {
  const Corpus c(1, 2, {{0, 0, 1}, {0, 1, 1}});
  CollapsedState s = init_collapsed(c, 2, Algorithm::kCVB, 1);
  const Hyperparams h = hp(0.5, 0.5);
  s.resp.gamma(0, 0) = 1.0;
  s.resp.gamma(0, 1) = 0.0;
  // Counts as they stand with token 0 on topic 0; its removal leaves them symmetric.
  s.counts.n_wk(0, 0) = 2;
  s.counts.n_wk(0, 1) = 1;
  s.counts.n_wk(1, 0) = s.counts.n_wk(1, 1) = 1;
  s.counts.n_kj(0, 0) = 2.5;
  s.counts.n_kj(0, 1) = 1.5;
  s.counts.n_k = {4, 3};
  s.variances.v_wk.fill(0.0);
  s.variances.v_kj.fill(0.0);
  s.variances.v_kj(0, 0) = 1.0;  // N_kj + alpha = 2 for both topics after removal
  s.variances.v_k = {0.0, 0.0};
  std::size_t capped = 0;
  cvb_step(0, s, h, capped);
  const double m = std::exp(-1.0 / 8.0);
  CHECK(s.resp.gamma(0, 0) == doctest::Approx(m / (m + 1.0)).epsilon(1e-14));
}

TEST_CASE("collapsed sweeps conserve mass") {
  const auto synth = testing::make_lda_corpus(30, 25, 3, 40, 0.3, 0.3, 5);
  const double N = static_cast<double>(synth.corpus.total_tokens());
  for (Algorithm alg : {Algorithm::kCGS, Algorithm::kCVB0, Algorithm::kCVB}) {
    CollapsedState s = init_collapsed(synth.corpus, 3, alg, 6);
    Rng rng(1);
    for (int sweep = 0; sweep < 5; ++sweep) {
      collapsed_sweep(alg, s, hp(0.1, 0.1), rng);
      CHECK(std::abs(std::accumulate(s.counts.n_k.begin(), s.counts.n_k.end(), 0.0) - N) < 1e-8);
    }
  }
}

TEST_CASE("CGS is reproducible for a fixed seed") {
  const auto synth = testing::make_lda_corpus(10, 12, 3, 20, 0.5, 0.5, 8);
  std::vector<std::uint32_t> z[2];
  for (auto& out : z) {
    CollapsedState s = init_collapsed(synth.corpus, 3, Algorithm::kCGS, 42);
    Rng rng(derive_seed(42, "sampler"));
    for (int sweep = 0; sweep < 20; ++sweep) collapsed_sweep(Algorithm::kCGS, s, hp(0.1, 0.1), rng);
    out = s.assignments.z;
  }
  CHECK(z[0] == z[1]);
}

TEST_CASE("parallel CVB0 with one worker is sequential CVB0 without removal") {
  const auto synth = testing::make_lda_corpus(25, 20, 3, 30, 0.3, 0.3, 11);
  CollapsedState a = init_collapsed(synth.corpus, 3, Algorithm::kCVB0, 3);
  CollapsedState b = a;
  Rng rng(0);
  for (int sweep = 0; sweep < 5; ++sweep) {
    parallel_cvb0_sweep(a, hp(0.1, 0.1), {1, 64});
    collapsed_sweep(Algorithm::kCVB0, b, hp(0.1, 0.1), rng, false);
  }
  CHECK(a.resp.gamma == b.resp.gamma);
  CHECK(a.counts.n_wk == b.counts.n_wk);
}

TEST_CASE("parallel CVB0 conserves mass at every merge") {
  const auto synth = testing::make_lda_corpus(60, 30, 4, 40, 0.3, 0.3, 12);
  CollapsedState s = init_collapsed(synth.corpus, 4, Algorithm::kCVB0, 3);
  for (int sweep = 0; sweep < 5; ++sweep) {
    const ParallelSweepStats stats = parallel_cvb0_sweep(s, hp(0.1, 0.1), {4, 50});
    CHECK(stats.merges > 1);
    CHECK(stats.max_conservation_error < 1e-12);
  }
  CHECK(s.counts.consistency_error() < 1e-12);
}

TEST_CASE("exact posterior by enumeration") {
  SUBCASE("one token under a symmetric prior") {
    const CallenResult r = callen_oracle(Corpus(1, 3, {{0, 1, 1}}), 4, hp(0.5, 0.5));
    for (std::size_t k = 0; k < 4; ++k) CHECK(r.marginals(0, k) == doctest::Approx(0.25));
    CHECK(r.configurations == 4);
  }
  SUBCASE("three tokens: CGS long-run marginals and the identity") {
    const Corpus c(1, 2, {{0, 0, 2}, {0, 1, 1}});
    const Hyperparams h = hp(0.3, 0.2);
    const CallenResult r = callen_oracle(c, 2, h);
    CHECK(r.identity_residual < 1e-10);
    const Matrix emp = cgs_marginals(c, 2, h, 1000, 100000, 77);
    for (std::size_t t = 0; t < 3; ++t) {
      for (std::size_t k = 0; k < 2; ++k) CHECK(std::abs(emp(t, k) - r.marginals(t, k)) < 0.01);
    }
  }
  SUBCASE("too many configurations") {
    CHECK_THROWS_AS(callen_oracle(Corpus(1, 2, {{0, 0, 30}}), 3, hp(0.5, 0.5)), ConfigError);
  }
}
