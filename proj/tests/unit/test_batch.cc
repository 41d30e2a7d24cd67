// Apache License, Version 2.0, refer to LICENSE.txt

#include <doctest.h>

#include <cmath>
#include <random>

#include "support/synthetic.hh"
#include "topika/batch_inference.hh"

using namespace topika;

namespace {

Hyperparams hp(double alpha, double eta) {
  Hyperparams h;
  h.alpha = alpha;
  h.eta = eta;
  return h;
}

CountMatrices random_counts(std::size_t W, std::size_t K, std::size_t D, double lo, double hi,
                            std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  CountMatrices cm = CountMatrices::zeros(W, K, D);
  for (double& v : cm.n_wk.values()) v = u(rng);
  for (double& v : cm.n_kj.values()) v = u(rng);
  cm.refresh_totals();
  return cm;
}

Responsibilities fixed_resp(const Corpus& c, std::size_t K, std::uint64_t seed) {
  return init_random(c, K, Layout::kEntry, seed).first;
}

}  // namespace

TEST_CASE("single topic updates are trivially [1]") {
  const CountMatrices cm = random_counts(3, 1, 2, 1.0, 5.0, 1);
  const Entry e{1, 2, 3};
  double out[1];
  ml_update(e, cm, out);
  CHECK(out[0] == 1.0);
  map_update(e, cm, hp(2, 2), out);
  CHECK(out[0] == 1.0);
  vb_update(e, cm, hp(0.1, 0.1), out);
  CHECK(out[0] == doctest::Approx(1.0).epsilon(1e-15));
  vb_approx_update(e, cm, hp(0.1, 0.1), out);
  CHECK(out[0] == 1.0);
}

TEST_CASE("ml_update on symmetric counts") {
  CountMatrices cm = CountMatrices::zeros(2, 2, 1);
  cm.n_wk(0, 0) = cm.n_wk(0, 1) = 2;
  cm.n_kj(0, 0) = cm.n_kj(0, 1) = 3;
  cm.n_k = {5, 5};
  cm.n_j = {6};
  double out[2];
  CHECK(ml_update({0, 0, 1}, cm, out));
  CHECK(out[0] == doctest::Approx(0.5));
  CHECK(out[1] == doctest::Approx(0.5));
}

TEST_CASE("ml_update reports all-zero support") {
  double out[3];
  CHECK_FALSE(ml_update({0, 0, 1}, CountMatrices::zeros(2, 3, 1), out));
  CHECK(out[2] == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("map_update") {
  SUBCASE("tends to ml_update as the offsets vanish") {
    const CountMatrices cm = random_counts(5, 4, 3, 0.5, 10.0, 2);
    double ml[4], map[4];
    for (std::uint32_t w = 0; w < 5; ++w) {
      ml_update({1, w, 1}, cm, ml);
      map_update({1, w, 1}, cm, hp(1.000001, 1.000001), map);
      for (int k = 0; k < 4; ++k) CHECK(std::abs(ml[k] - map[k]) < 1e-4);
    }
  }
  SUBCASE("zero counts give uniform") {
    double out[3];
    map_update({0, 0, 1}, CountMatrices::zeros(4, 3, 1), hp(1.7, 3.0), out);
    for (double v : out) CHECK(v == doctest::Approx(1.0 / 3.0));
  }
  SUBCASE("direct substitution") {
    CountMatrices cm = CountMatrices::zeros(2, 2, 1);
    cm.n_wk(0, 0) = 1;
    cm.n_kj(0, 1) = 1;
    cm.n_k = {1, 1};
    cm.n_j = {1};
    double out[2];
    map_update({0, 0, 1}, cm, hp(2, 2), out);
    CHECK(out[0] == doctest::Approx(0.5));
    CHECK(out[1] == doctest::Approx(0.5));
  }
}

TEST_CASE("vb_update") {
  SUBCASE("zero counts give uniform") {
    double out[4];
    vb_update({0, 1, 1}, CountMatrices::zeros(3, 4, 1), hp(0.1, 0.05), out);
    for (double v : out) CHECK(v == doctest::Approx(0.25));
  }
  SUBCASE("matches the -0.5 offset form once counts reach 10") {
    const CountMatrices cm = random_counts(6, 5, 4, 10.0, 60.0, 3);
    double exact[5], approx[5];
    for (std::uint32_t j = 0; j < 4; ++j) {
      for (std::uint32_t w = 0; w < 6; ++w) {
        vb_update({j, w, 1}, cm, hp(0.1, 0.01), exact);
        vb_approx_update({j, w, 1}, cm, hp(0.1, 0.01), approx);
        for (int k = 0; k < 5; ++k) CHECK(std::abs(approx[k] / exact[k] - 1.0) < 0.02);
      }
    }
  }
}

TEST_CASE("vb_approx_update") {
  SUBCASE("eta = 0.5 with zero counts stays a distribution") {
    double out[3];
    vb_approx_update({0, 0, 1}, CountMatrices::zeros(2, 3, 1), hp(0.5, 0.5), out);
    double sum = 0.0;
    for (double v : out) {
      CHECK(std::isfinite(v));
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(sum == doctest::Approx(1.0));
  }
  SUBCASE("numerators equal map_update shifted by +0.5") {
    // Equal topic totals make the two denominators constant across k.
    CountMatrices cm = random_counts(4, 3, 2, 1.0, 9.0, 4);
    for (std::size_t w = 0; w < 4; ++w) {
      cm.n_wk(w, 1) = cm.n_wk(w, 0);
      cm.n_wk(w, 2) = cm.n_wk(w, 0);
    }
    cm.refresh_totals();
    double approx[3], map[3];
    for (std::uint32_t w = 0; w < 4; ++w) {
      vb_approx_update({1, w, 1}, cm, hp(0.7, 0.6), approx);
      map_update({1, w, 1}, cm, hp(1.2, 1.1), map);
      for (int k = 0; k < 3; ++k) CHECK(approx[k] == doctest::Approx(map[k]).epsilon(1e-14));
    }
  }
}

TEST_CASE("one ML sweep equals a straight-line EM step") {
  const Corpus c(2, 3, {{0, 0, 2}, {0, 1, 1}, {1, 1, 1}, {1, 2, 3}});
  const std::size_t K = 2;
  Responsibilities resp;
  resp.layout = Layout::kEntry;
  resp.gamma = Matrix(4, K);
  const double start[4][2] = {{0.9, 0.1}, {0.3, 0.7}, {0.6, 0.4}, {0.2, 0.8}};
  for (int e = 0; e < 4; ++e) {
    for (std::size_t k = 0; k < K; ++k) resp.gamma(e, k) = start[e][k];
  }

  // M step: phi_wk = N_wk / N_k and theta_kj = N_kj / N_j from the weighted counts.
  double nwk[3][2] = {}, nkj[2][2] = {}, nk[2] = {}, nj[2] = {};
  const auto entries = c.entries();
  for (int e = 0; e < 4; ++e) {
    for (std::size_t k = 0; k < K; ++k) {
      const double m = entries[e].count * start[e][k];
      nwk[entries[e].word][k] += m;
      nkj[entries[e].doc][k] += m;
      nk[k] += m;
      nj[entries[e].doc] += m;
    }
  }
  // E step: gamma ∝ phi_wk theta_kj.
  double expected[4][2];
  for (int e = 0; e < 4; ++e) {
    double s = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      const double phi = nwk[entries[e].word][k] / nk[k];
      const double theta = nkj[entries[e].doc][k] / nj[entries[e].doc];
      s += (expected[e][k] = phi * theta);
    }
    for (std::size_t k = 0; k < K; ++k) expected[e][k] /= s;
  }

  CountMatrices cm = rebuild_counts(c, resp);
  batch_sweep(Algorithm::kML, c, resp, cm, hp(0.5, 0.5));
  for (int e = 0; e < 4; ++e) {
    for (std::size_t k = 0; k < K; ++k) {
      CHECK(resp.gamma(e, k) == doctest::Approx(expected[e][k]).epsilon(1e-14));
    }
  }
}

TEST_CASE("EM objectives never decrease") {
  const auto synth = testing::make_lda_corpus(50, 40, 4, 60, 0.3, 0.2, 17);
  for (auto [alg, h] : {std::pair{Algorithm::kML, hp(0.5, 0.5)}, std::pair{Algorithm::kMAP, hp(1.5, 1.2)}}) {
    CAPTURE(to_string(alg));
    auto [resp, cm] = init_random(synth.corpus, 4, Layout::kEntry, 8);
    double previous = batch_objective(alg, synth.corpus, cm, h);
    for (int sweep = 0; sweep < 100; ++sweep) {
      batch_sweep(alg, synth.corpus, resp, cm, h);
      const double now = batch_objective(alg, synth.corpus, cm, h);
      CHECK(now >= previous - 1e-9 * std::abs(previous));
      previous = now;
    }
  }
}

TEST_CASE("a converged ML state is a fixed point") {
  const Corpus c = testing::tiny_corpus();
  auto [resp, cm] = init_random(c, 2, Layout::kEntry, 4);
  for (int sweep = 0; sweep < 50000; ++sweep) {
    if (batch_sweep(Algorithm::kML, c, resp, cm, hp(0.5, 0.5), false).max_change < 1e-14) break;
  }
  const Matrix before = resp.gamma;
  batch_sweep(Algorithm::kML, c, resp, cm, hp(0.5, 0.5), false);
  batch_sweep(Algorithm::kML, c, resp, cm, hp(0.5, 0.5), false);
  for (std::size_t i = 0; i < before.values().size(); ++i) {
    CHECK(std::abs(resp.gamma.values()[i] - before.values()[i]) < 1e-12);
  }
}

TEST_CASE("batch sweeps are deterministic") {
  const auto synth = testing::make_lda_corpus(20, 15, 3, 30, 0.5, 0.5, 2);
  Matrix runs[2];
  for (Matrix& out : runs) {
    auto [resp, cm] = init_random(synth.corpus, 3, Layout::kEntry, 12);
    for (int s = 0; s < 10; ++s) batch_sweep(Algorithm::kVB, synth.corpus, resp, cm, hp(0.1, 0.1));
    out = resp.gamma;
  }
  CHECK(runs[0] == runs[1]);
}

TEST_CASE("log_likelihood") {
  const Corpus c = testing::tiny_corpus();
  TopicEstimates uniform{Matrix(4, 2, 0.25), Matrix(3, 2, 0.5), Estimator::kCollapsed};
  CHECK(log_likelihood(c, uniform) ==
        doctest::Approx(static_cast<double>(c.total_tokens()) * std::log(0.25)).epsilon(1e-14));

  std::mt19937_64 rng(6);
  TopicEstimates random{Matrix(4, 2), Matrix(3, 2), Estimator::kCollapsed};
  for (std::size_t k = 0; k < 2; ++k) {
    const auto col = testing::draw_dirichlet(rng, 4, 1.0);
    for (std::size_t w = 0; w < 4; ++w) random.phi(w, k) = col[w];
  }
  for (std::size_t j = 0; j < 3; ++j) {
    const auto row = testing::draw_dirichlet(rng, 2, 1.0);
    random.theta(j, 0) = row[0];
    random.theta(j, 1) = row[1];
  }
  double brute = 0.0;
  for (std::size_t j = 0; j < 3; ++j) {
    for (const Entry& e : c.doc_entries(j)) {
      for (std::uint32_t n = 0; n < e.count; ++n) {
        brute += std::log(random.theta(j, 0) * random.phi(e.word, 0) +
                          random.theta(j, 1) * random.phi(e.word, 1));
      }
    }
  }
  CHECK(log_likelihood(c, random) == doctest::Approx(brute).epsilon(1e-12));

  const Corpus one(1, 2, {{0, 0, 1}});
  TopicEstimates sharp{Matrix(2, 1), Matrix(1, 1, 1.0), Estimator::kCollapsed};
  sharp.phi(0, 0) = 1.0 - 1e-9;
  sharp.phi(1, 0) = 1e-9;
  const double ll = log_likelihood(one, sharp);
  CHECK(ll < 0.0);
  CHECK(ll > -1e-8);
}
