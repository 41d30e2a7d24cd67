// Apache License, Version 2.0, refer to LICENSE.txt

#include "topika/collapsed_inference.hh"

#include <algorithm>
#include <barrier>
#include <cmath>
#include <random>
#include <thread>
#include <vector>

#include <spdlog/spdlog.h>

namespace topika {

namespace {

constexpr double kExponentCap = 50.0;

std::span<double> scratch(std::size_t K) {
  thread_local std::vector<double> buf;
  if (buf.size() < K) buf.resize(K);
  return {buf.data(), K};
}

void subtract_clamped(std::span<double> counts, std::span<const double> mass) {
  for (std::size_t k = 0; k < counts.size(); ++k) counts[k] = std::max(0.0, counts[k] - mass[k]);
}

}  // namespace

CollapsedState init_collapsed(const Corpus& corpus, std::size_t K, Algorithm algorithm,
                              std::uint64_t seed) {
  if (K < 1) throw ConfigError("K must be >= 1");
  CollapsedState state;
  state.tokens = corpus.tokens();
  const std::size_t W = corpus.vocab_size(), D = corpus.num_docs();
  if (algorithm == Algorithm::kCGS) {
    Rng rng(derive_seed(seed, "init"));
    std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(K - 1));
    state.assignments.z.resize(state.tokens.size());
    for (auto& z : state.assignments.z) z = pick(rng);
    state.counts = rebuild_counts(state.tokens, state.assignments, W, K, D);
    return state;
  }
  if (is_batch(algorithm)) {
    throw ConfigError(std::string(to_string(algorithm)) + " is not a collapsed algorithm");
  }
  auto [resp, counts] = init_random(corpus, K, Layout::kToken, seed);
  state.resp = std::move(resp);
  state.counts = std::move(counts);
  if (algorithm == Algorithm::kCVB) state.variances = rebuild_variances(state.tokens, state.resp, W, D);
  return state;
}

double cgs_conditional(std::uint32_t word, std::uint32_t doc, const CountMatrices& cm,
                       const Hyperparams& h, std::span<double> out) {
  const double w_eta = static_cast<double>(cm.W) * h.eta;
  auto wk = cm.n_wk.row(word);
  auto kj = cm.n_kj.row(doc);
  double sum = 0.0;
  for (std::size_t k = 0; k < cm.K; ++k) {
    out[k] = (wk[k] + h.eta) / (cm.n_k[k] + w_eta) * (kj[k] + h.alpha);
    sum += out[k];
  }
  return sum;
}

double cvb0_conditional(std::uint32_t word, std::uint32_t doc, const CountMatrices& cm,
                        const Hyperparams& h, std::span<double> out) {
  const double W = static_cast<double>(cm.W);
  double sum = 0.0;
  for (std::size_t k = 0; k < cm.K; ++k) {
    const double word_term = (cm.n_wk(word, k) + h.eta) / (cm.n_k[k] + W * h.eta);
    out[k] = word_term * (cm.n_kj(doc, k) + h.alpha);
    sum += out[k];
  }
  return sum;
}

std::uint32_t cgs_step(std::size_t t, CollapsedState& state, const Hyperparams& h, Rng& rng) {
  CountMatrices& cm = state.counts;
  const std::uint32_t w = state.tokens.word[t], j = state.tokens.doc[t];
  std::uint32_t k = state.assignments.z[t];
  cm.n_wk(w, k) -= 1.0;
  cm.n_kj(j, k) -= 1.0;
  cm.n_k[k] -= 1.0;

  auto p = scratch(cm.K);
  const double total = cgs_conditional(w, j, cm, h, p);
  double u = std::uniform_real_distribution<double>(0.0, total)(rng);
  k = 0;
  for (; k + 1 < cm.K; ++k) {
    u -= p[k];
    if (u < 0.0) break;
  }

  cm.n_wk(w, k) += 1.0;
  cm.n_kj(j, k) += 1.0;
  cm.n_k[k] += 1.0;
  state.assignments.z[t] = k;
  return k;
}

double cvb0_step(std::size_t t, CollapsedState& state, const Hyperparams& h, bool remove_current) {
  CountMatrices& cm = state.counts;
  const std::uint32_t w = state.tokens.word[t], j = state.tokens.doc[t];
  auto g = state.resp.at(t);
  auto wk = cm.n_wk.row(w);
  auto kj = cm.n_kj.row(j);
  if (remove_current) {
    subtract_clamped(wk, g);
    subtract_clamped(kj, g);
    subtract_clamped(cm.n_k, g);
  }
  auto fresh = scratch(cm.K);
  const double total = cvb0_conditional(w, j, cm, h, fresh);
  double change = 0.0;
  for (std::size_t k = 0; k < cm.K; ++k) {
    const double v = fresh[k] / total;
    const double add = remove_current ? v : v - g[k];
    wk[k] += add;
    kj[k] += add;
    cm.n_k[k] += add;
    change = std::max(change, std::abs(v - g[k]));
    g[k] = v;
  }
  return change;
}

double cvb_step(std::size_t t, CollapsedState& state, const Hyperparams& h, std::size_t& capped) {
  CountMatrices& cm = state.counts;
  VarianceCounts& var = state.variances;
  const std::uint32_t w = state.tokens.word[t], j = state.tokens.doc[t];
  const std::size_t K = cm.K;
  const double w_eta = static_cast<double>(cm.W) * h.eta;
  auto g = state.resp.at(t);
  auto wk = cm.n_wk.row(w);
  auto kj = cm.n_kj.row(j);
  auto vwk = var.v_wk.row(w);
  auto vkj = var.v_kj.row(j);

  auto moments = scratch(2 * K);
  auto gvar = moments.subspan(K, K);
  for (std::size_t k = 0; k < K; ++k) gvar[k] = g[k] * (1.0 - g[k]);
  subtract_clamped(wk, g);
  subtract_clamped(kj, g);
  subtract_clamped(cm.n_k, g);
  subtract_clamped(vwk, gvar);
  subtract_clamped(vkj, gvar);
  subtract_clamped(var.v_k, gvar);

  auto fresh = moments.subspan(0, K);
  double total = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    const double a = kj[k] + h.alpha;
    const double b = wk[k] + h.eta;
    const double c = cm.n_k[k] + w_eta;
    double expo = -vkj[k] / (2.0 * a * a) - vwk[k] / (2.0 * b * b) + var.v_k[k] / (2.0 * c * c);
    if (std::abs(expo) > kExponentCap) {
      expo = std::clamp(expo, -kExponentCap, kExponentCap);
      ++capped;
    }
    fresh[k] = b / c * a * std::exp(expo);
    total += fresh[k];
  }
  double change = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    const double v = fresh[k] / total;
    const double v_var = v * (1.0 - v);
    wk[k] += v;
    kj[k] += v;
    cm.n_k[k] += v;
    vwk[k] += v_var;
    vkj[k] += v_var;
    var.v_k[k] += v_var;
    change = std::max(change, std::abs(v - g[k]));
    g[k] = v;
  }
  return change;
}

CollapsedSweepStats collapsed_sweep(Algorithm algorithm, CollapsedState& state,
                                    const Hyperparams& h, Rng& rng, bool remove_current) {
  CollapsedSweepStats stats;
  const std::size_t N = state.tokens.size();
  switch (algorithm) {
    case Algorithm::kCGS:
      for (std::size_t t = 0; t < N; ++t) {
        const auto before = state.assignments.z[t];
        if (cgs_step(t, state, h, rng) != before) ++stats.moved;
      }
      break;
    case Algorithm::kCVB0:
      for (std::size_t t = 0; t < N; ++t) {
        stats.max_change = std::max(stats.max_change, cvb0_step(t, state, h, remove_current));
      }
      break;
    case Algorithm::kCVB:
      for (std::size_t t = 0; t < N; ++t) {
        stats.max_change = std::max(stats.max_change, cvb_step(t, state, h, stats.capped));
      }
      if (stats.capped > 0) spdlog::warn("CVB sweep: exponent capped {} time(s)", stats.capped);
      break;
    default:
      throw ConfigError("collapsed_sweep: unsupported algorithm " +
                        std::string(to_string(algorithm)));
  }
  return stats;
}

namespace {

struct WorkerDelta {
  Matrix wk;
  std::vector<double> k;
  std::vector<std::uint32_t> touched;
  std::vector<char> is_touched;
};

}  // namespace

ParallelSweepStats parallel_cvb0_sweep(CollapsedState& state, const Hyperparams& h,
                                       const ParallelOptions& options) {
  if (options.workers < 1) throw ConfigError("workers must be >= 1");
  if (options.sync_every < 1) throw ConfigError("sync_every must be >= 1");
  CountMatrices& cm = state.counts;
  const TokenStream& tokens = state.tokens;
  const std::size_t K = cm.K, W = cm.W, N = tokens.size();
  const std::size_t workers = std::max<std::size_t>(1, std::min(options.workers, cm.D));
  const double w_eta = static_cast<double>(W) * h.eta;

  // Shard boundaries fall on document boundaries, balanced by token count.
  std::vector<std::size_t> bounds{0};
  for (std::size_t s = 1; s < workers; ++s) {
    const std::size_t target = N * s / workers;
    auto it = std::lower_bound(tokens.doc_begin.begin(), tokens.doc_begin.end(), target);
    bounds.push_back(std::max(bounds.back(), it == tokens.doc_begin.end() ? N : *it));
  }
  bounds.push_back(N);
  std::size_t epochs = 0;
  for (std::size_t s = 0; s < workers; ++s) {
    const std::size_t len = bounds[s + 1] - bounds[s];
    epochs = std::max(epochs, (len + options.sync_every - 1) / options.sync_every);
  }

  std::vector<WorkerDelta> deltas(workers);
  for (auto& d : deltas) {
    d.wk = Matrix(W, K);
    d.k.assign(K, 0.0);
    d.is_touched.assign(W, 0);
  }
  std::vector<double> worker_change(workers, 0.0);
  ParallelSweepStats stats;

  auto merge = [&]() noexcept {
    for (auto& d : deltas) {
      for (std::uint32_t w : d.touched) {
        auto src = d.wk.row(w);
        auto dst = cm.n_wk.row(w);
        for (std::size_t k = 0; k < K; ++k) {
          dst[k] = std::max(0.0, dst[k] + src[k]);
          src[k] = 0.0;
        }
        d.is_touched[w] = 0;
      }
      d.touched.clear();
      for (std::size_t k = 0; k < K; ++k) {
        cm.n_k[k] += d.k[k];
        d.k[k] = 0.0;
      }
    }
    ++stats.merges;
    double mass = 0.0;
    for (double v : cm.n_k) mass += v;
    const double err = std::abs(mass - static_cast<double>(N)) / std::max<double>(1.0, N);
    stats.max_conservation_error = std::max(stats.max_conservation_error, err);
  };
  std::barrier sync(static_cast<std::ptrdiff_t>(workers), merge);

  // A lone worker has nobody to hide its updates from, so it writes straight
  // into the shared counts and matches sequential CVB0 bit for bit.
  const bool direct = workers == 1;
  auto run = [&](std::size_t s) {
    WorkerDelta& d = deltas[s];
    std::vector<double> fresh(K);
    std::size_t t = bounds[s];
    for (std::size_t e = 0; e < epochs; ++e) {
      const std::size_t stop = std::min(bounds[s + 1], t + options.sync_every);
      for (; t < stop; ++t) {
        const std::uint32_t w = tokens.word[t], j = tokens.doc[t];
        auto g = state.resp.at(t);
        auto shared_wk = cm.n_wk.row(w);
        auto own_wk = d.wk.row(w);
        auto kj = cm.n_kj.row(j);
        double total = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
          fresh[k] = (shared_wk[k] + own_wk[k] + h.eta) / (cm.n_k[k] + d.k[k] + w_eta) *
                     (kj[k] + h.alpha);
          total += fresh[k];
        }
        if (!d.is_touched[w]) {
          d.is_touched[w] = 1;
          d.touched.push_back(w);
        }
        for (std::size_t k = 0; k < K; ++k) {
          const double v = fresh[k] / total;
          const double delta = v - g[k];
          if (direct) {
            shared_wk[k] += delta;
            cm.n_k[k] += delta;
          } else {
            own_wk[k] += delta;
            d.k[k] += delta;
          }
          kj[k] += delta;
          worker_change[s] = std::max(worker_change[s], std::abs(delta));
          g[k] = v;
        }
      }
      sync.arrive_and_wait();
    }
  };

  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t s = 0; s < workers; ++s) pool.emplace_back(run, s);
  }
  stats.max_change = *std::max_element(worker_change.begin(), worker_change.end());
  return stats;
}

CallenResult callen_oracle(const Corpus& corpus, std::size_t K, const Hyperparams& h) {
  const TokenStream tokens = corpus.tokens();
  const std::size_t N = tokens.size(), W = corpus.vocab_size(), D = corpus.num_docs();
  std::size_t configs = 1;
  for (std::size_t t = 0; t < N; ++t) {
    if (configs > kMaxCallenConfigurations / K) {
      throw ConfigError("callen_oracle: K^N exceeds " + std::to_string(kMaxCallenConfigurations));
    }
    configs *= K;
  }

  std::vector<std::uint32_t> z(N, 0);
  TopicAssignments za;
  auto next = [&]() {
    for (std::size_t t = 0; t < N; ++t) {
      if (++z[t] < K) return;
      z[t] = 0;
    }
  };
  const double Kd = static_cast<double>(K), Wd = static_cast<double>(W);
  auto log_joint = [&](const CountMatrices& cm) {
    double lp = 0.0;
    for (std::size_t j = 0; j < D; ++j) {
      for (std::size_t k = 0; k < K; ++k) lp += std::lgamma(cm.n_kj(j, k) + h.alpha);
      lp -= std::lgamma(cm.n_j[j] + Kd * h.alpha);
    }
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t w = 0; w < W; ++w) lp += std::lgamma(cm.n_wk(w, k) + h.eta);
      lp -= std::lgamma(cm.n_k[k] + Wd * h.eta);
    }
    return lp;
  };

  std::vector<double> weight(configs);
  double top = -INFINITY;
  for (std::size_t c = 0; c < configs; ++c, next()) {
    za.z = z;
    weight[c] = log_joint(rebuild_counts(tokens, za, W, K, D));
    top = std::max(top, weight[c]);
  }
  double norm = 0.0;
  for (double& v : weight) norm += (v = std::exp(v - top));
  for (double& v : weight) v /= norm;

  CallenResult result{Matrix(N, K), 0.0, configs};
  Matrix expected(N, K);
  std::vector<double> cond(K);
  std::fill(z.begin(), z.end(), 0);
  for (std::size_t c = 0; c < configs; ++c, next()) {
    za.z = z;
    CountMatrices cm = rebuild_counts(tokens, za, W, K, D);
    for (std::size_t t = 0; t < N; ++t) {
      result.marginals(t, z[t]) += weight[c];
      const std::uint32_t w = tokens.word[t], j = tokens.doc[t];
      cm.n_wk(w, z[t]) -= 1.0;
      cm.n_kj(j, z[t]) -= 1.0;
      cm.n_k[z[t]] -= 1.0;
      const double total = cgs_conditional(w, j, cm, h, cond);
      for (std::size_t k = 0; k < K; ++k) expected(t, k) += weight[c] * cond[k] / total;
      cm.n_wk(w, z[t]) += 1.0;
      cm.n_kj(j, z[t]) += 1.0;
      cm.n_k[z[t]] += 1.0;
    }
  }
  for (std::size_t t = 0; t < N; ++t) {
    for (std::size_t k = 0; k < K; ++k) {
      result.identity_residual =
          std::max(result.identity_residual, std::abs(expected(t, k) - result.marginals(t, k)));
    }
  }
  return result;
}

Matrix cgs_marginals(const Corpus& corpus, std::size_t K, const Hyperparams& h,
                     std::size_t burn_in, std::size_t sweeps, std::uint64_t seed) {
  CollapsedState state = init_collapsed(corpus, K, Algorithm::kCGS, seed);
  Rng rng(derive_seed(seed, "sampler"));
  const std::size_t N = state.tokens.size();
  for (std::size_t s = 0; s < burn_in; ++s) collapsed_sweep(Algorithm::kCGS, state, h, rng);
  Matrix freq(N, K);
  for (std::size_t s = 0; s < sweeps; ++s) {
    collapsed_sweep(Algorithm::kCGS, state, h, rng);
    for (std::size_t t = 0; t < N; ++t) freq(t, state.assignments.z[t]) += 1.0;
  }
  for (double& v : freq.values()) v /= static_cast<double>(sweeps);
  return freq;
}

}  // namespace topika
