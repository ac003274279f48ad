#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "gmmcache/error.hpp"
#include "gmmcache/gmm.hpp"
#include "gmmcache/gmm_kernels.hpp"

namespace gmmcache {

namespace {

// Components whose responsibility mass falls below this fraction of N are
// re-seeded.
constexpr double kEmptyComponentFraction = 1e-10;

struct Params {
  std::vector<double> weights;
  std::vector<Gaussian2> components;
};

Cov2 population_covariance(std::span<const Vec2> z) {
  const double n = static_cast<double>(z.size());
  double mp = 0.0, mt = 0.0;
  for (const auto& p : z) {
    mp += p[0];
    mt += p[1];
  }
  mp /= n;
  mt /= n;
  Cov2 c{0.0, 0.0, 0.0};
  for (const auto& p : z) {
    c.pp += (p[0] - mp) * (p[0] - mp);
    c.pt += (p[0] - mp) * (p[1] - mt);
    c.tt += (p[1] - mt) * (p[1] - mt);
  }
  return {c.pp / n, c.pt / n, c.tt / n};
}

double squared_distance(const Vec2& a, const Vec2& b) {
  const double dp = a[0] - b[0];
  const double dt = a[1] - b[1];
  return dp * dp + dt * dt;
}

// Covariance for components backed by fewer than two points.
Cov2 fallback_covariance(const Cov2& global, int k, double cov_floor) {
  const double kk = static_cast<double>(k);
  return {global.pp / kk + cov_floor, global.pt / kk, global.tt / kk + cov_floor};
}

// k-means++ seeding on a uniform subsample of min(N, 20K) points, then one
// hard-assignment pass over all points.
Params initialize(std::span<const Vec2> z, int k, const EmConfig& cfg, const Cov2& global,
                  std::mt19937_64& rng) {
  const std::size_t n = z.size();
  const std::size_t k_count = static_cast<std::size_t>(k);
  const std::size_t m = std::min(n, 20 * k_count);

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < m; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(m);

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Vec2> centers;
  centers.reserve(k_count);
  centers.push_back(z[idx[std::uniform_int_distribution<std::size_t>(0, m - 1)(rng)]]);
  std::vector<double> d2(m);
  for (std::size_t i = 0; i < m; ++i) d2[i] = squared_distance(z[idx[i]], centers[0]);

  while (centers.size() < k_count) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t chosen = 0;
    if (total > 0.0) {
      const double target = unit(rng) * total;
      double run = 0.0;
      chosen = m - 1;
      for (std::size_t i = 0; i < m; ++i) {
        run += d2[i];
        if (target < run && d2[i] > 0.0) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = std::uniform_int_distribution<std::size_t>(0, m - 1)(rng);
    }
    centers.push_back(z[idx[chosen]]);
    for (std::size_t i = 0; i < m; ++i) {
      d2[i] = std::min(d2[i], squared_distance(z[idx[i]], centers.back()));
    }
  }

  std::vector<double> count(k_count, 0.0);
  std::vector<Vec2> sum(k_count, Vec2{0.0, 0.0});
  std::vector<std::size_t> assign(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    double best_d = squared_distance(z[i], centers[0]);
    for (std::size_t c = 1; c < k_count; ++c) {
      const double d = squared_distance(z[i], centers[c]);
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    assign[i] = best;
    count[best] += 1.0;
    sum[best][0] += z[i][0];
    sum[best][1] += z[i][1];
  }

  Params p;
  p.components.resize(k_count);
  p.weights.resize(k_count);
  for (std::size_t c = 0; c < k_count; ++c) {
    p.components[c].mean = count[c] > 0.0 ? Vec2{sum[c][0] / count[c], sum[c][1] / count[c]}
                                          : centers[c];
  }
  std::vector<Cov2> scatter(k_count, Cov2{0.0, 0.0, 0.0});
  for (std::size_t i = 0; i < n; ++i) {
    const auto& mu = p.components[assign[i]].mean;
    const double dp = z[i][0] - mu[0];
    const double dt = z[i][1] - mu[1];
    auto& s = scatter[assign[i]];
    s.pp += dp * dp;
    s.pt += dp * dt;
    s.tt += dt * dt;
  }
  double weight_total = 0.0;
  for (std::size_t c = 0; c < k_count; ++c) {
    if (count[c] >= 2.0) {
      p.components[c].cov = {scatter[c].pp / count[c] + cfg.cov_floor, scatter[c].pt / count[c],
                             scatter[c].tt / count[c] + cfg.cov_floor};
    } else {
      p.components[c].cov = fallback_covariance(global, k, cfg.cov_floor);
    }
    p.weights[c] = std::max(count[c], 1.0);
    weight_total += p.weights[c];
  }
  for (double& w : p.weights) w /= weight_total;
  return p;
}

std::vector<ComponentTerms> terms_of(const Params& p) {
  // GmmModel computes the kernel constants and checks the invariants.
  GmmModel m(p.weights, p.components);
  return {m.terms().begin(), m.terms().end()};
}

kernels::SufficientStats run_estep(const Params& p, std::span<const Vec2> z, EStepKernel kernel) {
  const auto terms = terms_of(p);
  return kernel == EStepKernel::kSerial ? kernels::estep_serial(terms, z)
                                        : kernels::estep_parallel(terms, z);
}

void check_positive_definite(const Params& p, int iteration) {
  for (std::size_t c = 0; c < p.components.size(); ++c) {
    const Cov2& cov = p.components[c].cov;
    // Leading minor and determinant.
    if (!(cov.pp > 0.0) || !(cov.det() > 0.0) || !std::isfinite(cov.det())) {
      throw NumericError(fmt::format(
          "component {} covariance lost positive definiteness at iteration {}", c, iteration));
    }
  }
}

Params maximize(const Params& current, const kernels::SufficientStats& stats,
                std::span<const Vec2> z, const Cov2& global, const EmConfig& cfg,
                int& rescued) {
  const std::size_t k_count = current.components.size();
  const double n = static_cast<double>(z.size());
  const int k = static_cast<int>(k_count);

  Params next;
  next.weights.resize(k_count);
  next.components.resize(k_count);
  std::vector<std::size_t> empty;
  for (std::size_t c = 0; c < k_count; ++c) {
    const double nk = stats.n[c];
    if (nk < kEmptyComponentFraction * n) {
      empty.push_back(c);
      continue;
    }
    const double dp = stats.s_p[c] / nk;
    const double dt = stats.s_t[c] / nk;
    const auto& shift = current.components[c].mean;
    next.components[c].mean = {shift[0] + dp, shift[1] + dt};
    next.components[c].cov = {stats.s_pp[c] / nk - dp * dp + cfg.cov_floor,
                              stats.s_pt[c] / nk - dp * dt,
                              stats.s_tt[c] / nk - dt * dt + cfg.cov_floor};
    next.weights[c] = nk / n;
  }

  const auto& pool = stats.low_density.entries();
  for (std::size_t e = 0; e < empty.size(); ++e) {
    const std::size_t c = empty[e];
    const Vec2 seed = pool.empty() ? z[0] : z[pool[e % pool.size()].second];
    next.components[c].mean = seed;
    next.components[c].cov = fallback_covariance(global, k, cfg.cov_floor);
    next.weights[c] = 1.0 / n;
    ++rescued;
  }

  const double total = std::accumulate(next.weights.begin(), next.weights.end(), 0.0);
  for (double& w : next.weights) w /= total;
  return next;
}

struct Run {
  Params params;
  TrainReport report;
};

Run run_em(std::span<const Vec2> z, int k, const EmConfig& cfg, const Cov2& global,
           std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Run run;
  run.params = initialize(z, k, cfg, global, rng);
  check_positive_definite(run.params, 0);

  const double n = static_cast<double>(z.size());
  auto stats = run_estep(run.params, z, cfg.kernel);
  double ll_prev = stats.log_likelihood_sum / n;
  if (!std::isfinite(ll_prev)) throw NumericError("initial log-likelihood is not finite");
  run.report.log_likelihood_history.push_back(ll_prev);

  for (int it = 1; it <= cfg.max_iters; ++it) {
    run.params = maximize(run.params, stats, z, global, cfg, run.report.rescued_components);
    check_positive_definite(run.params, it);
    stats = run_estep(run.params, z, cfg.kernel);
    const double ll = stats.log_likelihood_sum / n;
    if (!std::isfinite(ll)) {
      throw NumericError(fmt::format("log-likelihood is not finite at iteration {}", it));
    }
    run.report.log_likelihood_history.push_back(ll);
    run.report.iterations_run = it;
    const double denom = std::max(std::abs(ll_prev), std::numeric_limits<double>::min());
    if (std::abs(ll - ll_prev) / denom < cfg.rel_tol) {
      run.report.converged = true;
      break;
    }
    ll_prev = ll;
  }
  run.report.final_log_likelihood = run.report.log_likelihood_history.back();
  return run;
}

}  // namespace

void EmConfig::validate() const {
  if (max_iters < 1) throw ConfigError("max_iters must be at least 1");
  if (!(rel_tol > 0.0)) throw ConfigError("rel_tol must be positive");
  if (!(cov_floor >= 0.0)) throw ConfigError("cov_floor must be non-negative");
  if (n_init_restarts < 1) throw ConfigError("n_init_restarts must be at least 1");
}

EmResult fit_em(std::span<const Vec2> samples, int k, const EmConfig& cfg,
                const Standardizer& standardizer) {
  cfg.validate();
  if (k < 1) throw ConfigError("K must be at least 1");
  if (samples.size() < static_cast<std::size_t>(k)) {
    throw InsufficientSamplesError(
        fmt::format("insufficient samples: {} samples for K = {}", samples.size(), k));
  }
  std::vector<Vec2> z;
  z.reserve(samples.size());
  for (const auto& x : samples) z.push_back(standardizer.apply(x));

  if (k > 1 && std::all_of(z.begin(), z.end(), [&](const Vec2& p) { return p == z.front(); })) {
    throw DegenerateDataError(
        fmt::format("all {} samples are identical; cannot fit K = {} components", z.size(), k));
  }

  const Cov2 global = population_covariance(z);
  std::optional<Run> best;
  for (int r = 0; r < cfg.n_init_restarts; ++r) {
    const std::uint64_t seed = cfg.init_seed + static_cast<std::uint64_t>(r) * 0x9E3779B97F4A7C15ULL;
    Run run = run_em(z, k, cfg, global, seed);
    if (!best || run.report.final_log_likelihood > best->report.final_log_likelihood) {
      best = std::move(run);
    }
  }
  return {GmmModel(std::move(best->params.weights), std::move(best->params.components),
                   standardizer),
          std::move(best->report)};
}

}  // namespace gmmcache
