#pragma once

// Data-parallel GMM kernels. Every kernel has a straightforward serial
// reference and an OpenMP version; the tests hold the two against each
// other and bench/ times them.
//
// The OpenMP E-step splits the samples into fixed-size blocks and reduces
// the per-block partials in block order, so its result does not depend on
// the thread count.

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "gmmcache/gmm.hpp"

namespace gmmcache::kernels {

inline constexpr std::size_t kBlockSize = 4096;

inline double component_log_density(const ComponentTerms& c, double zp, double zt) {
  const double dp = zp - c.mean_p;
  const double dt = zt - c.mean_t;
  const double q = c.inv_pp * dp * dp + 2.0 * c.inv_pt * dp * dt + c.inv_tt * dt * dt;
  return c.log_norm - 0.5 * q;
}

// log Σ_k π_k N(z | µ_k, Σ_k), single pass with a running maximum.
inline double log_mixture_density(std::span<const ComponentTerms> terms, const Vec2& z) {
  double m = -std::numeric_limits<double>::infinity();
  double s = 0.0;
  for (const auto& c : terms) {
    if (c.log_weight == -std::numeric_limits<double>::infinity()) continue;
    const double v = c.log_weight + component_log_density(c, z[0], z[1]);
    if (v <= m) {
      s += std::exp(v - m);
    } else {
      s = s * std::exp(m - v) + 1.0;
      m = v;
    }
  }
  return m + std::log(s);
}

// Log-scores of raw points (standardized through the model).
void log_score_batch_serial(const GmmModel& model, std::span<const Vec2> raw,
                            std::span<double> out);
void log_score_batch_parallel(const GmmModel& model, std::span<const Vec2> raw,
                              std::span<double> out);

// Sum over points of the log mixture density; points already standardized.
double log_likelihood_sum_serial(std::span<const ComponentTerms> terms, std::span<const Vec2> z);
double log_likelihood_sum_parallel(std::span<const ComponentTerms> terms, std::span<const Vec2> z);

// The lowest-density samples seen during an E-step, ascending by
// (log density, index). Used to re-seed empty components.
class LowDensityPool {
 public:
  static constexpr std::size_t kCapacity = 16;

  void offer(double log_density, std::size_t index);
  void merge(const LowDensityPool& other);
  const std::vector<std::pair<double, std::size_t>>& entries() const { return entries_; }

 private:
  std::vector<std::pair<double, std::size_t>> entries_;
};

// Responsibility-weighted sufficient statistics. Moments for component k
// are accumulated around shift k (its current mean) for numerical
// stability.
struct SufficientStats {
  explicit SufficientStats(std::size_t k = 0) : n(k), s_p(k), s_t(k), s_pp(k), s_pt(k), s_tt(k) {}

  std::vector<double> n;
  std::vector<double> s_p, s_t;
  std::vector<double> s_pp, s_pt, s_tt;
  double log_likelihood_sum = 0.0;
  LowDensityPool low_density;

  std::size_t size() const { return n.size(); }
  void add(const SufficientStats& other);
};

SufficientStats estep_serial(std::span<const ComponentTerms> terms, std::span<const Vec2> z);
SufficientStats estep_parallel(std::span<const ComponentTerms> terms, std::span<const Vec2> z);

// Responsibilities of one point, for inspection in tests.
std::vector<double> responsibilities(std::span<const ComponentTerms> terms, const Vec2& z);

}  // namespace gmmcache::kernels
