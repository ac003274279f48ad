#include "gmmcache/gmm_kernels.hpp"

#include <algorithm>

#include <omp.h>

namespace gmmcache::kernels {

namespace {

std::size_t block_count(std::size_t n) { return (n + kBlockSize - 1) / kBlockSize; }

// Accumulates points [begin, end) into `stats`; `scratch` holds K values.
void accumulate_range(std::span<const ComponentTerms> terms, std::span<const Vec2> z,
                      std::size_t begin, std::size_t end, SufficientStats& stats,
                      std::vector<double>& scratch) {
  const std::size_t k_count = terms.size();
  scratch.resize(k_count);
  for (std::size_t n = begin; n < end; ++n) {
    const double zp = z[n][0];
    const double zt = z[n][1];
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < k_count; ++k) {
      const double v = terms[k].log_weight + component_log_density(terms[k], zp, zt);
      scratch[k] = v;
      m = std::max(m, v);
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < k_count; ++k) {
      scratch[k] = std::exp(scratch[k] - m);
      sum += scratch[k];
    }
    const double log_density = m + std::log(sum);
    stats.log_likelihood_sum += log_density;
    stats.low_density.offer(log_density, n);

    const double inv_sum = 1.0 / sum;
    for (std::size_t k = 0; k < k_count; ++k) {
      const double r = scratch[k] * inv_sum;
      if (r == 0.0) continue;
      const double dp = zp - terms[k].mean_p;
      const double dt = zt - terms[k].mean_t;
      stats.n[k] += r;
      stats.s_p[k] += r * dp;
      stats.s_t[k] += r * dt;
      stats.s_pp[k] += r * dp * dp;
      stats.s_pt[k] += r * dp * dt;
      stats.s_tt[k] += r * dt * dt;
    }
  }
}

}  // namespace

void LowDensityPool::offer(double log_density, std::size_t index) {
  const std::pair<double, std::size_t> entry{log_density, index};
  if (entries_.size() == kCapacity && !(entry < entries_.back())) return;
  entries_.insert(std::upper_bound(entries_.begin(), entries_.end(), entry), entry);
  if (entries_.size() > kCapacity) entries_.pop_back();
}

void LowDensityPool::merge(const LowDensityPool& other) {
  for (const auto& [v, i] : other.entries_) offer(v, i);
}

void SufficientStats::add(const SufficientStats& other) {
  for (std::size_t k = 0; k < n.size(); ++k) {
    n[k] += other.n[k];
    s_p[k] += other.s_p[k];
    s_t[k] += other.s_t[k];
    s_pp[k] += other.s_pp[k];
    s_pt[k] += other.s_pt[k];
    s_tt[k] += other.s_tt[k];
  }
  log_likelihood_sum += other.log_likelihood_sum;
  low_density.merge(other.low_density);
}

void log_score_batch_serial(const GmmModel& model, std::span<const Vec2> raw,
                            std::span<double> out) {
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = model.log_score(raw[i]);
}

void log_score_batch_parallel(const GmmModel& model, std::span<const Vec2> raw,
                              std::span<double> out) {
  const auto n = static_cast<std::ptrdiff_t>(raw.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = model.log_score(raw[i]);
}

double log_likelihood_sum_serial(std::span<const ComponentTerms> terms, std::span<const Vec2> z) {
  double sum = 0.0;
  for (const auto& p : z) sum += log_mixture_density(terms, p);
  return sum;
}

double log_likelihood_sum_parallel(std::span<const ComponentTerms> terms,
                                   std::span<const Vec2> z) {
  const std::size_t blocks = block_count(z.size());
  std::vector<double> partial(blocks, 0.0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(blocks); ++b) {
    const std::size_t begin = static_cast<std::size_t>(b) * kBlockSize;
    const std::size_t end = std::min(z.size(), begin + kBlockSize);
    double s = 0.0;
    for (std::size_t i = begin; i < end; ++i) s += log_mixture_density(terms, z[i]);
    partial[static_cast<std::size_t>(b)] = s;
  }
  double sum = 0.0;
  for (double s : partial) sum += s;
  return sum;
}

SufficientStats estep_serial(std::span<const ComponentTerms> terms, std::span<const Vec2> z) {
  SufficientStats stats(terms.size());
  std::vector<double> scratch;
  accumulate_range(terms, z, 0, z.size(), stats, scratch);
  return stats;
}

SufficientStats estep_parallel(std::span<const ComponentTerms> terms, std::span<const Vec2> z) {
  const std::size_t blocks = block_count(z.size());
  std::vector<SufficientStats> partial(blocks, SufficientStats(terms.size()));
#pragma omp parallel
  {
    std::vector<double> scratch;
#pragma omp for schedule(static)
    for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(blocks); ++b) {
      const std::size_t begin = static_cast<std::size_t>(b) * kBlockSize;
      const std::size_t end = std::min(z.size(), begin + kBlockSize);
      accumulate_range(terms, z, begin, end, partial[static_cast<std::size_t>(b)], scratch);
    }
  }
  SufficientStats total(terms.size());
  for (const auto& p : partial) total.add(p);
  return total;
}

std::vector<double> responsibilities(std::span<const ComponentTerms> terms, const Vec2& z) {
  std::vector<double> r(terms.size());
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < terms.size(); ++k) {
    r[k] = terms[k].log_weight + component_log_density(terms[k], z[0], z[1]);
    m = std::max(m, r[k]);
  }
  double sum = 0.0;
  for (double& v : r) {
    v = std::exp(v - m);
    sum += v;
  }
  for (double& v : r) v /= sum;
  return r;
}

}  // namespace gmmcache::kernels
