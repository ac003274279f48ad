#include "gmmcache/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "gmmcache/error.hpp"
#include "gmmcache/gmm_kernels.hpp"

namespace gmmcache {

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

ComponentTerms make_terms(double weight, const Gaussian2& g) {
  const double det = g.cov.det();
  ComponentTerms t;
  t.log_weight = weight > 0.0 ? std::log(weight) : -std::numeric_limits<double>::infinity();
  t.mean_p = g.mean[0];
  t.mean_t = g.mean[1];
  t.inv_pp = g.cov.tt / det;
  t.inv_pt = -g.cov.pt / det;
  t.inv_tt = g.cov.pp / det;
  t.log_norm = -kLog2Pi - 0.5 * std::log(det);
  return t;
}

}  // namespace

std::vector<Vec2> features(std::span<const Sample> samples) {
  std::vector<Vec2> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(features(s));
  return out;
}

double gaussian_log_pdf(const Vec2& x, const Gaussian2& g) {
  if (!g.cov.positive_definite()) {
    throw NumericError(fmt::format("covariance [[{}, {}], [{}, {}]] is not positive definite",
                                   g.cov.pp, g.cov.pt, g.cov.pt, g.cov.tt));
  }
  const ComponentTerms t = make_terms(1.0, g);
  return kernels::component_log_density(t, x[0], x[1]);
}

double gaussian_pdf(const Vec2& x, const Gaussian2& g) { return std::exp(gaussian_log_pdf(x, g)); }

Standardizer fit_standardizer(std::span<const Vec2> samples) {
  if (samples.size() < 2) {
    throw InsufficientSamplesError("fitting a standardizer needs at least 2 samples");
  }
  const double n = static_cast<double>(samples.size());
  Standardizer s;
  for (int f = 0; f < 2; ++f) {
    double sum = 0.0;
    for (const auto& x : samples) sum += x[f];
    const double mean = sum / n;
    double ss = 0.0;
    for (const auto& x : samples) ss += (x[f] - mean) * (x[f] - mean);
    const double dev = std::sqrt(ss / n);
    s.mean[f] = mean;
    s.scale[f] = dev > 0.0 ? dev : 1.0;
  }
  return s;
}

GmmModel::GmmModel(std::vector<double> weights, std::vector<Gaussian2> components,
                   Standardizer standardizer, std::optional<double> threshold)
    : weights_(std::move(weights)),
      components_(std::move(components)),
      standardizer_(standardizer),
      threshold_(threshold) {
  if (weights_.empty()) throw DataError("a mixture needs at least one component");
  if (weights_.size() != components_.size()) {
    throw DataError(fmt::format("{} weights for {} components", weights_.size(),
                                components_.size()));
  }
  double total = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0 && w <= 1.0)) throw DataError(fmt::format("mixture weight {} outside [0, 1]", w));
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw DataError(fmt::format("mixture weights sum to {}", total));
  }
  for (std::size_t k = 0; k < components_.size(); ++k) {
    if (!components_[k].cov.positive_definite()) {
      throw DataError(fmt::format("component {} covariance is not positive definite", k));
    }
  }
  for (double sc : standardizer_.scale) {
    if (!(sc > 0.0) || !std::isfinite(sc)) throw DataError("standardizer scales must be positive");
  }
  if (threshold_ && std::isnan(*threshold_)) throw DataError("threshold is NaN");

  terms_.reserve(components_.size());
  for (std::size_t k = 0; k < components_.size(); ++k) {
    terms_.push_back(make_terms(weights_[k], components_[k]));
  }
}

double GmmModel::log_score_standardized(const Vec2& z) const {
  return kernels::log_mixture_density(terms_, z);
}

double GmmModel::score_standardized(const Vec2& z) const {
  return std::exp(log_score_standardized(z));
}

double log_likelihood(std::span<const Vec2> samples, const GmmModel& model) {
  if (samples.empty()) throw EmptyInputError("log-likelihood of an empty sample set");
  std::vector<Vec2> z;
  z.reserve(samples.size());
  for (const auto& x : samples) z.push_back(model.standardizer().apply(x));
  return kernels::log_likelihood_sum_parallel(model.terms(), z) /
         static_cast<double>(samples.size());
}

double nearest_rank_percentile(std::span<const double> values, double p) {
  if (values.empty()) throw EmptyInputError("percentile of an empty set");
  if (!(p >= 0.0 && p <= 100.0)) throw ConfigError(fmt::format("percentile {} outside [0, 100]", p));
  const std::size_t n = values.size();
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  std::vector<double> sorted(values.begin(), values.end());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(rank - 1),
                   sorted.end());
  return sorted[rank - 1];
}

double select_threshold(GmmModel& model, std::span<const Vec2> samples, double p) {
  if (samples.empty()) throw EmptyInputError("threshold selection needs training samples");
  std::vector<double> scores(samples.size());
  kernels::log_score_batch_parallel(model, samples, scores);
  for (double& s : scores) s = std::exp(s);
  const double t = nearest_rank_percentile(scores, p);
  model.set_threshold(t);
  return t;
}

}  // namespace gmmcache
