#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "gmmcache/trace.hpp"

namespace gmmcache {

using Vec2 = std::array<double, 2>;

// Raw GMM feature vector (page index, timestamp).
inline Vec2 features(const Sample& s) {
  return {static_cast<double>(s.page_index), static_cast<double>(s.timestamp)};
}

std::vector<Vec2> features(std::span<const Sample> samples);

// Symmetric 2x2 matrix stored once per off-diagonal entry.
struct Cov2 {
  double pp = 1.0;
  double pt = 0.0;
  double tt = 1.0;

  double det() const { return pp * tt - pt * pt; }
  bool positive_definite() const { return pp > 0.0 && tt > 0.0 && det() > 0.0; }

  friend bool operator==(const Cov2&, const Cov2&) = default;
};

struct Gaussian2 {
  Vec2 mean{0.0, 0.0};
  Cov2 cov;

  friend bool operator==(const Gaussian2&, const Gaussian2&) = default;
};

// Throws NumericError when g.cov is not positive definite.
double gaussian_log_pdf(const Vec2& x, const Gaussian2& g);
double gaussian_pdf(const Vec2& x, const Gaussian2& g);

// Maps raw features to zero-mean, unit-deviation coordinates.
struct Standardizer {
  Vec2 mean{0.0, 0.0};
  Vec2 scale{1.0, 1.0};

  Vec2 apply(const Vec2& raw) const {
    return {(raw[0] - mean[0]) / scale[0], (raw[1] - mean[1]) / scale[1]};
  }

  friend bool operator==(const Standardizer&, const Standardizer&) = default;
};

// Population mean and deviation per feature; zero deviations become 1.
Standardizer fit_standardizer(std::span<const Vec2> samples);

// Per-component constants in the form the scoring kernels consume.
struct ComponentTerms {
  double log_weight;
  double mean_p;
  double mean_t;
  // Inverse covariance, upper triangle.
  double inv_pp;
  double inv_pt;
  double inv_tt;
  // -log(2π) - ½·log|Σ|
  double log_norm;
};

class GmmModel {
 public:
  // Validates the invariants (K ≥ 1, weights normalized, covariances
  // positive definite, scales positive); throws DataError otherwise.
  GmmModel(std::vector<double> weights, std::vector<Gaussian2> components,
           Standardizer standardizer = {}, std::optional<double> threshold = {});

  std::size_t size() const { return weights_.size(); }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<Gaussian2>& components() const { return components_; }
  const Standardizer& standardizer() const { return standardizer_; }
  std::span<const ComponentTerms> terms() const { return terms_; }

  const std::optional<double>& threshold() const { return threshold_; }
  void set_threshold(std::optional<double> t) { threshold_ = t; }

  // Density of the mixture in standardized coordinates.
  double log_score_standardized(const Vec2& z) const;
  double score_standardized(const Vec2& z) const;

  // G for a raw (page index, timestamp) point.
  double log_score(const Vec2& raw) const { return log_score_standardized(standardizer_.apply(raw)); }
  double score(const Vec2& raw) const { return score_standardized(standardizer_.apply(raw)); }

  // score >= threshold. An unset threshold admits everything.
  bool admits(double score) const { return !threshold_ || score >= *threshold_; }

 private:
  std::vector<double> weights_;
  std::vector<Gaussian2> components_;
  Standardizer standardizer_;
  std::optional<double> threshold_;
  std::vector<ComponentTerms> terms_;
};

inline double mixture_score(const Vec2& raw, const GmmModel& model) { return model.score(raw); }
inline double mixture_score(const Sample& s, const GmmModel& model) {
  return model.score(features(s));
}

// Mean per-sample log density of raw points. Throws EmptyInputError.
double log_likelihood(std::span<const Vec2> samples, const GmmModel& model);

// Nearest-rank percentile: the ceil(p/100·N)-th smallest value (rank 1 for
// p = 0). `values` need not be sorted.
double nearest_rank_percentile(std::span<const double> values, double p);

// Scores every sample, stores the p-th percentile score as the model's
// threshold and returns it.
double select_threshold(GmmModel& model, std::span<const Vec2> samples, double p);

// ---------------------------------------------------------------------------
// EM training

enum class EStepKernel : std::uint8_t { kSerial, kParallel };

struct EmConfig {
  int max_iters = 200;
  double rel_tol = 1e-4;
  double cov_floor = 1e-6;
  std::uint64_t init_seed = 0;
  int n_init_restarts = 1;
  EStepKernel kernel = EStepKernel::kParallel;

  void validate() const;
};

struct TrainReport {
  int iterations_run = 0;
  double final_log_likelihood = 0.0;
  // Entry i is the mean log-likelihood after i M-steps; entry 0 is the
  // initialization.
  std::vector<double> log_likelihood_history;
  bool converged = false;
  int rescued_components = 0;
};

struct EmResult {
  GmmModel model;
  TrainReport report;
};

// Fits K components to `samples` mapped through `standardizer`. The
// returned model carries the standardizer and no threshold.
EmResult fit_em(std::span<const Vec2> samples, int k, const EmConfig& cfg,
                const Standardizer& standardizer = {});

}  // namespace gmmcache
