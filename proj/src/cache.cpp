#include "gmmcache/cache.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "gmmcache/error.hpp"
#include "gmmcache/gmm_kernels.hpp"

namespace gmmcache {

void CacheConfig::validate() const {
  if (block_bytes == 0 || associativity == 0) {
    throw ConfigError("block_bytes and associativity must be positive");
  }
  const std::uint64_t set_bytes = block_bytes * associativity;
  if (cache_bytes == 0 || cache_bytes % set_bytes != 0) {
    throw ConfigError(fmt::format("cache_bytes {} is not a multiple of block_bytes·associativity {}",
                                  cache_bytes, set_bytes));
  }
  if (!std::has_single_bit(set_count())) {
    throw ConfigError(fmt::format("set count {} is not a power of two", set_count()));
  }
  for (double v : {latency.hit_us, latency.ssd_read_us, latency.ssd_write_us, latency.gmm_infer_us}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("latencies must be finite and non-negative");
  }
}

std::string_view to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::kLru: return "lru";
    case PolicyKind::kGmmAdmission: return "gmm-admission";
    case PolicyKind::kGmmEviction: return "gmm-eviction";
    case PolicyKind::kGmmBoth: return "gmm-both";
  }
  return "?";
}

PolicyKind policy_from_string(std::string_view name) {
  for (PolicyKind k : kAllPolicies) {
    if (name == to_string(k)) return k;
  }
  throw UsageError(fmt::format(
      "unknown policy '{}' (expected lru, gmm-admission, gmm-eviction or gmm-both)", name));
}

void Policy::validate() const {
  if (!needs_model()) return;
  if (!model) throw UsageError(fmt::format("policy {} requires a GMM model", to_string(kind)));
  if (admission() && !model->threshold()) {
    throw UsageError(fmt::format("policy {} requires a model with a threshold", to_string(kind)));
  }
}

DramCache::DramCache(CacheConfig config, Policy policy)
    : config_(config), policy_(std::move(policy)) {
  config_.validate();
  policy_.validate();
  set_count_ = config_.set_count();
  ways_ = config_.associativity;
  blocks_.resize(set_count_ * ways_);
}

double DramCache::inference_overhead(double ssd_us) const {
  const auto& lat = config_.latency;
  return lat.additive_inference ? lat.gmm_infer_us : std::max(0.0, lat.gmm_infer_us - ssd_us);
}

std::uint32_t DramCache::tag_of(std::uint64_t page_index, std::uint64_t& set) const {
  const Location loc = locate(page_index, set_count_);
  if (loc.tag > std::numeric_limits<std::uint32_t>::max()) {
    throw DataError(fmt::format("page {:#x} exceeds the 32-bit tag capacity of {} sets",
                                page_index, set_count_));
  }
  set = loc.set;
  return static_cast<std::uint32_t>(loc.tag);
}

template <typename ScoreFn>
AccessOutcome DramCache::access_impl(const Sample& sample, ScoreFn&& log_score) {
  std::uint64_t set = 0;
  const std::uint32_t tag = tag_of(sample.page_index, set);
  CacheBlock* ways = blocks_.data() + set * ways_;
  const auto& lat = config_.latency;
  const bool is_write = sample.op == AccessKind::kWrite;
  ++clock_;

  AccessOutcome out;
  for (std::uint32_t w = 0; w < ways_; ++w) {
    CacheBlock& b = ways[w];
    if (b.valid && b.tag == tag) {
      out.kind = AccessResult::kHit;
      out.latency_us = lat.hit_us;
      if (is_write) b.dirty = true;
      // GMM eviction keeps the score captured at fill time.
      if (!policy_.gmm_eviction()) b.score = static_cast<double>(clock_);
      return out;
    }
  }

  double ls = 0.0;
  if (policy_.needs_model()) {
    ls = log_score();
    out.gmm_inferred = true;
  }

  if (policy_.admission() && !policy_.model->admits(std::exp(ls))) {
    const double ssd = is_write ? lat.ssd_write_us : lat.ssd_read_us;
    out.kind = AccessResult::kMissBypass;
    out.inference_overhead_us = inference_overhead(ssd);
    out.latency_us = ssd + out.inference_overhead_us;
    return out;
  }

  std::uint32_t victim = ways_;
  for (std::uint32_t w = 0; w < ways_; ++w) {
    if (!ways[w].valid) {
      victim = w;
      break;
    }
  }
  if (victim == ways_) {
    victim = 0;
    for (std::uint32_t w = 1; w < ways_; ++w) {
      if (ways[w].score < ways[victim].score) victim = w;
    }
  }

  CacheBlock& slot = ways[victim];
  out.kind = AccessResult::kMissFill;
  out.latency_us = lat.ssd_read_us;
  if (out.gmm_inferred) {
    out.inference_overhead_us = inference_overhead(lat.ssd_read_us);
    out.latency_us += out.inference_overhead_us;
  }
  if (slot.valid && slot.dirty) {
    out.writeback = true;
    out.latency_us += lat.ssd_write_us;
  }
  slot.tag = tag;
  slot.valid = true;
  slot.dirty = is_write;
  slot.score = policy_.gmm_eviction() ? ls : static_cast<double>(clock_);

#ifndef NDEBUG
  check_invariants();
#endif
  return out;
}

AccessOutcome DramCache::access(const Sample& sample) {
  return access_impl(sample, [&] { return policy_.model->log_score(features(sample)); });
}

AccessOutcome DramCache::access(const Sample& sample, double log_score) {
  return access_impl(sample, [log_score] { return log_score; });
}

bool DramCache::contains(std::uint64_t page_index) const {
  const Location loc = locate(page_index, set_count_);
  const auto blocks = set_blocks(loc.set);
  return std::any_of(blocks.begin(), blocks.end(),
                     [&](const CacheBlock& b) { return b.valid && b.tag == loc.tag; });
}

std::size_t DramCache::occupancy() const {
  return static_cast<std::size_t>(
      std::count_if(blocks_.begin(), blocks_.end(), [](const CacheBlock& b) { return b.valid; }));
}

std::span<const CacheBlock> DramCache::set_blocks(std::uint64_t set) const {
  return std::span<const CacheBlock>(blocks_).subspan(set * ways_, ways_);
}

void DramCache::check_invariants() const {
  for (std::uint64_t s = 0; s < set_count_; ++s) {
    const auto blocks = set_blocks(s);
    for (std::uint32_t i = 0; i < ways_; ++i) {
      if (blocks[i].dirty && !blocks[i].valid) {
        throw NumericError(fmt::format("set {} way {} is dirty but invalid", s, i));
      }
      if (!blocks[i].valid) continue;
      for (std::uint32_t j = i + 1; j < ways_; ++j) {
        if (blocks[j].valid && blocks[j].tag == blocks[i].tag) {
          throw NumericError(fmt::format("set {} holds tag {:#x} twice", s, blocks[i].tag));
        }
      }
    }
  }
}

void SimReport::record(const AccessOutcome& outcome, AccessKind op) {
  ++accesses;
  switch (outcome.kind) {
    case AccessResult::kHit:
      ++hits;
      break;
    case AccessResult::kMissFill:
      ++misses;
      ++fills;
      break;
    case AccessResult::kMissBypass:
      ++misses;
      ++bypasses;
      ++(op == AccessKind::kWrite ? bypass_writes : bypass_reads);
      break;
  }
  if (outcome.writeback) ++dirty_writebacks;
  if (outcome.gmm_inferred) ++gmm_inferences;
  total_latency_us += outcome.latency_us;
  inference_overhead_us += outcome.inference_overhead_us;
}

double accounted_latency_us(const SimReport& r) {
  const auto& lat = r.config.latency;
  auto n = [](std::uint64_t v) { return static_cast<double>(v); };
  return n(r.hits) * lat.hit_us + n(r.fills) * lat.ssd_read_us +
         n(r.dirty_writebacks) * lat.ssd_write_us + n(r.bypass_reads) * lat.ssd_read_us +
         n(r.bypass_writes) * lat.ssd_write_us + r.inference_overhead_us;
}

std::vector<double> score_samples(std::span<const Sample> samples, const GmmModel& model) {
  const auto raw = features(samples);
  std::vector<double> out(raw.size());
  kernels::log_score_batch_parallel(model, raw, out);
  return out;
}

SimReport simulate(std::span<const Sample> samples, const CacheConfig& config,
                   const Policy& policy, std::span<const double> log_scores) {
  if (samples.empty()) throw EmptyInputError("cannot simulate an empty trace");
  if (policy.needs_model() && log_scores.size() != samples.size()) {
    throw DataError(fmt::format("{} scores supplied for {} samples", log_scores.size(),
                                samples.size()));
  }
  DramCache cache(config, policy);
  SimReport report;
  report.policy = std::string(to_string(policy.kind));
  report.config = config;
  if (policy.model) report.threshold = policy.model->threshold();

  if (policy.needs_model()) {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      report.record(cache.access(samples[i], log_scores[i]), samples[i].op);
    }
  } else {
    for (const auto& s : samples) report.record(cache.access(s, 0.0), s.op);
  }
  return report;
}

SimReport simulate(std::span<const Sample> samples, const CacheConfig& config,
                   const Policy& policy) {
  if (samples.empty()) throw EmptyInputError("cannot simulate an empty trace");
  policy.validate();
  std::vector<double> scores;
  if (policy.needs_model()) scores = score_samples(samples, *policy.model);
  return simulate(samples, config, policy, scores);
}

double latency_reduction_percent(double lru_avg_us, double other_avg_us) {
  if (lru_avg_us == 0.0) return 0.0;
  return (lru_avg_us - other_avg_us) / lru_avg_us * 100.0;
}

PolicyComparison compare_policies(std::span<const Sample> samples, const CacheConfig& config,
                                  std::shared_ptr<const GmmModel> model) {
  if (samples.empty()) throw EmptyInputError("cannot simulate an empty trace");
  config.validate();
  for (PolicyKind k : kAllPolicies) Policy{k, model}.validate();

  const std::vector<double> scores = score_samples(samples, *model);
  PolicyComparison cmp;
  std::array<std::optional<Error>, 4> failures;
#pragma omp parallel for schedule(static, 1)
  for (int i = 0; i < 4; ++i) {
    const PolicyKind kind = kAllPolicies[static_cast<std::size_t>(i)];
    try {
      cmp.rows[static_cast<std::size_t>(i)].report =
          simulate(samples, config, Policy{kind, kind == PolicyKind::kLru ? nullptr : model},
                   scores);
    } catch (const Error& e) {
      failures[static_cast<std::size_t>(i)] = e;
    }
  }
  for (const auto& f : failures) {
    if (f) throw *f;
  }

  const SimReport& lru = cmp.rows[0].report;
  for (auto& row : cmp.rows) {
    row.miss_rate_delta_pp = (lru.miss_rate() - row.report.miss_rate()) * 100.0;
    row.latency_reduction_pct =
        latency_reduction_percent(lru.avg_latency_us(), row.report.avg_latency_us());
  }
  std::size_t best = 1;
  for (std::size_t i = 2; i < cmp.rows.size(); ++i) {
    const auto& a = cmp.rows[i].report;
    const auto& b = cmp.rows[best].report;
    if (a.misses < b.misses || (a.misses == b.misses && a.total_latency_us < b.total_latency_us)) {
      best = i;
    }
  }
  cmp.best_gmm = best;
  cmp.rows[best].best_gmm = true;
  return cmp;
}

}  // namespace gmmcache
