#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gmmcache/gmm.hpp"
#include "gmmcache/trace.hpp"

namespace gmmcache {

struct LatencyModel {
  double hit_us = 1.0;
  double ssd_read_us = 75.0;
  double ssd_write_us = 900.0;
  double gmm_infer_us = 3.0;
  // By default inference overlaps the SSD request it accompanies and costs
  // max(gmm_infer_us, ssd_us). When set, it is charged on top instead.
  bool additive_inference = false;

  friend bool operator==(const LatencyModel&, const LatencyModel&) = default;
};

struct CacheConfig {
  std::uint64_t cache_bytes = std::uint64_t{64} << 20;
  std::uint64_t block_bytes = 4096;
  std::uint32_t associativity = 8;
  LatencyModel latency;

  // Throws ConfigError.
  void validate() const;
  std::uint64_t set_count() const { return cache_bytes / (block_bytes * associativity); }

  friend bool operator==(const CacheConfig&, const CacheConfig&) = default;
};

struct Location {
  std::uint64_t set = 0;
  std::uint64_t tag = 0;

  friend bool operator==(const Location&, const Location&) = default;
};

inline Location locate(std::uint64_t page_index, std::uint64_t set_count) {
  return {page_index % set_count, page_index / set_count};
}

enum class PolicyKind : std::uint8_t { kLru, kGmmAdmission, kGmmEviction, kGmmBoth };

inline constexpr std::array<PolicyKind, 4> kAllPolicies = {
    PolicyKind::kLru, PolicyKind::kGmmAdmission, PolicyKind::kGmmEviction, PolicyKind::kGmmBoth};

std::string_view to_string(PolicyKind kind);
// Throws UsageError on an unknown name.
PolicyKind policy_from_string(std::string_view name);

struct Policy {
  PolicyKind kind = PolicyKind::kLru;
  std::shared_ptr<const GmmModel> model;

  bool admission() const { return kind == PolicyKind::kGmmAdmission || kind == PolicyKind::kGmmBoth; }
  bool gmm_eviction() const { return kind == PolicyKind::kGmmEviction || kind == PolicyKind::kGmmBoth; }
  bool needs_model() const { return kind != PolicyKind::kLru; }

  // GMM variants need a model; admission variants need its threshold.
  void validate() const;
};

struct CacheBlock {
  std::uint32_t tag = 0;
  bool valid = false;
  bool dirty = false;
  // LRU variants: access stamp. GMM-eviction variants: log GMM score
  // captured at fill time (same order as the score itself, no underflow).
  double score = 0.0;
};

enum class AccessResult : std::uint8_t { kHit, kMissFill, kMissBypass };

struct AccessOutcome {
  AccessResult kind = AccessResult::kHit;
  double latency_us = 0.0;
  bool writeback = false;
  bool gmm_inferred = false;
  // Part of latency_us owed to inference rather than the SSD.
  double inference_overhead_us = 0.0;
};

// A set-associative write-back, write-allocate DRAM cache in front of an
// SSD. Not thread-safe; one instance per simulation.
class DramCache {
 public:
  DramCache(CacheConfig config, Policy policy);

  // Scores the sample with the policy's model only when a miss needs it.
  AccessOutcome access(const Sample& sample);
  // Same, with the sample's log GMM score supplied by the caller.
  AccessOutcome access(const Sample& sample, double log_score);

  bool contains(std::uint64_t page_index) const;
  std::size_t occupancy() const;
  std::span<const CacheBlock> set_blocks(std::uint64_t set) const;

  // dirty ⇒ valid and per-set uniqueness of valid tags. Throws NumericError.
  void check_invariants() const;

  const CacheConfig& config() const { return config_; }
  const Policy& policy() const { return policy_; }

  // Extra latency charged for inference beyond the overlapped SSD cost.
  double inference_overhead(double ssd_us) const;

 private:
  template <typename ScoreFn>
  AccessOutcome access_impl(const Sample& sample, ScoreFn&& log_score);

  std::uint32_t tag_of(std::uint64_t page_index, std::uint64_t& set) const;

  CacheConfig config_;
  Policy policy_;
  std::uint64_t set_count_;
  std::uint32_t ways_;
  std::vector<CacheBlock> blocks_;
  std::uint64_t clock_ = 0;
};

struct SimReport {
  std::string policy;
  CacheConfig config;
  std::optional<double> threshold;

  std::uint64_t accesses = 0;
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t bypasses = 0;
  std::uint64_t bypass_reads = 0;
  std::uint64_t bypass_writes = 0;
  std::uint64_t fills = 0;
  std::uint64_t dirty_writebacks = 0;
  std::uint64_t gmm_inferences = 0;
  double total_latency_us = 0.0;
  double inference_overhead_us = 0.0;

  double miss_rate() const {
    return accesses ? static_cast<double>(misses) / static_cast<double>(accesses) : 0.0;
  }
  double avg_latency_us() const {
    return accesses ? total_latency_us / static_cast<double>(accesses) : 0.0;
  }

  void record(const AccessOutcome& outcome, AccessKind op);
};

// Latency the counters account for:
// hits·hit + fills·read + writebacks·write + bypass reads·read +
// bypass writes·write + inference overhead.
double accounted_latency_us(const SimReport& report);

// Runs the samples through an initially empty cache. Throws EmptyInputError.
SimReport simulate(std::span<const Sample> samples, const CacheConfig& config,
                   const Policy& policy);
// As above with precomputed per-sample log GMM scores.
SimReport simulate(std::span<const Sample> samples, const CacheConfig& config,
                   const Policy& policy, std::span<const double> log_scores);

// Log GMM score of every sample; the OpenMP batch kernel.
std::vector<double> score_samples(std::span<const Sample> samples, const GmmModel& model);

struct PolicyRow {
  SimReport report;
  // (LRU miss rate - this miss rate) in percentage points.
  double miss_rate_delta_pp = 0.0;
  // (LRU avg - this avg) / LRU avg · 100.
  double latency_reduction_pct = 0.0;
  bool best_gmm = false;
};

struct PolicyComparison {
  // LRU, GmmAdmission, GmmEviction, GmmBoth in that order.
  std::array<PolicyRow, 4> rows;
  std::size_t best_gmm = 1;
};

double latency_reduction_percent(double lru_avg_us, double other_avg_us);

// The four policies run concurrently on private cache states sharing the
// model and one set of precomputed scores.
PolicyComparison compare_policies(std::span<const Sample> samples, const CacheConfig& config,
                                  std::shared_ptr<const GmmModel> model);

}  // namespace gmmcache
