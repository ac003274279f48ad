#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gmmcache/cache.hpp"

namespace gmmcache {

nlohmann::ordered_json to_json(const CacheConfig& config);
CacheConfig cache_config_from_json(const nlohmann::json& j, CacheConfig base = {});

// Fields: policy, accesses, hits, misses, bypasses, dirty_writebacks,
// miss_rate, avg_latency_us, then the secondary counters and config.
nlohmann::ordered_json to_json(const SimReport& report);

// One comparison run, tagged with the percentile that set the threshold.
struct ComparisonRun {
  std::optional<double> percentile;
  PolicyComparison comparison;
};

nlohmann::ordered_json to_json(const ComparisonRun& run);

// CSV columns, in order:
// percentile,policy,accesses,hits,misses,bypasses,dirty_writebacks,
// miss_rate,avg_latency_us,miss_rate_delta_pp,latency_reduction_pct,best_gmm
inline constexpr const char* kCsvHeader =
    "percentile,policy,accesses,hits,misses,bypasses,dirty_writebacks,miss_rate,"
    "avg_latency_us,miss_rate_delta_pp,latency_reduction_pct,best_gmm";

std::string comparison_csv(const std::vector<ComparisonRun>& runs);
std::string comparison_table(const std::vector<ComparisonRun>& runs);
std::string report_table(const SimReport& report);

}  // namespace gmmcache
