#include "gmmcache/report.hpp"

#include <cmath>

#include <fmt/format.h>

#include "gmmcache/error.hpp"

namespace gmmcache {

namespace {

// JSON cannot carry infinities; the admit-everything threshold is written
// as the string "-inf".
nlohmann::ordered_json threshold_json(const std::optional<double>& t) {
  if (!t) return nullptr;
  if (std::isinf(*t)) return *t < 0 ? "-inf" : "inf";
  return *t;
}

std::string percentile_label(const std::optional<double>& p) {
  return p ? fmt::format("{:g}", *p) : std::string{};
}

}  // namespace

nlohmann::ordered_json to_json(const CacheConfig& c) {
  nlohmann::ordered_json j;
  j["cache_bytes"] = c.cache_bytes;
  j["block_bytes"] = c.block_bytes;
  j["associativity"] = c.associativity;
  j["sets"] = c.set_count();
  j["hit_us"] = c.latency.hit_us;
  j["ssd_read_us"] = c.latency.ssd_read_us;
  j["ssd_write_us"] = c.latency.ssd_write_us;
  j["gmm_infer_us"] = c.latency.gmm_infer_us;
  j["additive_inference"] = c.latency.additive_inference;
  return j;
}

CacheConfig cache_config_from_json(const nlohmann::json& j, CacheConfig c) {
  if (!j.is_object()) throw ConfigError("cache config must be an object");
  try {
    c.cache_bytes = j.value("cache_bytes", c.cache_bytes);
    c.block_bytes = j.value("block_bytes", c.block_bytes);
    c.associativity = j.value("associativity", c.associativity);
    c.latency.hit_us = j.value("hit_us", c.latency.hit_us);
    c.latency.ssd_read_us = j.value("ssd_read_us", c.latency.ssd_read_us);
    c.latency.ssd_write_us = j.value("ssd_write_us", c.latency.ssd_write_us);
    c.latency.gmm_infer_us = j.value("gmm_infer_us", c.latency.gmm_infer_us);
    c.latency.additive_inference = j.value("additive_inference", c.latency.additive_inference);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("cache config: {}", e.what()));
  }
  c.validate();
  return c;
}

nlohmann::ordered_json to_json(const SimReport& r) {
  nlohmann::ordered_json j;
  j["policy"] = r.policy;
  j["accesses"] = r.accesses;
  j["hits"] = r.hits;
  j["misses"] = r.misses;
  j["bypasses"] = r.bypasses;
  j["dirty_writebacks"] = r.dirty_writebacks;
  j["miss_rate"] = r.miss_rate();
  j["avg_latency_us"] = r.avg_latency_us();
  j["fills"] = r.fills;
  j["bypass_reads"] = r.bypass_reads;
  j["bypass_writes"] = r.bypass_writes;
  j["gmm_inferences"] = r.gmm_inferences;
  j["total_latency_us"] = r.total_latency_us;
  j["inference_overhead_us"] = r.inference_overhead_us;
  j["threshold"] = threshold_json(r.threshold);
  j["config"] = to_json(r.config);
  return j;
}

nlohmann::ordered_json to_json(const ComparisonRun& run) {
  nlohmann::ordered_json j;
  j["percentile"] = run.percentile ? nlohmann::ordered_json(*run.percentile) : nullptr;
  j["best_gmm"] = run.comparison.rows[run.comparison.best_gmm].report.policy;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& row : run.comparison.rows) {
    auto r = to_json(row.report);
    r["miss_rate_delta_pp"] = row.miss_rate_delta_pp;
    r["latency_reduction_pct"] = row.latency_reduction_pct;
    r["best_gmm"] = row.best_gmm;
    rows.push_back(std::move(r));
  }
  j["policies"] = std::move(rows);
  return j;
}

std::string comparison_csv(const std::vector<ComparisonRun>& runs) {
  std::string out = kCsvHeader;
  out += '\n';
  for (const auto& run : runs) {
    for (const auto& row : run.comparison.rows) {
      const auto& r = row.report;
      fmt::format_to(std::back_inserter(out), "{},{},{},{},{},{},{},{:.17g},{:.17g},{:.17g},{:.17g},{}\n",
                     percentile_label(run.percentile), r.policy, r.accesses, r.hits, r.misses,
                     r.bypasses, r.dirty_writebacks, r.miss_rate(), r.avg_latency_us(),
                     row.miss_rate_delta_pp, row.latency_reduction_pct, row.best_gmm ? 1 : 0);
    }
  }
  return out;
}

std::string comparison_table(const std::vector<ComparisonRun>& runs) {
  std::string out;
  auto it = std::back_inserter(out);
  fmt::format_to(it, "{:>10}  {:<14}  {:>10}  {:>10}  {:>10}  {:>14}  {:>12}  {:>11}\n",
                 "percentile", "policy", "accesses", "misses", "bypasses", "miss_rate(%)",
                 "avg_lat(us)", "reduct.(%)");
  for (const auto& run : runs) {
    for (const auto& row : run.comparison.rows) {
      const auto& r = row.report;
      fmt::format_to(it, "{:>10}  {:<14}  {:>10}  {:>10}  {:>10}  {:>14.4f}  {:>12.4f}  {:>11.2f}{}\n",
                     percentile_label(run.percentile), r.policy, r.accesses, r.misses, r.bypasses,
                     r.miss_rate() * 100.0, r.avg_latency_us(), row.latency_reduction_pct,
                     row.best_gmm ? "  *" : "");
    }
  }
  return out;
}

std::string report_table(const SimReport& r) {
  std::string out;
  auto it = std::back_inserter(out);
  auto line = [&](std::string_view key, const std::string& value) {
    fmt::format_to(it, "{:<18} {:>16}\n", key, value);
  };
  line("policy", r.policy);
  line("accesses", std::to_string(r.accesses));
  line("hits", std::to_string(r.hits));
  line("misses", std::to_string(r.misses));
  line("bypasses", std::to_string(r.bypasses));
  line("dirty_writebacks", std::to_string(r.dirty_writebacks));
  line("miss_rate", fmt::format("{:.6f}", r.miss_rate()));
  line("avg_latency_us", fmt::format("{:.4f}", r.avg_latency_us()));
  return out;
}

}  // namespace gmmcache
