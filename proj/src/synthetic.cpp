#include <cmath>
#include <random>

#include <fmt/format.h>

#include "gmmcache/error.hpp"
#include "gmmcache/trace.hpp"

namespace gmmcache {

namespace {

constexpr std::uint64_t kMaxPage = (~std::uint64_t{0}) >> kPageShift;

bool is_active(const PageCluster& c, std::uint64_t position) {
  if (c.active.empty()) return true;
  for (const auto& w : c.active) {
    if (position >= w.begin && position < w.end) return true;
  }
  return false;
}

struct PageRange {
  std::uint64_t lo;
  std::uint64_t hi;  // inclusive
};

PageRange range_of(const PageCluster& c) {
  const std::uint64_t lo = c.center_page > c.page_spread ? c.center_page - c.page_spread : 0;
  const std::uint64_t hi =
      kMaxPage - c.center_page > c.page_spread ? c.center_page + c.page_spread : kMaxPage;
  return {lo, hi};
}

}  // namespace

std::string_view to_string(ClusterShape shape) {
  switch (shape) {
    case ClusterShape::kGaussian: return "gaussian";
    case ClusterShape::kUniform: return "uniform";
    case ClusterShape::kScan: return "scan";
  }
  return "?";
}

ClusterShape cluster_shape_from_string(std::string_view name) {
  if (name == "gaussian") return ClusterShape::kGaussian;
  if (name == "uniform") return ClusterShape::kUniform;
  if (name == "scan") return ClusterShape::kScan;
  throw ConfigError(fmt::format("unknown cluster shape '{}'", name));
}

void SyntheticTraceSpec::validate() const {
  if (page_clusters.empty()) throw ConfigError("synthetic spec has no page clusters");
  if (n_records == 0) throw ConfigError("synthetic spec requests zero records");
  if (!(write_fraction >= 0.0 && write_fraction <= 1.0)) {
    throw ConfigError("write_fraction must lie in [0, 1]");
  }
  double total = 0.0;
  for (const auto& c : page_clusters) {
    if (!(c.weight > 0.0)) throw ConfigError("cluster weights must be positive");
    if (c.center_page > kMaxPage) throw ConfigError("cluster center beyond 64-bit address space");
    for (const auto& w : c.active) {
      if (w.begin >= w.end) throw ConfigError("activity window must satisfy begin < end");
      if (activity_period != 0 && w.end > activity_period) {
        throw ConfigError("activity window extends past activity_period");
      }
    }
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ConfigError(fmt::format("cluster weights sum to {} instead of 1", total));
  }
}

std::vector<TraceRecord> generate_synthetic(const SyntheticTraceSpec& spec) {
  spec.validate();

  std::mt19937_64 rng(spec.rng_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<std::uint64_t> line_in_page(0, kPageBytes / 64 - 1);

  const std::size_t n_clusters = spec.page_clusters.size();
  std::vector<std::uint64_t> scan_cursor(n_clusters, 0);
  std::vector<double> cumulative(n_clusters);

  std::vector<TraceRecord> out;
  out.reserve(spec.n_records);
  for (std::uint64_t i = 0; i < spec.n_records; ++i) {
    const std::uint64_t position = spec.activity_period ? i % spec.activity_period : i;

    double total = 0.0;
    for (std::size_t c = 0; c < n_clusters; ++c) {
      const auto& cluster = spec.page_clusters[c];
      total += is_active(cluster, position) ? cluster.weight : 0.0;
      cumulative[c] = total;
    }
    if (total <= 0.0) {
      throw ConfigError(fmt::format("no page cluster is active at record {}", i));
    }

    const double pick = unit(rng) * total;
    std::size_t chosen = 0;
    while (chosen + 1 < n_clusters && !(pick < cumulative[chosen])) ++chosen;
    // Skip trailing inactive clusters that share the same cumulative value.
    while (!is_active(spec.page_clusters[chosen], position)) --chosen;

    const auto& cluster = spec.page_clusters[chosen];
    const PageRange range = range_of(cluster);
    std::uint64_t page = cluster.center_page;
    switch (cluster.shape) {
      case ClusterShape::kGaussian: {
        const double x = std::round(static_cast<double>(cluster.center_page) +
                                    static_cast<double>(cluster.page_spread) * normal(rng));
        page = x <= static_cast<double>(range.lo)   ? range.lo
               : x >= static_cast<double>(range.hi) ? range.hi
                                                    : static_cast<std::uint64_t>(x);
        break;
      }
      case ClusterShape::kUniform: {
        std::uniform_int_distribution<std::uint64_t> dist(range.lo, range.hi);
        page = dist(rng);
        break;
      }
      case ClusterShape::kScan: {
        const std::uint64_t width = range.hi - range.lo + 1;
        page = range.lo + scan_cursor[chosen];
        scan_cursor[chosen] = width == 0 ? 0 : (scan_cursor[chosen] + 1) % width;
        break;
      }
    }

    TraceRecord rec;
    rec.seq = i;
    rec.op = unit(rng) < spec.write_fraction ? AccessKind::kWrite : AccessKind::kRead;
    rec.phys_addr = (page << kPageShift) | (line_in_page(rng) * 64);
    out.push_back(rec);
  }
  return out;
}

}  // namespace gmmcache
