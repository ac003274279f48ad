#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gmmcache {

inline constexpr std::uint64_t kPageBytes = 4096;
inline constexpr unsigned kPageShift = 12;

enum class AccessKind : std::uint8_t { kRead, kWrite };

struct TraceRecord {
  AccessKind op = AccessKind::kRead;
  std::uint64_t phys_addr = 0;
  std::uint64_t seq = 0;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

// One GMM input point before standardization.
struct Sample {
  std::uint64_t page_index = 0;
  std::uint32_t timestamp = 0;
  AccessKind op = AccessKind::kRead;

  friend bool operator==(const Sample&, const Sample&) = default;
};

struct PreprocessConfig {
  double head_drop_frac = 0.20;
  double tail_drop_frac = 0.10;
  std::uint32_t len_window = 32;
  std::uint32_t len_access_shot = 10000;

  // Throws ConfigError.
  void validate() const;
};

// Text trace format: one `<r|w> 0x<hex>` request per line, `#` comments,
// blank lines ignored. `max_records` truncates after that many records.
std::vector<TraceRecord> parse_trace(std::string_view text,
                                     std::optional<std::size_t> max_records = {});
std::vector<TraceRecord> parse_trace(std::istream& in,
                                     std::optional<std::size_t> max_records = {});
std::vector<TraceRecord> read_trace_file(const std::string& path,
                                         std::optional<std::size_t> max_records = {});

void write_trace(std::ostream& out, std::span<const TraceRecord> records);

// Drops floor(head·N) leading and floor(tail·N) trailing records and
// renumbers the survivors from 0.
std::vector<TraceRecord> trim_warmup(std::span<const TraceRecord> records,
                                     const PreprocessConfig& cfg);

constexpr std::uint64_t page_index(std::uint64_t phys_addr) {
  return phys_addr >> kPageShift;
}

// Window/access-shot timestamp counter. Each request advances the counter
// once; timestamps repeat every len_window·len_access_shot requests.
class TimestampCounter {
 public:
  TimestampCounter(std::uint32_t len_window, std::uint32_t len_access_shot);

  std::uint32_t next();

 private:
  std::uint32_t len_window_;
  std::uint32_t len_access_shot_;
  std::uint32_t index_ = 0;
  std::uint32_t timestamp_ = 0;
};

std::vector<Sample> assign_timestamps(std::span<const TraceRecord> records,
                                      const PreprocessConfig& cfg);

// trim_warmup followed by assign_timestamps.
std::vector<Sample> preprocess(std::span<const TraceRecord> records,
                               const PreprocessConfig& cfg);

// ---------------------------------------------------------------------------
// Synthetic workloads

enum class ClusterShape : std::uint8_t {
  kGaussian,  // page ~ round(N(center, spread))
  kUniform,   // page ~ U[center - spread, center + spread]
  kScan,      // sequential sweep over [center - spread, center + spread]
};

// Half-open range of record positions. With a non-zero period on the
// owning spec, positions are taken modulo that period.
struct ActivityWindow {
  std::uint64_t begin = 0;
  std::uint64_t end = 0;
};

struct PageCluster {
  std::uint64_t center_page = 0;
  std::uint64_t page_spread = 0;
  double weight = 1.0;
  ClusterShape shape = ClusterShape::kGaussian;
  // Empty means always active.
  std::vector<ActivityWindow> active;
};

struct SyntheticTraceSpec {
  std::uint64_t n_records = 0;
  std::vector<PageCluster> page_clusters;
  double write_fraction = 0.0;
  std::uint64_t rng_seed = 0;
  std::uint64_t activity_period = 0;

  void validate() const;
};

std::vector<TraceRecord> generate_synthetic(const SyntheticTraceSpec& spec);

std::string_view to_string(ClusterShape shape);
ClusterShape cluster_shape_from_string(std::string_view name);

}  // namespace gmmcache
