#include "gmmcache/trace.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "gmmcache/error.hpp"

namespace gmmcache {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

TraceRecord parse_line(std::string_view line, std::size_t line_no, std::uint64_t seq) {
  const auto space = line.find_first_of(" \t");
  if (space == std::string_view::npos) {
    throw ParseError(line_no, "expected `<r|w> <0x-address>`");
  }
  const std::string_view op = line.substr(0, space);
  const std::string_view addr = trim(line.substr(space));

  TraceRecord rec;
  rec.seq = seq;
  if (op == "r") {
    rec.op = AccessKind::kRead;
  } else if (op == "w") {
    rec.op = AccessKind::kWrite;
  } else {
    throw ParseError(line_no, fmt::format("unknown access kind '{}'", op));
  }

  if (addr.size() < 3 || addr[0] != '0' || (addr[1] != 'x' && addr[1] != 'X')) {
    throw ParseError(line_no, fmt::format("address '{}' is not 0x-prefixed hex", addr));
  }
  const char* begin = addr.data() + 2;
  const char* end = addr.data() + addr.size();
  auto [ptr, ec] = std::from_chars(begin, end, rec.phys_addr, 16);
  if (ec == std::errc::result_out_of_range) {
    throw ParseError(line_no, fmt::format("address '{}' exceeds 64 bits", addr));
  }
  if (ec != std::errc() || ptr != end) {
    throw ParseError(line_no, fmt::format("malformed address '{}'", addr));
  }
  return rec;
}

}  // namespace

void PreprocessConfig::validate() const {
  if (!(head_drop_frac >= 0.0 && head_drop_frac < 1.0)) {
    throw ConfigError("head_drop_frac must lie in [0, 1)");
  }
  if (!(tail_drop_frac >= 0.0 && tail_drop_frac < 1.0)) {
    throw ConfigError("tail_drop_frac must lie in [0, 1)");
  }
  if (!(head_drop_frac + tail_drop_frac < 1.0)) {
    throw ConfigError("head_drop_frac + tail_drop_frac must be below 1");
  }
  if (len_window == 0) throw ConfigError("len_window must be positive");
  if (len_access_shot == 0) throw ConfigError("len_access_shot must be positive");
}

std::vector<TraceRecord> parse_trace(std::string_view text,
                                     std::optional<std::size_t> max_records) {
  std::vector<TraceRecord> records;
  std::size_t line_no = 0;
  while (!text.empty()) {
    if (max_records && records.size() >= *max_records) break;
    const auto nl = text.find('\n');
    const std::string_view raw = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;

    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    records.push_back(parse_line(line, line_no, records.size()));
  }
  if (records.empty()) throw EmptyInputError("trace contains no requests");
  return records;
}

std::vector<TraceRecord> parse_trace(std::istream& in, std::optional<std::size_t> max_records) {
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_trace(std::string_view(buf.str()), max_records);
}

std::vector<TraceRecord> read_trace_file(const std::string& path,
                                         std::optional<std::size_t> max_records) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open trace file '{}'", path));
  return parse_trace(in, max_records);
}

void write_trace(std::ostream& out, std::span<const TraceRecord> records) {
  std::string line;
  for (const auto& rec : records) {
    line.clear();
    fmt::format_to(std::back_inserter(line), "{} {:#x}\n",
                   rec.op == AccessKind::kRead ? 'r' : 'w', rec.phys_addr);
    out << line;
  }
}

std::vector<TraceRecord> trim_warmup(std::span<const TraceRecord> records,
                                     const PreprocessConfig& cfg) {
  cfg.validate();
  if (records.empty()) throw EmptyInputError("cannot trim an empty trace");

  const double n = static_cast<double>(records.size());
  const auto head = static_cast<std::size_t>(std::floor(cfg.head_drop_frac * n));
  const auto tail = static_cast<std::size_t>(std::floor(cfg.tail_drop_frac * n));
  if (head + tail >= records.size()) {
    throw EmptyInputError(fmt::format(
        "trimming {} head and {} tail records leaves nothing of {}", head, tail,
        records.size()));
  }

  std::vector<TraceRecord> out(records.begin() + static_cast<std::ptrdiff_t>(head),
                               records.end() - static_cast<std::ptrdiff_t>(tail));
  for (std::size_t i = 0; i < out.size(); ++i) out[i].seq = i;
  return out;
}

TimestampCounter::TimestampCounter(std::uint32_t len_window, std::uint32_t len_access_shot)
    : len_window_(len_window), len_access_shot_(len_access_shot) {
  if (len_window == 0 || len_access_shot == 0) {
    throw ConfigError("len_window and len_access_shot must be positive");
  }
}

std::uint32_t TimestampCounter::next() {
  if (index_ >= len_window_) {
    ++timestamp_;
    index_ = 0;
  }
  if (timestamp_ >= len_access_shot_) timestamp_ = 0;
  ++index_;
  return timestamp_;
}

std::vector<Sample> assign_timestamps(std::span<const TraceRecord> records,
                                      const PreprocessConfig& cfg) {
  TimestampCounter counter(cfg.len_window, cfg.len_access_shot);
  std::vector<Sample> samples;
  samples.reserve(records.size());
  for (const auto& rec : records) {
    samples.push_back({page_index(rec.phys_addr), counter.next(), rec.op});
  }
  return samples;
}

std::vector<Sample> preprocess(std::span<const TraceRecord> records,
                               const PreprocessConfig& cfg) {
  const auto trimmed = trim_warmup(records, cfg);
  return assign_timestamps(trimmed, cfg);
}

}  // namespace gmmcache
