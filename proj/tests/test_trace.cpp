#include <doctest.h>

#include <random>
#include <sstream>

#include "gmmcache/error.hpp"
#include "gmmcache/trace.hpp"

using namespace gmmcache;

namespace {

std::vector<TraceRecord> reads(std::size_t n) {
  std::vector<TraceRecord> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({AccessKind::kRead, i * kPageBytes, i});
  return out;
}

std::vector<std::uint32_t> timestamps(std::size_t n, std::uint32_t window, std::uint32_t shot) {
  PreprocessConfig cfg{0.0, 0.0, window, shot};
  std::vector<std::uint32_t> out;
  for (const auto& s : assign_timestamps(reads(n), cfg)) out.push_back(s.timestamp);
  return out;
}

}  // namespace

TEST_CASE("parse_trace reads ops, hex addresses and sequence numbers") {
  const auto recs = parse_trace("r 0x1000\nw 0x2fff\n");
  REQUIRE(recs.size() == 2);
  CHECK(recs[0] == TraceRecord{AccessKind::kRead, 0x1000, 0});
  CHECK(recs[1] == TraceRecord{AccessKind::kWrite, 0x2fff, 1});
}

TEST_CASE("parse_trace skips comments and blank lines") {
  const auto recs = parse_trace("# header\n\n  r 0xA\r\n# mid\nw   0XdeadBEEF\n\n");
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].phys_addr == 0xA);
  CHECK(recs[1].phys_addr == 0xdeadbeef);
  CHECK(recs[1].seq == 1);
}

TEST_CASE("parse_trace errors") {
  CHECK_THROWS_AS(parse_trace(""), EmptyInputError);
  CHECK_THROWS_AS(parse_trace("# only a comment\n\n"), EmptyInputError);

  try {
    parse_trace("r zzz");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 1);
  }
  try {
    parse_trace("r 0x10\n# c\nx 0x10\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(parse_trace("r 1000"), ParseError);
  CHECK_THROWS_AS(parse_trace("r 0x"), ParseError);
  CHECK_THROWS_AS(parse_trace("r 0x10 extra"), ParseError);
  CHECK_THROWS_AS(parse_trace("r 0x1ffffffffffffffff"), ParseError);
  CHECK_THROWS_AS(parse_trace("r"), ParseError);
  // A parse error is not the empty-input error.
  CHECK_THROWS_AS(parse_trace("r zzz"), ParseError);
}

TEST_CASE("parse_trace honours a record limit") {
  const auto recs = parse_trace("r 0x1\nr 0x2\nr 0x3\nbogus\n", 3);
  CHECK(recs.size() == 3);
}

TEST_CASE("write_trace output parses back to the same records") {
  SyntheticTraceSpec spec;
  spec.n_records = 500;
  spec.page_clusters = {{1000, 50, 0.7, ClusterShape::kGaussian, {}},
                        {1u << 30, 10, 0.3, ClusterShape::kUniform, {}}};
  spec.write_fraction = 0.4;
  spec.rng_seed = 3;
  const auto recs = generate_synthetic(spec);
  std::ostringstream out;
  write_trace(out, recs);
  CHECK(parse_trace(out.str()) == recs);
}

TEST_CASE("trim_warmup drops floor(head·N) and floor(tail·N)") {
  const auto recs = reads(10);
  SUBCASE("defaults") {
    const auto t = trim_warmup(recs, PreprocessConfig{});
    REQUIRE(t.size() == 7);
    for (std::size_t i = 0; i < t.size(); ++i) {
      CHECK(t[i].phys_addr == (i + 2) * kPageBytes);
      CHECK(t[i].seq == i);
    }
  }
  SUBCASE("no trimming is the identity") {
    PreprocessConfig cfg{0.0, 0.0, 32, 10000};
    CHECK(trim_warmup(recs, cfg) == recs);
    CHECK(trim_warmup(trim_warmup(recs, cfg), cfg) == recs);
  }
  SUBCASE("short traces keep everything") {
    const auto t = trim_warmup(reads(3), PreprocessConfig{});
    CHECK(t == reads(3));
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(trim_warmup(std::vector<TraceRecord>{}, PreprocessConfig{}), EmptyInputError);
    PreprocessConfig cfg{0.6, 0.5, 32, 10000};
    CHECK_THROWS_AS(trim_warmup(recs, cfg), ConfigError);
    cfg = {-0.1, 0.0, 32, 10000};
    CHECK_THROWS_AS(trim_warmup(recs, cfg), ConfigError);
  }
}

TEST_CASE("page_index divides by the page size") {
  CHECK(page_index(0x0) == 0);
  CHECK(page_index(0x1000) == 1);
  CHECK(page_index(0xfff) == 0);
  CHECK(page_index(0xDEADB000) == 0xDEADB);
  std::mt19937_64 rng(11);
  for (int i = 0; i < 1000; ++i) {
    const std::uint64_t a = rng();
    CHECK(page_index(a) == page_index(a - (a % kPageBytes)));
    CHECK(page_index(a) * kPageBytes <= a);
    CHECK(a - page_index(a) * kPageBytes < kPageBytes);
  }
}

TEST_CASE("assign_timestamps follows the window/access-shot counter") {
  // Hand execution of the counter with len_window = 2, len_access_shot = 3.
  CHECK(timestamps(14, 2, 3) ==
        std::vector<std::uint32_t>{0, 0, 1, 1, 2, 2, 0, 0, 1, 1, 2, 2, 0, 0});
  CHECK(timestamps(5, 100, 10) == std::vector<std::uint32_t>{0, 0, 0, 0, 0});
  CHECK(timestamps(1, 32, 10000) == std::vector<std::uint32_t>{0});

  PreprocessConfig bad{0.0, 0.0, 0, 10};
  CHECK_THROWS_AS(assign_timestamps(reads(3), bad), ConfigError);
  bad = {0.0, 0.0, 4, 0};
  CHECK_THROWS_AS(assign_timestamps(reads(3), bad), ConfigError);
}

TEST_CASE("timestamp runs have length len_window except the last") {
  for (std::uint32_t window : {1u, 3u, 7u, 32u}) {
    for (std::uint32_t shot : {1u, 2u, 5u, 10000u}) {
      for (std::size_t n : {1u, 10u, 97u, 500u}) {
        const auto ts = timestamps(n, window, shot);
        std::vector<std::size_t> runs{1};
        for (std::size_t i = 1; i < ts.size(); ++i) {
          CHECK(ts[i] < shot);
          if (ts[i] == ts[i - 1] && runs.back() < window) {
            ++runs.back();
          } else {
            runs.push_back(1);
          }
        }
        for (std::size_t r = 0; r + 1 < runs.size(); ++r) CHECK(runs[r] == window);
        CHECK(runs.back() <= window);
      }
    }
  }
}

TEST_CASE("assign_timestamps keeps page index and op") {
  std::vector<TraceRecord> recs{{AccessKind::kWrite, 0x5123, 0}, {AccessKind::kRead, 0x9000, 1}};
  const auto s = assign_timestamps(recs, PreprocessConfig{});
  REQUIRE(s.size() == 2);
  CHECK(s[0] == Sample{5, 0, AccessKind::kWrite});
  CHECK(s[1] == Sample{9, 0, AccessKind::kRead});
}

TEST_CASE("generate_synthetic") {
  SyntheticTraceSpec spec;
  spec.n_records = 10;
  spec.page_clusters = {{100, 0, 1.0, ClusterShape::kGaussian, {}}};
  spec.rng_seed = 1;

  SUBCASE("zero spread pins every access to the centre page") {
    for (auto shape : {ClusterShape::kGaussian, ClusterShape::kUniform, ClusterShape::kScan}) {
      spec.page_clusters[0].shape = shape;
      const auto recs = generate_synthetic(spec);
      REQUIRE(recs.size() == 10);
      for (std::size_t i = 0; i < recs.size(); ++i) {
        CHECK(page_index(recs[i].phys_addr) == 100);
        CHECK(recs[i].seq == i);
      }
    }
  }
  SUBCASE("deterministic for a seed") {
    spec.page_clusters = {{100, 40, 0.5, ClusterShape::kGaussian, {}},
                          {9000, 500, 0.5, ClusterShape::kUniform, {}}};
    spec.n_records = 2000;
    spec.write_fraction = 0.3;
    CHECK(generate_synthetic(spec) == generate_synthetic(spec));
    auto other = spec;
    other.rng_seed = 2;
    CHECK(generate_synthetic(spec) != generate_synthetic(other));
  }
  SUBCASE("cluster shares follow the weights") {
    spec.page_clusters = {{1000, 10, 0.9, ClusterShape::kUniform, {}},
                          {1000000, 10, 0.1, ClusterShape::kUniform, {}}};
    spec.n_records = 100000;
    const auto recs = generate_synthetic(spec);
    std::size_t first = 0;
    for (const auto& r : recs) first += page_index(r.phys_addr) < 500000 ? 1 : 0;
    const double share = static_cast<double>(first) / static_cast<double>(recs.size());
    CHECK(std::abs(share - 0.9) <= 0.01);
  }
  SUBCASE("activity windows gate clusters") {
    spec.page_clusters = {{10, 0, 0.5, ClusterShape::kGaussian, {{0, 50}}},
                          {20, 0, 0.5, ClusterShape::kGaussian, {{50, 100}}}};
    spec.n_records = 300;
    spec.activity_period = 100;
    const auto recs = generate_synthetic(spec);
    for (std::size_t i = 0; i < recs.size(); ++i) {
      CHECK(page_index(recs[i].phys_addr) == (i % 100 < 50 ? 10u : 20u));
    }
  }
  SUBCASE("scan sweeps its range in order") {
    spec.page_clusters = {{10, 2, 1.0, ClusterShape::kScan, {}}};
    const auto recs = generate_synthetic(spec);
    for (std::size_t i = 0; i < recs.size(); ++i) {
      CHECK(page_index(recs[i].phys_addr) == 8 + i % 5);
    }
  }
  SUBCASE("writes appear at the requested fraction") {
    spec.n_records = 50000;
    spec.write_fraction = 0.25;
    std::size_t writes = 0;
    for (const auto& r : generate_synthetic(spec)) writes += r.op == AccessKind::kWrite;
    CHECK(std::abs(static_cast<double>(writes) / 50000.0 - 0.25) < 0.01);
  }
  SUBCASE("invalid specs") {
    spec.page_clusters.clear();
    CHECK_THROWS_AS(generate_synthetic(spec), ConfigError);
    spec.page_clusters = {{1, 1, 0.5, ClusterShape::kGaussian, {}}};
    CHECK_THROWS_AS(generate_synthetic(spec), ConfigError);
    spec.page_clusters = {{1, 1, 1.0, ClusterShape::kGaussian, {{5, 6}}}};
    CHECK_THROWS_AS(generate_synthetic(spec), ConfigError);  // nothing active at record 0
  }
}
