#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "../tools/cli.hpp"
#include "gmmcache/experiment.hpp"
#include "gmmcache/model_io.hpp"

using namespace gmmcache;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::path(GMMCACHE_TEST_TMP) / "cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string write(const fs::path& path, const std::string& text) {
  std::ofstream(path) << text;
  return path.string();
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t line_count(const std::string& text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

// Skewed synthetic workload small enough for quick runs.
const char* kSyntheticConfig = R"({
  "seed": 5,
  "trace": {"synthetic": {"n_records": 20000, "write_fraction": 0.2,
    "clusters": [
      {"center_page": 2000, "page_spread": 300, "weight": 0.6, "shape": "gaussian"},
      {"center_page": 9000, "page_spread": 200, "weight": 0.3, "shape": "gaussian"},
      {"center_page": 500000, "page_spread": 50000, "weight": 0.1, "shape": "uniform"}]}},
  "gmm": {"k": 3, "percentile": 10},
  "cache": {"cache_bytes": 2097152, "associativity": 4}
})";

}  // namespace

TEST_CASE("gen-trace writes the requested number of records") {
  const fs::path dir = scratch("gen");
  const std::string spec = write(dir / "spec.json", R"({"n_records": 10,
      "clusters": [{"center_page": 100, "page_spread": 5, "weight": 1}]})");
  const auto r = run({"gen-trace", "--config", spec, "--out", (dir / "a").string(), "--seed", "3"});
  REQUIRE(r.code == cli::kOk);
  CHECK(r.out.find("10 records") != std::string::npos);
  const std::string a = slurp(dir / "a" / "trace.txt");
  CHECK(line_count(a) == 10);
  CHECK(parse_trace(a).size() == 10);

  REQUIRE(run({"gen-trace", "--config", spec, "--out", (dir / "b").string(), "--seed", "3"}).code == 0);
  CHECK(slurp(dir / "b" / "trace.txt") == a);
  REQUIRE(run({"gen-trace", "--config", spec, "--out", (dir / "c").string(), "--seed", "4"}).code == 0);
  CHECK(slurp(dir / "c" / "trace.txt") != a);

  // A full experiment config works too.
  const std::string full = write(dir / "full.json", kSyntheticConfig);
  REQUIRE(run({"gen-trace", "--config", full, "--out", (dir / "d").string(), "--max-records", "50"})
              .code == 0);
  CHECK(line_count(slurp(dir / "d" / "trace.txt")) == 50);
}

TEST_CASE("gen-trace errors") {
  const fs::path dir = scratch("gen_err");
  const std::string empty = write(dir / "spec.json", R"({"n_records": 10, "clusters": []})");
  const auto r = run({"gen-trace", "--config", empty, "--out", dir.string()});
  CHECK(r.code == cli::kData);
  CHECK_FALSE(r.err.empty());
  CHECK(run({"gen-trace", "--config", (dir / "missing.json").string()}).code == cli::kData);
  CHECK(run({"gen-trace"}).code == cli::kUsage);
  CHECK(run({}).code == cli::kUsage);
  CHECK(run({"frobnicate"}).code == cli::kUsage);
  const std::string bad = write(dir / "bad.json", "{not json");
  CHECK(run({"gen-trace", "--config", bad}).code == cli::kData);
}

TEST_CASE("train with K=1 writes a model that round-trips") {
  const fs::path dir = scratch("train1");
  const std::string cfg_path = write(dir / "cfg.json", R"({
    "trace": {"synthetic": {"n_records": 2000, "rng_seed": 1,
      "clusters": [{"center_page": 5000, "page_spread": 100, "weight": 1}]}},
    "gmm": {"k": 1}
  })");
  const auto r = run({"train", "--config", cfg_path, "--out", dir.string()});
  REQUIRE(r.code == cli::kOk);
  CHECK(r.out.find("converged      yes") != std::string::npos);
  CHECK(r.out.find("threshold") != std::string::npos);

  const ModelFile file = load_model((dir / "model.gmm").string());
  CHECK(file.model.size() == 1);
  REQUIRE(file.windows.has_value());
  CHECK(file.windows->len_window == 32);

  const auto cfg = load_experiment_config(cfg_path);
  const auto trace = process_trace(cfg);
  const auto trained = train_model(cfg, trace);
  for (const auto& s : trace.samples) CHECK(file.model.score(features(s)) == trained.model.score(features(s)));
  CHECK(file.model.threshold() == trained.model.threshold());

  const json report = json::parse(slurp(dir / "train.json"));
  CHECK(report["train"]["converged"] == true);
  CHECK(report["samples"] == 1400);
}

TEST_CASE("train rejects K larger than the sample count") {
  const fs::path dir = scratch("train_k");
  write(dir / "t.txt", "r 0x1000\nr 0x2000\nw 0x3000\nr 0x4000\nr 0x5000\n");
  const std::string cfg = write(dir / "cfg.json", R"({"trace": {"file": "t.txt"},
      "preprocess": {"head_drop_frac": 0, "tail_drop_frac": 0}, "gmm": {"k": 10}})");
  const auto r = run({"train", "--config", cfg, "--out", dir.string()});
  CHECK(r.code == cli::kData);
  CHECK(r.err.find("insufficient samples") != std::string::npos);
}

TEST_CASE("train converges on a planted mixture") {
  const fs::path dir = scratch("train_planted");
  const std::string cfg = write(dir / "cfg.json", kSyntheticConfig);
  const auto r = run({"train", "--config", cfg, "--out", dir.string()});
  REQUIRE(r.code == cli::kOk);
  const json report = json::parse(slurp(dir / "train.json"));
  CHECK(report["train"]["converged"] == true);
  CHECK(report["train"]["iterations_run"].get<int>() <= 200);
}

TEST_CASE("simulate") {
  const fs::path dir = scratch("simulate");
  write(dir / "aba.txt", "r 0xa000\nr 0x14000\nr 0xa000\n");
  const std::string micro = write(dir / "micro.json", R"({"trace": {"file": "aba.txt"},
      "preprocess": {"head_drop_frac": 0, "tail_drop_frac": 0},
      "cache": {"cache_bytes": 8192, "associativity": 2}})");

  SUBCASE("LRU on A,B,A") {
    const auto r = run({"simulate", "--config", micro, "--policy", "lru", "--out", dir.string()});
    REQUIRE(r.code == cli::kOk);
    const json j = json::parse(slurp(dir / "report.json"));
    CHECK(j["report"]["misses"] == 2);
    CHECK(j["report"]["hits"] == 1);
    CHECK(j["report"]["miss_rate"].get<double>() == doctest::Approx(2.0 / 3.0));
    CHECK(j["report"]["avg_latency_us"].get<double>() == doctest::Approx(151.0 / 3.0));
    CHECK(j["model"].is_null());
    CHECK(slurp(dir / "report.txt") == r.out);
  }
  SUBCASE("usage errors") {
    CHECK(run({"simulate", "--config", micro, "--policy", "mru", "--out", dir.string()}).code ==
          cli::kUsage);
    CHECK(run({"simulate", "--config", micro, "--out", dir.string()}).code == cli::kUsage);
    CHECK(run({"simulate", "--config", micro, "--policy", "gmm-both", "--out", dir.string()}).code ==
          cli::kUsage);
    CHECK(run({"simulate", "--config", micro, "--policy", "lru", "--percentile", "abc"}).code ==
          cli::kUsage);
  }
  SUBCASE("percentile 0 admits everything") {
    const std::string cfg = write(dir / "cfg.json", kSyntheticConfig);
    REQUIRE(run({"train", "--config", cfg, "--out", dir.string()}).code == 0);
    const std::string model = (dir / "model.gmm").string();
    REQUIRE(run({"simulate", "--config", cfg, "--policy", "lru", "--out", (dir / "lru").string()})
                .code == 0);
    REQUIRE(run({"simulate", "--config", cfg, "--policy", "gmm-admission", "--model", model,
                 "--percentile", "0", "--out", (dir / "p0").string()})
                .code == 0);
    const json lru = json::parse(slurp(dir / "lru" / "report.json"))["report"];
    const json p0 = json::parse(slurp(dir / "p0" / "report.json"))["report"];
    CHECK(p0["bypasses"] == 0);
    for (const char* key : {"hits", "misses", "dirty_writebacks", "miss_rate", "avg_latency_us"}) {
      CHECK(p0[key] == lru[key]);
    }
  }
  SUBCASE("model trained with other windows is rejected") {
    const std::string cfg = write(dir / "cfg.json", kSyntheticConfig);
    REQUIRE(run({"train", "--config", cfg, "--out", dir.string()}).code == 0);
    json other = json::parse(kSyntheticConfig);
    other["preprocess"]["len_window"] = 16;
    const std::string other_path = write(dir / "other.json", other.dump());
    const auto r = run({"simulate", "--config", other_path, "--policy", "gmm-eviction", "--model",
                        (dir / "model.gmm").string(), "--out", dir.string()});
    CHECK(r.code == cli::kData);
    CHECK(r.err.find("mismatch") != std::string::npos);
  }
}

TEST_CASE("compare") {
  const fs::path dir = scratch("compare");
  const std::string cfg = write(dir / "cfg.json", kSyntheticConfig);
  REQUIRE(run({"train", "--config", cfg, "--out", dir.string()}).code == 0);
  const std::string model = (dir / "model.gmm").string();

  SUBCASE("single run") {
    const auto r = run({"compare", "--config", cfg, "--model", model, "--out", dir.string()});
    REQUIRE(r.code == cli::kOk);
    const json j = json::parse(slurp(dir / "report.json"));
    REQUIRE(j["runs"].size() == 1);
    CHECK(j["runs"][0]["policies"].size() == 4);
    CHECK(j["model"]["k"] == 3);
    const std::string csv = slurp(dir / "report.csv");
    CHECK(line_count(csv) == 5);
    CHECK(csv.rfind(kCsvHeader, 0) == 0);
  }
  SUBCASE("capacity-unconstrained trace") {
    json big = json::parse(kSyntheticConfig);
    big["cache"]["cache_bytes"] = std::uint64_t{1} << 33;
    const std::string path = write(dir / "big.json", big.dump());
    REQUIRE(run({"compare", "--config", path, "--model", model, "--percentile", "0", "--out",
                 (dir / "big").string()})
                .code == 0);
    const json j = json::parse(slurp(dir / "big" / "report.json"));
    for (const auto& row : j["runs"][0]["policies"]) {
      CHECK(row["misses"] == j["runs"][0]["policies"][0]["misses"]);
      CHECK(row["latency_reduction_pct"] == 0.0);
    }
  }
  SUBCASE("percentile sweep") {
    const auto r = run({"compare", "--config", cfg, "--model", model, "--out", dir.string(),
                        "--percentile", "0,10,20,30,40,50,60,70,80,90"});
    REQUIRE(r.code == cli::kOk);
    const json j = json::parse(slurp(dir / "report.json"));
    REQUIRE(j["runs"].size() == 10);
    CHECK(line_count(slurp(dir / "report.csv")) == 41);
    for (std::size_t policy : {1u, 3u}) {
      std::uint64_t prev = 0;
      for (const auto& run : j["runs"]) {
        const auto b = run["policies"][policy]["bypasses"].get<std::uint64_t>();
        CHECK(b >= prev);
        prev = b;
      }
    }
    CHECK(j["runs"][0]["policies"][1]["bypasses"] == 0);
  }
  SUBCASE("missing model") {
    CHECK(run({"compare", "--config", cfg, "--out", dir.string()}).code == cli::kUsage);
    CHECK(run({"compare", "--config", cfg, "--model", (dir / "nope.gmm").string()}).code == cli::kData);
  }
}

TEST_CASE("reruns produce byte-identical reports") {
  const fs::path dir = scratch("determinism");
  const std::string cfg = write(dir / "cfg.json", kSyntheticConfig);
  for (const char* sub : {"a", "b"}) {
    const std::string out = (dir / sub).string();
    REQUIRE(run({"train", "--config", cfg, "--out", out, "--seed", "11"}).code == 0);
    REQUIRE(run({"compare", "--config", cfg, "--out", out, "--seed", "11", "--model",
                 (dir / sub / "model.gmm").string()})
                .code == 0);
  }
  CHECK(slurp(dir / "a" / "model.gmm") == slurp(dir / "b" / "model.gmm"));
  CHECK(slurp(dir / "a" / "train.json") == slurp(dir / "b" / "train.json"));
  CHECK(slurp(dir / "a" / "report.json") == slurp(dir / "b" / "report.json"));
  CHECK(slurp(dir / "a" / "report.csv") == slurp(dir / "b" / "report.csv"));
}
