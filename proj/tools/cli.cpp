#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "gmmcache/error.hpp"
#include "gmmcache/experiment.hpp"

namespace gmmcache::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::string policy;
  std::string model;
  std::string percentile;
  std::optional<std::size_t> max_records;
};

void add_common(CLI::App* sub, Options& o, bool needs_policy, bool needs_model) {
  sub->add_option("--config", o.config, "Experiment config (JSON)")->required();
  sub->add_option("--seed", o.seed, "Global seed; overrides the config seed");
  sub->add_option("--out", o.out, "Output directory")->capture_default_str();
  sub->add_option("--max-records", o.max_records, "Use at most this many trace records");
  sub->add_option("--percentile", o.percentile,
                  "Threshold percentile, or a comma-separated list for a sweep");
  auto* policy = sub->add_option("--policy", o.policy, "lru | gmm-admission | gmm-eviction | gmm-both");
  if (needs_policy) policy->required();
  auto* model = sub->add_option("--model", o.model, "Trained model file");
  if (needs_model) model->required();
}

std::vector<double> parse_percentiles(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      std::size_t used = 0;
      const double p = std::stod(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      if (!(p >= 0.0 && p <= 100.0)) throw std::out_of_range(item);
      out.push_back(p);
    } catch (const std::exception&) {
      throw UsageError(fmt::format("--percentile: '{}' is not a percentile in [0, 100]", item));
    }
  }
  if (out.empty()) throw UsageError("--percentile needs at least one value");
  return out;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open config file '{}'", path));
  try {
    return json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("config file '{}': {}", path, e.what()));
  }
}

ExperimentConfig load_config(const Options& o) {
  ExperimentConfig cfg = load_experiment_config(o.config);
  if (o.seed) cfg.apply_seed(*o.seed);
  if (o.max_records) cfg.max_records = *o.max_records;
  if (!o.percentile.empty()) cfg.percentiles = parse_percentiles(o.percentile);
  cfg.validate();
  return cfg;
}

fs::path output_dir(const Options& o) {
  fs::path dir(o.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError(fmt::format("cannot create output directory '{}': {}", o.out, ec.message()));
  return dir;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
  out << content;
  if (!out) throw DataError(fmt::format("failed writing '{}'", path.string()));
}

std::string model_digest(const GmmModel& model, const std::optional<FeatureWindows>& windows) {
  std::ostringstream ss;
  write_model(ss, model, windows);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : ss.str()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

struct LoadedModel {
  ModelFile file;
  ordered_json echo;
};

LoadedModel load_checked_model(const Options& o, const ExperimentConfig& cfg) {
  ModelFile file = load_model(o.model);
  check_model_matches(file, cfg);
  ordered_json echo;
  echo["k"] = file.model.size();
  echo["digest"] = model_digest(file.model, file.windows);
  return {std::move(file), std::move(echo)};
}

int cmd_gen_trace(const Options& o, std::ostream& out) {
  const json j = read_json_file(o.config);
  SyntheticTraceSpec spec;
  if (j.is_object() && j.contains("clusters")) {
    spec = synthetic_spec_from_json(j);
  } else {
    const auto cfg = experiment_config_from_json(j, fs::path(o.config).parent_path());
    if (!cfg.synthetic) throw ConfigError("config has no synthetic trace spec");
    spec = *cfg.synthetic;
  }
  if (o.seed) spec.rng_seed = *o.seed;
  if (o.max_records) spec.n_records = std::min<std::uint64_t>(spec.n_records, *o.max_records);

  const auto records = generate_synthetic(spec);
  const fs::path path = output_dir(o) / "trace.txt";
  std::ostringstream text;
  write_trace(text, records);
  write_file(path, text.str());
  fmt::print(out, "wrote {} records to {}\n", records.size(), path.string());
  return kOk;
}

int cmd_train(const Options& o, std::ostream& out) {
  const ExperimentConfig cfg = load_config(o);
  const ProcessedTrace trace = process_trace(cfg);
  const TrainedModel trained = train_model(cfg, trace);

  const fs::path dir = output_dir(o);
  const auto windows = feature_windows(cfg.preprocess);
  save_model((dir / "model.gmm").string(), trained.model, windows);

  ordered_json j;
  j["config"] = to_json(cfg);
  j["samples"] = trace.samples.size();
  j["train_samples"] = trace.train_count;
  j["percentile"] = trained.percentile;
  j["threshold"] = *trained.model.threshold();
  j["model_digest"] = model_digest(trained.model, windows);
  j["train"] = to_json(trained.report);
  write_file(dir / "train.json", j.dump(2) + "\n");

  fmt::print(out, "samples        {}\n", trace.train_count);
  fmt::print(out, "components     {}\n", trained.model.size());
  fmt::print(out, "iterations     {}\n", trained.report.iterations_run);
  fmt::print(out, "converged      {}\n", trained.report.converged ? "yes" : "no");
  fmt::print(out, "log-likelihood {:.10g}\n", trained.report.final_log_likelihood);
  fmt::print(out, "threshold      {:.10g} (percentile {:g})\n", *trained.model.threshold(),
             trained.percentile);
  fmt::print(out, "model          {}\n", (dir / "model.gmm").string());
  return kOk;
}

int cmd_simulate(const Options& o, std::ostream& out) {
  const PolicyKind kind = policy_from_string(o.policy);
  const ExperimentConfig cfg = load_config(o);
  Policy policy{kind, nullptr};
  ordered_json model_echo = nullptr;
  std::optional<double> percentile;

  std::optional<LoadedModel> loaded;
  if (policy.needs_model()) {
    if (o.model.empty()) throw UsageError(fmt::format("policy {} needs --model", o.policy));
    loaded = load_checked_model(o, cfg);
    model_echo = loaded->echo;
  }
  const ProcessedTrace trace = process_trace(cfg);
  if (loaded) {
    auto model = std::make_shared<GmmModel>(std::move(loaded->file.model));
    if (!o.percentile.empty()) {
      percentile = cfg.percentiles.front();
      select_threshold(*model, features(trace.train()), *percentile);
    }
    policy.model = std::move(model);
  }
  const SimReport report = simulate(trace.eval(), cfg.cache, policy);

  ordered_json j;
  j["config"] = to_json(cfg);
  j["model"] = model_echo;
  j["percentile"] = percentile ? ordered_json(*percentile) : nullptr;
  j["report"] = to_json(report);
  const fs::path dir = output_dir(o);
  write_file(dir / "report.json", j.dump(2) + "\n");
  write_file(dir / "report.txt", report_table(report));
  out << report_table(report);
  return kOk;
}

int cmd_compare(const Options& o, std::ostream& out) {
  const ExperimentConfig cfg = load_config(o);
  auto loaded = load_checked_model(o, cfg);
  const ProcessedTrace trace = process_trace(cfg);

  std::vector<double> percentiles;
  if (!o.percentile.empty()) percentiles = cfg.percentiles;
  const auto runs = run_comparisons(cfg, trace, loaded.file.model, percentiles);

  ordered_json j;
  j["config"] = to_json(cfg);
  j["model"] = loaded.echo;
  auto jr = ordered_json::array();
  for (const auto& run : runs) jr.push_back(to_json(run));
  j["runs"] = std::move(jr);

  const fs::path dir = output_dir(o);
  const std::string table = comparison_table(runs);
  write_file(dir / "report.json", j.dump(2) + "\n");
  write_file(dir / "report.csv", comparison_csv(runs));
  write_file(dir / "report.txt", table);
  out << table;
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Trace-driven DRAM cache simulator with GMM admission and eviction", "gmmcache"};
  app.require_subcommand(1);
  Options o;
  auto* gen = app.add_subcommand("gen-trace", "Generate a synthetic trace file");
  auto* train = app.add_subcommand("train", "Train a GMM on a processed trace");
  auto* sim = app.add_subcommand("simulate", "Simulate one cache policy");
  auto* cmp = app.add_subcommand("compare", "Compare LRU with the three GMM policies");
  add_common(gen, o, false, false);
  add_common(train, o, false, false);
  add_common(sim, o, true, false);
  add_common(cmp, o, false, true);

  std::vector<const char*> argv{"gmmcache"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) return cmd_gen_trace(o, out);
    if (*train) return cmd_train(o, out);
    if (*sim) return cmd_simulate(o, out);
    if (*cmp) return cmd_compare(o, out);
  } catch (const Error& e) {
    fmt::print(err, "error: {}\n", e.what());
    return static_cast<int>(e.kind());
  } catch (const fs::filesystem_error& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kData;
  } catch (const std::exception& e) {
    fmt::print(err, "internal error: {}\n", e.what());
    return kNumeric;
  }
  return kUsage;
}

}  // namespace gmmcache::cli
