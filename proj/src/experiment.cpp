#include "gmmcache/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>

#include <fmt/format.h>

#include "gmmcache/error.hpp"

namespace gmmcache {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

void check_keys(const json& j, std::initializer_list<std::string_view> allowed,
                std::string_view section) {
  if (!j.is_object()) throw ConfigError(fmt::format("'{}' must be an object", section));
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError(fmt::format("unknown key '{}' in '{}'", key, section));
    }
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback, std::string_view section) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(fmt::format("'{}.{}' has the wrong type", section, key));
  }
}

PreprocessConfig preprocess_from_json(const json& j) {
  check_keys(j, {"head_drop_frac", "tail_drop_frac", "len_window", "len_access_shot"},
             "preprocess");
  PreprocessConfig c;
  c.head_drop_frac = get_or(j, "head_drop_frac", c.head_drop_frac, "preprocess");
  c.tail_drop_frac = get_or(j, "tail_drop_frac", c.tail_drop_frac, "preprocess");
  c.len_window = get_or(j, "len_window", c.len_window, "preprocess");
  c.len_access_shot = get_or(j, "len_access_shot", c.len_access_shot, "preprocess");
  c.validate();
  return c;
}

std::vector<double> percentiles_from_json(const json& j) {
  std::vector<double> out;
  if (j.is_number()) {
    out.push_back(j.get<double>());
  } else if (j.is_array()) {
    for (const auto& v : j) {
      if (!v.is_number()) throw ConfigError("'gmm.percentile' entries must be numbers");
      out.push_back(v.get<double>());
    }
  } else {
    throw ConfigError("'gmm.percentile' must be a number or a list of numbers");
  }
  return out;
}

}  // namespace

SyntheticTraceSpec synthetic_spec_from_json(const json& j) {
  check_keys(j, {"n_records", "clusters", "write_fraction", "rng_seed", "activity_period"},
             "synthetic");
  SyntheticTraceSpec spec;
  spec.n_records = get_or<std::uint64_t>(j, "n_records", 0, "synthetic");
  spec.write_fraction = get_or(j, "write_fraction", 0.0, "synthetic");
  spec.rng_seed = get_or<std::uint64_t>(j, "rng_seed", 0, "synthetic");
  spec.activity_period = get_or<std::uint64_t>(j, "activity_period", 0, "synthetic");
  if (j.contains("clusters")) {
    if (!j["clusters"].is_array()) throw ConfigError("'synthetic.clusters' must be a list");
    for (const auto& c : j["clusters"]) {
      check_keys(c, {"center_page", "page_spread", "weight", "shape", "active"}, "cluster");
      PageCluster cluster;
      cluster.center_page = get_or<std::uint64_t>(c, "center_page", 0, "cluster");
      cluster.page_spread = get_or<std::uint64_t>(c, "page_spread", 0, "cluster");
      cluster.weight = get_or(c, "weight", 1.0, "cluster");
      cluster.shape = cluster_shape_from_string(get_or<std::string>(c, "shape", "gaussian", "cluster"));
      if (c.contains("active")) {
        for (const auto& w : c["active"]) {
          if (!w.is_array() || w.size() != 2) {
            throw ConfigError("activity windows are [begin, end] pairs");
          }
          cluster.active.push_back({w[0].get<std::uint64_t>(), w[1].get<std::uint64_t>()});
        }
      }
      spec.page_clusters.push_back(std::move(cluster));
    }
  }
  return spec;
}

ordered_json to_json(const SyntheticTraceSpec& spec) {
  ordered_json j;
  j["n_records"] = spec.n_records;
  j["write_fraction"] = spec.write_fraction;
  j["rng_seed"] = spec.rng_seed;
  j["activity_period"] = spec.activity_period;
  auto clusters = ordered_json::array();
  for (const auto& c : spec.page_clusters) {
    ordered_json cj;
    cj["center_page"] = c.center_page;
    cj["page_spread"] = c.page_spread;
    cj["weight"] = c.weight;
    cj["shape"] = std::string(to_string(c.shape));
    auto windows = ordered_json::array();
    for (const auto& w : c.active) windows.push_back({w.begin, w.end});
    cj["active"] = std::move(windows);
    clusters.push_back(std::move(cj));
  }
  j["clusters"] = std::move(clusters);
  return j;
}

void ExperimentConfig::apply_seed(std::uint64_t s) {
  seed = s;
  if (synthetic) synthetic->rng_seed = s;
  em.init_seed = s;
}

void ExperimentConfig::validate() const {
  if (trace_file.has_value() == synthetic.has_value()) {
    throw ConfigError("exactly one trace source (file or synthetic) is required");
  }
  if (synthetic) synthetic->validate();
  if (max_records && *max_records == 0) throw ConfigError("max_records must be positive");
  preprocess.validate();
  em.validate();
  if (k < 1) throw ConfigError("gmm.k must be at least 1");
  if (percentiles.empty()) throw ConfigError("at least one percentile is required");
  for (double p : percentiles) {
    if (!(p >= 0.0 && p <= 100.0)) throw ConfigError(fmt::format("percentile {} outside [0, 100]", p));
  }
  cache.validate();
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) {
    throw ConfigError("train_fraction must lie in (0, 1]");
  }
}

ExperimentConfig experiment_config_from_json(const json& j, const std::filesystem::path& base_dir) {
  check_keys(j, {"seed", "trace", "preprocess", "gmm", "cache", "train_fraction"}, "config");
  ExperimentConfig cfg;

  if (j.contains("trace")) {
    const json& t = j["trace"];
    check_keys(t, {"file", "synthetic", "max_records"}, "trace");
    if (t.contains("file")) {
      std::filesystem::path p = get_or<std::string>(t, "file", "", "trace");
      if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
      cfg.trace_file = p.string();
    }
    if (t.contains("synthetic")) cfg.synthetic = synthetic_spec_from_json(t["synthetic"]);
    if (t.contains("max_records") && !t["max_records"].is_null()) {
      cfg.max_records = get_or<std::size_t>(t, "max_records", 0, "trace");
    }
  }
  if (j.contains("preprocess")) cfg.preprocess = preprocess_from_json(j["preprocess"]);
  if (j.contains("gmm")) {
    const json& g = j["gmm"];
    check_keys(g, {"k", "max_iters", "rel_tol", "cov_floor", "init_seed", "n_init_restarts",
                   "percentile", "kernel"},
               "gmm");
    cfg.k = get_or(g, "k", cfg.k, "gmm");
    cfg.em.max_iters = get_or(g, "max_iters", cfg.em.max_iters, "gmm");
    cfg.em.rel_tol = get_or(g, "rel_tol", cfg.em.rel_tol, "gmm");
    cfg.em.cov_floor = get_or(g, "cov_floor", cfg.em.cov_floor, "gmm");
    cfg.em.init_seed = get_or(g, "init_seed", cfg.em.init_seed, "gmm");
    cfg.em.n_init_restarts = get_or(g, "n_init_restarts", cfg.em.n_init_restarts, "gmm");
    const auto kernel = get_or<std::string>(g, "kernel", "parallel", "gmm");
    if (kernel == "serial") {
      cfg.em.kernel = EStepKernel::kSerial;
    } else if (kernel != "parallel") {
      throw ConfigError(fmt::format("unknown E-step kernel '{}'", kernel));
    }
    if (g.contains("percentile")) cfg.percentiles = percentiles_from_json(g["percentile"]);
  }
  if (j.contains("cache")) cfg.cache = cache_config_from_json(j["cache"]);
  cfg.train_fraction = get_or(j, "train_fraction", cfg.train_fraction, "config");
  if (j.contains("seed")) cfg.apply_seed(get_or<std::uint64_t>(j, "seed", 0, "config"));
  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open config file '{}'", path.string()));
  json j;
  try {
    j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("config file '{}': {}", path.string(), e.what()));
  }
  return experiment_config_from_json(j, path.parent_path());
}

ordered_json to_json(const ExperimentConfig& cfg) {
  ordered_json j;
  j["seed"] = cfg.seed ? ordered_json(*cfg.seed) : nullptr;
  ordered_json trace;
  if (cfg.trace_file) trace["file"] = *cfg.trace_file;
  if (cfg.synthetic) trace["synthetic"] = to_json(*cfg.synthetic);
  trace["max_records"] = cfg.max_records ? ordered_json(*cfg.max_records) : nullptr;
  j["trace"] = std::move(trace);
  j["preprocess"] = {{"head_drop_frac", cfg.preprocess.head_drop_frac},
                     {"tail_drop_frac", cfg.preprocess.tail_drop_frac},
                     {"len_window", cfg.preprocess.len_window},
                     {"len_access_shot", cfg.preprocess.len_access_shot}};
  ordered_json g;
  g["k"] = cfg.k;
  g["max_iters"] = cfg.em.max_iters;
  g["rel_tol"] = cfg.em.rel_tol;
  g["cov_floor"] = cfg.em.cov_floor;
  g["init_seed"] = cfg.em.init_seed;
  g["n_init_restarts"] = cfg.em.n_init_restarts;
  g["kernel"] = cfg.em.kernel == EStepKernel::kSerial ? "serial" : "parallel";
  g["percentile"] = cfg.percentiles.size() == 1 ? ordered_json(cfg.percentiles.front())
                                                : ordered_json(cfg.percentiles);
  j["gmm"] = std::move(g);
  auto cache = to_json(cfg.cache);
  cache.erase("sets");
  j["cache"] = std::move(cache);
  j["train_fraction"] = cfg.train_fraction;
  return j;
}

std::vector<TraceRecord> load_trace(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.trace_file) return read_trace_file(*cfg.trace_file, cfg.max_records);
  auto records = generate_synthetic(*cfg.synthetic);
  if (cfg.max_records && records.size() > *cfg.max_records) records.resize(*cfg.max_records);
  return records;
}

ProcessedTrace process_trace(const ExperimentConfig& cfg, std::span<const TraceRecord> records) {
  ProcessedTrace out;
  out.samples = preprocess(records, cfg.preprocess);
  const std::size_t n = out.samples.size();
  if (cfg.train_fraction >= 1.0) {
    out.train_count = n;
  } else {
    out.split = true;
    out.train_count = static_cast<std::size_t>(std::floor(cfg.train_fraction * static_cast<double>(n)));
    if (out.train_count == 0 || out.train_count == n) {
      throw InsufficientSamplesError(fmt::format(
          "train_fraction {} leaves an empty train or evaluation split of {} samples",
          cfg.train_fraction, n));
    }
  }
  return out;
}

ProcessedTrace process_trace(const ExperimentConfig& cfg) {
  const auto records = load_trace(cfg);
  return process_trace(cfg, records);
}

TrainedModel train_model(const ExperimentConfig& cfg, const ProcessedTrace& trace) {
  const auto train = features(trace.train());
  if (train.size() < static_cast<std::size_t>(cfg.k) || train.size() < 2) {
    throw InsufficientSamplesError(fmt::format(
        "insufficient samples: {} training samples after trimming for K = {}", train.size(), cfg.k));
  }
  const Standardizer standardizer = fit_standardizer(train);
  auto [model, report] = fit_em(train, cfg.k, cfg.em, standardizer);
  const double p = cfg.percentiles.front();
  select_threshold(model, train, p);
  return {std::move(model), std::move(report), p};
}

ordered_json to_json(const TrainReport& r) {
  ordered_json j;
  j["iterations_run"] = r.iterations_run;
  j["converged"] = r.converged;
  j["final_log_likelihood"] = r.final_log_likelihood;
  j["rescued_components"] = r.rescued_components;
  j["log_likelihood_history"] = r.log_likelihood_history;
  return j;
}

FeatureWindows feature_windows(const PreprocessConfig& cfg) {
  return {cfg.len_window, cfg.len_access_shot};
}

void check_model_matches(const ModelFile& file, const ExperimentConfig& cfg) {
  if (file.windows && *file.windows != feature_windows(cfg.preprocess)) {
    throw DataError(fmt::format(
        "trace/model mismatch: model trained with len_window {} and len_access_shot {}, config "
        "uses {} and {}",
        file.windows->len_window, file.windows->len_access_shot, cfg.preprocess.len_window,
        cfg.preprocess.len_access_shot));
  }
}

std::vector<ComparisonRun> run_comparisons(const ExperimentConfig& cfg,
                                           const ProcessedTrace& trace, const GmmModel& model,
                                           std::span<const double> percentiles) {
  std::vector<ComparisonRun> runs;
  if (percentiles.empty()) {
    runs.push_back({std::nullopt,
                    compare_policies(trace.eval(), cfg.cache, std::make_shared<GmmModel>(model))});
    return runs;
  }
  const auto train = features(trace.train());
  for (double p : percentiles) {
    auto m = std::make_shared<GmmModel>(model);
    select_threshold(*m, train, p);
    runs.push_back({p, compare_policies(trace.eval(), cfg.cache, std::move(m))});
  }
  return runs;
}

}  // namespace gmmcache
