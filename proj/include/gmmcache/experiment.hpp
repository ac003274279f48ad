#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gmmcache/cache.hpp"
#include "gmmcache/gmm.hpp"
#include "gmmcache/model_io.hpp"
#include "gmmcache/report.hpp"
#include "gmmcache/trace.hpp"

namespace gmmcache {

// Everything needed to rerun one experiment. Loaded from a JSON document:
//
//   {
//     "seed": 1,
//     "trace": {"file": "trace.txt", "max_records": 100000}
//           | {"synthetic": {"n_records": ..., "write_fraction": ...,
//                            "rng_seed": ..., "activity_period": ...,
//                            "clusters": [{"center_page": ..., "page_spread": ...,
//                                          "weight": ..., "shape": "gaussian",
//                                          "active": [[begin, end], ...]}]}},
//     "preprocess": {"head_drop_frac": 0.2, "tail_drop_frac": 0.1,
//                    "len_window": 32, "len_access_shot": 10000},
//     "gmm": {"k": 256, "max_iters": 200, "rel_tol": 1e-4, "cov_floor": 1e-6,
//             "init_seed": 0, "n_init_restarts": 1, "percentile": 10},
//     "cache": {"cache_bytes": 67108864, "block_bytes": 4096, "associativity": 8,
//               "hit_us": 1, "ssd_read_us": 75, "ssd_write_us": 900,
//               "gmm_infer_us": 3, "additive_inference": false},
//     "train_fraction": 1.0
//   }
//
// Every key is optional except the trace source; defaults are the values
// shown.
struct ExperimentConfig {
  std::optional<std::string> trace_file;
  std::optional<SyntheticTraceSpec> synthetic;
  std::optional<std::size_t> max_records;
  PreprocessConfig preprocess;
  EmConfig em;
  int k = 256;
  std::vector<double> percentiles{10.0};
  CacheConfig cache;
  double train_fraction = 1.0;
  std::optional<std::uint64_t> seed;

  // Copies `seed` into the synthetic generator and the EM initializer.
  void apply_seed(std::uint64_t s);
  void validate() const;
};

// Relative trace paths resolve against `base_dir`.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j,
                                             const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
nlohmann::ordered_json to_json(const ExperimentConfig& cfg);

SyntheticTraceSpec synthetic_spec_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const SyntheticTraceSpec& spec);

std::vector<TraceRecord> load_trace(const ExperimentConfig& cfg);

// Preprocessed samples split into a training prefix and an evaluation part.
// With train_fraction = 1 both views cover every sample.
struct ProcessedTrace {
  std::vector<Sample> samples;
  std::size_t train_count = 0;
  bool split = false;

  std::span<const Sample> train() const { return std::span(samples).first(train_count); }
  std::span<const Sample> eval() const {
    return split ? std::span(samples).subspan(train_count) : std::span<const Sample>(samples);
  }
};

ProcessedTrace process_trace(const ExperimentConfig& cfg, std::span<const TraceRecord> records);
ProcessedTrace process_trace(const ExperimentConfig& cfg);

struct TrainedModel {
  GmmModel model;
  TrainReport report;
  double percentile = 0.0;
};

// fit_standardizer → fit_em → select_threshold on the training samples.
TrainedModel train_model(const ExperimentConfig& cfg, const ProcessedTrace& trace);

nlohmann::ordered_json to_json(const TrainReport& report);

FeatureWindows feature_windows(const PreprocessConfig& cfg);

// Throws DataError when the model was trained with different windows.
void check_model_matches(const ModelFile& file, const ExperimentConfig& cfg);

// Threshold sweep: one comparison per percentile (or a single one with the
// model's own threshold when `percentiles` is empty).
std::vector<ComparisonRun> run_comparisons(const ExperimentConfig& cfg,
                                           const ProcessedTrace& trace, const GmmModel& model,
                                           std::span<const double> percentiles);

}  // namespace gmmcache
