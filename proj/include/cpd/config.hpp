#pragma once

// Experiment configuration: one JSON file describing detectors, examples and
// the campaign. Campaigns have ~30 knobs, so everything lives in the file and
// the command line only overrides seed / workers / output directory.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace cpd {

struct DetectorConfig {
  std::string name;  // unique row label
  std::string kind;  // nn_cusum | onnc | onnr | exact_cusum | h_cusum |
                     // mewma | wl_cusum | wl_glr

  // Windowed network detectors.
  int window = 200;
  double split_ratio = 0.5;
  int stride = 10;
  int train_every = 1;
  int burn_in = 2000;
  int hidden_width = 64;
  double learning_rate = 1e-3;
  int minibatch = 100;
  std::string loss = "logistic";  // logistic | squared | mmd_linear
  bool train_from_scratch = false;
  std::string drift_source = "estimated";  // estimated | fixed | zero
  double drift_value = 0.0;
  int drift_sequences = 8;
  std::int64_t drift_length = 4000;
  double onnr_weight = 0.5;

  // Classical detectors.
  double mewma_decay = 0.2;
  double nu_scale = 1e-3;       // covariance regularizer, scaled by trace/d
  double epsilon_scale = 0.05;  // Hotelling offset inflation
  int wl_window = 200;

  bool operator==(const DetectorConfig&) const = default;
};

struct ExampleConfig {
  std::string name;
  // Synthetic preset (see example_names()) ...
  std::string preset;
  int dim = 100;
  // ... or a labeled CSV whose rows are split into background/target.
  std::string csv_path;
  std::vector<std::string> feature_columns;  // empty = all but label
  std::string label_column = "label";

  bool is_csv() const { return !csv_path.empty(); }
  bool operator==(const ExampleConfig&) const = default;
};

struct CampaignConfig {
  std::int64_t change_point = 500;
  std::int64_t horizon = 5500;
  int n_sequences = 100;
  int calibration_sequences = 100;
  // Exactly one target drives threshold calibration.
  std::optional<double> target_arl;
  std::optional<double> target_type1;
  std::int64_t reference_pool = 20000;
  double arl_rel_tol = 0.1;
  // 0 means calibrate on the evaluation horizon.
  std::int64_t calibration_horizon = 0;

  bool operator==(const CampaignConfig&) const = default;
};

struct ExperimentConfig {
  std::uint64_t master_seed = 1;
  int workers = 0;  // 0 = hardware concurrency
  std::string out_dir = "out";
  std::vector<DetectorConfig> detectors;
  std::vector<ExampleConfig> examples;
  CampaignConfig campaign;

  bool operator==(const ExperimentConfig&) const = default;
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);
std::string serialize_config(const ExperimentConfig& config);

// Throws std::invalid_argument with an explanation on any bad field.
void validate_config(const ExperimentConfig& config);

}  // namespace cpd
