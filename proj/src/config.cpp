#include "cpd/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "cpd/distributions.hpp"

namespace cpd {

namespace {

using nlohmann::ordered_json;

template <typename T>
void read_if(const ordered_json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

DetectorConfig parse_detector(const ordered_json& j) {
  DetectorConfig d;
  d.kind = j.at("kind").get<std::string>();
  d.name = j.value("name", d.kind);
  read_if(j, "window", d.window);
  read_if(j, "split_ratio", d.split_ratio);
  read_if(j, "stride", d.stride);
  read_if(j, "train_every", d.train_every);
  read_if(j, "burn_in", d.burn_in);
  read_if(j, "hidden_width", d.hidden_width);
  read_if(j, "learning_rate", d.learning_rate);
  read_if(j, "minibatch", d.minibatch);
  read_if(j, "loss", d.loss);
  read_if(j, "train_from_scratch", d.train_from_scratch);
  read_if(j, "drift_source", d.drift_source);
  read_if(j, "drift_value", d.drift_value);
  read_if(j, "drift_sequences", d.drift_sequences);
  read_if(j, "drift_length", d.drift_length);
  read_if(j, "onnr_weight", d.onnr_weight);
  read_if(j, "mewma_decay", d.mewma_decay);
  read_if(j, "nu_scale", d.nu_scale);
  read_if(j, "epsilon_scale", d.epsilon_scale);
  read_if(j, "wl_window", d.wl_window);
  return d;
}

ordered_json dump_detector(const DetectorConfig& d) {
  ordered_json j;
  j["name"] = d.name;
  j["kind"] = d.kind;
  j["window"] = d.window;
  j["split_ratio"] = d.split_ratio;
  j["stride"] = d.stride;
  j["train_every"] = d.train_every;
  j["burn_in"] = d.burn_in;
  j["hidden_width"] = d.hidden_width;
  j["learning_rate"] = d.learning_rate;
  j["minibatch"] = d.minibatch;
  j["loss"] = d.loss;
  j["train_from_scratch"] = d.train_from_scratch;
  j["drift_source"] = d.drift_source;
  j["drift_value"] = d.drift_value;
  j["drift_sequences"] = d.drift_sequences;
  j["drift_length"] = d.drift_length;
  j["onnr_weight"] = d.onnr_weight;
  j["mewma_decay"] = d.mewma_decay;
  j["nu_scale"] = d.nu_scale;
  j["epsilon_scale"] = d.epsilon_scale;
  j["wl_window"] = d.wl_window;
  return j;
}

ExampleConfig parse_example(const ordered_json& j) {
  ExampleConfig e;
  read_if(j, "preset", e.preset);
  read_if(j, "dim", e.dim);
  read_if(j, "csv", e.csv_path);
  read_if(j, "feature_columns", e.feature_columns);
  read_if(j, "label_column", e.label_column);
  e.name = j.value("name", e.preset.empty() ? e.csv_path : e.preset);
  return e;
}

ordered_json dump_example(const ExampleConfig& e) {
  ordered_json j;
  j["name"] = e.name;
  j["preset"] = e.preset;
  j["dim"] = e.dim;
  j["csv"] = e.csv_path;
  j["feature_columns"] = e.feature_columns;
  j["label_column"] = e.label_column;
  return j;
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  ordered_json j;
  try {
    j = ordered_json::parse(json_text);
  } catch (const std::exception& e) {
    throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
  }
  ExperimentConfig c;
  read_if(j, "master_seed", c.master_seed);
  read_if(j, "workers", c.workers);
  read_if(j, "out_dir", c.out_dir);
  if (j.contains("detectors")) {
    for (const auto& dj : j.at("detectors")) c.detectors.push_back(parse_detector(dj));
  }
  if (j.contains("examples")) {
    for (const auto& ej : j.at("examples")) c.examples.push_back(parse_example(ej));
  }
  if (j.contains("campaign")) {
    const auto& cj = j.at("campaign");
    read_if(cj, "change_point", c.campaign.change_point);
    read_if(cj, "horizon", c.campaign.horizon);
    read_if(cj, "n_sequences", c.campaign.n_sequences);
    read_if(cj, "calibration_sequences", c.campaign.calibration_sequences);
    if (cj.contains("target_arl")) c.campaign.target_arl = cj.at("target_arl").get<double>();
    if (cj.contains("target_type1")) c.campaign.target_type1 = cj.at("target_type1").get<double>();
    read_if(cj, "reference_pool", c.campaign.reference_pool);
    read_if(cj, "arl_rel_tol", c.campaign.arl_rel_tol);
    read_if(cj, "calibration_horizon", c.campaign.calibration_horizon);
  }
  validate_config(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& c) {
  ordered_json j;
  j["master_seed"] = c.master_seed;
  j["workers"] = c.workers;
  j["out_dir"] = c.out_dir;
  j["detectors"] = ordered_json::array();
  for (const auto& d : c.detectors) j["detectors"].push_back(dump_detector(d));
  j["examples"] = ordered_json::array();
  for (const auto& e : c.examples) j["examples"].push_back(dump_example(e));
  ordered_json cj;
  cj["change_point"] = c.campaign.change_point;
  cj["horizon"] = c.campaign.horizon;
  cj["n_sequences"] = c.campaign.n_sequences;
  cj["calibration_sequences"] = c.campaign.calibration_sequences;
  if (c.campaign.target_arl) cj["target_arl"] = *c.campaign.target_arl;
  if (c.campaign.target_type1) cj["target_type1"] = *c.campaign.target_type1;
  cj["reference_pool"] = c.campaign.reference_pool;
  cj["arl_rel_tol"] = c.campaign.arl_rel_tol;
  cj["calibration_horizon"] = c.campaign.calibration_horizon;
  j["campaign"] = cj;
  return j.dump(2) + "\n";
}

void validate_config(const ExperimentConfig& c) {
  const auto fail = [](const std::string& msg) {
    throw std::invalid_argument("config: " + msg);
  };
  if (c.detectors.empty()) fail("at least one detector block required");
  if (c.examples.empty()) fail("at least one example block required");

  const std::set<std::string> kinds = {"nn_cusum", "onnc",  "onnr",
                                       "exact_cusum", "h_cusum", "mewma",
                                       "wl_cusum", "wl_glr"};
  std::set<std::string> names;
  for (const auto& d : c.detectors) {
    if (!kinds.contains(d.kind)) fail("unknown detector kind '" + d.kind + "'");
    if (!names.insert(d.name).second) fail("duplicate detector name '" + d.name + "'");
    if (d.window <= 0 || d.stride <= 0 || d.hidden_width <= 0 || d.minibatch <= 0)
      fail("detector '" + d.name + "': sizes must be positive");
    if (!(d.split_ratio > 0.0 && d.split_ratio < 1.0))
      fail("detector '" + d.name + "': split_ratio must be in (0,1)");
    if (d.learning_rate <= 0.0) fail("detector '" + d.name + "': learning_rate must be positive");
    if (d.loss != "logistic" && d.loss != "squared" && d.loss != "mmd_linear")
      fail("detector '" + d.name + "': unknown loss '" + d.loss + "'");
    if (d.drift_source != "estimated" && d.drift_source != "fixed" && d.drift_source != "zero")
      fail("detector '" + d.name + "': unknown drift_source '" + d.drift_source + "'");
    if (!(d.onnr_weight > 0.0 && d.onnr_weight < 1.0))
      fail("detector '" + d.name + "': onnr_weight must be in (0,1)");
    if (!(d.mewma_decay > 0.0 && d.mewma_decay <= 1.0))
      fail("detector '" + d.name + "': mewma_decay must be in (0,1]");
    if (d.wl_window <= 0) fail("detector '" + d.name + "': wl_window must be positive");
  }

  std::set<std::string> example_set;
  for (const auto& e : c.examples) {
    if (!example_set.insert(e.name).second) fail("duplicate example name '" + e.name + "'");
    if (e.preset.empty() == e.csv_path.empty())
      fail("example '" + e.name + "': exactly one of preset/csv required");
    if (!e.preset.empty()) {
      if (e.dim <= 0) fail("example '" + e.name + "': dim must be positive");
      make_example(e.preset, e.dim);  // throws on unknown preset
    }
  }

  const auto& g = c.campaign;
  if (g.change_point < 0 || g.change_point >= g.horizon)
    fail("campaign: change_point must be in [0, horizon)");
  if (g.n_sequences <= 0 || g.calibration_sequences <= 0)
    fail("campaign: sequence counts must be positive");
  if (g.target_arl.has_value() == g.target_type1.has_value())
    fail("campaign: exactly one of target_arl/target_type1 required");
  if (g.target_arl && *g.target_arl <= 0.0) fail("campaign: target_arl must be positive");
  if (g.target_type1 && !(*g.target_type1 > 0.0 && *g.target_type1 < 1.0))
    fail("campaign: target_type1 must be in (0,1)");
  if (g.reference_pool <= 0) fail("campaign: reference_pool must be positive");
  if (g.arl_rel_tol <= 0.0) fail("campaign: arl_rel_tol must be positive");
  if (g.calibration_horizon < 0) fail("campaign: calibration_horizon must be >= 0");
  if (c.workers < 0) fail("workers must be >= 0");
}

}  // namespace cpd
