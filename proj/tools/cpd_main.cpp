// Command-line front end: generate | calibrate | detect | benchmark.
// Exit codes: 0 success, 2 configuration error, 3 per-cell failures present.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "cpd/config.hpp"
#include "cpd/csv.hpp"
#include "cpd/distributions.hpp"
#include "cpd/eval.hpp"
#include "cpd/kernels.hpp"
#include "cpd/rng.hpp"
#include "cpd/stacks.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed_override;
  std::optional<int> workers_override;
  std::optional<std::string> out_override;
};

cpd::ExperimentConfig load_effective_config(const GlobalOptions& opts) {
  cpd::ExperimentConfig config = cpd::load_config(opts.config_path);
  if (opts.seed_override) config.master_seed = *opts.seed_override;
  if (opts.workers_override) config.workers = *opts.workers_override;
  // Output directory precedence: flag, then environment, then config.
  if (opts.out_override) {
    config.out_dir = *opts.out_override;
  } else if (const char* env = std::getenv("CPD_OUT_DIR")) {
    config.out_dir = env;
  }
  return config;
}

const cpd::DetectorConfig& pick_detector(const cpd::ExperimentConfig& config,
                                         const std::string& name) {
  if (name.empty()) return config.detectors.front();
  for (const auto& d : config.detectors) {
    if (d.name == name) return d;
  }
  throw std::invalid_argument("unknown detector '" + name + "'");
}

const cpd::ExampleConfig& pick_example(const cpd::ExperimentConfig& config,
                                       const std::string& name) {
  if (name.empty()) return config.examples.front();
  for (const auto& e : config.examples) {
    if (e.name == name) return e;
  }
  throw std::invalid_argument("unknown example '" + name + "'");
}

std::string sanitize(std::string s) {
  for (char& c : s) {
    if (c == '/' || c == '\\' || c == ' ') c = '_';
  }
  return s;
}

int cmd_generate(const cpd::ExperimentConfig& config, int count, bool with_pool) {
  const fs::path base = fs::path(config.out_dir) / "generated";
  for (const auto& example : config.examples) {
    const fs::path dir = base / sanitize(example.name);
    fs::create_directories(dir);
    // Only the sequence sources are needed; detector choice is irrelevant.
    cpd::CellSetup setup =
        cpd::make_cell_setup(config, config.detectors.front(), example);
    if (with_pool) {
      cpd::write_csv_matrix((dir / "pool.csv").string(), setup.pool->samples());
    }
    ordered_json manifest;
    manifest["example"] = example.name;
    manifest["change_point"] = config.campaign.change_point;
    manifest["horizon"] = config.campaign.horizon;
    manifest["sequences"] = ordered_json::array();
    for (int i = 0; i < count; ++i) {
      const std::uint64_t seed =
          cpd::derive_seed(config.master_seed,
                           static_cast<std::uint64_t>(i), "generate");
      const cpd::ObservationSequence seq =
          setup.change_source(config.campaign.horizon, seed);
      char name[64];
      std::snprintf(name, sizeof(name), "sequence_%04d.csv", i);
      cpd::write_csv_matrix((dir / name).string(), seq.data);
      manifest["sequences"].push_back(name);
    }
    cpd::atomic_write_text((dir / "manifest.json").string(),
                           manifest.dump(2) + "\n");
    std::cerr << "generated " << count << " sequence(s) for '" << example.name
              << "' under " << dir << "\n";
  }
  return 0;
}

int cmd_calibrate(const cpd::ExperimentConfig& config, bool write_tail) {
  const fs::path base = fs::path(config.out_dir) / "calibration";
  fs::create_directories(base);
  const auto& campaign = config.campaign;
  const std::int64_t horizon = campaign.calibration_horizon > 0
                                   ? campaign.calibration_horizon
                                   : campaign.horizon;
  ordered_json table = ordered_json::array();
  bool any_failed = false;

  for (const auto& example : config.examples) {
    for (const auto& detector : config.detectors) {
      ordered_json entry;
      entry["detector"] = detector.name;
      entry["example"] = example.name;
      try {
        const cpd::CellSetup setup = cpd::make_cell_setup(config, detector, example);
        const std::uint64_t cell_seed =
            cpd::derive_seed(config.master_seed, cpd::fnv1a(detector.name),
                             cpd::fnv1a(example.name));
        const auto runs = cpd::simulate_runs(
            setup.factory, setup.pre_source, horizon,
            campaign.calibration_sequences,
            cpd::derive_seed(cell_seed, 1, "calibration"), config.workers);

        double threshold = 0.0;
        if (campaign.target_arl) {
          const cpd::CalibrationResult cal = cpd::calibrate_from_runs(
              runs, *campaign.target_arl, horizon, campaign.arl_rel_tol);
          threshold = cal.threshold;
          entry["threshold"] = cal.threshold;
          entry["arl_estimate"] = cal.fit.arl_estimate;
          entry["crossing_fraction"] = cal.fit.crossing_fraction;
          entry["rate"] = cal.fit.rate;
          entry["lower_bounded"] = cal.lower_bounded;
          // ARL versus threshold probes, plot-ready.
          std::string probe_csv = "b,arl\n";
          for (const auto& [b, arl] : cal.probes) {
            char line[64];
            std::snprintf(line, sizeof(line), "%.17g,%.17g\n", b, arl);
            probe_csv += line;
          }
          cpd::atomic_write_text(
              (base / ("arl_vs_b__" + sanitize(detector.name) + "__" +
                       sanitize(example.name) + ".csv")).string(),
              probe_csv);
        } else {
          bool boundary = false;
          threshold = cpd::type1_threshold_from_runs(
              runs, *campaign.target_type1, campaign.change_point, &boundary);
          entry["threshold"] = threshold;
          entry["type1_boundary"] = boundary;
        }

        if (write_tail) {
          std::vector<std::optional<std::int64_t>> taus;
          taus.reserve(runs.size());
          for (const auto& run : runs) taus.push_back(cpd::first_crossing(run, threshold));
          const cpd::ExponentialTailFit tail = cpd::fit_exponential_tail(taus, horizon);
          entry["tail_rate"] = tail.rate;
          entry["tail_ks_distance"] = tail.ks_distance;
          std::vector<std::int64_t> crossed;
          for (const auto& t : taus) {
            if (t) crossed.push_back(*t);
          }
          std::sort(crossed.begin(), crossed.end());
          std::string tail_csv = "t,empirical_tail,fitted_tail\n";
          const double n = static_cast<double>(taus.size());
          for (std::size_t i = 0; i < crossed.size(); ++i) {
            char line[96];
            std::snprintf(line, sizeof(line), "%lld,%.17g,%.17g\n",
                          static_cast<long long>(crossed[i]),
                          (n - static_cast<double>(i + 1)) / n,
                          std::exp(-tail.rate * static_cast<double>(crossed[i])));
            tail_csv += line;
          }
          cpd::atomic_write_text(
              (base / ("tail__" + sanitize(detector.name) + "__" +
                       sanitize(example.name) + ".csv")).string(),
              tail_csv);
        }
      } catch (const std::exception& e) {
        entry["error"] = e.what();
        any_failed = true;
      }
      table.push_back(entry);
    }
  }
  cpd::atomic_write_text((base / "thresholds.json").string(),
                         table.dump(2) + "\n");
  std::cerr << "wrote " << (base / "thresholds.json") << "\n";
  return any_failed ? 3 : 0;
}

int cmd_detect(const cpd::ExperimentConfig& config, const std::string& sequence_csv,
               const std::string& detector_name, const std::string& example_name,
               double threshold) {
  const auto& detector_cfg = pick_detector(config, detector_name);
  const auto& example_cfg = pick_example(config, example_name);
  const cpd::CellSetup setup = cpd::make_cell_setup(config, detector_cfg, example_cfg);

  cpd::ObservationSequence seq;
  seq.data = cpd::read_csv_matrix(sequence_csv);
  const auto detector =
      setup.factory(cpd::derive_seed(config.master_seed, 0, "detect"));
  const std::int64_t usable =
      (seq.length() / detector->stride()) * detector->stride();
  if (usable == 0)
    throw std::invalid_argument("sequence shorter than one detector stride");
  const cpd::RunResult run = cpd::run_to_stop(*detector, seq, usable);

  const fs::path base = fs::path(config.out_dir) / "detect";
  fs::create_directories(base);
  std::string csv = "obs_index,stat_index,statistic,increment,alarmed\n";
  for (std::size_t i = 0; i < run.statistics.size(); ++i) {
    char line[128];
    std::snprintf(line, sizeof(line), "%lld,%zu,%.17g,%.17g,%d\n",
                  static_cast<long long>(run.obs_index[i]), i + 1,
                  run.statistics[i], run.increments[i],
                  run.statistics[i] > threshold ? 1 : 0);
    csv += line;
  }
  const fs::path traj = base / "trajectory.csv";
  cpd::atomic_write_text(traj.string(), csv);

  const auto crossing = cpd::first_crossing(run, threshold);
  ordered_json verdict;
  verdict["detector"] = detector_cfg.name;
  verdict["example"] = example_cfg.name;
  verdict["sequence"] = sequence_csv;
  verdict["threshold"] = threshold;
  verdict["alarmed"] = crossing.has_value();
  if (crossing) verdict["alarm_obs_index"] = *crossing;
  verdict["max_statistic"] = run.max_statistic;
  verdict["emitted_statistics"] = run.emitted();
  cpd::atomic_write_text((base / "verdict.json").string(),
                         verdict.dump(2) + "\n");
  std::cerr << "wrote " << traj << "\n";
  return 0;
}

int cmd_benchmark(const cpd::ExperimentConfig& config) {
  const auto results = cpd::run_campaign(config, config.out_dir);

  // Stable row order regardless of execution details.
  std::vector<const cpd::CampaignCellResult*> sorted;
  sorted.reserve(results.size());
  for (const auto& r : results) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) {
    if (a->report.detector != b->report.detector)
      return a->report.detector < b->report.detector;
    return a->report.example < b->report.example;
  });

  std::string csv =
      "detector,example,threshold,arl,edd,edd_se,edd_conditional,type1,"
      "failure_rate,n,censored\n";
  bool any_failed = false;
  for (const auto* r : sorted) {
    if (!r->error.empty()) {
      any_failed = true;
      continue;
    }
    const auto& m = r->report;
    char line[512];
    std::snprintf(line, sizeof(line),
                  "%s,%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%d\n",
                  m.detector.c_str(), m.example.c_str(), m.threshold,
                  m.arl_estimate, m.edd, m.edd_se, m.edd_conditional,
                  m.type1_error, m.failure_rate, m.n_sequences,
                  m.censored_count);
    csv += line;
  }
  const fs::path out = fs::path(config.out_dir) / "results.csv";
  cpd::atomic_write_text(out.string(), csv);

  for (const auto* r : sorted) {
    if (!r->error.empty()) {
      std::cerr << "cell " << r->report.detector << " x " << r->report.example
                << " failed: " << r->error << "\n";
    } else {
      std::cerr << r->report.detector << " x " << r->report.example
                << ": edd=" << r->report.edd << " type1=" << r->report.type1_error
                << " failure=" << r->report.failure_rate
                << " (" << r->report.wall_time_s << "s)\n";
    }
  }
  std::cerr << "wrote " << out << "\n";
  return any_failed ? 3 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Streaming change-point detection toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions opts;
  app.add_option("--config", opts.config_path, "Experiment config (JSON)")
      ->required();
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "Master seed override");
  int workers_value = 0;
  auto* workers_opt = app.add_option("--workers", workers_value, "Worker count");
  std::string out_value;
  auto* out_opt = app.add_option("--out", out_value, "Output directory");

  auto* gen = app.add_subcommand("generate", "Write synthetic sequences and pools as CSV");
  int gen_count = 1;
  bool gen_pool = false;
  gen->add_option("--count", gen_count, "Sequences per example");
  gen->add_flag("--pool", gen_pool, "Also write the reference pool");

  auto* cal = app.add_subcommand("calibrate", "Calibrate thresholds per detector x example");
  bool cal_tail = false;
  cal->add_flag("--tail", cal_tail, "Also write stopping-time tail CSVs");

  auto* det = app.add_subcommand("detect", "Run one detector over one CSV sequence");
  std::string det_sequence, det_detector, det_example;
  double det_threshold = std::numeric_limits<double>::infinity();
  det->add_option("--sequence", det_sequence, "Observation CSV")->required();
  det->add_option("--detector", det_detector, "Detector name (default: first)");
  det->add_option("--example", det_example, "Example name providing reference data");
  det->add_option("--threshold", det_threshold, "Alarm threshold");

  auto* bench = app.add_subcommand("benchmark", "Run the full campaign grid");

  CLI11_PARSE(app, argc, argv);

  if (*seed_opt) opts.seed_override = seed_value;
  if (*workers_opt) opts.workers_override = workers_value;
  if (*out_opt) opts.out_override = out_value;

  cpd::ExperimentConfig config;
  try {
    config = load_effective_config(opts);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (gen->parsed()) return cmd_generate(config, gen_count, gen_pool);
    if (cal->parsed()) return cmd_calibrate(config, cal_tail);
    if (det->parsed())
      return cmd_detect(config, det_sequence, det_detector, det_example,
                        det_threshold);
    if (bench->parsed()) return cmd_benchmark(config);
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
