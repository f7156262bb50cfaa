#pragma once

// Monte Carlo evaluation: average run length with the exponential-tail
// shortcut, threshold calibration against a target ARL or a target Type-I
// error, and per-cell detection metrics. Sequences and cells are independent
// with derived seeds, so results do not depend on worker count or ordering.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cpd/cusum.hpp"
#include "cpd/matrix.hpp"

namespace cpd {

using DetectorFactory =
    std::function<std::unique_ptr<StreamingDetector>(std::uint64_t seed)>;
// Produces sequence `index` of the requested length; must be pure in
// (length, seed).
using SequenceSource =
    std::function<ObservationSequence(std::int64_t length, std::uint64_t seed)>;

void parallel_for(int n, int workers, const std::function<void(int)>& body);

// One detector run per sequence, seeds derived from (seed, index).
std::vector<RunResult> simulate_runs(const DetectorFactory& factory,
                                     const SequenceSource& source,
                                     std::int64_t horizon, int n_sequences,
                                     std::uint64_t seed, int workers);

struct ArlFit {
  std::int64_t horizon = 0;
  int n_sequences = 0;
  double crossing_fraction = 0.0;
  double rate = 0.0;          // lambda per observation
  double arl_estimate = 0.0;  // 1 / lambda; +inf when nothing crossed
  // True when crossing_fraction is 0 or 1 and the fit is out of range.
  bool degenerate = false;
};

// Fit from precomputed per-sequence maxima of the statistic.
ArlFit arl_fit_from_maxes(const std::vector<double>& maxes, double threshold,
                          std::int64_t horizon);

ArlFit estimate_arl(const DetectorFactory& factory, const SequenceSource& pre_source,
                    double threshold, std::int64_t horizon, int n_sequences,
                    std::uint64_t seed, int workers = 1);

struct CalibrationResult {
  double threshold = 0.0;
  ArlFit fit;                                   // at the returned threshold
  std::vector<std::pair<double, double>> probes;  // (b, arl) pairs examined
  // Set when every pre-change maximum sits at zero and any positive
  // threshold already exceeds the target; threshold is then a small margin.
  bool lower_bounded = false;
};

// Bisection on the threshold until |arl - target| / target < rel_tol, reusing
// one set of pre-change trajectories (the statistic does not depend on b).
CalibrationResult calibrate_threshold(const DetectorFactory& factory,
                                      const SequenceSource& pre_source,
                                      double target_arl, std::int64_t horizon,
                                      int n_sequences, std::uint64_t seed,
                                      int workers = 1, double rel_tol = 0.1);

// Same bisection over already-simulated pre-change trajectories.
CalibrationResult calibrate_from_runs(const std::vector<RunResult>& runs,
                                      double target_arl, std::int64_t horizon,
                                      double rel_tol = 0.1);

double type1_threshold_from_runs(const std::vector<RunResult>& runs,
                                 double target_type1, std::int64_t change_point,
                                 bool* boundary_out = nullptr);

// Empirical (1 - target) quantile of max_{obs <= k} S over pre-change runs.
// boundary_out flags the degenerate smallest/largest-order-statistic case.
double calibrate_threshold_type1(const DetectorFactory& factory,
                                 const SequenceSource& pre_source,
                                 double target_type1, std::int64_t change_point,
                                 std::int64_t horizon, int n_sequences,
                                 std::uint64_t seed, int workers = 1,
                                 bool* boundary_out = nullptr);

struct MetricReport {
  std::string detector;
  std::string example;
  double threshold = 0.0;
  double arl_estimate = 0.0;  // pre-change fit at the calibrated threshold
  double edd = 0.0;           // censored sequences count at horizon - k
  double edd_se = 0.0;
  double edd_conditional = 0.0;  // over detected sequences only
  double type1_error = 0.0;
  double failure_rate = 0.0;
  int n_sequences = 0;
  std::int64_t horizon = 0;
  std::int64_t change_point = 0;
  int censored_count = 0;
  double wall_time_s = 0.0;  // diagnostics only, never serialized
};

MetricReport evaluate(const DetectorFactory& factory,
                      const SequenceSource& change_source,
                      std::int64_t change_point, std::int64_t horizon,
                      double threshold, int n_sequences, std::uint64_t seed,
                      int workers = 1);

// --- Stopping-time diagnostics ----------------------------------------------

// First observation index where the statistic exceeds the threshold.
std::optional<std::int64_t> first_crossing(const RunResult& run, double threshold);

struct ExponentialTailFit {
  double rate = 0.0;  // lambda per observation
  // KS distance between the crossing times (conditioned on crossing) and the
  // fitted exponential truncated at the horizon.
  double ks_distance = 0.0;
  int n_crossed = 0;
  int n_total = 0;
};

// Least-squares fit of log P{tau > t} = -lambda t over the empirical tail,
// the cross-check mode for the single-horizon ARL estimator.
ExponentialTailFit fit_exponential_tail(
    const std::vector<std::optional<std::int64_t>>& stopping_times,
    std::int64_t horizon);

// --- Campaign ----------------------------------------------------------------

struct ExperimentConfig;  // defined in cpd/config.hpp
struct DetectorConfig;
struct ExampleConfig;
class ReferencePool;

// Resolved detector x example cell: the factory builds fresh detector
// instances (threshold +inf; metrics are computed against an external
// threshold from the recorded trajectories).
struct CellSetup {
  DetectorFactory factory;
  SequenceSource pre_source;
  SequenceSource change_source;
  std::shared_ptr<const ReferencePool> pool;
  double drift = 0.0;
  bool drift_estimated = false;
};

CellSetup make_cell_setup(const ExperimentConfig& config,
                          const DetectorConfig& detector,
                          const ExampleConfig& example);

struct CampaignCellResult {
  MetricReport report;
  std::string error;  // empty on success
};

// Runs every detector x example cell with independent derived seeds, writing
// one JSON per finished cell under out_dir/cells (atomic rename). Cells with
// an existing JSON are loaded, not recomputed, so interrupted campaigns
// resume. Per-cell failures are captured, not propagated.
std::vector<CampaignCellResult> run_campaign(const ExperimentConfig& config,
                                             const std::string& out_dir);

}  // namespace cpd
