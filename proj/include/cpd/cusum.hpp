#pragma once

// Streaming detector contract and the CUSUM state machine shared by every
// detector in the toolkit.
//
// Two clocks run side by side: observations arrive one row at a time, while
// statistics are emitted once per detector stride (1 for per-observation
// charts, s for windowed network detectors). RunResult keeps the mapping from
// each emitted statistic back to the observation count at emission.

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "cpd/matrix.hpp"

namespace cpd {

struct CusumState {
  double statistic = 0.0;
  double drift = 0.0;
  double threshold = std::numeric_limits<double>::infinity();
  std::int64_t step_index = 0;
  std::optional<std::int64_t> stopped_at;
};

// S_t = max(S_{t-1} + increment - drift, 0). The statistic keeps evolving
// after the first crossing; stopped_at records only that first step.
// Throws std::invalid_argument on a non-finite increment.
CusumState cusum_update(CusumState state, double increment);

// Log-likelihood ratios at support boundaries produce +-inf; pin them to
// +-1e3 so trajectories stay finite while an infinite-evidence observation
// still moves the statistic decisively. NaN (outside both supports) is an
// error handled by the caller.
double clamp_nonfinite_increment(double increment);

struct DetectorVerdict {
  double statistic_value = 0.0;
  bool alarmed = false;
  std::int64_t step_index = 0;
  // Raw increment behind this statistic; equals statistic_value for
  // Shewhart-type detectors that alarm on the instantaneous value.
  double increment = 0.0;
};

class StreamingDetector {
 public:
  virtual ~StreamingDetector() = default;

  // Restores the initial state (statistic 0 for CUSUM-type detectors) and
  // replays any internal warm-up. Deterministic given the detector seed.
  virtual void reset() = 0;
  virtual int dim() const = 0;
  // Observations consumed per emitted statistic.
  virtual int stride() const = 0;
  virtual double current_statistic() const = 0;

  // Feed rows (a multiple of stride()); returns the verdicts emitted while
  // consuming them. Warm-up strides emit nothing.
  virtual std::vector<DetectorVerdict> observe_batch(const Matrix& rows) = 0;
};

struct RunResult {
  std::vector<double> statistics;        // emitted trajectory, never truncated
  std::vector<double> increments;        // raw increment per emission
  std::vector<std::int64_t> obs_index;   // observations consumed at emission
  std::optional<std::int64_t> stopped_stat;  // 0-based index into statistics
  std::optional<std::int64_t> stopped_obs;   // observation clock at first alarm
  double max_statistic = 0.0;
  // Maxima relative to the sequence's declared change point (observation
  // clock); both 0 when the sequence has none.
  double max_pre_change = 0.0;
  double max_post_change = 0.0;

  std::int64_t emitted() const {
    return static_cast<std::int64_t>(statistics.size());
  }
};

// Runs the detector over the first `horizon` observations of the sequence.
// The detector is reset first; the full trajectory is recorded.
RunResult run_to_stop(StreamingDetector& detector,
                      const ObservationSequence& sequence,
                      std::int64_t horizon);

}  // namespace cpd
