#include "cpd/cusum.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cpd {

CusumState cusum_update(CusumState state, double increment) {
  if (!std::isfinite(increment))
    throw std::invalid_argument("cusum_update: non-finite increment");
  state.statistic = std::max(state.statistic + increment - state.drift, 0.0);
  state.step_index += 1;
  if (!state.stopped_at && state.statistic > state.threshold)
    state.stopped_at = state.step_index;
  return state;
}

double clamp_nonfinite_increment(double increment) {
  if (std::isnan(increment))
    throw std::invalid_argument("increment is NaN (observation outside both supports)");
  if (increment == std::numeric_limits<double>::infinity()) return 1e3;
  if (increment == -std::numeric_limits<double>::infinity()) return -1e3;
  return increment;
}

RunResult run_to_stop(StreamingDetector& detector,
                      const ObservationSequence& sequence,
                      std::int64_t horizon) {
  if (sequence.length() == 0) throw std::invalid_argument("run_to_stop: empty sequence");
  if (horizon <= 0 || horizon > sequence.length())
    throw std::invalid_argument("run_to_stop: horizon outside sequence length");

  detector.reset();
  const int s = detector.stride();
  const int d = detector.dim();
  if (sequence.dim() != d)
    throw std::invalid_argument("run_to_stop: dimension mismatch");

  RunResult result;
  const std::int64_t k =
      sequence.change_point ? *sequence.change_point : horizon;
  Matrix chunk(static_cast<std::size_t>(s), static_cast<std::size_t>(d));
  std::int64_t consumed = 0;
  while (consumed + s <= horizon) {
    for (int r = 0; r < s; ++r) {
      const auto src = sequence.data.row(static_cast<std::size_t>(consumed + r));
      std::copy(src.begin(), src.end(), chunk.row(static_cast<std::size_t>(r)).begin());
    }
    consumed += s;
    for (const DetectorVerdict& v : detector.observe_batch(chunk)) {
      result.statistics.push_back(v.statistic_value);
      result.increments.push_back(v.increment);
      result.obs_index.push_back(consumed);
      if (v.alarmed && !result.stopped_stat) {
        result.stopped_stat = result.emitted() - 1;
        result.stopped_obs = consumed;
      }
      result.max_statistic = std::max(result.max_statistic, v.statistic_value);
      if (sequence.change_point) {
        if (consumed <= k) {
          result.max_pre_change = std::max(result.max_pre_change, v.statistic_value);
        } else {
          result.max_post_change = std::max(result.max_post_change, v.statistic_value);
        }
      }
    }
  }
  return result;
}

}  // namespace cpd
