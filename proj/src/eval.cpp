#include "cpd/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "cpd/baselines.hpp"
#include "cpd/config.hpp"
#include "cpd/csv.hpp"
#include "cpd/distributions.hpp"
#include "cpd/nn_cusum.hpp"
#include "cpd/rng.hpp"

namespace cpd {

void parallel_for(int n, int workers, const std::function<void(int)>& body) {
  if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min(workers, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::mutex err_mutex;
  std::exception_ptr first_error;
  auto worker = [&] {
    while (true) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::vector<RunResult> simulate_runs(const DetectorFactory& factory,
                                     const SequenceSource& source,
                                     std::int64_t horizon, int n_sequences,
                                     std::uint64_t seed, int workers) {
  std::vector<RunResult> runs(static_cast<std::size_t>(n_sequences));
  parallel_for(n_sequences, workers, [&](int i) {
    const std::uint64_t idx = static_cast<std::uint64_t>(i);
    auto detector = factory(derive_seed(seed, idx, "detector"));
    const ObservationSequence seq = source(horizon, derive_seed(seed, idx, "sequence"));
    runs[static_cast<std::size_t>(i)] = run_to_stop(*detector, seq, horizon);
  });
  return runs;
}

namespace {

double max_stat_up_to(const RunResult& run, std::int64_t obs_limit) {
  double m = 0.0;
  for (std::size_t i = 0; i < run.statistics.size(); ++i) {
    if (run.obs_index[i] > obs_limit) break;
    m = std::max(m, run.statistics[i]);
  }
  return m;
}

std::vector<double> collect_maxes(const std::vector<RunResult>& runs,
                                  std::int64_t obs_limit) {
  std::vector<double> maxes;
  maxes.reserve(runs.size());
  for (const auto& r : runs) maxes.push_back(max_stat_up_to(r, obs_limit));
  return maxes;
}

}  // namespace

ArlFit arl_fit_from_maxes(const std::vector<double>& maxes, double threshold,
                          std::int64_t horizon) {
  ArlFit fit;
  fit.horizon = horizon;
  fit.n_sequences = static_cast<int>(maxes.size());
  int crossed = 0;
  for (double m : maxes) crossed += m > threshold ? 1 : 0;
  fit.crossing_fraction = static_cast<double>(crossed) / static_cast<double>(maxes.size());
  if (crossed == 0) {
    fit.rate = 0.0;
    fit.arl_estimate = std::numeric_limits<double>::infinity();
    fit.degenerate = true;
  } else if (crossed == static_cast<int>(maxes.size())) {
    fit.rate = std::numeric_limits<double>::infinity();
    fit.arl_estimate = 0.0;
    fit.degenerate = true;
  } else {
    fit.rate = -std::log1p(-fit.crossing_fraction) / static_cast<double>(horizon);
    fit.arl_estimate = 1.0 / fit.rate;
  }
  return fit;
}

ArlFit estimate_arl(const DetectorFactory& factory, const SequenceSource& pre_source,
                    double threshold, std::int64_t horizon, int n_sequences,
                    std::uint64_t seed, int workers) {
  const auto runs = simulate_runs(factory, pre_source, horizon, n_sequences,
                                  seed, workers);
  return arl_fit_from_maxes(collect_maxes(runs, horizon), threshold, horizon);
}

namespace {

CalibrationResult calibrate_from_maxes(const std::vector<double>& maxes,
                                       double target_arl, std::int64_t horizon,
                                       double rel_tol) {
  CalibrationResult result;
  const double top = *std::max_element(maxes.begin(), maxes.end());
  const auto arl_at = [&](double b) { return arl_fit_from_maxes(maxes, b, horizon); };

  if (top <= 0.0) {
    // Statistic pinned at zero before the change: any positive threshold
    // gives no crossings, so the target is met as a lower bound.
    result.threshold = 1e-6;
    result.fit = arl_at(result.threshold);
    result.lower_bounded = true;
    result.probes.emplace_back(result.threshold, result.fit.arl_estimate);
    return result;
  }

  double lo = 0.0;
  double hi = top;  // arl(top) = +inf since crossing requires strict >
  ArlFit fit_lo = arl_at(lo);
  result.probes.emplace_back(lo, fit_lo.arl_estimate);
  if (!fit_lo.degenerate && fit_lo.arl_estimate >= target_arl) {
    // Even threshold zero over-shoots the target; report the closest point.
    result.threshold = lo;
    result.fit = fit_lo;
    return result;
  }

  double best_b = hi;
  ArlFit best_fit = arl_at(hi);
  double best_gap = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const ArlFit fit = arl_at(mid);
    result.probes.emplace_back(mid, fit.arl_estimate);
    const double gap = std::isfinite(fit.arl_estimate)
                           ? std::abs(fit.arl_estimate - target_arl) / target_arl
                           : std::numeric_limits<double>::infinity();
    if (gap < best_gap) {
      best_gap = gap;
      best_b = mid;
      best_fit = fit;
    }
    if (gap < rel_tol) break;
    if (!std::isfinite(fit.arl_estimate) || fit.arl_estimate > target_arl) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  if (best_gap >= rel_tol) {
    std::ostringstream msg;
    msg << "calibrate_threshold: no threshold reaches ARL " << target_arl
        << " within " << rel_tol * 100 << "% (closest " << best_fit.arl_estimate
        << " at b = " << best_b << "); increase calibration sequences";
    throw std::runtime_error(msg.str());
  }
  result.threshold = best_b;
  result.fit = best_fit;
  return result;
}

}  // namespace

CalibrationResult calibrate_from_runs(const std::vector<RunResult>& runs,
                                      double target_arl, std::int64_t horizon,
                                      double rel_tol) {
  return calibrate_from_maxes(collect_maxes(runs, horizon), target_arl, horizon,
                              rel_tol);
}

CalibrationResult calibrate_threshold(const DetectorFactory& factory,
                                      const SequenceSource& pre_source,
                                      double target_arl, std::int64_t horizon,
                                      int n_sequences, std::uint64_t seed,
                                      int workers, double rel_tol) {
  const auto runs = simulate_runs(factory, pre_source, horizon, n_sequences,
                                  seed, workers);
  return calibrate_from_runs(runs, target_arl, horizon, rel_tol);
}

double type1_threshold_from_runs(const std::vector<RunResult>& runs,
                                 double target_type1, std::int64_t change_point,
                                 bool* boundary_out) {
  if (!(target_type1 > 0.0 && target_type1 < 1.0))
    throw std::invalid_argument("type1 calibration: target must be in (0,1)");
  std::vector<double> maxes = collect_maxes(runs, change_point);
  std::sort(maxes.begin(), maxes.end());
  // Smallest order statistic whose exceedance fraction is <= target.
  const double pos = (1.0 - target_type1) * static_cast<double>(maxes.size());
  std::size_t idx = static_cast<std::size_t>(std::ceil(pos));
  if (idx < 1) idx = 1;
  bool boundary = false;
  if (idx >= maxes.size()) {
    idx = maxes.size();
    boundary = true;  // quantile beyond resolution; threshold = max observed
  }
  if (boundary_out) *boundary_out = boundary;
  return maxes[idx - 1];
}

double calibrate_threshold_type1(const DetectorFactory& factory,
                                 const SequenceSource& pre_source,
                                 double target_type1, std::int64_t change_point,
                                 std::int64_t horizon, int n_sequences,
                                 std::uint64_t seed, int workers,
                                 bool* boundary_out) {
  const auto runs = simulate_runs(factory, pre_source, horizon, n_sequences,
                                  seed, workers);
  return type1_threshold_from_runs(runs, target_type1, change_point, boundary_out);
}

std::optional<std::int64_t> first_crossing(const RunResult& run,
                                           double threshold) {
  for (std::size_t i = 0; i < run.statistics.size(); ++i) {
    if (run.statistics[i] > threshold) return run.obs_index[i];
  }
  return std::nullopt;
}

MetricReport evaluate(const DetectorFactory& factory,
                      const SequenceSource& change_source,
                      std::int64_t change_point, std::int64_t horizon,
                      double threshold, int n_sequences, std::uint64_t seed,
                      int workers) {
  if (change_point >= horizon)
    throw std::invalid_argument("evaluate: change_point must precede horizon");
  const auto runs = simulate_runs(factory, change_source, horizon, n_sequences,
                                  seed, workers);

  MetricReport report;
  report.threshold = threshold;
  report.n_sequences = n_sequences;
  report.horizon = horizon;
  report.change_point = change_point;

  std::vector<double> delays;
  delays.reserve(runs.size());
  double detected_sum = 0.0;
  int detected = 0;
  int type1 = 0;
  for (const auto& run : runs) {
    if (max_stat_up_to(run, change_point) > threshold) ++type1;
    std::optional<std::int64_t> hit;
    for (std::size_t i = 0; i < run.statistics.size(); ++i) {
      if (run.obs_index[i] > change_point && run.statistics[i] > threshold) {
        hit = run.obs_index[i];
        break;
      }
    }
    if (hit) {
      const double delay = static_cast<double>(*hit - change_point);
      delays.push_back(delay);
      detected_sum += delay;
      ++detected;
    } else {
      delays.push_back(static_cast<double>(horizon - change_point));
      ++report.censored_count;
    }
  }

  const double n = static_cast<double>(n_sequences);
  double mean = 0.0;
  for (double d : delays) mean += d;
  mean /= n;
  double var = 0.0;
  for (double d : delays) var += (d - mean) * (d - mean);
  var = n > 1 ? var / (n - 1.0) : 0.0;

  report.edd = mean;
  report.edd_se = std::sqrt(var / n);
  report.edd_conditional = detected > 0 ? detected_sum / detected : 0.0;
  report.type1_error = static_cast<double>(type1) / n;
  report.failure_rate = static_cast<double>(report.censored_count) / n;
  return report;
}

ExponentialTailFit fit_exponential_tail(
    const std::vector<std::optional<std::int64_t>>& stopping_times,
    std::int64_t horizon) {
  ExponentialTailFit fit;
  fit.n_total = static_cast<int>(stopping_times.size());
  std::vector<double> crossed;
  for (const auto& t : stopping_times) {
    if (t) crossed.push_back(static_cast<double>(*t));
  }
  fit.n_crossed = static_cast<int>(crossed.size());
  if (crossed.empty()) return fit;
  std::sort(crossed.begin(), crossed.end());

  // Least squares of log P{tau > t} on t through the origin, over the
  // empirical tail at every observed crossing time with survivors left.
  const double n = static_cast<double>(fit.n_total);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < crossed.size(); ++i) {
    const double survivors = n - static_cast<double>(i + 1);
    if (survivors <= 0.0) break;
    const double t = crossed[i];
    const double y = std::log(survivors / n);
    num += t * y;
    den += t * t;
  }
  fit.rate = den > 0.0 ? -num / den : 0.0;

  // KS distance of the crossing times against the fitted exponential
  // truncated at the horizon.
  if (fit.rate > 0.0) {
    const double t_cap = static_cast<double>(horizon);
    const double denom_cdf = -std::expm1(-fit.rate * t_cap);
    const double m = static_cast<double>(crossed.size());
    double d = 0.0;
    for (std::size_t i = 0; i < crossed.size(); ++i) {
      const double model = -std::expm1(-fit.rate * crossed[i]) / denom_cdf;
      const double hi = static_cast<double>(i + 1) / m;
      const double lo = static_cast<double>(i) / m;
      d = std::max(d, std::max(std::abs(hi - model), std::abs(model - lo)));
    }
    fit.ks_distance = d;
  }
  return fit;
}

// --- Campaign ----------------------------------------------------------------

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

// Everything an example contributes to a cell: the reference pool plus
// pre-change and change-at-k sequence sources.
struct ExampleData {
  std::shared_ptr<const ReferencePool> pool;
  std::optional<DistributionSpec> pre;
  std::optional<DistributionSpec> post;
  // CSV examples sample rows from disjoint background halves.
  std::shared_ptr<const Matrix> stream_background;
  std::shared_ptr<const Matrix> target;
  SequenceSource pre_source;
  SequenceSource change_source;
};

Matrix rows_subset(const Matrix& src, const std::vector<std::size_t>& idx) {
  Matrix out(idx.size(), src.cols);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    auto row = src.row(idx[i]);
    std::copy(row.begin(), row.end(), out.row(i).begin());
  }
  return out;
}

// Sequence assembled by drawing rows without replacement, seeded.
Matrix draw_rows(const Matrix& src, std::int64_t count, std::mt19937_64& rng) {
  if (count > static_cast<std::int64_t>(src.rows))
    throw std::runtime_error("csv example: not enough rows to assemble sequence");
  std::vector<std::size_t> idx(src.rows);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (std::int64_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i),
                                                    idx.size() - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[pick(rng)]);
  }
  idx.resize(static_cast<std::size_t>(count));
  return rows_subset(src, idx);
}

ExampleData resolve_example(const ExampleConfig& example,
                            const CampaignConfig& campaign,
                            std::uint64_t master_seed) {
  ExampleData data;
  const std::uint64_t example_seed = derive_seed(master_seed, fnv1a(example.name), "example");
  const std::int64_t k = campaign.change_point;

  if (!example.is_csv()) {
    ExamplePair pair = make_example(example.preset, example.dim);
    data.pre = pair.pre;
    data.post = pair.post;
    Matrix pool_rows = pair.pre.sample(campaign.reference_pool,
                                       derive_seed(example_seed, 0, "pool"));
    data.pool = std::make_shared<const ReferencePool>(
        std::move(pool_rows), derive_seed(example_seed, 1, "pool-draws"));
    const DistributionSpec pre = pair.pre;
    const DistributionSpec post = pair.post;
    data.pre_source = [pre](std::int64_t length, std::uint64_t seed) {
      ObservationSequence seq;
      seq.data = pre.sample(length, seed);
      seq.seed = seed;
      return seq;
    };
    data.change_source = [pre, post, k](std::int64_t length, std::uint64_t seed) {
      return build_sequence(pre, post, std::min(k, length), length, seed);
    };
    return data;
  }

  CsvSchema schema;
  schema.feature_columns = example.feature_columns;
  schema.label_column = example.label_column;
  LabeledData labeled = ingest_csv(example.csv_path, schema);
  if (labeled.background.rows == 0 || labeled.target.rows == 0)
    throw std::runtime_error("csv example '" + example.name +
                             "': needs rows of both labels");

  // Disjoint halves: one feeds the reference pool, the other the online
  // pre-change segments.
  std::vector<std::size_t> perm(labeled.background.rows);
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  auto rng = make_rng(derive_seed(example_seed, 2, "background-split"));
  std::shuffle(perm.begin(), perm.end(), rng);
  const std::size_t half = perm.size() / 2;
  Matrix pool_rows = rows_subset(
      labeled.background, {perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(half)});
  data.pool = std::make_shared<const ReferencePool>(
      std::move(pool_rows), derive_seed(example_seed, 1, "pool-draws"));
  data.stream_background = std::make_shared<const Matrix>(rows_subset(
      labeled.background, {perm.begin() + static_cast<std::ptrdiff_t>(half), perm.end()}));
  data.target = std::make_shared<const Matrix>(std::move(labeled.target));

  const auto background = data.stream_background;
  const auto target = data.target;
  data.pre_source = [background](std::int64_t length, std::uint64_t seed) {
    ObservationSequence seq;
    auto rng = make_rng(seed);
    seq.data = draw_rows(*background, length, rng);
    seq.seed = seed;
    return seq;
  };
  data.change_source = [background, target, k](std::int64_t length,
                                               std::uint64_t seed) {
    auto rng = make_rng(seed);
    const std::int64_t pre_len = std::min(k, length);
    Matrix pre_rows = draw_rows(*background, pre_len, rng);
    Matrix post_rows = draw_rows(*target, length - pre_len, rng);
    ObservationSequence seq;
    seq.data = Matrix(static_cast<std::size_t>(length), pre_rows.cols);
    for (std::size_t r = 0; r < pre_rows.rows; ++r) {
      auto row = pre_rows.row(r);
      std::copy(row.begin(), row.end(), seq.data.row(r).begin());
    }
    for (std::size_t r = 0; r < post_rows.rows; ++r) {
      auto row = post_rows.row(r);
      std::copy(row.begin(), row.end(),
                seq.data.row(pre_rows.rows + r).begin());
    }
    seq.change_point = pre_len;
    seq.seed = seed;
    return seq;
  };
  return data;
}

NnDetectorConfig to_nn_config(const DetectorConfig& d) {
  NnDetectorConfig cfg;
  cfg.window.window_length = d.window;
  cfg.window.split_ratio = d.split_ratio;
  cfg.window.stride = d.stride;
  cfg.window.train_every = d.train_every;
  cfg.window.burn_in = d.burn_in;
  if (d.loss == "squared") {
    cfg.loss.kind = LossKind::squared;
  } else if (d.loss == "mmd_linear") {
    cfg.loss.kind = LossKind::mmd_linear;
  } else {
    cfg.loss.kind = LossKind::logistic;
  }
  cfg.loss.onnr_weight = d.onnr_weight;
  cfg.hidden_width = d.hidden_width;
  cfg.learning_rate = d.learning_rate;
  cfg.minibatch = d.minibatch;
  cfg.train_from_scratch = d.train_from_scratch;
  return cfg;
}

struct FactoryInfo {
  DetectorFactory factory;
  double drift = 0.0;
  bool drift_estimated = false;
};

FactoryInfo make_factory(const DetectorConfig& d, const ExampleData& example,
                         std::uint64_t cell_seed) {
  FactoryInfo info;
  if (d.kind == "exact_cusum") {
    if (!example.pre)
      throw std::runtime_error("exact_cusum needs a synthetic example with known densities");
    const DistributionSpec pre = *example.pre;
    const DistributionSpec post = *example.post;
    info.factory = [pre, post](std::uint64_t) {
      return std::make_unique<ExactCusumDetector>(
          pre, post, std::numeric_limits<double>::infinity());
    };
    return info;
  }

  if (d.kind == "h_cusum" || d.kind == "mewma" || d.kind == "wl_cusum" ||
      d.kind == "wl_glr") {
    // Moments from the first half of the pool; the Hotelling offset comes
    // from the held-out second half.
    const Matrix& pool_rows = example.pool->samples();
    const std::size_t half = pool_rows.rows / 2;
    std::vector<std::size_t> first_idx(half), second_idx(pool_rows.rows - half);
    for (std::size_t i = 0; i < half; ++i) first_idx[i] = i;
    for (std::size_t i = half; i < pool_rows.rows; ++i) second_idx[i - half] = i;
    const Matrix estimation = rows_subset(pool_rows, first_idx);
    const GaussianMoments moments = GaussianMoments::estimate(estimation, d.nu_scale);

    if (d.kind == "h_cusum") {
      const Matrix holdout = rows_subset(pool_rows, second_idx);
      const double offset = HotellingCusumDetector::offset_from_holdout(
          moments, holdout, d.epsilon_scale);
      info.factory = [moments, offset](std::uint64_t) {
        return std::make_unique<HotellingCusumDetector>(
            moments, offset, std::numeric_limits<double>::infinity());
      };
    } else if (d.kind == "mewma") {
      Matrix base = moments.covariance;
      for (std::size_t i = 0; i < base.rows; ++i)
        base.at(i, i) += moments.regularizer;
      const double decay = d.mewma_decay;
      info.factory = [decay, base](std::uint64_t) {
        return std::make_unique<MewmaDetector>(
            decay, base, std::numeric_limits<double>::infinity());
      };
    } else if (d.kind == "wl_cusum") {
      const int window = d.wl_window;
      info.factory = [window, moments](std::uint64_t) {
        return std::make_unique<WlCusumDetector>(
            window, moments, std::numeric_limits<double>::infinity());
      };
    } else {
      const int window = d.wl_window;
      info.factory = [window, moments](std::uint64_t) {
        return std::make_unique<WlGlrDetector>(
            window, moments, std::numeric_limits<double>::infinity());
      };
    }
    return info;
  }

  NnDetectorConfig nn = to_nn_config(d);
  nn.threshold = std::numeric_limits<double>::infinity();
  const auto pool = example.pool;

  if (d.kind == "nn_cusum") {
    if (d.drift_source == "fixed") {
      nn.drift = d.drift_value;
    } else if (d.drift_source == "zero") {
      nn.drift = 0.0;
    } else {
      const DriftEstimate est =
          estimate_drift(nn, pool, d.drift_sequences, d.drift_length,
                         derive_seed(cell_seed, 0, "drift"));
      nn.drift = est.drift;
      info.drift_estimated = true;
    }
    info.drift = nn.drift;
    info.factory = [nn, pool](std::uint64_t seed) {
      NnDetectorConfig cfg = nn;
      cfg.seed = seed;
      return std::make_unique<NnCusumDetector>(cfg, pool);
    };
    return info;
  }
  if (d.kind == "onnc") {
    info.factory = [nn, pool](std::uint64_t seed) {
      NnDetectorConfig cfg = nn;
      cfg.seed = seed;
      return std::make_unique<OnncDetector>(cfg, pool);
    };
    return info;
  }
  if (d.kind == "onnr") {
    info.factory = [nn, pool](std::uint64_t seed) {
      NnDetectorConfig cfg = nn;
      cfg.seed = seed;
      return std::make_unique<OnnrDetector>(cfg, pool);
    };
    return info;
  }
  throw std::runtime_error("unknown detector kind '" + d.kind + "'");
}

}  // namespace

CellSetup make_cell_setup(const ExperimentConfig& config,
                          const DetectorConfig& detector,
                          const ExampleConfig& example) {
  ExampleData data = resolve_example(example, config.campaign, config.master_seed);
  const std::uint64_t cell_seed = derive_seed(
      config.master_seed, fnv1a(detector.name), fnv1a(example.name));
  FactoryInfo info = make_factory(detector, data, cell_seed);
  CellSetup setup;
  setup.factory = std::move(info.factory);
  setup.pre_source = std::move(data.pre_source);
  setup.change_source = std::move(data.change_source);
  setup.pool = data.pool;
  setup.drift = info.drift;
  setup.drift_estimated = info.drift_estimated;
  return setup;
}

namespace {

std::string cell_file_name(const std::string& detector, const std::string& example) {
  std::string name = detector + "__" + example + ".json";
  for (char& c : name) {
    if (c == '/' || c == '\\' || c == ' ') c = '_';
  }
  return name;
}

ordered_json report_to_json(const MetricReport& r) {
  ordered_json j;
  j["detector"] = r.detector;
  j["example"] = r.example;
  j["threshold"] = r.threshold;
  j["arl_estimate"] = r.arl_estimate;
  j["edd"] = r.edd;
  j["edd_se"] = r.edd_se;
  j["edd_conditional"] = r.edd_conditional;
  j["type1_error"] = r.type1_error;
  j["failure_rate"] = r.failure_rate;
  j["n_sequences"] = r.n_sequences;
  j["horizon"] = r.horizon;
  j["change_point"] = r.change_point;
  j["censored_count"] = r.censored_count;
  return j;
}

MetricReport report_from_json(const ordered_json& j) {
  MetricReport r;
  r.detector = j.at("detector").get<std::string>();
  r.example = j.at("example").get<std::string>();
  r.threshold = j.at("threshold").get<double>();
  r.arl_estimate = j.at("arl_estimate").get<double>();
  r.edd = j.at("edd").get<double>();
  r.edd_se = j.at("edd_se").get<double>();
  r.edd_conditional = j.at("edd_conditional").get<double>();
  r.type1_error = j.at("type1_error").get<double>();
  r.failure_rate = j.at("failure_rate").get<double>();
  r.n_sequences = j.at("n_sequences").get<int>();
  r.horizon = j.at("horizon").get<std::int64_t>();
  r.change_point = j.at("change_point").get<std::int64_t>();
  r.censored_count = j.at("censored_count").get<int>();
  return r;
}

}  // namespace

std::vector<CampaignCellResult> run_campaign(const ExperimentConfig& config,
                                             const std::string& out_dir) {
  validate_config(config);
  const fs::path cells_dir = fs::path(out_dir) / "cells";
  fs::create_directories(cells_dir);

  std::vector<CampaignCellResult> results;
  const CampaignConfig& campaign = config.campaign;
  const std::int64_t cal_horizon = campaign.calibration_horizon > 0
                                       ? campaign.calibration_horizon
                                       : campaign.horizon;

  for (const auto& example_cfg : config.examples) {
    std::optional<ExampleData> example;
    std::string example_error;
    try {
      example = resolve_example(example_cfg, campaign, config.master_seed);
    } catch (const std::exception& e) {
      example_error = e.what();
    }

    for (const auto& detector_cfg : config.detectors) {
      CampaignCellResult cell;
      cell.report.detector = detector_cfg.name;
      cell.report.example = example_cfg.name;
      const fs::path cell_path =
          cells_dir / cell_file_name(detector_cfg.name, example_cfg.name);

      if (fs::exists(cell_path)) {
        // Finished in an earlier run; reuse.
        std::ifstream in(cell_path);
        std::stringstream ss;
        ss << in.rdbuf();
        const auto j = ordered_json::parse(ss.str());
        if (j.contains("error") && !j.at("error").get<std::string>().empty()) {
          cell.error = j.at("error").get<std::string>();
        }
        if (j.contains("report")) cell.report = report_from_json(j.at("report"));
        results.push_back(std::move(cell));
        continue;
      }

      const auto started = std::chrono::steady_clock::now();
      ordered_json diag;
      try {
        if (!example_error.empty()) throw std::runtime_error(example_error);
        const std::uint64_t cell_seed =
            derive_seed(config.master_seed, fnv1a(detector_cfg.name),
                        fnv1a(example_cfg.name));
        const FactoryInfo info = make_factory(detector_cfg, *example, cell_seed);
        if (info.drift_estimated) diag["estimated_drift"] = info.drift;

        double threshold = 0.0;
        if (campaign.target_arl) {
          const CalibrationResult cal = calibrate_threshold(
              info.factory, example->pre_source, *campaign.target_arl,
              cal_horizon, campaign.calibration_sequences,
              derive_seed(cell_seed, 1, "calibration"), config.workers,
              campaign.arl_rel_tol);
          threshold = cal.threshold;
          cell.report.arl_estimate = cal.fit.arl_estimate;
          diag["calibration"] = {{"crossing_fraction", cal.fit.crossing_fraction},
                                 {"rate", cal.fit.rate},
                                 {"degenerate", cal.fit.degenerate},
                                 {"lower_bounded", cal.lower_bounded}};
          auto probes = ordered_json::array();
          for (const auto& [b, arl] : cal.probes) probes.push_back({{"b", b}, {"arl", arl}});
          diag["arl_vs_threshold"] = probes;
        } else {
          bool boundary = false;
          threshold = calibrate_threshold_type1(
              info.factory, example->pre_source, *campaign.target_type1,
              campaign.change_point, cal_horizon,
              campaign.calibration_sequences,
              derive_seed(cell_seed, 1, "calibration"), config.workers,
              &boundary);
          diag["type1_boundary"] = boundary;
          cell.report.arl_estimate = 0.0;
        }

        MetricReport metrics = evaluate(
            info.factory, example->change_source, campaign.change_point,
            campaign.horizon, threshold, campaign.n_sequences,
            derive_seed(cell_seed, 2, "evaluation"), config.workers);
        metrics.detector = detector_cfg.name;
        metrics.example = example_cfg.name;
        metrics.arl_estimate = cell.report.arl_estimate;
        cell.report = metrics;
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
      cell.report.wall_time_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
              .count();

      ordered_json out;
      out["report"] = report_to_json(cell.report);
      out["error"] = cell.error;
      out["diagnostics"] = diag;
      atomic_write_text(cell_path.string(), out.dump(2) + "\n");
      results.push_back(std::move(cell));
    }
  }
  return results;
}

}  // namespace cpd
