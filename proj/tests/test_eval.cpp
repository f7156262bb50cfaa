#include <doctest.h>

#include <cmath>
#include <memory>
#include <random>

#include "cpd/eval.hpp"
#include "cpd/rng.hpp"

using namespace cpd;

namespace {

// Crosses independently with probability p each observation; the statistic
// is 1 on a crossing step and 0 otherwise (threshold 0.5).
class BernoulliCrossDetector : public StreamingDetector {
 public:
  BernoulliCrossDetector(double p, std::uint64_t seed)
      : p_(p), seed_(seed), rng_(make_rng(seed)) {}

  void reset() override {
    rng_ = make_rng(seed_);
    step_ = 0;
    stat_ = 0.0;
  }
  int dim() const override { return 1; }
  int stride() const override { return 1; }
  double current_statistic() const override { return stat_; }
  std::vector<DetectorVerdict> observe_batch(const Matrix& rows) override {
    std::vector<DetectorVerdict> out;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (std::size_t r = 0; r < rows.rows; ++r) {
      stat_ = unif(rng_) < p_ ? 1.0 : 0.0;
      DetectorVerdict v;
      v.statistic_value = stat_;
      v.alarmed = stat_ > 0.5;
      v.step_index = ++step_;
      v.increment = stat_;
      out.push_back(v);
    }
    return out;
  }

 private:
  double p_;
  std::uint64_t seed_;
  std::mt19937_64 rng_;
  std::int64_t step_ = 0;
  double stat_ = 0.0;
};

// Statistic ramps linearly after the change point, stays at zero before.
class RampDetector : public StreamingDetector {
 public:
  explicit RampDetector(std::int64_t start) : start_(start) {}
  void reset() override { step_ = 0; }
  int dim() const override { return 1; }
  int stride() const override { return 1; }
  double current_statistic() const override { return 0.0; }
  std::vector<DetectorVerdict> observe_batch(const Matrix& rows) override {
    std::vector<DetectorVerdict> out;
    for (std::size_t r = 0; r < rows.rows; ++r) {
      ++step_;
      DetectorVerdict v;
      v.statistic_value = step_ > start_ ? static_cast<double>(step_ - start_) : 0.0;
      v.alarmed = false;
      v.step_index = step_;
      v.increment = v.statistic_value;
      out.push_back(v);
    }
    return out;
  }

 private:
  std::int64_t start_;
  std::int64_t step_ = 0;
};

SequenceSource unit_source() {
  return [](std::int64_t length, std::uint64_t seed) {
    ObservationSequence seq;
    seq.data = Matrix(static_cast<std::size_t>(length), 1, 0.0);
    seq.seed = seed;
    return seq;
  };
}

}  // namespace

TEST_CASE("parallel_for covers every index exactly once") {
  std::vector<int> hits(500, 0);
  parallel_for(500, 4, [&](int i) { hits[static_cast<std::size_t>(i)] += 1; });
  for (int h : hits) CHECK(h == 1);
  CHECK_THROWS(parallel_for(10, 2, [](int i) {
    if (i == 7) throw std::runtime_error("boom");
  }));
}

TEST_CASE("arl fit matches the geometric closed form") {
  // P(max over T steps crosses) = 1 - (1-p)^T; lambda = -log(1-p).
  const double p = 0.002;
  const std::int64_t horizon = 800;
  const int n = 10000;
  DetectorFactory factory = [p](std::uint64_t seed) {
    return std::make_unique<BernoulliCrossDetector>(p, seed);
  };
  const ArlFit fit = estimate_arl(factory, unit_source(), 0.5, horizon, n, 42, 1);
  const double expected_rate = -std::log1p(-p);
  CHECK(!fit.degenerate);
  CHECK(fit.rate == doctest::Approx(expected_rate).epsilon(0.05));
  CHECK(fit.arl_estimate == doctest::Approx(1.0 / expected_rate).epsilon(0.05));
}

TEST_CASE("arl fit flags degenerate crossing fractions") {
  const std::vector<double> none(50, 0.0);
  const ArlFit never = arl_fit_from_maxes(none, 0.5, 100);
  CHECK(never.degenerate);
  CHECK(std::isinf(never.arl_estimate));

  const std::vector<double> all(50, 2.0);
  const ArlFit always = arl_fit_from_maxes(all, 0.5, 100);
  CHECK(always.degenerate);
  CHECK(always.arl_estimate == 0.0);
}

TEST_CASE("arl estimate is nondecreasing in the threshold on fixed runs") {
  auto rng = make_rng(7);
  std::normal_distribution<double> noise(1.0, 0.7);
  std::vector<double> maxes(400);
  for (auto& m : maxes) m = std::abs(noise(rng));
  double prev = 0.0;
  for (double b = 0.1; b < 3.0; b += 0.1) {
    const ArlFit fit = arl_fit_from_maxes(maxes, b, 1000);
    const double arl = std::isfinite(fit.arl_estimate)
                           ? fit.arl_estimate
                           : std::numeric_limits<double>::max();
    CHECK(arl >= prev);
    prev = arl;
  }
}

TEST_CASE("threshold calibration recovers the geometric inversion") {
  // For the Bernoulli detector the max statistic is Bernoulli itself, so
  // only degenerate thresholds exist; calibrate on a graded statistic
  // instead: max ~ Uniform via scripted per-sequence values.
  const std::int64_t horizon = 500;
  const double target = 2000.0;
  // Build maxes so that arl(b) is smooth: max_i = quantile of an exponential.
  std::vector<double> maxes;
  auto rng = make_rng(9);
  std::exponential_distribution<double> expo(1.0);
  for (int i = 0; i < 4000; ++i) maxes.push_back(expo(rng));

  // Invert manually: p* = 1 - exp(-T/target)
  const double p_star = -std::expm1(-static_cast<double>(horizon) / target);
  std::vector<double> sorted = maxes;
  std::sort(sorted.begin(), sorted.end());
  const double b_expected =
      sorted[static_cast<std::size_t>((1.0 - p_star) * sorted.size())];

  // Drive the public bisection through scripted detectors that report the
  // pre-drawn max at their first observation.
  std::shared_ptr<std::vector<double>> shared =
      std::make_shared<std::vector<double>>(maxes);
  DetectorFactory factory = [shared](std::uint64_t seed) {
    class OneShot : public StreamingDetector {
     public:
      OneShot(double v) : v_(v) {}
      void reset() override {}
      int dim() const override { return 1; }
      int stride() const override { return 1; }
      double current_statistic() const override { return v_; }
      std::vector<DetectorVerdict> observe_batch(const Matrix& rows) override {
        std::vector<DetectorVerdict> out;
        for (std::size_t r = 0; r < rows.rows; ++r) {
          ++step_;
          out.push_back({step_ == 1 ? v_ : 0.0, false, step_, 0.0});
        }
        return out;
      }
     private:
      double v_;
      std::int64_t step_ = 0;
    };
    // Detector seeds derive from the sequence index deterministically, so
    // recover an index by hashing into the table.
    return std::make_unique<OneShot>((*shared)[seed % shared->size()]);
  };
  const CalibrationResult cal = calibrate_threshold(
      factory, unit_source(), target, horizon, static_cast<int>(maxes.size()),
      31, 1, 0.1);
  CHECK(!cal.lower_bounded);
  CHECK(std::abs(cal.fit.arl_estimate - target) / target < 0.1);
  // The bisected threshold sits in the right region of the max distribution.
  CHECK(cal.threshold == doctest::Approx(b_expected).epsilon(0.25));
}

TEST_CASE("calibration handles the all-zero degenerate statistic") {
  DetectorFactory factory = [](std::uint64_t) {
    class Zero : public StreamingDetector {
     public:
      void reset() override {}
      int dim() const override { return 1; }
      int stride() const override { return 1; }
      double current_statistic() const override { return 0.0; }
      std::vector<DetectorVerdict> observe_batch(const Matrix& rows) override {
        std::vector<DetectorVerdict> out;
        for (std::size_t r = 0; r < rows.rows; ++r) {
          ++step_;
          out.push_back({0.0, false, step_, 0.0});
        }
        return out;
      }
     private:
      std::int64_t step_ = 0;
    };
    return std::make_unique<Zero>();
  };
  const CalibrationResult cal =
      calibrate_threshold(factory, unit_source(), 5000.0, 200, 50, 3, 1);
  CHECK(cal.lower_bounded);
  CHECK(cal.threshold > 0.0);
  CHECK(std::isinf(cal.fit.arl_estimate));
}

TEST_CASE("type1 threshold is the requested quantile of pre-change maxima") {
  // Deterministic per-sequence maxima 1..100 at the first observation.
  DetectorFactory factory = [](std::uint64_t seed) {
    class OneShot : public StreamingDetector {
     public:
      OneShot(double v) : v_(v) {}
      void reset() override {}
      int dim() const override { return 1; }
      int stride() const override { return 1; }
      double current_statistic() const override { return v_; }
      std::vector<DetectorVerdict> observe_batch(const Matrix& rows) override {
        std::vector<DetectorVerdict> out;
        for (std::size_t r = 0; r < rows.rows; ++r) {
          ++step_;
          out.push_back({step_ == 1 ? v_ : 0.0, false, step_, 0.0});
        }
        return out;
      }
     private:
      double v_;
      std::int64_t step_ = 0;
    };
    return std::make_unique<OneShot>(static_cast<double>(seed % 100) + 1.0);
  };
  // Seeds map onto 1..100 with a uniform permutation; the median is ~50.
  bool boundary = false;
  const double b = calibrate_threshold_type1(factory, unit_source(), 0.5, 10,
                                             20, 100, 77, 1, &boundary);
  CHECK(!boundary);
  CHECK(b >= 40.0);
  CHECK(b <= 60.0);

  // target -> 0 with finite n lands on the largest observed maximum.
  bool at_boundary = false;
  const double bmax = calibrate_threshold_type1(factory, unit_source(), 1e-9,
                                                10, 20, 100, 77, 1, &at_boundary);
  CHECK(at_boundary);
  CHECK(bmax >= 99.0);
}

TEST_CASE("evaluate computes delay, censoring, and both error rates") {
  const std::int64_t k = 50, horizon = 200;
  // Ramp starts at the change point: first crossing of b at obs k + ceil(b)+1.
  DetectorFactory factory = [k](std::uint64_t) {
    return std::make_unique<RampDetector>(k);
  };
  const double b = 10.0;
  const MetricReport r =
      evaluate(factory, unit_source(), k, horizon, b, 40, 5, 1);
  CHECK(r.edd == doctest::Approx(11.0));  // ramp value 11 at delay 11
  CHECK(r.edd_se == doctest::Approx(0.0));
  CHECK(r.type1_error == 0.0);
  CHECK(r.failure_rate == 0.0);
  CHECK(r.censored_count == 0);

  // Threshold beyond the ramp cap: everything censors at horizon - k.
  const MetricReport c =
      evaluate(factory, unit_source(), k, horizon, 1e9, 40, 5, 1);
  CHECK(c.censored_count == 40);
  CHECK(c.failure_rate == 1.0);
  CHECK(c.edd == doctest::Approx(static_cast<double>(horizon - k)));
}

TEST_CASE("censoring accounting ties out exactly") {
  const std::int64_t k = 20, horizon = 100;
  DetectorFactory factory = [](std::uint64_t seed) {
    return std::make_unique<BernoulliCrossDetector>(0.015, seed);
  };
  const MetricReport r =
      evaluate(factory, unit_source(), k, horizon, 0.5, 300, 11, 1);
  // edd * n = sum of delays; censored delays are exactly horizon - k.
  const double total = r.edd * r.n_sequences;
  const double detected_total =
      r.edd_conditional * (r.n_sequences - r.censored_count);
  const double censored_total =
      static_cast<double>(horizon - k) * r.censored_count;
  CHECK(total == doctest::Approx(detected_total + censored_total).epsilon(1e-12));
}

TEST_CASE("exponential tail fit recovers a geometric rate") {
  auto rng = make_rng(13);
  std::geometric_distribution<std::int64_t> geo(0.004);
  const std::int64_t horizon = 3000;
  std::vector<std::optional<std::int64_t>> taus;
  for (int i = 0; i < 2000; ++i) {
    const std::int64_t t = geo(rng) + 1;
    if (t <= horizon) {
      taus.emplace_back(t);
    } else {
      taus.emplace_back(std::nullopt);
    }
  }
  const ExponentialTailFit fit = fit_exponential_tail(taus, horizon);
  CHECK(fit.rate == doctest::Approx(-std::log1p(-0.004)).epsilon(0.08));
  CHECK(fit.ks_distance < 0.05);
  CHECK(fit.n_crossed + (2000 - fit.n_crossed) == fit.n_total);
}

TEST_CASE("simulation results are independent of worker count") {
  DetectorFactory factory = [](std::uint64_t seed) {
    return std::make_unique<BernoulliCrossDetector>(0.01, seed);
  };
  const auto one = simulate_runs(factory, unit_source(), 300, 50, 99, 1);
  const auto four = simulate_runs(factory, unit_source(), 300, 50, 99, 4);
  REQUIRE(one.size() == four.size());
  for (std::size_t i = 0; i < one.size(); ++i)
    CHECK(one[i].statistics == four[i].statistics);
}

TEST_CASE("type1 threshold transfers to fresh sequences within a binomial CI") {
  // Continuous per-step statistic so the pre-change maximum has a smooth
  // distribution and the quantile is well defined.
  class NoiseDetector : public StreamingDetector {
   public:
    explicit NoiseDetector(std::uint64_t seed) : seed_(seed), rng_(make_rng(seed)) {}
    void reset() override { rng_ = make_rng(seed_); step_ = 0; }
    int dim() const override { return 1; }
    int stride() const override { return 1; }
    double current_statistic() const override { return 0.0; }
    std::vector<DetectorVerdict> observe_batch(const Matrix& rows) override {
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      std::vector<DetectorVerdict> out;
      for (std::size_t r = 0; r < rows.rows; ++r) {
        const double v = unif(rng_);
        out.push_back({v, false, ++step_, v});
      }
      return out;
    }
   private:
    std::uint64_t seed_;
    std::mt19937_64 rng_;
    std::int64_t step_ = 0;
  };

  const double target = 0.2;
  const std::int64_t k = 40, horizon = 200;
  DetectorFactory factory = [](std::uint64_t seed) {
    return std::make_unique<NoiseDetector>(seed);
  };
  const double b = calibrate_threshold_type1(factory, unit_source(), target, k,
                                             horizon, 2000, 123, 1);
  const MetricReport fresh =
      evaluate(factory, unit_source(), k, horizon, b, 2000, 456, 1);
  const double band = 4.0 * std::sqrt(target * (1.0 - target) / 2000.0) + 0.01;
  CHECK(std::abs(fresh.type1_error - target) < band);
}

#include <filesystem>
#include <map>

#include "cpd/config.hpp"

namespace {

cpd::ExperimentConfig tiny_campaign_config() {
  cpd::ExperimentConfig config;
  config.master_seed = 424242;
  config.workers = 1;
  cpd::DetectorConfig exact;
  exact.name = "exact";
  exact.kind = "exact_cusum";
  cpd::DetectorConfig mewma;
  mewma.name = "mewma";
  mewma.kind = "mewma";
  config.detectors = {exact, mewma};
  cpd::ExampleConfig ex;
  ex.name = "gm";
  ex.preset = "gaussian_mean_08";
  ex.dim = 4;
  config.examples = {ex};
  config.campaign.change_point = 40;
  config.campaign.horizon = 240;
  config.campaign.n_sequences = 5;
  config.campaign.calibration_sequences = 30;
  config.campaign.target_arl = 400.0;
  config.campaign.reference_pool = 800;
  return config;
}

std::map<std::string, cpd::MetricReport> campaign_reports(
    const cpd::ExperimentConfig& config, const std::string& dir) {
  std::filesystem::remove_all(dir);
  std::map<std::string, cpd::MetricReport> by_cell;
  for (const auto& cell : cpd::run_campaign(config, dir)) {
    REQUIRE(cell.error.empty());
    by_cell[cell.report.detector + "/" + cell.report.example] = cell.report;
  }
  std::filesystem::remove_all(dir);
  return by_cell;
}

}  // namespace

TEST_CASE("campaign cells do not depend on grid order") {
  const auto base = std::filesystem::temp_directory_path() / "cpd_eval_order";
  cpd::ExperimentConfig config = tiny_campaign_config();
  const auto forward = campaign_reports(config, (base / "f").string());
  std::swap(config.detectors[0], config.detectors[1]);
  const auto swapped = campaign_reports(config, (base / "s").string());
  REQUIRE(forward.size() == swapped.size());
  for (const auto& [key, report] : forward) {
    const auto& other = swapped.at(key);
    CHECK(report.edd == other.edd);
    CHECK(report.threshold == other.threshold);
    CHECK(report.type1_error == other.type1_error);
  }
}

TEST_CASE("a single-cell campaign equals the direct pipeline bitwise") {
  cpd::ExperimentConfig config = tiny_campaign_config();
  config.detectors.resize(1);  // exact only
  const auto base = std::filesystem::temp_directory_path() / "cpd_eval_single";
  const auto reports = campaign_reports(config, base.string());
  const cpd::MetricReport& from_campaign = reports.at("exact/gm");

  const cpd::CellSetup setup =
      cpd::make_cell_setup(config, config.detectors[0], config.examples[0]);
  const std::uint64_t cell_seed = cpd::derive_seed(
      config.master_seed, cpd::fnv1a("exact"), cpd::fnv1a("gm"));
  const cpd::CalibrationResult cal = cpd::calibrate_threshold(
      setup.factory, setup.pre_source, 400.0, config.campaign.horizon, 30,
      cpd::derive_seed(cell_seed, 1, "calibration"), 1, 0.1);
  const cpd::MetricReport direct = cpd::evaluate(
      setup.factory, setup.change_source, 40, 240, cal.threshold, 5,
      cpd::derive_seed(cell_seed, 2, "evaluation"), 1);

  CHECK(from_campaign.threshold == cal.threshold);
  CHECK(from_campaign.edd == direct.edd);
  CHECK(from_campaign.edd_se == direct.edd_se);
  CHECK(from_campaign.type1_error == direct.type1_error);
  CHECK(from_campaign.failure_rate == direct.failure_rate);
}
