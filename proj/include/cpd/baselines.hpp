#pragma once

// The seven comparison detectors, all behind the StreamingDetector contract.
// Exact CUSUM, Hotelling CUSUM and the window-limited pair are per-observation
// CUSUM charts; MEWMA and the window-limited GLR threshold their instantaneous
// statistic, as do the two stack-based network baselines.

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>

#include "cpd/cusum.hpp"
#include "cpd/distributions.hpp"
#include "cpd/linalg.hpp"
#include "cpd/nn_cusum.hpp"

namespace cpd {

struct GaussianMoments {
  std::vector<double> mean;
  Matrix covariance;        // as estimated, before regularization
  double regularizer = 0.0; // nu added to the diagonal
  int count = 0;

  // Sample moments of the rows plus a diagonal regularizer; nu_scale scales
  // trace(cov)/d into nu.
  static GaussianMoments estimate(const Matrix& reference, double nu_scale);

  const CholeskyFactor& regularized_chol() const { return *chol_; }

 private:
  std::shared_ptr<const CholeskyFactor> chol_;
};

// --- Exact CUSUM ------------------------------------------------------------

class ExactCusumDetector : public StreamingDetector {
 public:
  ExactCusumDetector(DistributionSpec pre, DistributionSpec post,
                     double threshold);

  void reset() override;
  int dim() const override { return pre_.dim(); }
  int stride() const override { return 1; }
  double current_statistic() const override { return state_.statistic; }
  std::vector<DetectorVerdict> observe_batch(const Matrix& rows) override;

 private:
  DistributionSpec pre_;
  DistributionSpec post_;
  CusumState state_;
};

// Single-observation update; exposed for oracle tests.
CusumState exact_cusum_step(CusumState state, std::span<const double> x,
                            const DistributionSpec& pre,
                            const DistributionSpec& post);

// --- Hotelling CUSUM --------------------------------------------------------

// Half the regularized Mahalanobis distance to the reference mean.
double hotelling_quadratic(const GaussianMoments& moments,
                           std::span<const double> x);

class HotellingCusumDetector : public StreamingDetector {
 public:
  // offset is subtracted from every quadratic so pre-change increments are
  // negative on average; see offset_from_holdout.
  HotellingCusumDetector(GaussianMoments moments, double offset,
                         double threshold);

  // Sample mean of the quadratic on held-out reference rows, inflated by
  // epsilon_scale.
  static double offset_from_holdout(const GaussianMoments& moments,
                                    const Matrix& holdout,
                                    double epsilon_scale = 0.05);

  void reset() override;
  int dim() const override { return static_cast<int>(moments_.mean.size()); }
  int stride() const override { return 1; }
  double current_statistic() const override { return state_.statistic; }
  std::vector<DetectorVerdict> observe_batch(const Matrix& rows) override;

 private:
  GaussianMoments moments_;
  double offset_;
  CusumState state_;
};

// --- MEWMA ------------------------------------------------------------------

struct MewmaState {
  double decay = 0.2;            // r in (0, 1]
  std::vector<double> smoothed;  // z_t, starts at 0
  std::int64_t t = 0;
};

// Covariance scale r(1-(1-r)^{2t}) / (2-r) applied to the base covariance.
double mewma_covariance_scale(double decay, std::int64_t t);

// Advances z and returns the Mahalanobis statistic against the
// time-dependent covariance of z_t under the base covariance.
double mewma_step(MewmaState& state, std::span<const double> x,
                  const CholeskyFactor& base_chol);

class MewmaDetector : public StreamingDetector {
 public:
  MewmaDetector(double decay, Matrix base_covariance, double threshold);

  void reset() override;
  int dim() const override { return dim_; }
  int stride() const override { return 1; }
  double current_statistic() const override { return statistic_; }
  std::vector<DetectorVerdict> observe_batch(const Matrix& rows) override;

 private:
  int dim_;
  double threshold_;
  std::shared_ptr<const CholeskyFactor> chol_;
  MewmaState state_;
  double statistic_ = 0.0;
  std::int64_t emitted_ = 0;
};

// --- Window-limited CUSUM ---------------------------------------------------

// Gaussian mean-shift form: the window mean replaces the unknown post-change
// mean, the reference covariance is kept for both densities.
class WlCusumDetector : public StreamingDetector {
 public:
  WlCusumDetector(int window, GaussianMoments moments, double threshold);

  void reset() override;
  int dim() const override { return static_cast<int>(moments_.mean.size()); }
  int stride() const override { return 1; }
  double current_statistic() const override { return state_.statistic; }
  std::vector<DetectorVerdict> observe_batch(const Matrix& rows) override;

 private:
  int window_;
  GaussianMoments moments_;
  CusumState state_;
  std::deque<std::vector<double>> buffer_;
  std::vector<double> window_sum_;
};

// Log-density ratio with the window-mean estimate; exposed for oracle tests.
double wl_cusum_increment(std::span<const double> x,
                          std::span<const double> window_mean,
                          const GaussianMoments& moments);

// --- Window-limited GLR -----------------------------------------------------

class WlGlrDetector : public StreamingDetector {
 public:
  WlGlrDetector(int window, GaussianMoments moments, double threshold);

  void reset() override;
  int dim() const override { return static_cast<int>(moments_.mean.size()); }
  int stride() const override { return 1; }
  double current_statistic() const override { return statistic_; }
  std::vector<DetectorVerdict> observe_batch(const Matrix& rows) override;

 private:
  int window_;
  GaussianMoments moments_;
  double threshold_;
  double statistic_ = 0.0;
  std::int64_t emitted_ = 0;
  // Whitened centered prefix sums Q_i for the last `window_`+1 indices; the
  // statistic is max_i |Q_t - Q_i|^2 / (t - i).
  std::deque<std::vector<double>> prefix_;
};

// Brute-force evaluation over explicit split points; oracle for the detector.
double wl_glr_statistic(const Matrix& window_rows,
                        const GaussianMoments& moments);

// --- Stack-based network baselines -------------------------------------------

// Shewhart chart on the mean log-odds gap of a sigmoid classifier trained on
// the sliding stacks.
class OnncDetector : public WindowedNetDetector {
 public:
  OnncDetector(const NnDetectorConfig& config,
               std::shared_ptr<const ReferencePool> pool);

  double current_statistic() const override { return statistic_; }
  const MlpModel& model() const { return model_; }

 protected:
  void reset_state() override;
  std::optional<DetectorVerdict> process_stride(bool emitting) override;

 private:
  NnDetectorConfig detector_config_;
  MlpModel model_;
  AdamState opt_;
  double statistic_ = 0.0;
  std::int64_t emitted_ = 0;
};

// Statistic exactly as defined for ONNC: probabilities are clamped away from
// {0,1} by 1e-7 before the logs.
double onnc_statistic(const MlpModel& model, const SlidingStacks& stacks);

struct OnnrPair {
  MlpModel model_a;  // reference-weighted loss
  MlpModel model_b;  // stream-weighted loss (roles swapped)
  double weight = 0.5;
};

// Shewhart chart on the two-network regression statistic
// mean(g_a - 1 on stream test) + mean(g_b - 1 on reference test).
class OnnrDetector : public WindowedNetDetector {
 public:
  OnnrDetector(const NnDetectorConfig& config,
               std::shared_ptr<const ReferencePool> pool);

  double current_statistic() const override { return statistic_; }
  const OnnrPair& pair() const { return pair_; }

 protected:
  void reset_state() override;
  std::optional<DetectorVerdict> process_stride(bool emitting) override;

 private:
  NnDetectorConfig detector_config_;
  OnnrPair pair_;
  AdamState opt_a_;
  AdamState opt_b_;
  double statistic_ = 0.0;
  std::int64_t emitted_ = 0;
};

double onnr_statistic(const OnnrPair& pair, const SlidingStacks& stacks);

}  // namespace cpd
