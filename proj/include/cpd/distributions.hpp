#pragma once

// Samplers and exact log-densities for the simulation benchmark: Gaussian
// mean/covariance shifts, log-Gaussian, Gaussian mixture, noncentral
// chi-square, Pareto, and four mean-matched shifted families. Each named
// example is a pre/post pair; samplers are pure functions of their seed.

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cpd/linalg.hpp"
#include "cpd/matrix.hpp"

namespace cpd {

enum class DistKind {
  gaussian_mean,
  gaussian_cov,
  log_gaussian,
  gmm,
  noncentral_chisq,
  pareto,
  exponential_shift,
  gamma_shift,
  weibull_shift,
  gompertz_shift,
};

enum class ShiftedFamily { exponential, gamma, weibull, gompertz };

class DistributionSpec {
 public:
  // Gaussian with identity covariance.
  static DistributionSpec gaussian_mean(int dim, std::vector<double> mean);
  // Zero-mean Gaussian with general covariance.
  static DistributionSpec gaussian_cov(int dim, Matrix covariance);
  // exp of a zero-mean Gaussian.
  static DistributionSpec log_gaussian(int dim, Matrix covariance);
  static DistributionSpec gmm(int dim, std::vector<double> weights,
                              std::vector<std::vector<double>> means,
                              std::vector<Matrix> covariances);
  // Coordinate-iid noncentral chi-square; one noncentrality per coordinate.
  static DistributionSpec noncentral_chisq(int dim, double degrees_of_freedom,
                                           std::vector<double> noncentrality);
  static DistributionSpec pareto(int dim, double x_min, double shape);
  // Coordinate-iid shifted family: sample = shift + family(shape, scale).
  static DistributionSpec shifted(ShiftedFamily family, int dim, double shape,
                                  double scale, double shift);

  DistKind kind() const { return kind_; }
  int dim() const { return dim_; }

  void sample_into(std::mt19937_64& rng, std::span<double> out) const;
  Matrix sample(std::int64_t n, std::uint64_t seed) const;
  // Exact log-density; -inf outside the support, throws on non-finite input.
  double log_density(std::span<const double> x) const;

 private:
  DistributionSpec() = default;

  DistKind kind_{};
  int dim_ = 0;

  // gaussian_mean
  std::vector<double> mean_;
  // gaussian_cov / log_gaussian
  std::shared_ptr<const CholeskyFactor> chol_;
  double cov_log_det_ = 0.0;
  // gmm
  std::vector<double> weights_;
  std::vector<std::vector<double>> comp_means_;
  std::vector<std::shared_ptr<const CholeskyFactor>> comp_chols_;
  // noncentral chi-square
  double df_ = 0.0;
  std::vector<double> noncentrality_;
  // pareto
  double x_min_ = 0.0;
  double pareto_shape_ = 0.0;
  // shifted families
  ShiftedFamily family_{};
  double shape_ = 0.0;
  double scale_ = 0.0;
  double shift_ = 0.0;
};

// Log-density of one noncentral chi-square coordinate; exposed for tests.
double noncentral_chisq_log_density(double x, double degrees_of_freedom,
                                    double noncentrality);

struct ExamplePair {
  std::string name;
  DistributionSpec pre;
  DistributionSpec post;
};

// Named pre/post presets for the simulation benchmark. Unknown name throws.
//   gaussian_mean        sparse mean shift, delta = 0.1
//   gaussian_mean_08     same shape with delta = 0.8
//   gaussian_cov         sparse equicorrelation shift, rho = 0.1
//   log_gaussian         covariance shift under exp
//   gmm                  third component at 0 with correlated covariance
//   gmm_window           third component at (13/5) * ones
//   noncentral_chisq     noncentrality 1 -> 0.6 on 4 sparse coordinates
//   pareto               shape 2 -> 2.5, x_min 1
//   exponential          scale 1 -> 0.8, mean-matched location shift
//   gamma                scale 0.5 -> 0.4, shape 1.5, mean-matched shift
//   weibull              scale 1 -> 0.6, shape 1.5, mean-matched shift
//   gompertz             scale 1.5 -> 1, shape 1, mean-matched shift
ExamplePair make_example(const std::string& name, int dim);

std::vector<std::string> example_names();

// First `pre_length` rows from `pre`, the rest from `post`.
ObservationSequence build_sequence(const DistributionSpec& pre,
                                   const DistributionSpec& post,
                                   std::int64_t pre_length,
                                   std::int64_t total_length,
                                   std::uint64_t seed);

}  // namespace cpd
