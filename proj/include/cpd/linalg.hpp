#pragma once

#include <span>
#include <vector>

#include "cpd/matrix.hpp"

namespace cpd {

// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
class CholeskyFactor {
 public:
  static CholeskyFactor compute(const Matrix& a);  // throws if not SPD

  std::size_t dim() const { return l_.rows; }
  const Matrix& lower() const { return l_; }

  // Solve L y = b in place.
  void solve_lower(std::span<double> b) const;
  // Solve A x = b in place (forward then backward substitution).
  void solve(std::span<double> b) const;
  // v^T A^{-1} v = |L^{-1} v|^2
  double quad_form_inv(std::span<const double> v) const;
  // log det A
  double log_det() const;
  // out = mean + L z
  void affine(std::span<const double> mean, std::span<const double> z,
              std::span<double> out) const;

 private:
  Matrix l_;
  mutable std::vector<double> scratch_;
};

double mvn_log_density(std::span<const double> x, std::span<const double> mean,
                       const CholeskyFactor& chol);

// Sample mean and covariance (denominator n-1) of the rows of `obs`.
void sample_moments(const Matrix& obs, std::vector<double>& mean_out,
                    Matrix& cov_out);

}  // namespace cpd
