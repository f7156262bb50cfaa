#include "cpd/linalg.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "cpd/kernels.hpp"

namespace cpd {

CholeskyFactor CholeskyFactor::compute(const Matrix& a) {
  if (a.rows != a.cols) throw std::invalid_argument("cholesky: matrix not square");
  const std::size_t n = a.rows;
  CholeskyFactor f;
  f.l_ = Matrix(n, n);
  Matrix& l = f.l_;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a.at(i, j);
      s -= kernels::dot(l.data.data() + i * n, l.data.data() + j * n, j);
      if (i == j) {
        if (s <= 0.0 || !std::isfinite(s))
          throw std::runtime_error("cholesky: matrix not positive definite");
        l.at(i, i) = std::sqrt(s);
      } else {
        l.at(i, j) = s / l.at(j, j);
      }
    }
  }
  f.scratch_.resize(n);
  return f;
}

void CholeskyFactor::solve_lower(std::span<double> b) const {
  const std::size_t n = dim();
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i] - kernels::dot(l_.data.data() + i * n, b.data(), i);
    b[i] = s / l_.at(i, i);
  }
}

void CholeskyFactor::solve(std::span<double> b) const {
  const std::size_t n = dim();
  solve_lower(b);
  // back substitution with L^T
  for (std::size_t ii = n; ii-- > 0;) {
    double s = b[ii];
    for (std::size_t j = ii + 1; j < n; ++j) s -= l_.at(j, ii) * b[j];
    b[ii] = s / l_.at(ii, ii);
  }
}

double CholeskyFactor::quad_form_inv(std::span<const double> v) const {
  const std::size_t n = dim();
  if (v.size() != n) throw std::invalid_argument("quad_form_inv: size mismatch");
  scratch_.assign(v.begin(), v.end());
  solve_lower(scratch_);
  return kernels::dot(scratch_.data(), scratch_.data(), n);
}

double CholeskyFactor::log_det() const {
  double s = 0.0;
  for (std::size_t i = 0; i < dim(); ++i) s += std::log(l_.at(i, i));
  return 2.0 * s;
}

void CholeskyFactor::affine(std::span<const double> mean,
                            std::span<const double> z,
                            std::span<double> out) const {
  const std::size_t n = dim();
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = mean[i] + kernels::dot(l_.data.data() + i * n, z.data(), i + 1);
  }
}

double mvn_log_density(std::span<const double> x, std::span<const double> mean,
                       const CholeskyFactor& chol) {
  const std::size_t n = chol.dim();
  std::vector<double> centered(n);
  for (std::size_t i = 0; i < n; ++i) centered[i] = x[i] - mean[i];
  const double qf = chol.quad_form_inv(centered);
  return -0.5 * qf - 0.5 * chol.log_det() -
         0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
}

void sample_moments(const Matrix& obs, std::vector<double>& mean_out,
                    Matrix& cov_out) {
  if (obs.rows < 2) throw std::invalid_argument("sample_moments: need >= 2 rows");
  const std::size_t n = obs.rows;
  const std::size_t d = obs.cols;
  mean_out.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    kernels::axpy(1.0, obs.data.data() + i * d, mean_out.data(), d);
  }
  kernels::scal(1.0 / static_cast<double>(n), mean_out.data(), d);
  cov_out = Matrix(d, d);
  std::vector<double> centered(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) centered[j] = obs.at(i, j) - mean_out[j];
    kernels::ger(cov_out.data.data(), 1.0, centered.data(), centered.data(), d, d);
  }
  kernels::scal(1.0 / static_cast<double>(n - 1), cov_out.data.data(), d * d);
}

}  // namespace cpd
