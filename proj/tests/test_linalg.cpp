#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "cpd/linalg.hpp"
#include "cpd/rng.hpp"

using namespace cpd;

TEST_CASE("cholesky solves a hand-checked 2x2 system") {
  Matrix a(2, 2);
  a.at(0, 0) = 4.0;
  a.at(0, 1) = 2.0;
  a.at(1, 0) = 2.0;
  a.at(1, 1) = 3.0;
  const auto chol = CholeskyFactor::compute(a);

  // A = L L^T with L = [[2, 0], [1, sqrt(2)]]
  CHECK(chol.lower().at(0, 0) == doctest::Approx(2.0));
  CHECK(chol.lower().at(1, 0) == doctest::Approx(1.0));
  CHECK(chol.lower().at(1, 1) == doctest::Approx(std::sqrt(2.0)));
  CHECK(chol.log_det() == doctest::Approx(std::log(8.0)));

  // explicit inverse: (1/8) [[3, -2], [-2, 4]]
  std::vector<double> v = {1.0, -1.0};
  const double expected = (3.0 * 1 - 2.0 * (-1) * 2 + 4.0 * 1) / 8.0;
  CHECK(chol.quad_form_inv(v) == doctest::Approx(expected));

  std::vector<double> b = {1.0, 2.0};
  chol.solve(b);
  CHECK(4.0 * b[0] + 2.0 * b[1] == doctest::Approx(1.0));
  CHECK(2.0 * b[0] + 3.0 * b[1] == doctest::Approx(2.0));
}

TEST_CASE("cholesky rejects a non positive definite matrix") {
  Matrix a(2, 2);
  a.at(0, 0) = 1.0;
  a.at(0, 1) = 2.0;
  a.at(1, 0) = 2.0;
  a.at(1, 1) = 1.0;
  CHECK_THROWS(CholeskyFactor::compute(a));
}

TEST_CASE("mvn log density matches the standard normal formula") {
  Matrix eye(3, 3);
  for (int i = 0; i < 3; ++i) eye.at(i, i) = 1.0;
  const auto chol = CholeskyFactor::compute(eye);
  std::vector<double> mean = {0.0, 0.0, 0.0};
  std::vector<double> x = {0.5, -1.0, 2.0};
  double expected = 0.0;
  for (double v : x)
    expected += -0.5 * v * v - 0.5 * std::log(2.0 * std::numbers::pi);
  CHECK(mvn_log_density(x, mean, chol) == doctest::Approx(expected));
}

TEST_CASE("sample moments recover a known covariance") {
  Matrix cov(2, 2);
  cov.at(0, 0) = 2.0;
  cov.at(0, 1) = 0.8;
  cov.at(1, 0) = 0.8;
  cov.at(1, 1) = 1.0;
  const auto chol = CholeskyFactor::compute(cov);

  auto rng = make_rng(42);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t n = 200000;
  Matrix obs(n, 2);
  std::vector<double> z(2), mean = {1.0, -2.0};
  for (std::size_t i = 0; i < n; ++i) {
    z[0] = normal(rng);
    z[1] = normal(rng);
    chol.affine(mean, z, obs.row(i));
  }
  std::vector<double> mean_hat;
  Matrix cov_hat;
  sample_moments(obs, mean_hat, cov_hat);
  CHECK(mean_hat[0] == doctest::Approx(1.0).epsilon(0.02));
  CHECK(mean_hat[1] == doctest::Approx(-2.0).epsilon(0.02));
  CHECK(cov_hat.at(0, 0) == doctest::Approx(2.0).epsilon(0.03));
  CHECK(cov_hat.at(0, 1) == doctest::Approx(0.8).epsilon(0.05));
  CHECK(cov_hat.at(1, 1) == doctest::Approx(1.0).epsilon(0.03));
}
