#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "cpd/distributions.hpp"
#include "cpd/rng.hpp"
#include "cpd/specfun.hpp"

using namespace cpd;

namespace {

// Independent long-double series for the noncentral chi-square density,
// accumulated in linear space with explicit Poisson weights.
long double noncentral_chisq_pdf_oracle(long double x, long double k,
                                        long double lambda) {
  long double sum = 0.0L;
  long double pois = std::exp(-lambda / 2.0L);
  for (int j = 0; j < 200; ++j) {
    const long double half_df = k / 2.0L + j;
    const long double chi2 =
        std::exp((half_df - 1.0L) * std::log(x) - x / 2.0L -
                 half_df * std::log(2.0L) - std::lgamma((double)half_df));
    sum += pois * chi2;
    pois *= (lambda / 2.0L) / (j + 1.0L);
  }
  return sum;
}

double coordinate_mean(const Matrix& m, std::size_t col) {
  double acc = 0.0;
  for (std::size_t r = 0; r < m.rows; ++r) acc += m.at(r, col);
  return acc / static_cast<double>(m.rows);
}

}  // namespace

TEST_CASE("gaussian mean preset: sample mean near zero pre-change") {
  const auto pair = make_example("gaussian_mean", 8);
  const Matrix draws = pair.pre.sample(100000, 11);
  for (std::size_t c = 0; c < 8; ++c) {
    // 3 standard errors of a unit normal mean over 1e5 draws
    CHECK(std::abs(coordinate_mean(draws, c)) < 3.0 / std::sqrt(100000.0));
  }
  // Post-change mean shift appears on the first three coordinates only.
  const Matrix post = pair.post.sample(100000, 12);
  CHECK(coordinate_mean(post, 0) == doctest::Approx(0.1).epsilon(0.15));
  CHECK(std::abs(coordinate_mean(post, 3)) < 3.0 / std::sqrt(100000.0));
}

TEST_CASE("pareto moments and density values") {
  const auto spec = DistributionSpec::pareto(1, 1.0, 2.5);
  const Matrix draws = spec.sample(200000, 3);
  // mean = b x_m / (b - 1) = 5/3
  CHECK(coordinate_mean(draws, 0) == doctest::Approx(5.0 / 3.0).epsilon(0.02));
  for (std::size_t r = 0; r < draws.rows; ++r) CHECK(draws.at(r, 0) >= 1.0);

  const auto spec2 = DistributionSpec::pareto(1, 1.0, 2.0);
  std::vector<double> x = {2.0};
  CHECK(spec2.log_density(x) == doctest::Approx(std::log(0.25)));
  std::vector<double> below = {0.5};
  CHECK(spec2.log_density(below) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("gmm preset symmetric moments") {
  const auto pair = make_example("gmm", 4);
  const Matrix draws = pair.pre.sample(200000, 17);
  for (std::size_t c = 0; c < 4; ++c) {
    CHECK(std::abs(coordinate_mean(draws, c)) < 0.03);
    double var = 0.0;
    for (std::size_t r = 0; r < draws.rows; ++r) {
      const double v = draws.at(r, c);
      var += v * v;
    }
    var /= static_cast<double>(draws.rows);
    CHECK(var == doctest::Approx(5.0).epsilon(0.03));  // 1 + 2^2
  }
}

TEST_CASE("exponential log density at pinned points") {
  const auto spec = DistributionSpec::shifted(ShiftedFamily::exponential, 2, 1.0, 1.0, 0.0);
  std::vector<double> zero = {0.0, 0.0};
  CHECK(spec.log_density(zero) == doctest::Approx(0.0));  // f(0) = 1 per coord
  std::vector<double> x = {1.0, 2.0};
  CHECK(spec.log_density(x) == doctest::Approx(-3.0));
}

TEST_CASE("noncentral chi-square log density matches the long-double oracle") {
  for (double x : {0.3, 0.8, 1.7, 4.2, 9.0}) {
    const double ours = noncentral_chisq_log_density(x, 0.5, 1.0);
    const long double oracle = noncentral_chisq_pdf_oracle(x, 0.5L, 1.0L);
    CHECK(ours == doctest::Approx(std::log((double)oracle)).epsilon(1e-10));
  }
  // Zero noncentrality reduces to the central chi-square.
  const double central = noncentral_chisq_log_density(1.3, 0.5, 0.0);
  const double expected = (0.25 - 1.0) * std::log(1.3) - 0.65 -
                          0.25 * std::log(2.0) - std::lgamma(0.25);
  CHECK(central == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("noncentral chi-square density integrates to one") {
  // The density has an x^{-3/4} singularity at zero for df = 0.5, so
  // integrate under x = u^4: f(u^4) 4u^3 is bounded near the origin.
  const int steps = 200000;
  const double lo = 1e-7, hi = std::pow(80.0, 0.25);
  const double h = (hi - lo) / steps;
  double acc = 0.0;
  for (int i = 0; i <= steps; ++i) {
    const double u = lo + h * i;
    const double x = u * u * u * u;
    const double f =
        std::exp(noncentral_chisq_log_density(x, 0.5, 1.0)) * 4.0 * u * u * u;
    const double w = (i == 0 || i == steps) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    acc += w * f;
  }
  acc *= h / 3.0;
  CHECK(acc == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("noncentral chi-square sampling matches its known mean") {
  const auto spec = DistributionSpec::noncentral_chisq(1, 0.5, {1.0});
  const Matrix draws = spec.sample(200000, 5);
  // E = df + noncentrality
  CHECK(coordinate_mean(draws, 0) == doctest::Approx(1.5).epsilon(0.02));
}

TEST_CASE("gompertz sampling matches the exponential-integral mean") {
  const double k = 1.0, beta = 1.5;
  const auto spec = DistributionSpec::shifted(ShiftedFamily::gompertz, 1, k, beta, 0.0);
  const Matrix draws = spec.sample(400000, 31);
  const double expected = beta * std::exp(k) * expint_e1(k);
  CHECK(coordinate_mean(draws, 0) == doctest::Approx(expected).epsilon(0.01));
}

TEST_CASE("shifted presets are mean-matched across the change") {
  for (const char* name : {"exponential", "gamma", "weibull", "gompertz"}) {
    const auto pair = make_example(name, 1);
    const Matrix pre = pair.pre.sample(400000, fnv1a(name));
    const Matrix post = pair.post.sample(400000, fnv1a(name) + 1);
    const double m0 = coordinate_mean(pre, 0);
    const double m1 = coordinate_mean(post, 0);
    CHECK(std::abs(m1 - m0) / m0 < 0.01);
  }
}

TEST_CASE("log gaussian support and density transform") {
  Matrix eye(2, 2);
  eye.at(0, 0) = eye.at(1, 1) = 1.0;
  const auto spec = DistributionSpec::log_gaussian(2, eye);
  std::vector<double> bad = {1.0, -0.5};
  CHECK(spec.log_density(bad) == -std::numeric_limits<double>::infinity());

  // log N pdf of log(x) minus the Jacobian sum(log x).
  std::vector<double> x = {1.5, 0.7};
  double expected = 0.0;
  for (double v : x) {
    const double l = std::log(v);
    expected += -0.5 * l * l - 0.5 * std::log(2.0 * std::numbers::pi) - l;
  }
  CHECK(spec.log_density(x) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("gaussian covariance preset has the sparse equicorrelation block") {
  const auto pair = make_example("gaussian_cov", 10);
  const Matrix draws = pair.post.sample(300000, 77);
  // Active indices every fifth coordinate: {0, 5}; rho = 0.1.
  std::vector<double> mean(10, 0.0);
  for (std::size_t c = 0; c < 10; ++c) mean[c] = coordinate_mean(draws, c);
  const auto cov = [&](std::size_t a, std::size_t b) {
    double acc = 0.0;
    for (std::size_t r = 0; r < draws.rows; ++r)
      acc += (draws.at(r, a) - mean[a]) * (draws.at(r, b) - mean[b]);
    return acc / static_cast<double>(draws.rows - 1);
  };
  CHECK(cov(0, 5) == doctest::Approx(0.1).epsilon(0.2));
  CHECK(std::abs(cov(0, 1)) < 0.01);
  CHECK(cov(0, 0) == doctest::Approx(1.0).epsilon(0.02));
  CHECK(cov(3, 3) == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("build_sequence splits pre and post at the change point") {
  const auto pre = DistributionSpec::gaussian_mean(2, {0.0, 0.0});
  const auto post = DistributionSpec::gaussian_mean(2, {50.0, 50.0});
  const auto seq = build_sequence(pre, post, 30, 100, 9);
  CHECK(seq.change_point == 30);
  CHECK(seq.length() == 100);
  for (std::int64_t i = 0; i < 30; ++i) CHECK(std::abs(seq.data.at(i, 0)) < 10.0);
  for (std::int64_t i = 30; i < 100; ++i) CHECK(seq.data.at(i, 0) > 40.0);

  // Degenerate splits are allowed.
  CHECK(build_sequence(pre, post, 0, 10, 1).change_point == 0);
  CHECK(build_sequence(pre, post, 10, 10, 1).change_point == 10);
  CHECK_THROWS(build_sequence(pre, post, 11, 10, 1));
}

TEST_CASE("sampling is reproducible and seed-sensitive") {
  const auto pair = make_example("weibull", 3);
  const Matrix a = pair.post.sample(50, 123);
  const Matrix b = pair.post.sample(50, 123);
  const Matrix c = pair.post.sample(50, 124);
  CHECK(a.data == b.data);
  CHECK(a.data != c.data);
}

TEST_CASE("every named preset constructs at dimension 100 and samples in-support") {
  for (const auto& name : example_names()) {
    const auto pair = make_example(name, 100);
    CHECK(pair.pre.dim() == 100);
    const Matrix pre = pair.pre.sample(3, 1);
    const Matrix post = pair.post.sample(3, 2);
    for (std::size_t r = 0; r < 3; ++r) {
      CHECK(std::isfinite(pair.pre.log_density(pre.row(r))));
      CHECK(std::isfinite(pair.post.log_density(post.row(r))));
    }
  }
  CHECK_THROWS(make_example("unknown", 10));
}

TEST_CASE("invalid parameters are rejected") {
  CHECK_THROWS(DistributionSpec::pareto(1, 1.0, 0.0));
  CHECK_THROWS(DistributionSpec::pareto(1, -1.0, 2.0));
  CHECK_THROWS(DistributionSpec::shifted(ShiftedFamily::gamma, 1, 1.0, 0.0, 0.0));
  CHECK_THROWS(DistributionSpec::noncentral_chisq(1, 0.0, {1.0}));
  CHECK_THROWS(DistributionSpec::gmm(2, {0.5, 0.6}, {{0, 0}, {1, 1}},
                                     {Matrix(2, 2), Matrix(2, 2)}));
}
