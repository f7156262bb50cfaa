#include "cpd/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "cpd/rng.hpp"
#include "cpd/specfun.hpp"

namespace cpd {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093454835606594728112353;

std::shared_ptr<const CholeskyFactor> make_chol(const Matrix& cov) {
  return std::make_shared<const CholeskyFactor>(CholeskyFactor::compute(cov));
}

void check_finite(std::span<const double> x) {
  for (double v : x) {
    if (!std::isfinite(v))
      throw std::invalid_argument("log_density: non-finite input");
  }
}

double gompertz_quantile(double u, double shape, double scale) {
  // F(x) = 1 - exp(shape * (1 - e^{x/scale}))
  return scale * std::log(1.0 - std::log1p(-u) / shape);
}

}  // namespace

DistributionSpec DistributionSpec::gaussian_mean(int dim,
                                                 std::vector<double> mean) {
  if (static_cast<int>(mean.size()) != dim)
    throw std::invalid_argument("gaussian_mean: mean size mismatch");
  DistributionSpec s;
  s.kind_ = DistKind::gaussian_mean;
  s.dim_ = dim;
  s.mean_ = std::move(mean);
  return s;
}

DistributionSpec DistributionSpec::gaussian_cov(int dim, Matrix covariance) {
  if (static_cast<int>(covariance.rows) != dim || covariance.rows != covariance.cols)
    throw std::invalid_argument("gaussian_cov: covariance shape mismatch");
  DistributionSpec s;
  s.kind_ = DistKind::gaussian_cov;
  s.dim_ = dim;
  s.chol_ = make_chol(covariance);
  s.cov_log_det_ = s.chol_->log_det();
  return s;
}

DistributionSpec DistributionSpec::log_gaussian(int dim, Matrix covariance) {
  DistributionSpec s = gaussian_cov(dim, std::move(covariance));
  s.kind_ = DistKind::log_gaussian;
  return s;
}

DistributionSpec DistributionSpec::gmm(int dim, std::vector<double> weights,
                                       std::vector<std::vector<double>> means,
                                       std::vector<Matrix> covariances) {
  if (weights.empty() || weights.size() != means.size() ||
      weights.size() != covariances.size())
    throw std::invalid_argument("gmm: component count mismatch");
  double total = 0.0;
  for (double w : weights) {
    if (w <= 0.0) throw std::invalid_argument("gmm: weights must be positive");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw std::invalid_argument("gmm: weights must sum to 1");
  DistributionSpec s;
  s.kind_ = DistKind::gmm;
  s.dim_ = dim;
  s.weights_ = std::move(weights);
  s.comp_means_ = std::move(means);
  for (const auto& m : s.comp_means_) {
    if (static_cast<int>(m.size()) != dim)
      throw std::invalid_argument("gmm: component mean size mismatch");
  }
  for (auto& c : covariances) s.comp_chols_.push_back(make_chol(c));
  return s;
}

DistributionSpec DistributionSpec::noncentral_chisq(
    int dim, double degrees_of_freedom, std::vector<double> noncentrality) {
  if (degrees_of_freedom <= 0.0)
    throw std::invalid_argument("noncentral_chisq: df must be positive");
  if (static_cast<int>(noncentrality.size()) != dim)
    throw std::invalid_argument("noncentral_chisq: noncentrality size mismatch");
  for (double nc : noncentrality) {
    if (nc < 0.0) throw std::invalid_argument("noncentral_chisq: negative noncentrality");
  }
  DistributionSpec s;
  s.kind_ = DistKind::noncentral_chisq;
  s.dim_ = dim;
  s.df_ = degrees_of_freedom;
  s.noncentrality_ = std::move(noncentrality);
  return s;
}

DistributionSpec DistributionSpec::pareto(int dim, double x_min, double shape) {
  if (x_min <= 0.0 || shape <= 0.0)
    throw std::invalid_argument("pareto: x_min and shape must be positive");
  DistributionSpec s;
  s.kind_ = DistKind::pareto;
  s.dim_ = dim;
  s.x_min_ = x_min;
  s.pareto_shape_ = shape;
  return s;
}

DistributionSpec DistributionSpec::shifted(ShiftedFamily family, int dim,
                                           double shape, double scale,
                                           double shift) {
  if (scale <= 0.0 || shape <= 0.0)
    throw std::invalid_argument("shifted: shape and scale must be positive");
  DistributionSpec s;
  s.dim_ = dim;
  s.family_ = family;
  s.shape_ = shape;
  s.scale_ = scale;
  s.shift_ = shift;
  switch (family) {
    case ShiftedFamily::exponential: s.kind_ = DistKind::exponential_shift; break;
    case ShiftedFamily::gamma: s.kind_ = DistKind::gamma_shift; break;
    case ShiftedFamily::weibull: s.kind_ = DistKind::weibull_shift; break;
    case ShiftedFamily::gompertz: s.kind_ = DistKind::gompertz_shift; break;
  }
  return s;
}

void DistributionSpec::sample_into(std::mt19937_64& rng,
                                   std::span<double> out) const {
  if (static_cast<int>(out.size()) != dim_)
    throw std::invalid_argument("sample_into: output size mismatch");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  switch (kind_) {
    case DistKind::gaussian_mean: {
      for (int i = 0; i < dim_; ++i) out[i] = mean_[i] + normal(rng);
      return;
    }
    case DistKind::gaussian_cov:
    case DistKind::log_gaussian: {
      thread_local std::vector<double> z;
      z.resize(dim_);
      for (int i = 0; i < dim_; ++i) z[i] = normal(rng);
      thread_local std::vector<double> zero;
      zero.assign(dim_, 0.0);
      chol_->affine(zero, z, out);
      if (kind_ == DistKind::log_gaussian) {
        for (int i = 0; i < dim_; ++i) out[i] = std::exp(out[i]);
      }
      return;
    }
    case DistKind::gmm: {
      double u = unif(rng);
      std::size_t comp = 0;
      for (; comp + 1 < weights_.size(); ++comp) {
        if (u < weights_[comp]) break;
        u -= weights_[comp];
      }
      thread_local std::vector<double> z;
      z.resize(dim_);
      for (int i = 0; i < dim_; ++i) z[i] = normal(rng);
      comp_chols_[comp]->affine(comp_means_[comp], z, out);
      return;
    }
    case DistKind::noncentral_chisq: {
      // Poisson mixture of central chi-squares, exact for fractional df.
      for (int i = 0; i < dim_; ++i) {
        std::poisson_distribution<int> pois(0.5 * noncentrality_[i]);
        const int j = noncentrality_[i] > 0.0 ? pois(rng) : 0;
        std::gamma_distribution<double> gamma(0.5 * df_ + j, 2.0);
        out[i] = gamma(rng);
      }
      return;
    }
    case DistKind::pareto: {
      for (int i = 0; i < dim_; ++i) {
        const double u = 1.0 - unif(rng);  // in (0, 1]
        out[i] = x_min_ * std::pow(u, -1.0 / pareto_shape_);
      }
      return;
    }
    case DistKind::exponential_shift: {
      std::exponential_distribution<double> expo(1.0 / scale_);
      for (int i = 0; i < dim_; ++i) out[i] = shift_ + expo(rng);
      return;
    }
    case DistKind::gamma_shift: {
      std::gamma_distribution<double> gamma(shape_, scale_);
      for (int i = 0; i < dim_; ++i) out[i] = shift_ + gamma(rng);
      return;
    }
    case DistKind::weibull_shift: {
      std::weibull_distribution<double> weib(shape_, scale_);
      for (int i = 0; i < dim_; ++i) out[i] = shift_ + weib(rng);
      return;
    }
    case DistKind::gompertz_shift: {
      for (int i = 0; i < dim_; ++i) {
        out[i] = shift_ + gompertz_quantile(unif(rng), shape_, scale_);
      }
      return;
    }
  }
  throw std::logic_error("sample_into: unknown kind");
}

Matrix DistributionSpec::sample(std::int64_t n, std::uint64_t seed) const {
  if (n <= 0) throw std::invalid_argument("sample: n must be positive");
  Matrix out(static_cast<std::size_t>(n), static_cast<std::size_t>(dim_));
  auto rng = make_rng(seed);
  for (std::int64_t i = 0; i < n; ++i) {
    sample_into(rng, out.row(static_cast<std::size_t>(i)));
  }
  return out;
}

double noncentral_chisq_log_density(double x, double degrees_of_freedom,
                                    double noncentrality) {
  if (x <= 0.0) return kNegInf;
  const double half_nc = 0.5 * noncentrality;
  // log of sum_j Pois(j; nc/2) * chi2pdf(x; df + 2j), accumulated in log
  // space until terms stop contributing at relative 1e-16.
  double log_pois = -half_nc;  // j = 0
  double acc = kNegInf;
  for (int j = 0; j < 500; ++j) {
    const double half_df = 0.5 * degrees_of_freedom + j;
    const double log_chi2 = (half_df - 1.0) * std::log(x) - 0.5 * x -
                            half_df * std::numbers::ln2 - std::lgamma(half_df);
    const double term = log_pois + log_chi2;
    if (acc == kNegInf) {
      acc = term;
    } else {
      const double m = std::max(acc, term);
      acc = m + std::log(std::exp(acc - m) + std::exp(term - m));
    }
    // Poisson weights decay once j > nc/2; chi2 term ratio also shrinks.
    if (j > half_nc + 2.0 && term < acc + std::log(1e-16)) break;
    log_pois += std::log(half_nc) - std::log1p(static_cast<double>(j));
    if (half_nc == 0.0) break;
  }
  return acc;
}

double DistributionSpec::log_density(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != dim_)
    throw std::invalid_argument("log_density: dimension mismatch");
  check_finite(x);
  switch (kind_) {
    case DistKind::gaussian_mean: {
      double q = 0.0;
      for (int i = 0; i < dim_; ++i) {
        const double c = x[i] - mean_[i];
        q += c * c;
      }
      return -0.5 * q - 0.5 * dim_ * kLog2Pi;
    }
    case DistKind::gaussian_cov: {
      thread_local std::vector<double> zero;
      zero.assign(dim_, 0.0);
      return mvn_log_density(x, zero, *chol_);
    }
    case DistKind::log_gaussian: {
      thread_local std::vector<double> logs;
      logs.resize(dim_);
      double jac = 0.0;
      for (int i = 0; i < dim_; ++i) {
        if (x[i] <= 0.0) return kNegInf;
        logs[i] = std::log(x[i]);
        jac += logs[i];
      }
      thread_local std::vector<double> zero;
      zero.assign(dim_, 0.0);
      return mvn_log_density(logs, zero, *chol_) - jac;
    }
    case DistKind::gmm: {
      thread_local std::vector<double> lps;
      lps.resize(weights_.size());
      for (std::size_t c = 0; c < weights_.size(); ++c) {
        lps[c] = std::log(weights_[c]) +
                 mvn_log_density(x, comp_means_[c], *comp_chols_[c]);
      }
      return log_sum_exp(lps);
    }
    case DistKind::noncentral_chisq: {
      double acc = 0.0;
      for (int i = 0; i < dim_; ++i) {
        const double l = noncentral_chisq_log_density(x[i], df_, noncentrality_[i]);
        if (l == kNegInf) return kNegInf;
        acc += l;
      }
      return acc;
    }
    case DistKind::pareto: {
      double acc = 0.0;
      const double b = pareto_shape_;
      for (int i = 0; i < dim_; ++i) {
        if (x[i] < x_min_) return kNegInf;
        acc += std::log(b) + b * std::log(x_min_) - (b + 1.0) * std::log(x[i]);
      }
      return acc;
    }
    case DistKind::exponential_shift: {
      double acc = 0.0;
      for (int i = 0; i < dim_; ++i) {
        const double y = x[i] - shift_;
        if (y < 0.0) return kNegInf;
        acc += -std::log(scale_) - y / scale_;
      }
      return acc;
    }
    case DistKind::gamma_shift: {
      double acc = 0.0;
      for (int i = 0; i < dim_; ++i) {
        const double y = x[i] - shift_;
        if (y < 0.0) return kNegInf;
        if (y == 0.0) {
          // Density vanishes for shape > 1 and diverges for shape < 1.
          if (shape_ > 1.0) return kNegInf;
          if (shape_ < 1.0) return std::numeric_limits<double>::infinity();
          acc += -std::log(scale_);
          continue;
        }
        acc += (shape_ - 1.0) * std::log(y) - y / scale_ -
               shape_ * std::log(scale_) - std::lgamma(shape_);
      }
      return acc;
    }
    case DistKind::weibull_shift: {
      double acc = 0.0;
      for (int i = 0; i < dim_; ++i) {
        const double y = x[i] - shift_;
        if (y < 0.0) return kNegInf;
        if (y == 0.0) {
          if (shape_ > 1.0) return kNegInf;
          if (shape_ < 1.0) return std::numeric_limits<double>::infinity();
          acc += -std::log(scale_);
          continue;
        }
        const double r = y / scale_;
        acc += std::log(shape_) - std::log(scale_) +
               (shape_ - 1.0) * std::log(r) - std::pow(r, shape_);
      }
      return acc;
    }
    case DistKind::gompertz_shift: {
      double acc = 0.0;
      for (int i = 0; i < dim_; ++i) {
        const double y = x[i] - shift_;
        if (y < 0.0) return kNegInf;
        const double r = y / scale_;
        acc += std::log(shape_) - std::log(scale_) + shape_ + r -
               shape_ * std::exp(r);
      }
      return acc;
    }
  }
  throw std::logic_error("log_density: unknown kind");
}

namespace {

Matrix identity_matrix(int d) {
  Matrix m(static_cast<std::size_t>(d), static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) m.at(i, i) = 1.0;
  return m;
}

Matrix equicorrelated(int d, double diag, double offdiag) {
  Matrix m(static_cast<std::size_t>(d), static_cast<std::size_t>(d), offdiag);
  for (int i = 0; i < d; ++i) m.at(i, i) = diag;
  return m;
}

std::vector<double> sparse_mean_shift(int d, double delta) {
  std::vector<double> mu(static_cast<std::size_t>(d), 0.0);
  const double num[3] = {delta, delta / 2.0, delta / 3.0};
  for (int i = 0; i < std::min(d, 3); ++i) mu[i] = num[i];
  return mu;
}

}  // namespace

ExamplePair make_example(const std::string& name, int dim) {
  const auto ones = [&](double v) {
    return std::vector<double>(static_cast<std::size_t>(dim), v);
  };
  if (name == "gaussian_mean" || name == "gaussian_mean_08") {
    const double delta = name == "gaussian_mean" ? 0.1 : 0.8;
    return {name, DistributionSpec::gaussian_mean(dim, ones(0.0)),
            DistributionSpec::gaussian_mean(dim, sparse_mean_shift(dim, delta))};
  }
  if (name == "gaussian_cov") {
    // Equicorrelation rho among every fifth coordinate, unit diagonal.
    const double rho = 0.1;
    Matrix cov = identity_matrix(dim);
    std::vector<int> active;
    for (int i = 0; i < dim; i += 5) active.push_back(i);
    for (int a : active) {
      for (int b : active) {
        if (a != b) cov.at(a, b) = rho;
      }
    }
    return {name, DistributionSpec::gaussian_cov(dim, identity_matrix(dim)),
            DistributionSpec::gaussian_cov(dim, std::move(cov))};
  }
  if (name == "log_gaussian") {
    return {name, DistributionSpec::log_gaussian(dim, identity_matrix(dim)),
            DistributionSpec::log_gaussian(dim, equicorrelated(dim, 1.0, 0.2))};
  }
  if (name == "gmm" || name == "gmm_window") {
    std::vector<double> third_mean =
        name == "gmm" ? ones(0.0) : ones(13.0 / 5.0);
    DistributionSpec pre = DistributionSpec::gmm(
        dim, {0.5, 0.5}, {ones(2.0), ones(-2.0)},
        {identity_matrix(dim), identity_matrix(dim)});
    DistributionSpec post = DistributionSpec::gmm(
        dim, {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0},
        {ones(2.0), ones(-2.0), std::move(third_mean)},
        {identity_matrix(dim), identity_matrix(dim),
         equicorrelated(dim, 1.0, 0.2)});
    return {name, std::move(pre), std::move(post)};
  }
  if (name == "noncentral_chisq") {
    std::vector<double> nc0(static_cast<std::size_t>(dim), 1.0);
    std::vector<double> nc1 = nc0;
    for (int i : {0, 25, 50, 75}) {
      if (i < dim) nc1[static_cast<std::size_t>(i)] = 0.6;
    }
    return {name, DistributionSpec::noncentral_chisq(dim, 0.5, std::move(nc0)),
            DistributionSpec::noncentral_chisq(dim, 0.5, std::move(nc1))};
  }
  if (name == "pareto") {
    return {name, DistributionSpec::pareto(dim, 1.0, 2.0),
            DistributionSpec::pareto(dim, 1.0, 2.5)};
  }
  if (name == "exponential") {
    const double b0 = 1.0, b1 = 0.8;
    return {name,
            DistributionSpec::shifted(ShiftedFamily::exponential, dim, 1.0, b0, 0.0),
            DistributionSpec::shifted(ShiftedFamily::exponential, dim, 1.0, b1,
                                      b0 - b1)};
  }
  if (name == "gamma") {
    const double k = 1.5, b0 = 0.5, b1 = 0.4;
    return {name, DistributionSpec::shifted(ShiftedFamily::gamma, dim, k, b0, 0.0),
            DistributionSpec::shifted(ShiftedFamily::gamma, dim, k, b1,
                                      (b0 - b1) * k)};
  }
  if (name == "weibull") {
    const double k = 1.5, b0 = 1.0, b1 = 0.6;
    const double mean_factor = std::tgamma(1.0 + 1.0 / k);
    return {name, DistributionSpec::shifted(ShiftedFamily::weibull, dim, k, b0, 0.0),
            DistributionSpec::shifted(ShiftedFamily::weibull, dim, k, b1,
                                      (b0 - b1) * mean_factor)};
  }
  if (name == "gompertz") {
    const double k = 1.0, b0 = 1.5, b1 = 1.0;
    const double mean_factor = std::exp(k) * expint_e1(k);
    return {name, DistributionSpec::shifted(ShiftedFamily::gompertz, dim, k, b0, 0.0),
            DistributionSpec::shifted(ShiftedFamily::gompertz, dim, k, b1,
                                      (b0 - b1) * mean_factor)};
  }
  throw std::invalid_argument("make_example: unknown preset '" + name + "'");
}

std::vector<std::string> example_names() {
  return {"gaussian_mean", "gaussian_cov", "log_gaussian",
          "gmm",           "noncentral_chisq", "pareto",
          "exponential",   "gamma",        "weibull",
          "gompertz"};
}

ObservationSequence build_sequence(const DistributionSpec& pre,
                                   const DistributionSpec& post,
                                   std::int64_t pre_length,
                                   std::int64_t total_length,
                                   std::uint64_t seed) {
  if (pre.dim() != post.dim())
    throw std::invalid_argument("build_sequence: dimension mismatch");
  if (pre_length < 0 || pre_length > total_length)
    throw std::invalid_argument("build_sequence: pre_length outside [0, total]");
  ObservationSequence seq;
  seq.seed = seed;
  seq.change_point = pre_length;
  seq.data = Matrix(static_cast<std::size_t>(total_length),
                    static_cast<std::size_t>(pre.dim()));
  auto rng = make_rng(seed);
  for (std::int64_t i = 0; i < total_length; ++i) {
    const DistributionSpec& spec = i < pre_length ? pre : post;
    spec.sample_into(rng, seq.data.row(static_cast<std::size_t>(i)));
  }
  return seq;
}

}  // namespace cpd
