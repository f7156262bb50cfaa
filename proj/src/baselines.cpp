#include "cpd/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cpd/kernels.hpp"
#include "cpd/rng.hpp"
#include "cpd/specfun.hpp"

namespace cpd {

GaussianMoments GaussianMoments::estimate(const Matrix& reference,
                                          double nu_scale) {
  GaussianMoments m;
  sample_moments(reference, m.mean, m.covariance);
  m.count = static_cast<int>(reference.rows);
  const std::size_t d = m.covariance.rows;
  double trace = 0.0;
  for (std::size_t i = 0; i < d; ++i) trace += m.covariance.at(i, i);
  m.regularizer = nu_scale * trace / static_cast<double>(d);
  Matrix reg = m.covariance;
  for (std::size_t i = 0; i < d; ++i) reg.at(i, i) += m.regularizer;
  m.chol_ = std::make_shared<const CholeskyFactor>(CholeskyFactor::compute(reg));
  return m;
}

// --- Exact CUSUM ------------------------------------------------------------

CusumState exact_cusum_step(CusumState state, std::span<const double> x,
                            const DistributionSpec& pre,
                            const DistributionSpec& post) {
  const double ratio = post.log_density(x) - pre.log_density(x);
  return cusum_update(state, clamp_nonfinite_increment(ratio));
}

ExactCusumDetector::ExactCusumDetector(DistributionSpec pre,
                                       DistributionSpec post, double threshold)
    : pre_(std::move(pre)), post_(std::move(post)) {
  if (pre_.dim() != post_.dim())
    throw std::invalid_argument("ExactCusumDetector: dimension mismatch");
  state_.threshold = threshold;
  reset();
}

void ExactCusumDetector::reset() {
  const double threshold = state_.threshold;
  state_ = CusumState{};
  state_.threshold = threshold;
}

std::vector<DetectorVerdict> ExactCusumDetector::observe_batch(
    const Matrix& rows) {
  std::vector<DetectorVerdict> out;
  out.reserve(rows.rows);
  for (std::size_t r = 0; r < rows.rows; ++r) {
    const double ratio = clamp_nonfinite_increment(
        post_.log_density(rows.row(r)) - pre_.log_density(rows.row(r)));
    state_ = cusum_update(state_, ratio);
    DetectorVerdict v;
    v.statistic_value = state_.statistic;
    v.alarmed = state_.statistic > state_.threshold;
    v.step_index = state_.step_index;
    v.increment = ratio;
    out.push_back(v);
  }
  return out;
}

// --- Hotelling CUSUM --------------------------------------------------------

double hotelling_quadratic(const GaussianMoments& moments,
                           std::span<const double> x) {
  const std::size_t d = moments.mean.size();
  thread_local std::vector<double> centered;
  centered.resize(d);
  for (std::size_t i = 0; i < d; ++i) centered[i] = x[i] - moments.mean[i];
  return 0.5 * moments.regularized_chol().quad_form_inv(centered);
}

HotellingCusumDetector::HotellingCusumDetector(GaussianMoments moments,
                                               double offset, double threshold)
    : moments_(std::move(moments)), offset_(offset) {
  state_.threshold = threshold;
  reset();
}

double HotellingCusumDetector::offset_from_holdout(
    const GaussianMoments& moments, const Matrix& holdout,
    double epsilon_scale) {
  if (holdout.rows == 0)
    throw std::invalid_argument("offset_from_holdout: empty holdout");
  double acc = 0.0;
  for (std::size_t r = 0; r < holdout.rows; ++r)
    acc += hotelling_quadratic(moments, holdout.row(r));
  const double base = acc / static_cast<double>(holdout.rows);
  return base * (1.0 + epsilon_scale);
}

void HotellingCusumDetector::reset() {
  const double threshold = state_.threshold;
  state_ = CusumState{};
  state_.threshold = threshold;
}

std::vector<DetectorVerdict> HotellingCusumDetector::observe_batch(
    const Matrix& rows) {
  std::vector<DetectorVerdict> out;
  out.reserve(rows.rows);
  for (std::size_t r = 0; r < rows.rows; ++r) {
    const double inc = hotelling_quadratic(moments_, rows.row(r)) - offset_;
    state_ = cusum_update(state_, inc);
    DetectorVerdict v;
    v.statistic_value = state_.statistic;
    v.alarmed = state_.statistic > state_.threshold;
    v.step_index = state_.step_index;
    v.increment = inc;
    out.push_back(v);
  }
  return out;
}

// --- MEWMA ------------------------------------------------------------------

double mewma_covariance_scale(double decay, std::int64_t t) {
  return decay * (1.0 - std::pow(1.0 - decay, 2.0 * static_cast<double>(t))) /
         (2.0 - decay);
}

double mewma_step(MewmaState& state, std::span<const double> x,
                  const CholeskyFactor& base_chol) {
  const std::size_t d = base_chol.dim();
  if (state.smoothed.empty()) state.smoothed.assign(d, 0.0);
  state.t += 1;
  for (std::size_t i = 0; i < d; ++i)
    state.smoothed[i] = state.decay * x[i] + (1.0 - state.decay) * state.smoothed[i];
  const double scale = mewma_covariance_scale(state.decay, state.t);
  return base_chol.quad_form_inv(state.smoothed) / scale;
}

MewmaDetector::MewmaDetector(double decay, Matrix base_covariance,
                             double threshold)
    : dim_(static_cast<int>(base_covariance.rows)), threshold_(threshold) {
  if (!(decay > 0.0 && decay <= 1.0))
    throw std::invalid_argument("MewmaDetector: decay must be in (0, 1]");
  chol_ = std::make_shared<const CholeskyFactor>(
      CholeskyFactor::compute(base_covariance));
  state_.decay = decay;
  reset();
}

void MewmaDetector::reset() {
  state_.smoothed.assign(static_cast<std::size_t>(dim_), 0.0);
  state_.t = 0;
  statistic_ = 0.0;
  emitted_ = 0;
}

std::vector<DetectorVerdict> MewmaDetector::observe_batch(const Matrix& rows) {
  std::vector<DetectorVerdict> out;
  out.reserve(rows.rows);
  for (std::size_t r = 0; r < rows.rows; ++r) {
    statistic_ = mewma_step(state_, rows.row(r), *chol_);
    DetectorVerdict v;
    v.statistic_value = statistic_;
    v.alarmed = statistic_ > threshold_;
    v.step_index = ++emitted_;
    v.increment = statistic_;
    out.push_back(v);
  }
  return out;
}

// --- Window-limited CUSUM ---------------------------------------------------

double wl_cusum_increment(std::span<const double> x,
                          std::span<const double> window_mean,
                          const GaussianMoments& moments) {
  // Both densities share the reference covariance, so the quadratic terms in
  // x cancel:
  //   log N(x; theta, S) - log N(x; mu, S)
  //     = (theta - mu)^T S^{-1} x - (theta^T S^{-1} theta - mu^T S^{-1} mu)/2
  const std::size_t d = window_mean.size();
  thread_local std::vector<double> diff;
  diff.resize(d);
  for (std::size_t i = 0; i < d; ++i) diff[i] = x[i] - window_mean[i];
  const double q_theta = moments.regularized_chol().quad_form_inv(diff);
  for (std::size_t i = 0; i < d; ++i) diff[i] = x[i] - moments.mean[i];
  const double q_mu = moments.regularized_chol().quad_form_inv(diff);
  return 0.5 * (q_mu - q_theta);
}

WlCusumDetector::WlCusumDetector(int window, GaussianMoments moments,
                                 double threshold)
    : window_(window), moments_(std::move(moments)) {
  if (window <= 0) throw std::invalid_argument("WlCusumDetector: window must be positive");
  state_.threshold = threshold;
  reset();
}

void WlCusumDetector::reset() {
  const double threshold = state_.threshold;
  state_ = CusumState{};
  state_.threshold = threshold;
  buffer_.clear();
  window_sum_.assign(moments_.mean.size(), 0.0);
}

std::vector<DetectorVerdict> WlCusumDetector::observe_batch(const Matrix& rows) {
  const std::size_t d = moments_.mean.size();
  std::vector<DetectorVerdict> out;
  out.reserve(rows.rows);
  thread_local std::vector<double> mean;
  mean.resize(d);
  for (std::size_t r = 0; r < rows.rows; ++r) {
    auto x = rows.row(r);
    double inc = 0.0;
    if (static_cast<int>(buffer_.size()) == window_) {
      for (std::size_t i = 0; i < d; ++i)
        mean[i] = window_sum_[i] / static_cast<double>(window_);
      inc = wl_cusum_increment(x, mean, moments_);
    }
    state_ = cusum_update(state_, inc);
    // Slide the estimation window past the consumed observation.
    buffer_.emplace_back(x.begin(), x.end());
    kernels::axpy(1.0, x.data(), window_sum_.data(), d);
    if (static_cast<int>(buffer_.size()) > window_) {
      kernels::axpy(-1.0, buffer_.front().data(), window_sum_.data(), d);
      buffer_.pop_front();
    }
    DetectorVerdict v;
    v.statistic_value = state_.statistic;
    v.alarmed = state_.statistic > state_.threshold;
    v.step_index = state_.step_index;
    v.increment = inc;
    out.push_back(v);
  }
  return out;
}

// --- Window-limited GLR -----------------------------------------------------

double wl_glr_statistic(const Matrix& window_rows,
                        const GaussianMoments& moments) {
  if (window_rows.rows == 0)
    throw std::invalid_argument("wl_glr_statistic: empty window");
  const std::size_t n = window_rows.rows;
  const std::size_t d = window_rows.cols;
  double best = 0.0;
  std::vector<double> acc(d, 0.0);
  // Split i leaves rows [i, n) in the candidate post-change segment;
  // accumulate the centered sum from the newest row backwards.
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t j = 0; j < d; ++j)
      acc[j] += window_rows.at(i, j) - moments.mean[j];
    const double qf = moments.regularized_chol().quad_form_inv(acc);
    best = std::max(best, qf / static_cast<double>(n - i));
  }
  return best;
}

WlGlrDetector::WlGlrDetector(int window, GaussianMoments moments,
                             double threshold)
    : window_(window), moments_(std::move(moments)), threshold_(threshold) {
  if (window <= 0) throw std::invalid_argument("WlGlrDetector: window must be positive");
  reset();
}

void WlGlrDetector::reset() {
  statistic_ = 0.0;
  emitted_ = 0;
  prefix_.clear();
  prefix_.emplace_back(moments_.mean.size(), 0.0);  // Q_0 = 0
}

std::vector<DetectorVerdict> WlGlrDetector::observe_batch(const Matrix& rows) {
  const std::size_t d = moments_.mean.size();
  std::vector<DetectorVerdict> out;
  out.reserve(rows.rows);
  thread_local std::vector<double> whitened, diff;
  whitened.resize(d);
  diff.resize(d);
  for (std::size_t r = 0; r < rows.rows; ++r) {
    auto x = rows.row(r);
    // Whiten the centered observation once; quadratic forms against the
    // reference covariance become plain squared norms of prefix differences.
    for (std::size_t i = 0; i < d; ++i) whitened[i] = x[i] - moments_.mean[i];
    moments_.regularized_chol().solve_lower(whitened);
    std::vector<double> q = prefix_.back();
    kernels::axpy(1.0, whitened.data(), q.data(), d);
    prefix_.push_back(std::move(q));
    if (static_cast<int>(prefix_.size()) > window_ + 1) prefix_.pop_front();

    const auto& q_t = prefix_.back();
    double best = 0.0;
    for (std::size_t i = 0; i + 1 < prefix_.size(); ++i) {
      for (std::size_t j = 0; j < d; ++j) diff[j] = q_t[j] - prefix_[i][j];
      const double qf = kernels::dot(diff.data(), diff.data(), d);
      best = std::max(best, qf / static_cast<double>(prefix_.size() - 1 - i));
    }
    statistic_ = best;
    DetectorVerdict v;
    v.statistic_value = statistic_;
    v.alarmed = statistic_ > threshold_;
    v.step_index = ++emitted_;
    v.increment = statistic_;
    out.push_back(v);
  }
  return out;
}

// --- ONNC -------------------------------------------------------------------

double onnc_statistic(const MlpModel& model, const SlidingStacks& stacks) {
  if (!stacks.test_full())
    throw std::runtime_error("onnc_statistic: testing stacks not full");
  const int m = stacks.test_stream.size();
  const auto clamped_prob = [&](std::span<const double> x) {
    return std::clamp(model.forward(x), 1e-7, 1.0 - 1e-7);
  };
  double acc = 0.0;
  for (int i = 0; i < m; ++i) {
    const double g = clamped_prob(stacks.test_stream.row(i));
    acc -= std::log((1.0 - g) / g);
  }
  for (int i = 0; i < m; ++i) {
    const double g = clamped_prob(stacks.test_ref.row(i));
    acc += std::log(g / (1.0 - g));
  }
  return acc / static_cast<double>(m);
}

OnncDetector::OnncDetector(const NnDetectorConfig& config,
                           std::shared_ptr<const ReferencePool> pool)
    : WindowedNetDetector(config.window, std::move(pool), config.seed),
      detector_config_(config),
      model_(pool_->dim(), config.hidden_width, Activation::sigmoid,
             derive_seed(config.seed, 0, "model")),
      opt_(model_.param_count(), config.learning_rate) {
  detector_config_.loss.kind = LossKind::logistic;
  reset();
}

void OnncDetector::reset_state() {
  model_.reinitialize(derive_seed(detector_config_.seed, 0, "model"));
  opt_ = AdamState(model_.param_count(), detector_config_.learning_rate);
  statistic_ = 0.0;
  emitted_ = 0;
}

std::optional<DetectorVerdict> OnncDetector::process_stride(bool emitting) {
  if (stacks_.train_full() && training_due()) {
    train_pass(model_, opt_, stacks_, detector_config_.loss,
               detector_config_.minibatch, shuffle_rng_);
  }
  if (!emitting || !stacks_.test_full()) return std::nullopt;
  statistic_ = onnc_statistic(model_, stacks_);
  last_increment_ = statistic_;
  DetectorVerdict v;
  v.statistic_value = statistic_;
  v.alarmed = statistic_ > detector_config_.threshold;
  v.step_index = ++emitted_;
  v.increment = statistic_;
  return v;
}

// --- ONNR -------------------------------------------------------------------

double onnr_statistic(const OnnrPair& pair, const SlidingStacks& stacks) {
  if (!stacks.test_full())
    throw std::runtime_error("onnr_statistic: testing stacks not full");
  const int m = stacks.test_stream.size();
  double acc = 0.0;
  for (int i = 0; i < m; ++i)
    acc += pair.model_a.forward(stacks.test_stream.row(i)) - 1.0;
  for (int i = 0; i < m; ++i)
    acc += pair.model_b.forward(stacks.test_ref.row(i)) - 1.0;
  return acc / static_cast<double>(m);
}

OnnrDetector::OnnrDetector(const NnDetectorConfig& config,
                           std::shared_ptr<const ReferencePool> pool)
    : WindowedNetDetector(config.window, std::move(pool), config.seed),
      detector_config_(config),
      pair_{MlpModel(pool_->dim(), config.hidden_width, Activation::identity,
                     derive_seed(config.seed, 0, "model-a")),
            MlpModel(pool_->dim(), config.hidden_width, Activation::identity,
                     derive_seed(config.seed, 1, "model-b")),
            config.loss.onnr_weight},
      opt_a_(pair_.model_a.param_count(), config.learning_rate),
      opt_b_(pair_.model_b.param_count(), config.learning_rate) {
  detector_config_.loss.kind = LossKind::onnr_regression;
  reset();
}

void OnnrDetector::reset_state() {
  pair_.model_a.reinitialize(derive_seed(detector_config_.seed, 0, "model-a"));
  pair_.model_b.reinitialize(derive_seed(detector_config_.seed, 1, "model-b"));
  opt_a_ = AdamState(pair_.model_a.param_count(), detector_config_.learning_rate);
  opt_b_ = AdamState(pair_.model_b.param_count(), detector_config_.learning_rate);
  statistic_ = 0.0;
  emitted_ = 0;
}

std::optional<DetectorVerdict> OnnrDetector::process_stride(bool emitting) {
  if (stacks_.train_full() && training_due()) {
    train_pass(pair_.model_a, opt_a_, stacks_, detector_config_.loss,
               detector_config_.minibatch, shuffle_rng_, /*swap_labels=*/false);
    train_pass(pair_.model_b, opt_b_, stacks_, detector_config_.loss,
               detector_config_.minibatch, shuffle_rng_, /*swap_labels=*/true);
  }
  if (!emitting || !stacks_.test_full()) return std::nullopt;
  statistic_ = onnr_statistic(pair_, stacks_);
  last_increment_ = statistic_;
  DetectorVerdict v;
  v.statistic_value = statistic_;
  v.alarmed = statistic_ > detector_config_.threshold;
  v.step_index = ++emitted_;
  v.increment = statistic_;
  return v;
}

}  // namespace cpd
