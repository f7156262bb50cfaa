#include "cpd/nn_cusum.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cpd/rng.hpp"

namespace cpd {

bool train_pass(MlpModel& model, AdamState& opt, const SlidingStacks& stacks,
                const LossSpec& loss, int minibatch,
                std::mt19937_64& shuffle_rng, bool swap_labels) {
  if (!stacks.train_full()) return false;
  if (minibatch <= 0) throw std::invalid_argument("train_pass: minibatch must be positive");

  const int n_stream = stacks.train_stream.size();
  const int n_ref = stacks.train_ref.size();
  const int stream_label = swap_labels ? 0 : 1;

  thread_local std::vector<Sample> samples;
  samples.clear();
  samples.reserve(static_cast<std::size_t>(n_stream + n_ref));
  for (int i = 0; i < n_stream; ++i)
    samples.push_back({stacks.train_stream.row(i).data(), stream_label});
  for (int i = 0; i < n_ref; ++i)
    samples.push_back({stacks.train_ref.row(i).data(), 1 - stream_label});
  std::shuffle(samples.begin(), samples.end(), shuffle_rng);

  thread_local std::vector<double> grad;
  grad.resize(model.param_count());
  thread_local GradWorkspace ws;

  const int total = static_cast<int>(samples.size());
  for (int begin = 0; begin < total; begin += minibatch) {
    const int count = std::min(minibatch, total - begin);
    batch_gradient(model, loss,
                   std::span<const Sample>(samples.data() + begin,
                                           static_cast<std::size_t>(count)),
                   grad, ws);
    adam_step(model, opt, grad);
  }
  return true;
}

double compute_increment(const MlpModel& model, const LossSpec& loss,
                         const SlidingStacks& stacks, double learning_rate) {
  if (!stacks.test_full())
    throw std::runtime_error("compute_increment: testing stacks not full");
  const int m = stacks.test_stream.size();
  double acc = 0.0;
  for (int i = 0; i < m; ++i)
    acc += test_function_value(model, loss, stacks.test_stream.row(i), learning_rate);
  for (int i = 0; i < m; ++i)
    acc -= test_function_value(model, loss, stacks.test_ref.row(i), learning_rate);
  return acc / static_cast<double>(m);
}

WindowedNetDetector::WindowedNetDetector(
    const WindowConfig& config, std::shared_ptr<const ReferencePool> pool,
    std::uint64_t seed)
    : config_(config),
      pool_(std::move(pool)),
      stacks_(config, pool_->dim()),
      seed_(seed),
      ref_rng_(make_rng(seed)),
      shuffle_rng_(make_rng(seed)) {
  config_.validate();
  if (pool_->size() < config_.window_length)
    throw std::invalid_argument("reference pool smaller than the window");
}

void WindowedNetDetector::reset() {
  stacks_.clear();
  strides_seen_ = 0;
  last_increment_ = 0.0;
  ref_rng_ = make_rng(derive_seed(seed_, 1, "ref-draws"));
  shuffle_rng_ = make_rng(derive_seed(seed_, 2, "shuffle"));
  reset_state();
  run_burn_in();
}

void WindowedNetDetector::run_burn_in() {
  if (config_.burn_in <= 0) return;
  const int s = config_.stride;
  const std::int64_t strides = (config_.burn_in + s - 1) / s;
  auto burnin_rng = make_rng(derive_seed(seed_, 3, "burn-in"));
  Matrix chunk(static_cast<std::size_t>(s), static_cast<std::size_t>(dim()));
  std::vector<int> idx;
  for (std::int64_t t = 0; t < strides; ++t) {
    // Warm-up stream stands in for pre-change data: fresh pool draws.
    pool_->draw(s, burnin_rng, idx);
    for (int r = 0; r < s; ++r) {
      auto src = pool_->row(idx[static_cast<std::size_t>(r)]);
      std::copy(src.begin(), src.end(), chunk.row(static_cast<std::size_t>(r)).begin());
    }
    ingest_stride(stacks_, config_, chunk, *pool_, ref_rng_);
    ++strides_seen_;
    process_stride(/*emitting=*/false);
  }
}

std::vector<DetectorVerdict> WindowedNetDetector::observe_batch(
    const Matrix& rows) {
  const int s = config_.stride;
  if (rows.rows % static_cast<std::size_t>(s) != 0)
    throw std::invalid_argument("observe_batch: rows must be a multiple of stride");
  if (static_cast<int>(rows.cols) != dim())
    throw std::invalid_argument("observe_batch: dimension mismatch");

  std::vector<DetectorVerdict> verdicts;
  Matrix chunk(static_cast<std::size_t>(s), rows.cols);
  for (std::size_t begin = 0; begin + s <= rows.rows; begin += s) {
    for (int r = 0; r < s; ++r) {
      auto src = rows.row(begin + static_cast<std::size_t>(r));
      std::copy(src.begin(), src.end(), chunk.row(static_cast<std::size_t>(r)).begin());
    }
    ingest_stride(stacks_, config_, chunk, *pool_, ref_rng_);
    ++strides_seen_;
    if (auto v = process_stride(/*emitting=*/true)) verdicts.push_back(*v);
  }
  return verdicts;
}

NnCusumDetector::NnCusumDetector(const NnDetectorConfig& config,
                                 std::shared_ptr<const ReferencePool> pool)
    : WindowedNetDetector(config.window, std::move(pool), config.seed),
      detector_config_(config),
      model_(pool_->dim(), config.hidden_width, Activation::identity,
             derive_seed(config.seed, 0, "model")),
      opt_(model_.param_count(), config.learning_rate) {
  reset();
}

void NnCusumDetector::reset_state() {
  model_.reinitialize(derive_seed(detector_config_.seed, 0, "model"));
  opt_ = AdamState(model_.param_count(), detector_config_.learning_rate);
  state_ = CusumState{};
  state_.drift = detector_config_.drift;
  state_.threshold = detector_config_.threshold;
}

std::optional<DetectorVerdict> NnCusumDetector::process_stride(bool emitting) {
  if (stacks_.train_full() && training_due()) {
    if (detector_config_.train_from_scratch) {
      model_.reinitialize(derive_seed(detector_config_.seed,
                                      static_cast<std::uint64_t>(strides_seen_),
                                      "scratch"));
      opt_ = AdamState(model_.param_count(), detector_config_.learning_rate);
    }
    train_pass(model_, opt_, stacks_, detector_config_.loss,
               detector_config_.minibatch, shuffle_rng_);
  }
  if (!emitting || !stacks_.test_full()) return std::nullopt;

  const double increment = compute_increment(
      model_, detector_config_.loss, stacks_, detector_config_.learning_rate);
  last_increment_ = increment;
  state_ = cusum_update(state_, increment);
  DetectorVerdict v;
  v.statistic_value = state_.statistic;
  v.alarmed = state_.statistic > state_.threshold;
  v.step_index = state_.step_index;
  v.increment = increment;
  return v;
}

DriftEstimate estimate_drift(const NnDetectorConfig& config,
                             std::shared_ptr<const ReferencePool> pool,
                             int n_sequences, std::int64_t length,
                             std::uint64_t seed) {
  if (n_sequences < 1)
    throw std::invalid_argument("estimate_drift: n_sequences must be >= 1");
  DriftEstimate est;
  est.n_sequences = n_sequences;

  const int s = config.window.stride;
  for (int i = 0; i < n_sequences; ++i) {
    NnDetectorConfig run = config;
    run.drift = 0.0;
    run.threshold = std::numeric_limits<double>::infinity();
    run.seed = derive_seed(seed, static_cast<std::uint64_t>(i), "drift-detector");
    NnCusumDetector detector(run, pool);

    auto stream_rng = make_rng(derive_seed(seed, static_cast<std::uint64_t>(i),
                                           "drift-stream"));
    Matrix chunk(static_cast<std::size_t>(s), static_cast<std::size_t>(pool->dim()));
    std::vector<int> idx;
    double sum = 0.0;
    std::int64_t count = 0;
    for (std::int64_t consumed = 0; consumed + s <= length; consumed += s) {
      pool->draw(s, stream_rng, idx);
      for (int r = 0; r < s; ++r) {
        auto src = pool->row(idx[static_cast<std::size_t>(r)]);
        std::copy(src.begin(), src.end(), chunk.row(static_cast<std::size_t>(r)).begin());
      }
      for (const DetectorVerdict& v : detector.observe_batch(chunk)) {
        sum += v.increment;
        ++count;
      }
    }
    if (count == 0)
      throw std::invalid_argument("estimate_drift: length too short to emit increments");
    est.per_sequence_means.push_back(sum / static_cast<double>(count));
  }
  double total = 0.0;
  for (double m : est.per_sequence_means) total += m;
  est.drift = total / static_cast<double>(n_sequences);
  return est;
}

}  // namespace cpd
