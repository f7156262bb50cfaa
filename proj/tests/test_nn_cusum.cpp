#include <doctest.h>

#include <cmath>
#include <memory>
#include <numeric>
#include <random>

#include "cpd/distributions.hpp"
#include "cpd/nn_cusum.hpp"
#include "cpd/rng.hpp"
#include "cpd/specfun.hpp"

using namespace cpd;

namespace {

std::shared_ptr<const ReferencePool> gaussian_pool(int n, int dim,
                                                   std::uint64_t seed) {
  const auto spec =
      DistributionSpec::gaussian_mean(dim, std::vector<double>(dim, 0.0));
  return std::make_shared<const ReferencePool>(spec.sample(n, seed), seed);
}

// Wires the network to compute exactly v . x (relu(vx) - relu(-vx)).
void make_linear_model(MlpModel& m, const std::vector<double>& v) {
  const int d = m.input_dim();
  REQUIRE(m.hidden_width() >= 2);
  auto p = m.params();
  std::fill(p.begin(), p.end(), 0.0);
  for (int j = 0; j < d; ++j) {
    p[j] = v[static_cast<std::size_t>(j)];
    p[d + j] = -v[static_cast<std::size_t>(j)];
  }
  const std::size_t w_out = static_cast<std::size_t>(m.hidden_width()) * d +
                            m.hidden_width();
  p[w_out] = 1.0;
  p[w_out + 1] = -1.0;
}

NnDetectorConfig small_config(std::uint64_t seed) {
  NnDetectorConfig cfg;
  cfg.window = {.window_length = 40, .split_ratio = 0.5, .stride = 10};
  cfg.hidden_width = 8;
  cfg.minibatch = 20;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("train_pass is a warm-up no-op until the buffers fill") {
  WindowConfig cfg{.window_length = 40, .split_ratio = 0.5, .stride = 10};
  cfg.validate();
  SlidingStacks stacks(cfg, 2);
  MlpModel m(2, 4, Activation::identity, 1);
  AdamState opt(m.param_count(), 1e-3);
  auto rng = make_rng(1);
  CHECK(!train_pass(m, opt, stacks, LossSpec{}, 10, rng));
  CHECK(opt.timestep == 0);
}

TEST_CASE("zero learning rate leaves the model unchanged") {
  auto pool = gaussian_pool(200, 2, 3);
  WindowConfig cfg{.window_length = 20, .split_ratio = 0.5, .stride = 10};
  cfg.validate();
  SlidingStacks stacks(cfg, 2);
  auto rng = make_rng(4);
  Matrix batch(10, 2, 0.5);
  ingest_stride(stacks, cfg, batch, *pool, rng);
  ingest_stride(stacks, cfg, batch, *pool, rng);
  REQUIRE(stacks.train_full());

  MlpModel m(2, 4, Activation::identity, 5);
  const std::vector<double> before(m.params().begin(), m.params().end());
  AdamState opt(m.param_count(), 0.0);
  auto shuffle_rng = make_rng(6);
  CHECK(train_pass(m, opt, stacks, LossSpec{}, 10, shuffle_rng));
  for (std::size_t i = 0; i < m.param_count(); ++i)
    CHECK(m.params()[i] == before[i]);
  // One pass over 20 samples in minibatches of 10 = 2 optimizer steps.
  CHECK(opt.timestep == 2);
  // Full-stack minibatch: exactly one step per pass.
  AdamState opt2(m.param_count(), 0.0);
  CHECK(train_pass(m, opt2, stacks, LossSpec{}, 1000, shuffle_rng));
  CHECK(opt2.timestep == 1);
}

TEST_CASE("increment of an injected linear test function is a mean gap") {
  WindowConfig cfg{.window_length = 20, .split_ratio = 0.5, .stride = 10};
  cfg.validate();
  SlidingStacks stacks(cfg, 3);
  auto pool = gaussian_pool(300, 3, 8);
  auto rng = make_rng(8);
  auto seq_rng = make_rng(9);
  std::normal_distribution<double> noise(0.4, 1.0);
  for (int t = 0; t < 2; ++t) {
    Matrix batch(10, 3);
    for (std::size_t r = 0; r < 10; ++r) {
      for (std::size_t c = 0; c < 3; ++c) batch.at(r, c) = noise(seq_rng);
    }
    ingest_stride(stacks, cfg, batch, *pool, rng);
  }
  REQUIRE(stacks.test_full());

  const std::vector<double> v = {0.5, -1.0, 2.0};
  MlpModel m(3, 4, Activation::identity, 2);
  make_linear_model(m, v);

  // Oracle: difference of the projected coordinate-wise means.
  std::vector<double> mean_stream(3, 0.0), mean_ref(3, 0.0);
  for (int i = 0; i < stacks.test_stream.size(); ++i) {
    for (int c = 0; c < 3; ++c) mean_stream[c] += stacks.test_stream.row(i)[c];
  }
  for (int i = 0; i < stacks.test_ref.size(); ++i) {
    for (int c = 0; c < 3; ++c) mean_ref[c] += stacks.test_ref.row(i)[c];
  }
  double expected = 0.0;
  for (int c = 0; c < 3; ++c)
    expected += v[c] * (mean_stream[c] - mean_ref[c]) / 10.0;

  const double got = compute_increment(m, LossSpec{LossKind::logistic}, stacks, 1e-3);
  CHECK(got == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("untrained model under the mmd loss gives exactly zero increment") {
  auto pool = gaussian_pool(300, 2, 21);
  NnDetectorConfig cfg = small_config(22);
  cfg.loss.kind = LossKind::mmd_linear;
  NnCusumDetector det(cfg, pool);
  // Do not train: train_every beyond the horizon.
  NnDetectorConfig cfg2 = cfg;
  cfg2.window.train_every = 1000000;
  NnCusumDetector det2(cfg2, pool);
  Matrix batch(10, 2, 0.3);
  std::vector<DetectorVerdict> all;
  for (int t = 0; t < 8; ++t) {
    for (const auto& v : det2.observe_batch(batch)) all.push_back(v);
  }
  REQUIRE(!all.empty());
  for (const auto& v : all) {
    CHECK(v.increment == 0.0);
    CHECK(v.statistic_value == 0.0);
  }
}

TEST_CASE("warm-up emits nothing, then one verdict per stride") {
  auto pool = gaussian_pool(300, 2, 31);
  NnDetectorConfig cfg = small_config(32);  // w=40, s=10: warm-up 4 strides
  NnCusumDetector det(cfg, pool);
  Matrix batch(10, 2, 0.0);
  int emitted = 0;
  for (int t = 0; t < 10; ++t) {
    const auto out = det.observe_batch(batch);
    if (t < 3) {
      CHECK(out.empty());
    } else {
      CHECK(out.size() == 1);
    }
    emitted += static_cast<int>(out.size());
  }
  CHECK(emitted == 7);
  CHECK(det.strides_seen() == 10);
}

TEST_CASE("burn-in consumes pool data and leaves the detector ready") {
  auto pool = gaussian_pool(500, 2, 41);
  NnDetectorConfig cfg = small_config(42);
  cfg.window.burn_in = 100;  // 10 strides on pool data
  NnCusumDetector det(cfg, pool);
  CHECK(det.strides_seen() == 10);
  Matrix batch(10, 2, 0.0);
  // Buffers are already full: the first real stride emits.
  CHECK(det.observe_batch(batch).size() == 1);
}

TEST_CASE("a huge drift pins the statistic at zero") {
  auto pool = gaussian_pool(300, 2, 51);
  NnDetectorConfig cfg = small_config(52);
  cfg.drift = 1e9;
  NnCusumDetector det(cfg, pool);
  Matrix batch(10, 2, 1.0);
  for (int t = 0; t < 12; ++t) {
    for (const auto& v : det.observe_batch(batch)) {
      CHECK(v.statistic_value == 0.0);
    }
  }
}

TEST_CASE("detector reset replays to an identical trajectory") {
  auto pool = gaussian_pool(400, 3, 61);
  NnDetectorConfig cfg = small_config(62);
  cfg.window.burn_in = 40;
  NnCusumDetector det(cfg, pool);

  const auto spec = DistributionSpec::gaussian_mean(3, {0.3, 0.0, -0.2});
  const Matrix stream = spec.sample(200, 63);
  ObservationSequence seq;
  seq.data = stream;

  const RunResult a = run_to_stop(det, seq, 200);
  const RunResult b = run_to_stop(det, seq, 200);
  CHECK(a.statistics == b.statistics);
  CHECK(a.obs_index == b.obs_index);
}

TEST_CASE("pre-change increments center near zero after training") {
  // Null stream: both sides drawn from the same distribution.
  auto pool = gaussian_pool(2000, 4, 71);
  NnDetectorConfig cfg;
  cfg.window = {.window_length = 40, .split_ratio = 0.5, .stride = 10};
  cfg.hidden_width = 16;
  cfg.minibatch = 20;
  cfg.seed = 72;
  cfg.window.burn_in = 200;
  NnCusumDetector det(cfg, pool);

  const auto spec = DistributionSpec::gaussian_mean(4, std::vector<double>(4, 0.0));
  ObservationSequence seq;
  seq.data = spec.sample(3000, 73);
  const RunResult run = run_to_stop(det, seq, 3000);
  REQUIRE(run.increments.size() > 100);
  double mean = std::accumulate(run.increments.begin(), run.increments.end(), 0.0) /
                static_cast<double>(run.increments.size());
  double sd = 0.0;
  for (double v : run.increments) sd += (v - mean) * (v - mean);
  sd = std::sqrt(sd / static_cast<double>(run.increments.size() - 1));
  const double se = sd / std::sqrt(static_cast<double>(run.increments.size()));
  CHECK(std::abs(mean) < 5.0 * se + 0.02);
}

TEST_CASE("drift estimate equals the single increment in the trivial case") {
  auto pool = gaussian_pool(500, 2, 81);
  NnDetectorConfig cfg = small_config(82);
  // length = w emits exactly one increment
  const DriftEstimate est = estimate_drift(cfg, pool, 1, 40, 99);
  CHECK(est.n_sequences == 1);
  REQUIRE(est.per_sequence_means.size() == 1);
  CHECK(est.drift == est.per_sequence_means[0]);
}

TEST_CASE("drift estimation is reproducible per sequence index") {
  auto pool = gaussian_pool(600, 2, 91);
  NnDetectorConfig cfg = small_config(92);
  const DriftEstimate four = estimate_drift(cfg, pool, 4, 120, 7);
  const DriftEstimate eight = estimate_drift(cfg, pool, 8, 120, 7);
  for (int i = 0; i < 4; ++i)
    CHECK(four.per_sequence_means[i] == eight.per_sequence_means[i]);
  const double mean4 =
      std::accumulate(four.per_sequence_means.begin(),
                      four.per_sequence_means.end(), 0.0) / 4.0;
  CHECK(four.drift == doctest::Approx(mean4));
}

TEST_CASE("pre-change drift is small relative to a strong post-change shift") {
  auto pool = gaussian_pool(1500, 3, 101);
  NnDetectorConfig cfg;
  cfg.window = {.window_length = 40, .split_ratio = 0.5, .stride = 10};
  cfg.hidden_width = 16;
  cfg.minibatch = 20;
  cfg.seed = 102;
  cfg.window.burn_in = 400;
  const DriftEstimate est = estimate_drift(cfg, pool, 3, 800, 103);

  // Post-change run on a well-separated mean shift.
  cfg.drift = est.drift;
  NnCusumDetector det(cfg, pool);
  const auto post = DistributionSpec::gaussian_mean(3, {2.0, 2.0, 2.0});
  ObservationSequence seq;
  seq.data = post.sample(1200, 104);
  const RunResult run = run_to_stop(det, seq, 1200);
  double post_mean = std::accumulate(run.increments.begin(), run.increments.end(), 0.0) /
                     static_cast<double>(run.increments.size());
  CHECK(post_mean > 10.0 * std::abs(est.drift));
  CHECK(post_mean > 0.1);
}

TEST_CASE("from-scratch mode retrains from fresh parameters each stride") {
  auto pool = gaussian_pool(400, 2, 111);
  NnDetectorConfig cfg = small_config(112);
  cfg.train_from_scratch = true;
  cfg.window.train_every = 1;
  NnCusumDetector det(cfg, pool);
  Matrix batch(10, 2, 0.2);
  for (int t = 0; t < 6; ++t) det.observe_batch(batch);
  // Still functional and emits statistics.
  CHECK(det.strides_seen() == 6);
}

TEST_CASE("converged null training loss sits at log 2") {
  // With stream and reference identically distributed and abundant reference
  // data, the population optimum cannot separate the classes.
  auto pool = gaussian_pool(20000, 8, 121);
  NnDetectorConfig cfg;
  cfg.window = {.window_length = 100, .split_ratio = 0.5, .stride = 10,
                .train_every = 4};
  cfg.hidden_width = 32;
  cfg.minibatch = 20;
  cfg.seed = 122;
  cfg.window.burn_in = 3000;
  NnCusumDetector det(cfg, pool);

  // Feed more null data, then score the training stacks.
  const auto spec = DistributionSpec::gaussian_mean(8, std::vector<double>(8, 0.0));
  ObservationSequence seq;
  seq.data = spec.sample(1000, 123);
  run_to_stop(det, seq, 1000);

  // Rebuild the loss over the final model by replaying a fresh null stride
  // ingestion: evaluate per-sample logistic loss on fresh labeled data.
  const Matrix stream = spec.sample(400, 124);
  const Matrix ref = spec.sample(400, 125);
  double loss = 0.0;
  for (std::size_t i = 0; i < 400; ++i) {
    loss += per_sample_loss(LossSpec{LossKind::logistic},
                            det.model().raw_score(stream.row(i)), 1);
    loss += per_sample_loss(LossSpec{LossKind::logistic},
                            det.model().raw_score(ref.row(i)), 0);
  }
  loss /= 800.0;
  CHECK(loss == doctest::Approx(std::log(2.0)).epsilon(0.05));
}

TEST_CASE("squared and mmd losses run the full pipeline and detect a shift") {
  for (LossKind kind : {LossKind::squared, LossKind::mmd_linear}) {
    auto pool = gaussian_pool(4000, 4, 131 + static_cast<int>(kind));
    NnDetectorConfig cfg;
    cfg.window = {.window_length = 40, .split_ratio = 0.5, .stride = 10};
    cfg.hidden_width = 16;
    cfg.minibatch = 20;
    cfg.loss.kind = kind;
    cfg.seed = 133;
    cfg.window.burn_in = 400;
    NnCusumDetector det(cfg, pool);

    const auto pre = DistributionSpec::gaussian_mean(4, std::vector<double>(4, 0.0));
    const auto post = DistributionSpec::gaussian_mean(4, std::vector<double>(4, 2.0));
    const ObservationSequence seq = build_sequence(pre, post, 400, 1200, 134);
    const RunResult run = run_to_stop(det, seq, 1200);
    CHECK(run.max_post_change > 10.0 * std::max(run.max_pre_change, 1e-6));
  }
}
