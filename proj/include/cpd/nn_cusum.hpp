#pragma once

// Windowed network detector machinery: periodic one-pass training over the
// sliding stacks, the mean test-function increment, drift estimation from
// reference-only runs, and the CUSUM detector built on top.

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <vector>

#include "cpd/cusum.hpp"
#include "cpd/mlp.hpp"
#include "cpd/stacks.hpp"

namespace cpd {

// One epoch of minibatch Adam over the shuffled labeled union of the training
// stacks (stream rows labeled 1, reference rows 0; swap_labels flips both).
// Returns false while the buffers are still filling.
bool train_pass(MlpModel& model, AdamState& opt, const SlidingStacks& stacks,
                const LossSpec& loss, int minibatch,
                std::mt19937_64& shuffle_rng, bool swap_labels = false);

// Mean test-function value over the stream testing stack minus the mean over
// the reference testing stack. Throws while the testing buffers are filling.
double compute_increment(const MlpModel& model, const LossSpec& loss,
                         const SlidingStacks& stacks, double learning_rate);

struct NnDetectorConfig {
  WindowConfig window;
  LossSpec loss;
  int hidden_width = 64;
  double learning_rate = 1e-3;
  int minibatch = 100;
  // Default is continual training of one network; from-scratch mode re-draws
  // the initial parameters before every pass.
  bool train_from_scratch = false;
  double drift = 0.0;
  double threshold = std::numeric_limits<double>::infinity();
  std::uint64_t seed = 0;
};

// Shared skeleton: stride ingestion, reference draws, burn-in on pool data.
// Subclasses train their model(s) and produce the per-stride statistic.
class WindowedNetDetector : public StreamingDetector {
 public:
  void reset() final;
  std::vector<DetectorVerdict> observe_batch(const Matrix& rows) final;
  int dim() const final { return pool_->dim(); }
  int stride() const final { return config_.stride; }
  std::int64_t strides_seen() const { return strides_seen_; }
  // Raw increment behind the last emitted statistic.
  double last_increment() const { return last_increment_; }

 protected:
  WindowedNetDetector(const WindowConfig& config,
                      std::shared_ptr<const ReferencePool> pool,
                      std::uint64_t seed);

  virtual void reset_state() = 0;
  // Invoked after each stride's ingestion; `emitting` is false during
  // burn-in, where training proceeds but nothing is reported.
  virtual std::optional<DetectorVerdict> process_stride(bool emitting) = 0;

  WindowConfig config_;
  std::shared_ptr<const ReferencePool> pool_;
  SlidingStacks stacks_;
  std::uint64_t seed_;
  std::mt19937_64 ref_rng_;
  std::mt19937_64 shuffle_rng_;
  std::int64_t strides_seen_ = 0;
  double last_increment_ = 0.0;

  bool training_due() const {
    return strides_seen_ % config_.train_every == 0;
  }

 private:
  void run_burn_in();
};

class NnCusumDetector : public WindowedNetDetector {
 public:
  NnCusumDetector(const NnDetectorConfig& config,
                  std::shared_ptr<const ReferencePool> pool);

  double current_statistic() const override { return state_.statistic; }
  const CusumState& state() const { return state_; }
  const MlpModel& model() const { return model_; }
  double drift() const { return detector_config_.drift; }

 protected:
  void reset_state() override;
  std::optional<DetectorVerdict> process_stride(bool emitting) override;

 private:
  NnDetectorConfig detector_config_;
  MlpModel model_;
  AdamState opt_;
  CusumState state_;
};

struct DriftEstimate {
  double drift = 0.0;
  std::vector<double> per_sequence_means;
  int n_sequences = 0;
};

// Reference-only runs of the full pipeline (no alarming): the drift is the
// mean over sequences of the temporal mean of the increment.
DriftEstimate estimate_drift(const NnDetectorConfig& config,
                             std::shared_ptr<const ReferencePool> pool,
                             int n_sequences, std::int64_t length,
                             std::uint64_t seed);

}  // namespace cpd
