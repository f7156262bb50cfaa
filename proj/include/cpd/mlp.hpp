#pragma once

// One-hidden-layer ReLU network with analytic gradients and Adam. This is the
// learning engine behind the network-based detectors; parameters live in one
// flat array so optimizer state and serialization stay trivial.
//
// Layout: [W_in (h*d) | b_in (h) | w_out (h) | b_out (1)]

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace cpd {

enum class Activation { identity, sigmoid };

enum class LossKind { logistic, squared, mmd_linear, onnr_regression };

// Per-sample training loss. onnr_weight is only read by onnr_regression.
struct LossSpec {
  LossKind kind = LossKind::logistic;
  double onnr_weight = 0.5;  // in (0,1)
};

class MlpModel {
 public:
  MlpModel(int input_dim, int hidden_width, Activation activation,
           std::uint64_t init_seed);

  int input_dim() const { return input_dim_; }
  int hidden_width() const { return hidden_width_; }
  Activation activation() const { return activation_; }
  std::uint64_t init_seed() const { return init_seed_; }

  std::size_t param_count() const { return params_.size(); }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  // Parameters as frozen at construction; never mutated afterwards.
  std::span<const double> initial_params() const { return initial_params_; }

  // Pre-activation score w_out . relu(W_in x + b_in) + b_out.
  double raw_score(std::span<const double> x) const;
  // Same evaluated at the initial parameters.
  double raw_score_initial(std::span<const double> x) const;
  // raw_score with the output activation applied.
  double forward(std::span<const double> x) const;

  // Re-draws the initial parameters from `seed` and resets to them.
  void reinitialize(std::uint64_t seed);
  // Back to the frozen initial snapshot.
  void restore_initial();

  std::string serialize() const;           // versioned JSON blob
  static MlpModel deserialize(const std::string& blob);

 private:
  MlpModel() = default;
  double score_from(std::span<const double> p, std::span<const double> x) const;
  void init_params(std::uint64_t seed);

  int input_dim_ = 0;
  int hidden_width_ = 0;
  Activation activation_ = Activation::identity;
  std::uint64_t init_seed_ = 0;
  std::vector<double> params_;
  std::vector<double> initial_params_;
};

struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::int64_t timestep = 0;

  AdamState(std::size_t param_count, double lr)
      : learning_rate(lr),
        first_moment(param_count, 0.0),
        second_moment(param_count, 0.0) {}
};

double per_sample_loss(const LossSpec& loss, double u, int label);
// dl/du for the same loss.
double per_sample_loss_grad(const LossSpec& loss, double u, int label);

struct Sample {
  const double* x;
  int label;  // 1 = stream, 0 = reference
};

// Scratch buffers reused across gradient evaluations.
struct GradWorkspace {
  std::vector<double> pre_activation;
  std::vector<double> hidden;
  std::vector<double> hidden_grad;
};

// Gradient of (1/m) sum_i l(raw(x_i), y_i) with m = samples.size() / 2,
// accumulated into grad_out (which is zeroed first).
void batch_gradient(const MlpModel& model, const LossSpec& loss,
                    std::span<const Sample> samples, std::span<double> grad_out,
                    GradWorkspace& ws);

void adam_step(MlpModel& model, AdamState& opt, std::span<const double> grad);

// Detection-time test function g. Logistic and squared losses use the raw
// network score; the linearized MMD loss uses the training-scaled difference
// from the initial network, (raw(x) - raw_initial(x)) / learning_rate.
double test_function_value(const MlpModel& model, const LossSpec& loss,
                           std::span<const double> x, double learning_rate);

}  // namespace cpd
