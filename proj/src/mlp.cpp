#include "cpd/mlp.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "cpd/kernels.hpp"
#include "cpd/rng.hpp"
#include "cpd/specfun.hpp"

namespace cpd {

namespace {

std::size_t param_count_for(int d, int h) {
  return static_cast<std::size_t>(h) * d + 2 * static_cast<std::size_t>(h) + 1;
}

}  // namespace

MlpModel::MlpModel(int input_dim, int hidden_width, Activation activation,
                   std::uint64_t init_seed)
    : input_dim_(input_dim),
      hidden_width_(hidden_width),
      activation_(activation),
      init_seed_(init_seed) {
  if (input_dim <= 0 || hidden_width <= 0)
    throw std::invalid_argument("MlpModel: dimensions must be positive");
  params_.resize(param_count_for(input_dim, hidden_width));
  init_params(init_seed);
}

void MlpModel::init_params(std::uint64_t seed) {
  // He-style uniform fan-in scaling; biases start at zero.
  auto rng = make_rng(derive_seed(seed, 0, "mlp-init"));
  const double lim_in = std::sqrt(6.0 / input_dim_);
  const double lim_out = std::sqrt(6.0 / hidden_width_);
  std::uniform_real_distribution<double> uin(-lim_in, lim_in);
  std::uniform_real_distribution<double> uout(-lim_out, lim_out);
  const std::size_t wn = static_cast<std::size_t>(hidden_width_) * input_dim_;
  for (std::size_t i = 0; i < wn; ++i) params_[i] = uin(rng);
  for (int i = 0; i < hidden_width_; ++i) params_[wn + i] = 0.0;
  for (int i = 0; i < hidden_width_; ++i) params_[wn + hidden_width_ + i] = uout(rng);
  params_.back() = 0.0;
  initial_params_ = params_;
}

void MlpModel::reinitialize(std::uint64_t seed) {
  init_seed_ = seed;
  init_params(seed);
}

void MlpModel::restore_initial() { params_ = initial_params_; }

double MlpModel::score_from(std::span<const double> p,
                            std::span<const double> x) const {
  if (static_cast<int>(x.size()) != input_dim_)
    throw std::invalid_argument("MlpModel: input dimension mismatch");
  const std::size_t d = static_cast<std::size_t>(input_dim_);
  const std::size_t h = static_cast<std::size_t>(hidden_width_);
  const double* w_in = p.data();
  const double* b_in = p.data() + h * d;
  const double* w_out = b_in + h;
  const double b_out = p[h * d + 2 * h];

  thread_local std::vector<double> z;
  z.resize(h);
  kernels::matvec_bias(w_in, x.data(), b_in, z.data(), h, d);
  return kernels::relu_dot(z.data(), w_out, h) + b_out;
}

double MlpModel::raw_score(std::span<const double> x) const {
  return score_from(params_, x);
}

double MlpModel::raw_score_initial(std::span<const double> x) const {
  return score_from(initial_params_, x);
}

double MlpModel::forward(std::span<const double> x) const {
  const double u = raw_score(x);
  return activation_ == Activation::sigmoid ? sigmoid(u) : u;
}

std::string MlpModel::serialize() const {
  nlohmann::json j;
  j["format_version"] = 1;
  j["input_dim"] = input_dim_;
  j["hidden_width"] = hidden_width_;
  j["activation"] = activation_ == Activation::sigmoid ? "sigmoid" : "identity";
  j["init_seed"] = init_seed_;
  j["params"] = params_;
  j["initial_params"] = initial_params_;
  return j.dump();
}

MlpModel MlpModel::deserialize(const std::string& blob) {
  const auto j = nlohmann::json::parse(blob);
  if (j.at("format_version").get<int>() != 1)
    throw std::runtime_error("MlpModel: unsupported snapshot version");
  MlpModel m;
  m.input_dim_ = j.at("input_dim").get<int>();
  m.hidden_width_ = j.at("hidden_width").get<int>();
  m.activation_ = j.at("activation").get<std::string>() == "sigmoid"
                      ? Activation::sigmoid
                      : Activation::identity;
  m.init_seed_ = j.at("init_seed").get<std::uint64_t>();
  m.params_ = j.at("params").get<std::vector<double>>();
  m.initial_params_ = j.at("initial_params").get<std::vector<double>>();
  if (m.params_.size() != param_count_for(m.input_dim_, m.hidden_width_) ||
      m.initial_params_.size() != m.params_.size())
    throw std::runtime_error("MlpModel: corrupt snapshot");
  return m;
}

double per_sample_loss(const LossSpec& loss, double u, int label) {
  if (!std::isfinite(u)) throw std::invalid_argument("per_sample_loss: non-finite score");
  switch (loss.kind) {
    case LossKind::logistic:
      return label == 1 ? log1pexp(-u) : log1pexp(u);
    case LossKind::squared:
      return label == 1 ? 0.5 * (u - 1.0) * (u - 1.0)
                        : 0.5 * (u + 1.0) * (u + 1.0);
    case LossKind::mmd_linear:
      return label == 1 ? -u : u;
    case LossKind::onnr_regression: {
      const double a = loss.onnr_weight;
      return label == 1 ? 0.5 * a * u * u - u : 0.5 * (1.0 - a) * u * u;
    }
  }
  throw std::logic_error("per_sample_loss: unknown kind");
}

double per_sample_loss_grad(const LossSpec& loss, double u, int label) {
  switch (loss.kind) {
    case LossKind::logistic:
      return sigmoid(u) - label;
    case LossKind::squared:
      return u + 1.0 - 2.0 * label;
    case LossKind::mmd_linear:
      return 1.0 - 2.0 * label;
    case LossKind::onnr_regression: {
      const double a = loss.onnr_weight;
      return label == 1 ? a * u - 1.0 : (1.0 - a) * u;
    }
  }
  throw std::logic_error("per_sample_loss_grad: unknown kind");
}

void batch_gradient(const MlpModel& model, const LossSpec& loss,
                    std::span<const Sample> samples, std::span<double> grad_out,
                    GradWorkspace& ws) {
  if (samples.empty()) throw std::invalid_argument("batch_gradient: empty batch");
  if (grad_out.size() != model.param_count())
    throw std::invalid_argument("batch_gradient: gradient shape mismatch");

  const std::size_t d = static_cast<std::size_t>(model.input_dim());
  const std::size_t h = static_cast<std::size_t>(model.hidden_width());
  const auto p = model.params();
  const double* w_in = p.data();
  const double* b_in = p.data() + h * d;
  const double* w_out = b_in + h;
  double* g_w_in = grad_out.data();
  double* g_b_in = grad_out.data() + h * d;
  double* g_w_out = g_b_in + h;
  double& g_b_out = grad_out[h * d + 2 * h];

  std::fill(grad_out.begin(), grad_out.end(), 0.0);
  ws.pre_activation.resize(h);
  ws.hidden.resize(h);
  ws.hidden_grad.resize(h);

  for (const Sample& s : samples) {
    kernels::matvec_bias(w_in, s.x, b_in, ws.pre_activation.data(), h, d);
    kernels::relu(ws.pre_activation.data(), ws.hidden.data(), h);
    const double u = kernels::dot(ws.hidden.data(), w_out, h) + p[h * d + 2 * h];
    const double c = per_sample_loss_grad(loss, u, s.label);
    kernels::axpy(c, ws.hidden.data(), g_w_out, h);
    g_b_out += c;
    kernels::relu_backprop(ws.pre_activation.data(), w_out, c,
                           ws.hidden_grad.data(), h);
    kernels::ger(g_w_in, 1.0, ws.hidden_grad.data(), s.x, h, d);
    kernels::axpy(1.0, ws.hidden_grad.data(), g_b_in, h);
  }
  // Loss normalizes by half the combined batch size.
  const double inv_m = 2.0 / static_cast<double>(samples.size());
  kernels::scal(inv_m, grad_out.data(), grad_out.size());
}

void adam_step(MlpModel& model, AdamState& opt, std::span<const double> grad) {
  if (grad.size() != model.param_count() ||
      opt.first_moment.size() != model.param_count())
    throw std::invalid_argument("adam_step: shape mismatch");
  opt.timestep += 1;
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.timestep));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.timestep));
  kernels::adam_update(model.params().data(), opt.first_moment.data(),
                       opt.second_moment.data(), grad.data(), grad.size(),
                       opt.learning_rate, opt.beta1, opt.beta2, opt.epsilon,
                       bc1, bc2);
}

double test_function_value(const MlpModel& model, const LossSpec& loss,
                           std::span<const double> x, double learning_rate) {
  if (loss.kind == LossKind::mmd_linear) {
    return (model.raw_score(x) - model.raw_score_initial(x)) / learning_rate;
  }
  return model.forward(x);
}

}  // namespace cpd
