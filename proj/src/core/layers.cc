#include "hotspots/core/layers.h"

#include <cmath>

namespace hotspots::nn {

void ParameterList::ZeroGrad() {
  for (auto& p : params) p.var.ZeroGrad();
}

std::size_t ParameterList::Count() const {
  std::size_t n = 0;
  for (const auto& p : params) n += p.var.value().size();
  return n;
}

Var MakeParameter(Shape shape) { return Var(Tensor::Zeros(std::move(shape)), true); }

void InitHeNormal(Var& w, int fan_in, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
  for (double& v : w.mutable_value().values()) v = dist(rng);
}

void InitUniform(Var& w, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : w.mutable_value().values()) v = dist(rng);
}

Conv2d::Conv2d(int in_channels, int out_channels, int kernel,
               ag::Conv2dOptions opt, bool bias, std::mt19937_64& rng)
    : in_(in_channels), out_(out_channels), kernel_(kernel), opt_(opt) {
  weight_ = MakeParameter({out_, in_, kernel_, kernel_});
  InitHeNormal(weight_, in_ * kernel_ * kernel_, rng);
  if (bias) bias_ = MakeParameter({out_});
}

Var Conv2d::Forward(const Var& x) const {
  return ag::Conv2d(x, weight_, bias_, opt_);
}

void Conv2d::Collect(const std::string& prefix, ParameterList* out) const {
  out->Add(prefix + ".weight", weight_);
  if (bias_.defined()) out->Add(prefix + ".bias", bias_);
}

BatchNorm2d::BatchNorm2d(int channels, double momentum, double eps)
    : channels_(channels),
      momentum_(momentum),
      eps_(eps),
      gamma_(Tensor::Ones({channels}), true),
      beta_(Tensor::Zeros({channels}), true),
      running_mean_(channels, 0.0),
      running_var_(channels, 1.0) {}

Var BatchNorm2d::Forward(const Var& x, bool training) {
  if (!training)
    return ag::BatchNormEval(x, gamma_, beta_, running_mean_, running_var_, eps_);
  std::vector<double> mean, var;
  Var y = ag::BatchNormTrain(x, gamma_, beta_, eps_, &mean, &var);
  const double count = static_cast<double>(x.dim(0)) * x.dim(2) * x.dim(3);
  const double unbias = count > 1 ? count / (count - 1) : 1.0;
  for (int c = 0; c < channels_; ++c) {
    running_mean_[c] = (1 - momentum_) * running_mean_[c] + momentum_ * mean[c];
    running_var_[c] = (1 - momentum_) * running_var_[c] + momentum_ * var[c] * unbias;
  }
  return y;
}

void BatchNorm2d::Collect(const std::string& prefix, ParameterList* out) {
  out->Add(prefix + ".gamma", gamma_);
  out->Add(prefix + ".beta", beta_);
  out->AddBuffer(prefix + ".running_mean", &running_mean_);
  out->AddBuffer(prefix + ".running_var", &running_var_);
}

Linear::Linear(int in, int out, std::mt19937_64& rng) : in_(in), out_(out) {
  weight_ = MakeParameter({out_, in_});
  bias_ = MakeParameter({out_});
  InitUniform(weight_, 1.0 / std::sqrt(static_cast<double>(in_)), rng);
}

void Linear::Collect(const std::string& prefix, ParameterList* out) const {
  out->Add(prefix + ".weight", weight_);
  out->Add(prefix + ".bias", bias_);
}

LstmCell::LstmCell(int input_size, int hidden_size, std::mt19937_64& rng)
    : input_(input_size), hidden_(hidden_size) {
  weight_ = MakeParameter({4 * hidden_, input_ + hidden_});
  bias_ = MakeParameter({4 * hidden_});
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_));
  InitUniform(weight_, bound, rng);
  InitUniform(bias_, bound, rng);
  for (int i = hidden_; i < 2 * hidden_; ++i) bias_.mutable_value()[i] += 1.0;
}

LstmState LstmCell::ZeroState(int batch) const {
  return {Var(Tensor::Zeros({batch, hidden_})), Var(Tensor::Zeros({batch, hidden_}))};
}

LstmState LstmCell::Step(const Var& x, const LstmState& state) const {
  if (x.value().rank() != 2 || x.dim(1) != input_)
    throw ShapeError("LstmCell: expected input [B, " + std::to_string(input_) +
                     "], got " + ShapeToString(x.shape()));
  Var gates = ag::Linear(ag::ConcatCols(x, state.h), weight_, bias_);
  Var i = ag::Sigmoid(ag::SliceCols(gates, 0, hidden_));
  Var f = ag::Sigmoid(ag::SliceCols(gates, hidden_, hidden_));
  Var g = ag::Tanh(ag::SliceCols(gates, 2 * hidden_, hidden_));
  Var o = ag::Sigmoid(ag::SliceCols(gates, 3 * hidden_, hidden_));
  Var c = ag::Add(ag::Mul(f, state.c), ag::Mul(i, g));
  Var h = ag::Mul(o, ag::Tanh(c));
  return {h, c};
}

void LstmCell::Collect(const std::string& prefix, ParameterList* out) const {
  out->Add(prefix + ".weight", weight_);
  out->Add(prefix + ".bias", bias_);
}

Adam::Adam(std::vector<Var> params, Options opt)
    : params_(std::move(params)), opt_(opt) {
  for (const Var& p : params_) {
    m_.push_back(Tensor::Zeros(p.shape()));
    v_.push_back(Tensor::Zeros(p.shape()));
  }
}

void Adam::Step() {
  ++step_;
  const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(step_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Var& p = params_[k];
    if (p.grad().empty()) continue;
    Tensor& value = p.mutable_value();
    const Tensor& grad = p.grad();
    Tensor& m = m_[k];
    Tensor& v = v_[k];
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i] + opt_.weight_decay * value[i];
      m[i] = opt_.beta1 * m[i] + (1 - opt_.beta1) * g;
      v[i] = opt_.beta2 * v[i] + (1 - opt_.beta2) * g * g;
      value[i] -= opt_.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + opt_.eps);
    }
  }
}

void Adam::Restore(long step, std::vector<Tensor> m, std::vector<Tensor> v) {
  if (m.size() != params_.size() || v.size() != params_.size())
    throw ShapeError("Adam::Restore: moment count mismatch");
  step_ = step;
  m_ = std::move(m);
  v_ = std::move(v);
}

double ClipGradNorm(std::vector<Var>& params, double max_norm) {
  double sq = 0.0;
  for (const Var& p : params)
    for (double g : p.grad().values()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0) {
    const double s = max_norm / norm;
    for (Var& p : params)
      for (double& g : p.mutable_grad().values()) g *= s;
  }
  return norm;
}

}  // namespace hotspots::nn
