#pragma once

#include <random>
#include <string>
#include <vector>

#include "hotspots/core/ops.h"

namespace hotspots::nn {

using ag::Var;

struct NamedParameter {
  std::string name;
  Var var;
};

// Non-trainable state that must survive a checkpoint round trip
// (e.g. batch-norm running statistics).
struct NamedBuffer {
  std::string name;
  std::vector<double>* data;
};

struct ParameterList {
  std::vector<NamedParameter> params;
  std::vector<NamedBuffer> buffers;

  void Add(const std::string& name, const Var& v) { params.push_back({name, v}); }
  void AddBuffer(const std::string& name, std::vector<double>* d) {
    buffers.push_back({name, d});
  }
  void ZeroGrad();
  std::size_t Count() const;
};

Var MakeParameter(Shape shape);
// He-normal initialization scaled by fan-in.
void InitHeNormal(Var& w, int fan_in, std::mt19937_64& rng);
void InitUniform(Var& w, double bound, std::mt19937_64& rng);

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(int in_channels, int out_channels, int kernel, ag::Conv2dOptions opt,
         bool bias, std::mt19937_64& rng);

  Var Forward(const Var& x) const;
  void Collect(const std::string& prefix, ParameterList* out) const;

  int in_channels() const { return in_; }
  int out_channels() const { return out_; }
  int kernel() const { return kernel_; }
  const ag::Conv2dOptions& options() const { return opt_; }

 private:
  int in_ = 0, out_ = 0, kernel_ = 1;
  ag::Conv2dOptions opt_;
  Var weight_, bias_;
};

class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  explicit BatchNorm2d(int channels, double momentum = 0.1, double eps = 1e-5);

  // Training mode normalizes with batch statistics and updates the running
  // estimates; inference mode uses the running estimates only.
  Var Forward(const Var& x, bool training);
  void Collect(const std::string& prefix, ParameterList* out);

 private:
  int channels_ = 0;
  double momentum_ = 0.1, eps_ = 1e-5;
  Var gamma_, beta_;
  std::vector<double> running_mean_, running_var_;
};

class Linear {
 public:
  Linear() = default;
  Linear(int in, int out, std::mt19937_64& rng);

  Var Forward(const Var& x) const { return ag::Linear(x, weight_, bias_); }
  void Collect(const std::string& prefix, ParameterList* out) const;

  int in_features() const { return in_; }
  int out_features() const { return out_; }
  const Var& weight() const { return weight_; }
  const Var& bias() const { return bias_; }

 private:
  int in_ = 0, out_ = 0;
  Var weight_, bias_;
};

struct LstmState {
  Var h;  // [B, hidden]
  Var c;  // [B, hidden]
};

// Single-layer LSTM cell, gate order (input, forget, cell, output).
class LstmCell {
 public:
  LstmCell() = default;
  LstmCell(int input_size, int hidden_size, std::mt19937_64& rng);

  LstmState ZeroState(int batch) const;
  LstmState Step(const Var& x, const LstmState& state) const;
  void Collect(const std::string& prefix, ParameterList* out) const;

  int input_size() const { return input_; }
  int hidden_size() const { return hidden_; }

 private:
  int input_ = 0, hidden_ = 0;
  Var weight_, bias_;  // [4H, input + H], [4H]
};

// Adam with coupled (L2) weight decay.
class Adam {
 public:
  struct Options {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 5e-4;
  };

  Adam(std::vector<Var> params, Options opt);
  void Step();
  long steps() const { return step_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }
  void Restore(long step, std::vector<Tensor> m, std::vector<Tensor> v);

 private:
  std::vector<Var> params_;
  Options opt_;
  std::vector<Tensor> m_, v_;
  long step_ = 0;
};

// Scales all gradients so their global L2 norm is at most max_norm; returns
// the norm before clipping.
double ClipGradNorm(std::vector<Var>& params, double max_norm);

}  // namespace hotspots::nn
