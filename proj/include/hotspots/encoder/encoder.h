#pragma once

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "hotspots/core/image.h"
#include "hotspots/core/layers.h"

namespace hotspots::encoder {

using ag::Var;

inline constexpr double kL2PoolEps = 1e-12;

// d x n x n embedding of one frame or inactive image.
struct FeatureMap {
  Tensor values;  // [d, n, n]
  std::string provenance;

  int channels() const { return values.dim(0); }
  int size() const { return values.dim(1); }
};

// Per-channel RMS of a FeatureMap; entries are >= sqrt(kL2PoolEps).
struct PooledFeature {
  std::vector<double> values;
};

struct StageSpec {
  int out_channels = 32;
  int stride = 1;
  int dilation = 1;
};

struct EncoderConfig {
  std::string preset = "desk";  // "desk" | "paper"
  int input_size = 112;
  int channels = 32;      // d
  int output_size = 14;   // n
  // Desk preset: one 3x3 conv + ReLU per entry, applied in order.
  // Full-scale ("paper") preset: (stride, dilation) of res2..res5; out_channels unused.
  std::vector<StageSpec> stages;
  std::string pretrained_weights;  // optional checkpoint to initialise from

  // Small CNN: stride-2 stem and two stride-2 stages, then two stride-1
  // stages dilated by 2 and 4, so n = input_size / 8.
  static EncoderConfig Desk(int input_size = 112, int channels = 32);
  // ResNet-50 with res4/res5 at stride 1 (dilation 2/4): 224 -> 2048x28x28.
  static EncoderConfig Paper();
  // Throws ShapeError when the schedule does not produce channels x n x n.
  void Validate() const;
  int ComputedOutputSize() const;
};

class Backbone {
 public:
  virtual ~Backbone() = default;
  virtual Var Forward(const Var& images, bool training) = 0;
  virtual void Collect(const std::string& prefix, nn::ParameterList* out) = 0;
};

class Encoder {
 public:
  Encoder(const EncoderConfig& config, std::mt19937_64& rng);

  // images [N, 3, S, S] -> [N, d, n, n].
  Var Forward(const Var& images, bool training = false) const;
  FeatureMap EncodeFrame(const RgbImage& image, const std::string& provenance = "") const;
  void Collect(const std::string& prefix, nn::ParameterList* out) const;

  const EncoderConfig& config() const { return config_; }

 private:
  EncoderConfig config_;
  std::unique_ptr<Backbone> backbone_;
};

PooledFeature L2Pool(const FeatureMap& x);

}  // namespace hotspots::encoder
