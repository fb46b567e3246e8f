#include "hotspots/encoder/encoder.h"

#include <cmath>

namespace hotspots::encoder {

namespace {

constexpr int kKernel = 3;

int StridedSize(int in, int stride, int dilation) {
  ag::Conv2dOptions opt{stride, dilation, dilation};
  return ag::ConvOutputSize(in, kKernel, opt);
}

class DeskBackbone : public Backbone {
 public:
  DeskBackbone(const EncoderConfig& config, std::mt19937_64& rng) {
    int in = 3;
    for (std::size_t i = 0; i < config.stages.size(); ++i) {
      const auto& s = config.stages[i];
      const int out = i + 1 == config.stages.size() ? config.channels : s.out_channels;
      convs_.emplace_back(in, out, kKernel,
                          ag::Conv2dOptions{s.stride, s.dilation, s.dilation, true}, true, rng);
      residual_.push_back(s.stride == 1 && in == out);
      in = out;
    }
  }

  Var Forward(const Var& images, bool) override {
    Var x = images;
    for (std::size_t i = 0; i < convs_.size(); ++i) {
      Var y = convs_[i].Forward(x);
      // Identity skips on the dilated stages keep each cell anchored to its
      // own location instead of to its dilated taps.
      x = ag::Relu(residual_[i] ? ag::Add(x, y) : y);
    }
    return x;
  }

  void Collect(const std::string& prefix, nn::ParameterList* out) override {
    for (std::size_t i = 0; i < convs_.size(); ++i)
      convs_[i].Collect(prefix + ".conv" + std::to_string(i), out);
  }

 private:
  std::vector<nn::Conv2d> convs_;
  std::vector<bool> residual_;
};

class Bottleneck {
 public:
  Bottleneck(int in, int width, int stride, int dilation, std::mt19937_64& rng)
      : conv1_(in, width, 1, {}, false, rng),
        bn1_(width),
        conv2_(width, width, 3, {stride, dilation, dilation}, false, rng),
        bn2_(width),
        conv3_(width, width * 4, 1, {}, false, rng),
        bn3_(width * 4) {
    if (stride != 1 || in != width * 4) {
      down_conv_ = nn::Conv2d(in, width * 4, 1, {stride, 0, 1}, false, rng);
      down_bn_ = nn::BatchNorm2d(width * 4);
      has_down_ = true;
    }
  }

  Var Forward(const Var& x, bool training) {
    Var y = ag::Relu(bn1_.Forward(conv1_.Forward(x), training));
    y = ag::Relu(bn2_.Forward(conv2_.Forward(y), training));
    y = bn3_.Forward(conv3_.Forward(y), training);
    Var skip = has_down_ ? down_bn_.Forward(down_conv_.Forward(x), training) : x;
    return ag::Relu(ag::Add(y, skip));
  }

  void Collect(const std::string& prefix, nn::ParameterList* out) {
    conv1_.Collect(prefix + ".conv1", out);
    bn1_.Collect(prefix + ".bn1", out);
    conv2_.Collect(prefix + ".conv2", out);
    bn2_.Collect(prefix + ".bn2", out);
    conv3_.Collect(prefix + ".conv3", out);
    bn3_.Collect(prefix + ".bn3", out);
    if (has_down_) {
      down_conv_.Collect(prefix + ".downsample.conv", out);
      down_bn_.Collect(prefix + ".downsample.bn", out);
    }
  }

 private:
  nn::Conv2d conv1_;
  nn::BatchNorm2d bn1_;
  nn::Conv2d conv2_;
  nn::BatchNorm2d bn2_;
  nn::Conv2d conv3_;
  nn::BatchNorm2d bn3_;
  nn::Conv2d down_conv_;
  nn::BatchNorm2d down_bn_;
  bool has_down_ = false;
};

class ResNet50Backbone : public Backbone {
 public:
  ResNet50Backbone(const EncoderConfig& config, std::mt19937_64& rng)
      : stem_(3, 64, 7, {2, 3, 1}, false, rng), stem_bn_(64) {
    constexpr int kBlocks[4] = {3, 4, 6, 3};
    constexpr int kWidths[4] = {64, 128, 256, 512};
    int in = 64;
    for (int s = 0; s < 4; ++s) {
      const auto& spec = config.stages[s];
      std::vector<Bottleneck> stage;
      for (int b = 0; b < kBlocks[s]; ++b) {
        stage.emplace_back(in, kWidths[s], b == 0 ? spec.stride : 1, spec.dilation, rng);
        in = kWidths[s] * 4;
      }
      stages_.push_back(std::move(stage));
    }
  }

  Var Forward(const Var& images, bool training) override {
    Var x = ag::Relu(stem_bn_.Forward(stem_.Forward(images), training));
    x = ag::MaxPool2d(x, 3, 2, 1);
    for (auto& stage : stages_)
      for (auto& block : stage) x = block.Forward(x, training);
    return x;
  }

  void Collect(const std::string& prefix, nn::ParameterList* out) override {
    stem_.Collect(prefix + ".conv1", out);
    stem_bn_.Collect(prefix + ".bn1", out);
    for (std::size_t s = 0; s < stages_.size(); ++s)
      for (std::size_t b = 0; b < stages_[s].size(); ++b)
        stages_[s][b].Collect(prefix + ".res" + std::to_string(s + 2) + "." +
                                  std::to_string(b),
                              out);
  }

 private:
  nn::Conv2d stem_;
  nn::BatchNorm2d stem_bn_;
  std::vector<std::vector<Bottleneck>> stages_;
};

}  // namespace

EncoderConfig EncoderConfig::Desk(int input_size, int channels) {
  EncoderConfig c;
  c.preset = "desk";
  c.input_size = input_size;
  c.channels = channels;
  c.stages = {{16, 2, 1}, {32, 2, 1}, {32, 2, 1}, {32, 1, 2}, {channels, 1, 4}};
  c.output_size = c.ComputedOutputSize();
  return c;
}

EncoderConfig EncoderConfig::Paper() {
  EncoderConfig c;
  c.preset = "paper";
  c.input_size = 224;
  c.channels = 2048;
  c.stages = {{256, 1, 1}, {512, 2, 1}, {1024, 1, 2}, {2048, 1, 4}};
  c.output_size = c.ComputedOutputSize();
  return c;
}

int EncoderConfig::ComputedOutputSize() const {
  int n = input_size;
  if (preset == "paper") {
    n = ag::ConvOutputSize(n, 7, {2, 3, 1});
    n = (n + 2 - 3) / 2 + 1;  // 3x3/2 max pool
    for (const auto& s : stages) n = (n - 1) / s.stride + 1;
    return n;
  }
  for (const auto& s : stages) n = StridedSize(n, s.stride, s.dilation);
  return n;
}

void EncoderConfig::Validate() const {
  if (preset != "desk" && preset != "paper")
    throw ShapeError("unknown encoder preset: " + preset);
  if (stages.empty()) throw ShapeError("encoder has no stages");
  if (preset == "paper" && (stages.size() != 4 || channels != 2048))
    throw ShapeError("paper preset needs 4 residual stages and 2048 channels");
  if (channels < 1) throw ShapeError("encoder channels must be >= 1");
  const int n = ComputedOutputSize();
  if (n < 1 || n != output_size)
    throw ShapeError("encoder schedule yields n=" + std::to_string(n) +
                     ", configured output_size=" + std::to_string(output_size));
}

Encoder::Encoder(const EncoderConfig& config, std::mt19937_64& rng) : config_(config) {
  config_.Validate();
  if (config_.preset == "paper") {
    backbone_ = std::make_unique<ResNet50Backbone>(config_, rng);
  } else {
    backbone_ = std::make_unique<DeskBackbone>(config_, rng);
  }
}

Var Encoder::Forward(const Var& images, bool training) const {
  const Shape& s = images.shape();
  if (s.size() != 4 || s[1] != 3 || s[2] != config_.input_size || s[3] != config_.input_size)
    throw ShapeError("encoder expects [N, 3, " + std::to_string(config_.input_size) + ", " +
                     std::to_string(config_.input_size) + "], got " + ShapeToString(s));
  return backbone_->Forward(images, training);
}

FeatureMap Encoder::EncodeFrame(const RgbImage& image, const std::string& provenance) const {
  if (image.height != config_.input_size || image.width != config_.input_size)
    throw ShapeError("encode_frame: image is " + std::to_string(image.height) + "x" +
                     std::to_string(image.width) + ", encoder input is " +
                     std::to_string(config_.input_size));
  ag::NoGradGuard no_grad;
  Var out = Forward(Var(ImageToTensor(image)), false);
  const int d = out.dim(1), n = out.dim(2);
  return {out.value().Reshaped({d, n, out.dim(3)}), provenance};
}

void Encoder::Collect(const std::string& prefix, nn::ParameterList* out) const {
  backbone_->Collect(prefix, out);
}

PooledFeature L2Pool(const FeatureMap& x) {
  if (!x.values.AllFinite()) throw std::domain_error("l2_pool: non-finite feature map");
  const Shape& s = x.values.shape();
  if (s.size() != 3) throw ShapeError("l2_pool expects a [d, n, n] feature map");
  Var pooled = ag::L2Pool(Var(x.values.Reshaped({1, s[0], s[1], s[2]})), kL2PoolEps);
  return {pooled.value().storage()};
}

}  // namespace hotspots::encoder
