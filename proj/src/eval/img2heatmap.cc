#include "hotspots/eval/img2heatmap.h"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace hotspots::eval {

using ag::Var;

Img2Heatmap::Img2Heatmap(int num_actions, int input_size, std::uint64_t seed, int width)
    : num_actions_(num_actions), input_size_(input_size), rng_(seed) {
  if (num_actions < 1) throw std::invalid_argument("Img2Heatmap needs at least one action");
  if (input_size % 4 != 0) throw std::invalid_argument("Img2Heatmap input size must be a multiple of 4");
  const ag::Conv2dOptions same{1, 1, 1};
  enc1_ = nn::Conv2d(3, width, 3, same, true, rng_);
  enc2_ = nn::Conv2d(width, 2 * width, 3, same, true, rng_);
  enc3_ = nn::Conv2d(2 * width, 2 * width, 3, same, true, rng_);
  dec1_ = nn::Conv2d(2 * width, width, 3, same, true, rng_);
  dec2_ = nn::Conv2d(width, width, 3, same, true, rng_);
  head_ = nn::Conv2d(width, num_actions, 1, {1, 0, 1}, true, rng_);
  enc1_.Collect("enc1", &params_);
  enc2_.Collect("enc2", &params_);
  enc3_.Collect("enc3", &params_);
  dec1_.Collect("dec1", &params_);
  dec2_.Collect("dec2", &params_);
  head_.Collect("head", &params_);
}

Var Img2Heatmap::Forward(const Tensor& images) const {
  const int s = input_size_;
  Var x = ag::Relu(enc1_.Forward(Var(images)));
  x = ag::MaxPool2d(x, 2, 2, 0);
  x = ag::Relu(enc2_.Forward(x));
  x = ag::MaxPool2d(x, 2, 2, 0);
  x = ag::Relu(enc3_.Forward(x));
  x = ag::UpsampleBilinear(x, s / 2, s / 2);
  x = ag::Relu(dec1_.Forward(x));
  x = ag::UpsampleBilinear(x, s, s);
  x = ag::Relu(dec2_.Forward(x));
  return head_.Forward(x);
}

namespace {

Tensor MaxNormalized(const Tensor& m) {
  const auto v = m.values();
  const double peak = *std::max_element(v.begin(), v.end());
  Tensor out = m;
  if (peak > 0)
    for (double& x : out.storage()) x /= peak;
  return out;
}

}  // namespace

std::vector<double> Img2Heatmap::Train(const std::vector<Img2HeatmapSample>& samples, int steps,
                                       double learning_rate, int batch_size) {
  if (samples.empty()) throw std::invalid_argument("Img2Heatmap training needs samples");
  const int s = input_size_, plane = s * s;
  std::vector<Tensor> inputs, targets;
  for (const auto& sample : samples) {
    if (sample.gt.empty()) throw std::invalid_argument("Img2Heatmap sample without ground truth");
    inputs.push_back(ImageToTensor(CenterCropResize(sample.image, s)));
    Tensor t({num_actions_, s, s});
    for (const auto& [a, gt] : sample.gt) {
      if (a < 0 || a >= num_actions_) throw std::out_of_range("Img2Heatmap: bad action index");
      const Tensor m = MaxNormalized(CenterCropResizeMap(gt, s));
      for (int i = 0; i < plane; ++i) t[a * plane + i] = std::max(t[a * plane + i], m[i]);
    }
    targets.push_back(std::move(t));
  }
  nn::Adam::Options opt;
  opt.lr = learning_rate;
  opt.weight_decay = 0.0;
  std::vector<Var> params;
  for (const auto& p : params_.params) params.push_back(p.var);
  nn::Adam adam(params, opt);

  std::vector<int> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> losses;
  std::size_t cursor = order.size();
  const int b = std::min<int>(batch_size, samples.size());
  for (int step = 0; step < steps; ++step) {
    Tensor x({b, 3, s, s}), y({b, num_actions_, s, s});
    for (int i = 0; i < b; ++i) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng_);
        cursor = 0;
      }
      const int k = order[cursor++];
      std::copy_n(inputs[k].data(), 3 * plane, x.data() + i * 3 * plane);
      std::copy_n(targets[k].data(), num_actions_ * plane, y.data() + i * num_actions_ * plane);
    }
    params_.ZeroGrad();
    Var loss = ag::BceWithLogits(Forward(x), y);
    losses.push_back(loss.value()[0]);
    ag::Backward(loss);
    adam.Step();
  }
  return losses;
}

hotspot::HotspotStack Img2Heatmap::Predict(const RgbImage& image, const std::string& image_id) const {
  ag::NoGradGuard no_grad;
  const Var probs = ag::Sigmoid(Forward(ImageToTensor(CenterCropResize(image, input_size_))));
  hotspot::HotspotStack stack;
  stack.image_id = image_id;
  stack.height = image.height;
  stack.width = image.width;
  const int s = input_size_;
  for (int a = 0; a < num_actions_; ++a) {
    Tensor raw({s, s});
    std::copy_n(probs.value().data() + a * s * s, s * s, raw.data());
    stack.maps.push_back(hotspot::UpsampleToSource(raw, image.height, image.width));
    stack.raw.push_back(std::move(raw));
  }
  return stack;
}

}  // namespace hotspots::eval
