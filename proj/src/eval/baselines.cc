#include "hotspots/eval/baselines.h"

#include <algorithm>
#include <cmath>

#include "hotspots/eval/metrics.h"

namespace hotspots::eval {

double DefaultCenterBiasSigma(int height, int width) { return std::min(height, width) / 4.0; }

Tensor CenterBias(int height, int width, double sigma) {
  if (!(sigma > 0)) throw MetricError("center bias sigma must be positive");
  Tensor m({height, width});
  const double cy = (height - 1) / 2.0, cx = (width - 1) / 2.0;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double dy = y - cy, dx = x - cx;
      m.at(y, x) = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
    }
  return NormalizeMap(m);
}

Tensor GradCamFromGradient(const Tensor& grad, const Tensor& act) {
  if (grad.shape() != act.shape() || act.rank() != 3)
    throw ShapeError("GradCam: gradient and activation shapes differ");
  const int d = act.dim(0), plane = act.dim(1) * act.dim(2);
  Tensor map({act.dim(1), act.dim(2)});
  for (int k = 0; k < d; ++k) {
    double w = 0;
    for (int i = 0; i < plane; ++i) w += grad[k * plane + i];
    w /= plane;
    for (int i = 0; i < plane; ++i) map[i] += w * act[k * plane + i];
  }
  for (double& v : map.storage()) v = std::max(0.0, v);
  return map;
}

GradCam::GradCam(training::Model* model) : extractor_(model) {}

Tensor GradCam::RawMap(const Tensor& features, int action) const {
  if (action < 0 || action >= extractor_.model().num_actions())
    throw hotspot::HotspotError("action index " + std::to_string(action) + " out of range");
  if (features.rank() != 4 || features.dim(0) != 1)
    throw ShapeError("GradCam features must be [1, d, n, n]");
  // The baseline classifier sees the encoder output directly.
  ag::Var leaf(features, true);
  ag::Var scores = extractor_.model().InactiveScores(leaf, false);
  Tensor seed(scores.shape());
  seed[action] = 1.0;
  ag::Backward(scores, &seed);
  const Shape s{features.dim(1), features.dim(2), features.dim(3)};
  return GradCamFromGradient(leaf.grad().Reshaped(s), features.Reshaped(s));
}

Tensor GradCam::Map(const RgbImage& image, int action) const {
  const Tensor raw = RawMap(extractor_.Features(extractor_.Preprocess(image)), action);
  return hotspot::UpsampleToSource(raw, image.height, image.width);
}

hotspot::HotspotStack GradCam::Stack(const RgbImage& image, const std::string& image_id) const {
  hotspot::HotspotStack stack;
  stack.image_id = image_id;
  stack.height = image.height;
  stack.width = image.width;
  const Tensor features = extractor_.Features(extractor_.Preprocess(image));
  for (int a = 0; a < extractor_.model().num_actions(); ++a) {
    stack.raw.push_back(RawMap(features, a));
    stack.maps.push_back(hotspot::UpsampleToSource(stack.raw.back(), image.height, image.width));
  }
  return stack;
}

}  // namespace hotspots::eval
