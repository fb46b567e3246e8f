#include "hotspots/hotspot/hotspot.h"

#include <algorithm>

namespace hotspots::hotspot {

using ag::Var;

const char* GradientPathName(GradientPath path) {
  return path == GradientPath::kThroughAnticipation ? "through" : "at-anticipated";
}

GradientPath ParseGradientPath(const std::string& name) {
  if (name == "through") return GradientPath::kThroughAnticipation;
  if (name == "at-anticipated") return GradientPath::kAtAnticipated;
  throw HotspotError("gradient path must be 'through' or 'at-anticipated', got '" + name + "'");
}

Tensor ActivationMap(const Tensor& grad, const Tensor& act) {
  if (grad.shape() != act.shape() || grad.rank() != 3)
    throw ShapeError("ActivationMap: gradient " + ShapeToString(grad.shape()) +
                     " vs activation " + ShapeToString(act.shape()));
  const int d = act.dim(0), plane = act.dim(1) * act.dim(2);
  Tensor map({act.dim(1), act.dim(2)});
  const double* g = grad.data();
  const double* x = act.data();
  double* m = map.data();
  for (int k = 0; k < d; ++k)
    for (int i = 0; i < plane; ++i) m[i] += std::max(0.0, g[k * plane + i] * x[k * plane + i]);
  return map;
}

Tensor UpsampleToSource(const Tensor& raw, int height, int width) {
  if (raw.rank() != 2) throw ShapeError("UpsampleToSource expects an [n, n] map");
  const int side = std::min(height, width);
  const int y0 = (height - side) / 2, x0 = (width - side) / 2;
  ag::NoGradGuard no_grad;
  const Var up =
      ag::UpsampleBilinear(Var(raw.Reshaped({1, 1, raw.dim(0), raw.dim(1)})), side, side);
  Tensor out({height, width});
  const double* u = up.value().data();
  for (int y = 0; y < side; ++y)
    std::copy_n(u + y * side, side, &out.at(y0 + y, x0));
  return out;
}

HotspotExtractor::HotspotExtractor(training::Model* model) : model_(model) {
  if (!model_) throw HotspotError("hotspot extraction needs a trained or loaded model");
}

void HotspotExtractor::CheckAction(int action) const {
  if (action < 0 || action >= model_->num_actions())
    throw HotspotError("action index " + std::to_string(action) + " out of range [0, " +
                       std::to_string(model_->num_actions()) + ")");
}

Tensor HotspotExtractor::Preprocess(const RgbImage& image) const {
  return ImageToTensor(CenterCropResize(image, model_->input_size()));
}

Tensor HotspotExtractor::Features(const Tensor& input) const {
  ag::NoGradGuard no_grad;
  return model_->Encode(input, false).value();
}

std::vector<double> HotspotExtractor::ScoresFromFeatures(const Tensor& features) const {
  ag::NoGradGuard no_grad;
  const Var s = model_->InactiveScores(Var(features), true);
  return {s.value().data(), s.value().data() + s.value().size()};
}

std::vector<double> HotspotExtractor::InactiveActionScores(const RgbImage& image) const {
  return ScoresFromFeatures(Features(Preprocess(image)));
}

namespace {

// Leaf at which gradients are read, and the scores computed from it.
std::pair<Var, Var> BuildGraph(training::Model& model, const Tensor& features,
                               GradientPath path) {
  if (features.rank() != 4 || features.dim(0) != 1)
    throw ShapeError("hotspot features must be [1, d, n, n], got " +
                     ShapeToString(features.shape()));
  if (path == GradientPath::kThroughAnticipation) {
    Var leaf(features, true);
    return {leaf, model.InactiveScores(leaf, true)};
  }
  Tensor anticipated;
  {
    ag::NoGradGuard no_grad;
    anticipated = model.Anticipate(Var(features), false).value();
  }
  Var leaf(anticipated, true);
  return {leaf, model.InactiveScores(leaf, false)};
}

Tensor Drop(const Tensor& t) { return t.Reshaped({t.dim(1), t.dim(2), t.dim(3)}); }

}  // namespace

MapTrace HotspotExtractor::Trace(const Tensor& features, int action, GradientPath path,
                                 double seed_scale) const {
  CheckAction(action);
  auto [leaf, scores] = BuildGraph(*model_, features, path);
  Tensor seed(scores.shape());
  seed[action] = seed_scale;
  ag::Backward(scores, &seed);
  MapTrace t;
  t.features = Drop(leaf.value());
  t.grad = leaf.grad().size() ? Drop(leaf.grad()) : Tensor(t.features.shape());
  t.map = ActivationMap(t.grad, t.features);
  return t;
}

std::vector<Tensor> HotspotExtractor::RawMaps(const Tensor& features, GradientPath path) const {
  auto [leaf, scores] = BuildGraph(*model_, features, path);
  std::vector<Tensor> maps;
  for (int a = 0; a < model_->num_actions(); ++a) {
    leaf.ZeroGrad();
    Tensor seed(scores.shape());
    seed[a] = 1.0;
    ag::Backward(scores, &seed);
    maps.push_back(ActivationMap(Drop(leaf.grad()), Drop(leaf.value())));
  }
  return maps;
}

Tensor HotspotExtractor::HotspotMap(const RgbImage& image, int action, GradientPath path) const {
  return Trace(Features(Preprocess(image)), action, path).map;
}

HotspotStack HotspotExtractor::Stack(const RgbImage& image, const std::string& image_id,
                                     GradientPath path) const {
  HotspotStack stack;
  stack.image_id = image_id;
  stack.height = image.height;
  stack.width = image.width;
  stack.raw = RawMaps(Features(Preprocess(image)), path);
  for (const auto& r : stack.raw) stack.maps.push_back(UpsampleToSource(r, image.height, image.width));
  return stack;
}

std::vector<HotspotStack> HotspotExtractor::Video(const data::VideoClip& clip,
                                                  GradientPath path) const {
  std::vector<HotspotStack> out;
  for (std::size_t t = 0; t < clip.frames.size(); ++t)
    out.push_back(Stack(clip.frames[t], "frame_" + std::to_string(t), path));
  return out;
}

}  // namespace hotspots::hotspot
