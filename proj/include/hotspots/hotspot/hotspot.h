#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "hotspots/data/dataset.h"
#include "hotspots/training/model.h"

namespace hotspots::hotspot {

class HotspotError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Where the gradient of y^a is taken. The default runs it back through the
// anticipation network to the encoder output x_I; the ablation stops at the
// anticipated features x~_I.
enum class GradientPath { kThroughAnticipation, kAtAnticipated };

const char* GradientPathName(GradientPath path);
GradientPath ParseGradientPath(const std::string& name);

struct HotspotStack {
  std::string image_id;
  std::vector<Tensor> raw;   // |A| maps [n, n]
  std::vector<Tensor> maps;  // |A| maps [H, W] at source image resolution
  int height = 0;
  int width = 0;

  int size() const { return static_cast<int>(maps.size()); }
};

// sum_k ReLU(grad_k * act_k) for grad/act [d, n, n] -> [n, n].
Tensor ActivationMap(const Tensor& grad, const Tensor& act);

// Bilinear upsampling of an [n, n] map onto the centre square of an H x W
// image (the region the network saw); pixels outside that square are zero.
Tensor UpsampleToSource(const Tensor& raw, int height, int width);

struct MapTrace {
  Tensor features;  // [d, n, n] point at which the map is taken
  Tensor grad;      // [d, n, n] d(seed_scale * y^a)/d(features)
  Tensor map;       // [n, n]
};

// Read-only over the model: each call builds its own graph.
class HotspotExtractor {
 public:
  explicit HotspotExtractor(training::Model* model);

  // RGB image -> normalized network input [1, 3, S, S] (centre crop).
  Tensor Preprocess(const RgbImage& image) const;
  // Encoder output x_I [1, d, n, n], no gradient recorded.
  Tensor Features(const Tensor& input) const;

  // Pre-softmax action scores of an inactive image, through the anticipation
  // network.
  std::vector<double> InactiveActionScores(const RgbImage& image) const;
  std::vector<double> ScoresFromFeatures(const Tensor& features) const;

  MapTrace Trace(const Tensor& features, int action,
                 GradientPath path = GradientPath::kThroughAnticipation,
                 double seed_scale = 1.0) const;
  Tensor HotspotMap(const RgbImage& image, int action,
                    GradientPath path = GradientPath::kThroughAnticipation) const;

  HotspotStack Stack(const RgbImage& image, const std::string& image_id,
                     GradientPath path = GradientPath::kThroughAnticipation) const;
  // All |A| raw maps from one forward pass; features [1, d, n, n].
  std::vector<Tensor> RawMaps(const Tensor& features, GradientPath path) const;
  // One stack per frame, each frame treated as an inactive image.
  std::vector<HotspotStack> Video(const data::VideoClip& clip,
                                  GradientPath path = GradientPath::kThroughAnticipation) const;

  training::Model& model() const { return *model_; }

 private:
  void CheckAction(int action) const;
  training::Model* model_;
};

}  // namespace hotspots::hotspot
