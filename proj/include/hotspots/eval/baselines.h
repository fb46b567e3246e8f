#pragma once

#include "hotspots/hotspot/hotspot.h"

namespace hotspots::eval {

// min(H, W) / 4.
double DefaultCenterBiasSigma(int height, int width);

// Isotropic Gaussian centred at ((H-1)/2, (W-1)/2), summing to 1.
Tensor CenterBias(int height, int width, double sigma);

// Grad-CAM on a model trained without anticipation: channel weights are the
// spatial mean of d y^a / d x, map = ReLU(sum_k w_k x_k). x = encoder output
// [d, n, n]; returns the raw [n, n] map.
Tensor GradCamFromGradient(const Tensor& grad, const Tensor& act);

class GradCam {
 public:
  explicit GradCam(training::Model* model);
  Tensor RawMap(const Tensor& features, int action) const;
  // Upsampled to the source image size like hotspot stacks.
  Tensor Map(const RgbImage& image, int action) const;
  hotspot::HotspotStack Stack(const RgbImage& image, const std::string& image_id) const;

 private:
  hotspot::HotspotExtractor extractor_;
};

}  // namespace hotspots::eval
