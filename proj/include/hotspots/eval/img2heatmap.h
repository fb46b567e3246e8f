#pragma once

#include <random>
#include <vector>

#include "hotspots/hotspot/hotspot.h"

namespace hotspots::eval {

struct Img2HeatmapSample {
  RgbImage image;
  std::vector<std::pair<int, Tensor>> gt;  // (action, map at image resolution)
};

// Strongly supervised fully convolutional baseline: a small conv/max-pool
// encoder mirrored by a decoder that upsamples bilinearly; one sigmoid
// channel per action.
class Img2Heatmap {
 public:
  Img2Heatmap(int num_actions, int input_size, std::uint64_t seed, int width = 16);
  Img2Heatmap(const Img2Heatmap&) = delete;
  Img2Heatmap& operator=(const Img2Heatmap&) = delete;

  // images [N, 3, S, S] -> logits [N, A, S, S].
  ag::Var Forward(const Tensor& images) const;
  // Per-pixel BCE against max-normalized ground truth; channels without a
  // map for an image are trained towards zero. Returns the loss per step.
  std::vector<double> Train(const std::vector<Img2HeatmapSample>& samples, int steps,
                            double learning_rate = 1e-3, int batch_size = 8);
  // Sigmoid maps at the source image size.
  hotspot::HotspotStack Predict(const RgbImage& image, const std::string& image_id) const;

  int num_actions() const { return num_actions_; }
  int input_size() const { return input_size_; }

 private:
  int num_actions_, input_size_;
  std::mt19937_64 rng_;
  nn::Conv2d enc1_, enc2_, enc3_, dec1_, dec2_, head_;
  nn::ParameterList params_;
};

}  // namespace hotspots::eval
