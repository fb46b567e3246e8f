#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hotspots/core/tensor.h"

namespace hotspots::data {

class HeatmapError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Single non-negative [H, W] map. `normalized` means it sums to one.
struct Heatmap {
  Tensor map;
  bool normalized = false;

  int height() const { return map.dim(0); }
  int width() const { return map.dim(1); }
};
using GroundTruthHeatmap = Heatmap;

struct Keypoint {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Keypoint&) const = default;
};

struct KeypointAnnotation {
  std::vector<Keypoint> points;
  int height = 0;
  int width = 0;
  int action = 0;
  std::string annotator;
};

// Default Gaussian width for annotation heatmaps: 5% of the shorter side.
double DefaultKeypointSigma(int height, int width);

// Sum of isotropic Gaussians centred on each point, normalized to sum 1.
GroundTruthHeatmap KeypointsToHeatmap(const KeypointAnnotation& annotation,
                                      double sigma);

// Pixelwise maximum over the maps, renormalized to sum 1.
GroundTruthHeatmap UnionHeatmaps(std::span<const GroundTruthHeatmap> maps);

// Returns a copy scaled to sum 1; throws on an all-zero or negative map.
Heatmap NormalizeSum(const Heatmap& m);

}  // namespace hotspots::data
