#include "hotspots/data/heatmap.h"

#include <algorithm>
#include <cmath>

namespace hotspots::data {

double DefaultKeypointSigma(int height, int width) {
  return 0.05 * std::min(height, width);
}

GroundTruthHeatmap KeypointsToHeatmap(const KeypointAnnotation& annotation,
                                      double sigma) {
  if (annotation.points.empty())
    throw HeatmapError("keypoint annotation has no points");
  if (!(sigma > 0)) throw HeatmapError("keypoint sigma must be positive");
  const int h = annotation.height, w = annotation.width;
  if (h <= 0 || w <= 0) throw HeatmapError("annotation has no image dimensions");
  for (const Keypoint& p : annotation.points)
    if (p.x < 0 || p.x >= w || p.y < 0 || p.y >= h)
      throw HeatmapError("keypoint (" + std::to_string(p.x) + ", " +
                         std::to_string(p.y) + ") outside " + std::to_string(w) +
                         "x" + std::to_string(h) + " image");

  Heatmap out{Tensor({h, w}), false};
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (const Keypoint& p : annotation.points)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double dx = x - p.x, dy = y - p.y;
        out.map.at(y, x) += std::exp(-(dx * dx + dy * dy) * inv);
      }
  return NormalizeSum(out);
}

GroundTruthHeatmap UnionHeatmaps(std::span<const GroundTruthHeatmap> maps) {
  if (maps.empty()) throw HeatmapError("union of an empty heatmap list");
  Heatmap out{maps.front().map, false};
  for (const auto& m : maps.subspan(1)) {
    if (m.map.shape() != out.map.shape())
      throw HeatmapError("union: dimension mismatch " + ShapeToString(m.map.shape()) +
                         " vs " + ShapeToString(out.map.shape()));
    for (std::size_t i = 0; i < out.map.size(); ++i)
      out.map[i] = std::max(out.map[i], m.map[i]);
  }
  return NormalizeSum(out);
}

Heatmap NormalizeSum(const Heatmap& m) {
  double total = 0.0;
  for (double v : m.map.values()) {
    if (v < 0 || !std::isfinite(v)) throw HeatmapError("heatmap has negative or non-finite entries");
    total += v;
  }
  if (!(total > 0)) throw HeatmapError("cannot normalize an all-zero heatmap");
  Heatmap out{m.map, true};
  for (double& v : out.map.values()) v /= total;
  return out;
}

}  // namespace hotspots::data
