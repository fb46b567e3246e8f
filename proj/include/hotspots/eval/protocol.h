#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hotspots/core/image.h"
#include "hotspots/data/dataset.h"
#include "hotspots/data/split.h"

namespace hotspots::eval {

// One image to score, with every ground-truth map annotated for it.
struct EvalImage {
  std::string id;
  RgbImage image;
  std::optional<int> object;
  // (action, gt) pairs; several maps for the same action are unioned.
  std::vector<std::pair<int, Tensor>> gt;
};

// Prediction [H, W] (image resolution) for one image and action.
using HeatmapMethod = std::function<Tensor(const EvalImage& image, int action)>;

struct MetricsRow {
  std::string image_id;
  int action = 0;
  double kld = 0, sim = 0, auc_j = 0;
  bool uniform_fallback = false;  // prediction was all zero
};

struct MetricsReport {
  std::string method;
  std::string split;
  std::vector<MetricsRow> rows;  // sorted by (image_id, action)
  double mean_kld = 0, mean_sim = 0, mean_auc_j = 0;
  int uniform_fallbacks = 0;

  int count() const { return static_cast<int>(rows.size()); }
  nlohmann::json AggregateJson() const;
  std::string RowsCsv(const data::Vocab& actions) const;
  // <dir>/<method>_<split>.csv and .json
  void Write(const std::filesystem::path& dir, const data::Vocab& actions) const;
};

// Scores `method` on every (image, action) that has ground truth; the union
// of all maps for the same pair is the target. Row order does not depend on
// the order of `images`.
MetricsReport Evaluate(const std::string& method_id, const std::string& split_id,
                       const std::vector<EvalImage>& images, const HeatmapMethod& method);

// Test-split images of a dataset with their ground truth from the sidecar
// (matched by instance id) or from keypoint annotations.
std::vector<EvalImage> LoadEvalImages(const data::Dataset& dataset,
                                      const std::vector<std::string>& ids,
                                      const std::optional<std::filesystem::path>& gt_sidecar);

}  // namespace hotspots::eval
