#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hotspots/data/dataset.h"

namespace hotspots::synth {

class SynthError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Each action owns one interaction-part style (location rule on the object
// body plus a resting and a manipulated appearance); at most four actions.
inline constexpr int kMaxActions = 4;

struct SynthConfig {
  int height = 64;
  int width = 64;
  int clip_length = 8;
  std::vector<std::string> actions = {"press", "rotate"};
  int objects_per_action = 4;
  int clips_per_object = 40;
  double noise = 4.0;  // std-dev of additive pixel noise, in 8-bit units
  std::uint64_t seed = 0;
  double test_fraction = 0.25;  // per (action, object) share tagged "test"
  double gt_sigma = 1.5;        // Gaussian smoothing of the region mask, px

  void Validate() const;
  nlohmann::json ToJson() const;
  static SynthConfig FromJson(const nlohmann::json& j);
  static SynthConfig Load(const std::filesystem::path& path);

  int num_objects() const { return static_cast<int>(actions.size()) * objects_per_action; }
  int num_instances() const { return num_objects() * clips_per_object; }
};

// Binary mask [H, W] with 1 inside.
using Mask = Tensor;

struct SynthLayers {
  RgbImage image;
  Mask object;  // body plus interaction part
  Mask region;  // interaction part only
  Mask actor;   // actor-proxy pixels (all zero in inactive renders)
};

struct SynthInstance {
  std::string id;
  int action = 0;
  int object = 0;
  std::string split;  // "train" | "test"
  int contact_frame = 0;  // 1-based t_c
  std::vector<SynthLayers> frames;
  SynthLayers inactive;
  Tensor gt;  // [H, W], sums to 1
};

std::vector<std::string> ObjectLabels(const SynthConfig& config);
// Object class index of the k-th object of action a.
inline int ObjectIndex(const SynthConfig& c, int action, int k) {
  return action * c.objects_per_action + k;
}

// Deterministic in (config.seed, index), independent of generation order.
SynthInstance GenerateInstance(const SynthConfig& config, int index);
std::vector<SynthInstance> Generate(const SynthConfig& config);

// Writes manifest.jsonl, actions.txt, objects.txt, clips/<id>/frame_XXXX.png,
// inactive/<id>.png, gt/<id>.png, gt.jsonl (sidecar), regions/<id>_*.png
// (binary region masks) and synth_config.json. Returns the dataset as it
// would be loaded from the manifest.
data::Dataset WriteDataset(const SynthConfig& config, const std::filesystem::path& out_dir);

// Converts in-memory instances to training instances (no disk round trip).
data::TrainInstance ToTrainInstance(const SynthInstance& instance);

}  // namespace hotspots::synth
