#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hotspots/data/split.h"
#include "hotspots/eval/protocol.h"
#include "hotspots/training/trainer.h"

// Steps shared by the command-line subcommands and the end-to-end tests.
namespace hotspots::cli {

inline constexpr const char* kVersion = "0.1.0";

enum class SplitMode { kAuto, kStandard, kNovel };
SplitMode ParseSplitMode(const std::string& name);

// kAuto is novel when the config names unfamiliar objects.
data::SplitSpec ResolveSplit(const data::Dataset& dataset, const training::TrainConfig& config,
                             SplitMode mode);

std::vector<training::PreparedInstance> PrepareInstances(const data::Dataset& dataset,
                                                         const std::vector<std::string>& ids,
                                                         int input_size);

struct EvalOptions {
  // Any of: hotspots, hotspots-at-anticipated, center-bias, gradcam, img2heatmap.
  std::vector<std::string> methods = {"hotspots", "hotspots-at-anticipated", "center-bias"};
  std::string gradcam_checkpoint;  // λ_ant = λ_aux = 0 model; enables "gradcam"
  int img2heatmap_steps = 0;       // > 0 enables "img2heatmap"
  std::string manifest;            // defaults to the checkpoint's manifest
  std::string gt_sidecar;          // defaults to gt.jsonl next to the manifest

  static EvalOptions FromJson(const nlohmann::json& j);
  nlohmann::json ToJson() const;
};

struct MethodResources {
  training::Model* model = nullptr;
  training::Model* gradcam_model = nullptr;
  const std::vector<eval::EvalImage>* train_images = nullptr;  // for img2heatmap
  std::uint64_t seed = 0;
};

eval::MetricsReport RunMethod(const std::string& method, const std::string& split_id,
                              const std::vector<eval::EvalImage>& images,
                              const MethodResources& resources, int img2heatmap_steps = 500);

// Stable 64-bit hash of the compact JSON dump, as 16 hex digits.
std::string ConfigHash(const nlohmann::json& config);

// <out>/run_manifest.json with command, config, config hash, seed, versions.
void WriteRunManifest(const std::filesystem::path& out, const std::string& command,
                      const std::vector<std::string>& argv, const nlohmann::json& config,
                      std::uint64_t seed);

}  // namespace hotspots::cli
