#include "hotspots/cli/pipeline.h"

#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>

#include "hotspots/eval/baselines.h"
#include "hotspots/eval/img2heatmap.h"
#include "hotspots/hotspot/hotspot.h"

namespace hotspots::cli {

using nlohmann::json;

SplitMode ParseSplitMode(const std::string& name) {
  if (name == "auto" || name.empty()) return SplitMode::kAuto;
  if (name == "standard") return SplitMode::kStandard;
  if (name == "novel") return SplitMode::kNovel;
  throw std::invalid_argument("--split must be auto, standard or novel, got '" + name + "'");
}

data::SplitSpec ResolveSplit(const data::Dataset& dataset, const training::TrainConfig& config,
                             SplitMode mode) {
  if (mode == SplitMode::kNovel && config.unfamiliar_objects.empty())
    throw std::invalid_argument("novel split requested but unfamiliar_objects is empty");
  const bool novel = mode == SplitMode::kNovel ||
                     (mode == SplitMode::kAuto && !config.unfamiliar_objects.empty());
  auto split = data::MakeNovelSplit(dataset, novel ? config.unfamiliar_objects
                                                   : std::vector<std::string>{});
  data::CheckSplit(dataset, split);
  return split;
}

std::vector<training::PreparedInstance> PrepareInstances(const data::Dataset& dataset,
                                                         const std::vector<std::string>& ids,
                                                         int input_size) {
  std::vector<training::PreparedInstance> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    const auto inst = data::LoadInstance(dataset, dataset.Find(id), input_size);
    data::ValidateInstance(inst, dataset.actions.size());
    out.push_back(training::Prepare(inst));
  }
  return out;
}

EvalOptions EvalOptions::FromJson(const json& j) {
  static const std::vector<std::string> keys = {"methods", "gradcam_checkpoint",
                                                "img2heatmap_steps", "manifest", "gt_sidecar"};
  for (const auto& [k, _] : j.items())
    if (std::find(keys.begin(), keys.end(), k) == keys.end())
      throw std::invalid_argument("unknown eval config key: " + k);
  EvalOptions o;
  o.methods = j.value("methods", o.methods);
  o.gradcam_checkpoint = j.value("gradcam_checkpoint", o.gradcam_checkpoint);
  o.img2heatmap_steps = j.value("img2heatmap_steps", o.img2heatmap_steps);
  o.manifest = j.value("manifest", o.manifest);
  o.gt_sidecar = j.value("gt_sidecar", o.gt_sidecar);
  return o;
}

json EvalOptions::ToJson() const {
  return json{{"methods", methods},
              {"gradcam_checkpoint", gradcam_checkpoint},
              {"img2heatmap_steps", img2heatmap_steps},
              {"manifest", manifest},
              {"gt_sidecar", gt_sidecar}};
}

eval::MetricsReport RunMethod(const std::string& method, const std::string& split_id,
                              const std::vector<eval::EvalImage>& images,
                              const MethodResources& res, int img2heatmap_steps) {
  if (method == "hotspots" || method == "hotspots-at-anticipated") {
    if (!res.model) throw std::invalid_argument(method + " needs a trained model");
    const auto path = method == "hotspots" ? hotspot::GradientPath::kThroughAnticipation
                                           : hotspot::GradientPath::kAtAnticipated;
    hotspot::HotspotExtractor ex(res.model);
    return eval::Evaluate(method, split_id, images, [&](const eval::EvalImage& img, int a) {
      return hotspot::UpsampleToSource(ex.HotspotMap(img.image, a, path), img.image.height,
                                       img.image.width);
    });
  }
  if (method == "center-bias") {
    return eval::Evaluate(method, split_id, images, [](const eval::EvalImage& img, int) {
      const int h = img.image.height, w = img.image.width;
      return eval::CenterBias(h, w, eval::DefaultCenterBiasSigma(h, w));
    });
  }
  if (method == "gradcam") {
    if (!res.gradcam_model)
      throw std::invalid_argument("gradcam needs a λ_ant = λ_aux = 0 checkpoint (gradcam_checkpoint)");
    eval::GradCam gc(res.gradcam_model);
    return eval::Evaluate(method, split_id, images,
                          [&](const eval::EvalImage& img, int a) { return gc.Map(img.image, a); });
  }
  if (method == "img2heatmap") {
    if (!res.train_images || res.train_images->empty() || !res.model)
      throw std::invalid_argument("img2heatmap needs training images with ground truth");
    std::vector<eval::Img2HeatmapSample> samples;
    for (const auto& img : *res.train_images)
      if (!img.gt.empty()) samples.push_back({img.image, img.gt});
    if (samples.empty()) throw std::invalid_argument("img2heatmap: no training ground truth");
    eval::Img2Heatmap net(res.model->num_actions(), res.model->input_size(), res.seed);
    net.Train(samples, img2heatmap_steps);
    return eval::Evaluate(method, split_id, images, [&](const eval::EvalImage& img, int a) {
      return net.Predict(img.image, img.id).maps[a];
    });
  }
  throw std::invalid_argument("unknown evaluation method: " + method);
}

std::string ConfigHash(const json& config) {
  const std::string s = config.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void WriteRunManifest(const std::filesystem::path& out, const std::string& command,
                      const std::vector<std::string>& argv, const json& config,
                      std::uint64_t seed) {
  std::filesystem::create_directories(out);
  const json m = {{"command", command},
                  {"argv", argv},
                  {"config", config},
                  {"config_hash", ConfigHash(config)},
                  {"seed", seed},
                  {"versions",
                   {{"hotspots", kVersion},
                    {"compiler", __VERSION__},
                    {"cxx_standard", static_cast<long>(__cplusplus)}}}};
  std::ofstream(out / "run_manifest.json") << m.dump(2) << "\n";
}

}  // namespace hotspots::cli
