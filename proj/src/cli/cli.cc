#include "hotspots/cli/cli.h"

#include <algorithm>
#include <fstream>
#include <map>

#include <CLI11.hpp>
#include <json.hpp>

#include "hotspots/cli/pipeline.h"
#include "hotspots/docs/doc_lint.h"
#include "hotspots/eval/embedding.h"
#include "hotspots/hotspot/export.h"
#include "hotspots/synth/synthbench.h"
#include "hotspots/training/checkpoint.h"

namespace hotspots::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Flags {
  std::string config, out, checkpoint, image, clip, split = "auto";
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
};

json ReadJson(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

// key=value overrides; values parse as JSON when they can, else as strings.
void ApplyOverrides(json* j, const std::vector<std::string>& overrides) {
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0)
      throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    const std::string value = kv.substr(eq + 1);
    json parsed;
    try {
      parsed = json::parse(value);
    } catch (const json::parse_error&) {
      parsed = value;
    }
    (*j)[kv.substr(0, eq)] = parsed;
  }
}

void RequireFlag(const std::string& value, const char* flag, const char* command) {
  if (value.empty())
    throw CLI::RequiredError(std::string(command) + " requires " + flag);
}

std::unique_ptr<training::Model> LoadModel(const std::string& path) {
  return training::LoadCheckpoint(path).model;
}

int Synth(const Flags& f, const std::vector<std::string>& argv, std::ostream& out) {
  json j = f.config.empty() ? json::object() : ReadJson(f.config);
  ApplyOverrides(&j, f.overrides);
  if (f.seed) j["seed"] = *f.seed;
  const auto config = synth::SynthConfig::FromJson(j);
  const auto ds = synth::WriteDataset(config, f.out);
  WriteRunManifest(f.out, "synth", argv, config.ToJson(), config.seed);
  out << "wrote " << ds.instances.size() << " instances to " << f.out << "\n";
  return kExitOk;
}

int Train(const Flags& f, const std::vector<std::string>& argv, std::ostream& out) {
  json j = f.config.empty() ? json::object() : ReadJson(f.config);
  ApplyOverrides(&j, f.overrides);
  if (f.seed) j["seed"] = *f.seed;
  const auto config = training::TrainConfig::FromJson(j);
  if (config.manifest.empty()) throw std::invalid_argument("train config needs a manifest path");
  const auto dataset = data::LoadManifest(config.manifest);
  const auto split = ResolveSplit(dataset, config, ParseSplitMode(f.split));
  const auto instances = PrepareInstances(dataset, split.train_ids, config.input_size);
  fs::create_directories(f.out);
  training::TrainHooks hooks;
  hooks.on_epoch = [&](int epoch, double acc, const training::LossBreakdown& m) {
    out << "epoch " << epoch + 1 << "/" << config.epochs << "  acc " << acc << "  L_cls "
        << m.cls << "  L_ant " << m.ant << "  L_aux " << m.aux << "\n";
  };
  auto result = training::Train(instances, dataset.actions, dataset.objects, config, hooks);
  training::SaveCheckpoint(*result.model, fs::path(f.out) / "ckpt",
                           {result.epochs_run, result.rng_state});
  training::WriteLossLog(result.log, fs::path(f.out) / "loss_log.csv");
  std::ofstream(fs::path(f.out) / "split.json")
      << json{{"train", split.train_ids}, {"test", split.test_ids}}.dump(2) << "\n";
  WriteRunManifest(f.out, "train", argv, config.ToJson(), config.seed);
  out << "checkpoint " << (fs::path(f.out) / "ckpt").string() << "\n";
  return kExitOk;
}

std::vector<eval::EvalImage> ImagesFor(const data::Dataset& ds, const std::vector<std::string>& ids,
                                       const std::string& sidecar) {
  std::optional<fs::path> gt;
  if (!sidecar.empty()) gt = sidecar;
  else if (fs::exists(ds.root / "gt.jsonl")) gt = ds.root / "gt.jsonl";
  return eval::LoadEvalImages(ds, ids, gt);
}

int Eval(const Flags& f, const std::vector<std::string>& argv, std::ostream& out) {
  RequireFlag(f.checkpoint, "--checkpoint", "eval");
  json j = f.config.empty() ? json::object() : ReadJson(f.config);
  ApplyOverrides(&j, f.overrides);
  auto options = EvalOptions::FromJson(j);
  auto model = LoadModel(f.checkpoint);
  const auto& config = model->config();
  const std::string manifest = options.manifest.empty() ? config.manifest : options.manifest;
  if (manifest.empty()) throw std::invalid_argument("no manifest: set it in the eval config");
  const auto dataset = data::LoadManifest(manifest);
  const SplitMode mode = ParseSplitMode(f.split);
  const auto split = ResolveSplit(dataset, config, mode);
  const bool novel = mode == SplitMode::kNovel ||
                     (mode == SplitMode::kAuto && !config.unfamiliar_objects.empty());
  const std::string split_id = novel ? "novel" : "standard";
  const auto images = ImagesFor(dataset, split.test_ids, options.gt_sidecar);

  std::unique_ptr<training::Model> baseline;
  if (!options.gradcam_checkpoint.empty()) {
    baseline = LoadModel(options.gradcam_checkpoint);
    if (std::find(options.methods.begin(), options.methods.end(), "gradcam") ==
        options.methods.end())
      options.methods.push_back("gradcam");
  }
  std::vector<eval::EvalImage> train_images;
  if (options.img2heatmap_steps > 0) {
    train_images = ImagesFor(dataset, split.train_ids, options.gt_sidecar);
    if (std::find(options.methods.begin(), options.methods.end(), "img2heatmap") ==
        options.methods.end())
      options.methods.push_back("img2heatmap");
  }
  MethodResources res{model.get(), baseline.get(), &train_images, config.seed};
  json summary = json::array();
  for (const auto& m : options.methods) {
    const auto report = RunMethod(m, split_id, images, res,
                                  options.img2heatmap_steps > 0 ? options.img2heatmap_steps : 500);
    report.Write(f.out, dataset.actions);
    summary.push_back(report.AggregateJson());
    out << m << " (" << split_id << ", " << report.count() << " pairs): KLD " << report.mean_kld
        << "  SIM " << report.mean_sim << "  AUC-J " << report.mean_auc_j << "\n";
  }
  std::ofstream(fs::path(f.out) / "summary.json") << summary.dump(2) << "\n";
  json cfg = options.ToJson();
  cfg["checkpoint_config"] = config.ToJson();
  cfg["split"] = split_id;
  WriteRunManifest(f.out, "eval", argv, cfg, config.seed);
  return kExitOk;
}

hotspot::GradientPath PathOverride(const std::vector<std::string>& overrides) {
  json j = json::object();
  ApplyOverrides(&j, overrides);
  for (const auto& [k, _] : j.items())
    if (k != "path") throw std::invalid_argument("unknown hotspot option: " + k);
  return hotspot::ParseGradientPath(j.value("path", std::string("through")));
}

int Hotspot(const Flags& f, const std::vector<std::string>& argv, std::ostream& out) {
  RequireFlag(f.checkpoint, "--checkpoint", "hotspot");
  RequireFlag(f.image, "--image", "hotspot");
  const auto path = PathOverride(f.overrides);
  auto model = LoadModel(f.checkpoint);
  hotspot::HotspotExtractor ex(model.get());
  const RgbImage image = LoadRgb(f.image);
  const std::string id = fs::path(f.image).stem().string();
  const auto stack = ex.Stack(image, id, path);
  const auto files = hotspot::ExportStack(stack, model->actions(), image, f.out);
  const auto scores = ex.InactiveActionScores(image);
  json s = json::object();
  for (int a = 0; a < model->num_actions(); ++a) s[model->actions().Label(a)] = scores[a];
  std::ofstream(fs::path(f.out) / "scores.json") << s.dump(2) << "\n";
  WriteRunManifest(f.out, "hotspot", argv,
                   {{"checkpoint", f.checkpoint}, {"image", f.image},
                    {"path", hotspot::GradientPathName(path)}},
                   model->config().seed);
  out << "wrote " << files.pngs.size() << " maps, " << files.raws.size()
      << " raw binaries and 1 overlay to " << f.out << "\n";
  return kExitOk;
}

int VideoHotspot(const Flags& f, const std::vector<std::string>& argv, std::ostream& out) {
  RequireFlag(f.checkpoint, "--checkpoint", "video-hotspot");
  RequireFlag(f.clip, "--clip", "video-hotspot");
  const auto path = PathOverride(f.overrides);
  auto model = LoadModel(f.checkpoint);
  hotspot::HotspotExtractor ex(model.get());
  std::vector<fs::path> frames;
  for (const auto& e : fs::directory_iterator(f.clip)) {
    const auto ext = e.path().extension().string();
    if (e.is_regular_file() && (ext == ".png" || ext == ".jpg" || ext == ".jpeg"))
      frames.push_back(e.path());
  }
  if (frames.empty()) throw std::runtime_error("no frame images in " + f.clip);
  std::sort(frames.begin(), frames.end());
  for (const auto& p : frames) {
    const RgbImage image = LoadRgb(p);
    const auto stack = ex.Stack(image, p.stem().string(), path);
    hotspot::ExportStack(stack, model->actions(), image, f.out);
  }
  WriteRunManifest(f.out, "video-hotspot", argv,
                   {{"checkpoint", f.checkpoint}, {"clip", f.clip},
                    {"path", hotspot::GradientPathName(path)}},
                   model->config().seed);
  out << "wrote hotspots for " << frames.size() << " frames to " << f.out << "\n";
  return kExitOk;
}

int Cluster(const Flags& f, const std::vector<std::string>& argv, std::ostream& out) {
  RequireFlag(f.checkpoint, "--checkpoint", "cluster");
  auto model = LoadModel(f.checkpoint);
  json j = f.config.empty() ? json::object() : ReadJson(f.config);
  ApplyOverrides(&j, f.overrides);
  const std::string manifest = j.value("manifest", model->config().manifest);
  const int k = j.value("neighbors", 3);
  const auto dataset = data::LoadManifest(manifest);
  std::vector<std::string> ids;
  if (f.split == "auto" || f.split.empty()) {
    for (const auto& r : dataset.instances) ids.push_back(r.id);
  } else {
    ids = ResolveSplit(dataset, model->config(), ParseSplitMode(f.split)).test_ids;
  }
  std::vector<RgbImage> images;
  std::vector<eval::LabeledImage> labeled;
  images.reserve(ids.size());
  for (const auto& id : ids) {
    const auto& r = dataset.Find(id);
    if (!r.object) continue;
    images.push_back(LoadRgb(r.inactive_image));
    labeled.push_back({*r.object, &images.back()});
  }
  const auto table = eval::BuildEmbeddingTable(*model, labeled);
  for (const auto& w : table.warnings) out << "warning: " << w << "\n";
  fs::create_directories(f.out);
  json emb = json::object();
  for (const auto& [space, name] : {std::pair{eval::Space::kInactive, "inactive"},
                                    std::pair{eval::Space::kActive, "active"}}) {
    std::ofstream csv(fs::path(f.out) / (std::string("neighbors_") + name + ".csv"));
    csv << "object,rank,neighbor,distance\n";
    json vecs = json::object();
    for (int row = 0; row < table.size(); ++row) {
      vecs[table.labels[row]] = table.vectors(space)[row];
      const auto nn = eval::NearestNeighbors(table, table.classes[row], space, k);
      for (std::size_t r = 0; r < nn.size(); ++r)
        csv << table.labels[row] << ',' << r + 1 << ',' << model->objects().Label(nn[r].object)
            << ',' << json(nn[r].distance).dump() << "\n";
    }
    emb[name] = vecs;
    if (table.size() >= 2)
      std::ofstream(fs::path(f.out) / (std::string("dendrogram_") + name + ".json"))
          << eval::ClusterObjects(table, space).NestedJson().dump(2) << "\n";
  }
  std::ofstream(fs::path(f.out) / "embeddings.json") << emb.dump() << "\n";
  WriteRunManifest(f.out, "cluster", argv, {{"checkpoint", f.checkpoint}, {"manifest", manifest}},
                   model->config().seed);
  out << "clustered " << table.size() << " object classes\n";
  return kExitOk;
}

int Report(const Flags& f, const std::vector<std::string>& argv, std::ostream& out) {
  json j = json::object();
  ApplyOverrides(&j, f.overrides);
  const fs::path root = j.value("root", fs::current_path().string());
  const auto lint = docs::DocLint(root);
  fs::create_directories(f.out);
  std::ofstream(fs::path(f.out) / "doc_lint.txt") << lint.Text();
  WriteRunManifest(f.out, "report", argv, {{"root", root.string()}}, 0);
  out << lint.Text();
  return lint.pass ? kExitOk : kExitFailure;
}

}  // namespace

int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Interaction hotspots: train, extract and evaluate affordance heatmaps",
               "hotspots"};
  app.require_subcommand(1, 1);
  Flags f;
  auto add_common = [&](CLI::App* sub, bool needs_out) {
    sub->add_option("--config", f.config, "JSON config file");
    auto* o = sub->add_option("--out", f.out, "output directory");
    if (needs_out) o->required();
    sub->add_option("--set", f.overrides, "key=value override")->take_all();
  };
  std::map<std::string, CLI::App*> subs;
  subs["synth"] = app.add_subcommand("synth", "generate a synthetic benchmark");
  subs["train"] = app.add_subcommand("train", "train a model from a manifest");
  subs["eval"] = app.add_subcommand("eval", "evaluate hotspots and baselines");
  subs["hotspot"] = app.add_subcommand("hotspot", "hotspot maps for one image");
  subs["video-hotspot"] = app.add_subcommand("video-hotspot", "per-frame hotspots of a clip");
  subs["cluster"] = app.add_subcommand("cluster", "object embedding neighbours and clustering");
  subs["report"] = app.add_subcommand("report", "lint the documentation");
  for (auto& [name, sub] : subs) {
    add_common(sub, true);
    if (name == "synth" || name == "train") sub->add_option("--seed", f.seed, "seed override");
    if (name != "synth" && name != "train" && name != "report")
      sub->add_option("--checkpoint", f.checkpoint, "checkpoint file");
    if (name == "hotspot") sub->add_option("--image", f.image, "inactive image");
    if (name == "video-hotspot") sub->add_option("--clip", f.clip, "directory of frames");
    if (name == "train" || name == "eval" || name == "cluster")
      sub->add_option("--split", f.split, "auto | standard | novel");
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }
  std::vector<std::string> argv = args;
  try {
    for (auto& [name, sub] : subs) {
      if (!sub->parsed()) continue;
      if (name == "synth") return Synth(f, argv, out);
      if (name == "train") return Train(f, argv, out);
      if (name == "eval") return Eval(f, argv, out);
      if (name == "hotspot") return Hotspot(f, argv, out);
      if (name == "video-hotspot") return VideoHotspot(f, argv, out);
      if (name == "cluster") return Cluster(f, argv, out);
      if (name == "report") return Report(f, argv, out);
    }
  } catch (const CLI::RequiredError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace hotspots::cli
