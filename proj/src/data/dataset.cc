#include "hotspots/data/dataset.h"

#include <algorithm>
#include <fstream>
#include <json.hpp>

namespace hotspots::data {

namespace fs = std::filesystem;
using nlohmann::json;

const char* InactiveSourceName(InactiveSource s) {
  switch (s) {
    case InactiveSource::kCatalog: return "catalog";
    case InactiveSource::kPreInteractionFrame: return "pre-interaction-frame";
    case InactiveSource::kCroppedBox: return "cropped-box";
  }
  return "catalog";
}

InactiveSource ParseInactiveSource(const std::string& name) {
  if (name == "catalog") return InactiveSource::kCatalog;
  if (name == "pre-interaction-frame") return InactiveSource::kPreInteractionFrame;
  if (name == "cropped-box") return InactiveSource::kCroppedBox;
  throw LoadError("unknown inactive image source: " + name);
}

bool InstanceRecord::operator==(const InstanceRecord& o) const {
  auto ann_eq = [](const std::optional<KeypointAnnotation>& a,
                   const std::optional<KeypointAnnotation>& b) {
    if (a.has_value() != b.has_value()) return false;
    if (!a) return true;
    return a->points == b->points && a->height == b->height &&
           a->width == b->width && a->action == b->action;
  };
  return id == o.id && frames_dir == o.frames_dir && frame_files == o.frame_files &&
         inactive_image == o.inactive_image && inactive_source == o.inactive_source &&
         action == o.action && object == o.object &&
         negative_image == o.negative_image && ann_eq(annotation, o.annotation) &&
         split == o.split;
}

const InstanceRecord& Dataset::Find(const std::string& id) const {
  return instances[IndexOf(id)];
}

int Dataset::IndexOf(const std::string& id) const {
  for (std::size_t i = 0; i < instances.size(); ++i)
    if (instances[i].id == id) return static_cast<int>(i);
  throw LoadError("no instance with id " + id);
}

namespace {

bool IsImageFile(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::vector<fs::path> ListFrames(const fs::path& dir, const std::string& id) {
  if (!fs::is_directory(dir))
    throw LoadError("instance " + id + ": frames directory not found: " + dir.string());
  std::vector<fs::path> frames;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && IsImageFile(entry.path())) frames.push_back(entry.path());
  std::sort(frames.begin(), frames.end(),
            [](const fs::path& a, const fs::path& b) {
              return a.filename().string() < b.filename().string();
            });
  if (frames.empty())
    throw LoadError("instance " + id + ": no frame images in " + dir.string());
  return frames;
}

fs::path ResolveExisting(const fs::path& root, const std::string& rel,
                         const std::string& id, const char* what) {
  fs::path p = fs::path(rel).is_absolute() ? fs::path(rel) : root / rel;
  p = p.lexically_normal();
  if (!fs::exists(p))
    throw LoadError("instance " + id + ": " + what + " not found: " + p.string());
  return p;
}

std::string RequireString(const json& j, const char* key, std::size_t line) {
  if (!j.contains(key) || !j[key].is_string())
    throw LoadError("manifest line " + std::to_string(line) + ": missing string field '" +
                    key + "'");
  return j[key].get<std::string>();
}

std::string Relative(const fs::path& p, const fs::path& root) {
  return p.lexically_relative(root).generic_string();
}

struct RawLine {
  json j;
  std::size_t line;
};

}  // namespace

Dataset LoadManifest(const fs::path& path, const ManifestOptions& options) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open manifest: " + path.string());
  Dataset ds;
  ds.root = fs::absolute(path).parent_path().lexically_normal();

  std::vector<RawLine> lines;
  std::string text;
  std::size_t lineno = 0;
  while (std::getline(in, text)) {
    ++lineno;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      lines.push_back({json::parse(text), lineno});
    } catch (const json::parse_error& e) {
      throw LoadError("manifest line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (lines.empty()) throw EmptyDatasetError("manifest has no instances: " + path.string());

  auto pick_vocab = [&](const std::optional<fs::path>& explicit_path,
                        const char* default_name, const char* key) -> Vocab {
    fs::path p = explicit_path ? *explicit_path : ds.root / default_name;
    if (fs::exists(p)) return Vocab::LoadFile(p);
    std::vector<std::string> labels;
    for (const auto& l : lines)
      if (l.j.contains(key) && l.j[key].is_string()) labels.push_back(l.j[key].get<std::string>());
    return Vocab::FromUnsorted(labels);
  };
  ds.actions = pick_vocab(options.actions_vocab, "actions.txt", "action");
  ds.objects = pick_vocab(options.objects_vocab, "objects.txt", "object");

  std::map<std::string, int> seen;
  for (const auto& [j, line] : lines) {
    InstanceRecord r;
    r.id = RequireString(j, "id", line);
    if (!seen.emplace(r.id, static_cast<int>(ds.instances.size())).second)
      throw LoadError("manifest line " + std::to_string(line) + ": duplicate id " + r.id);
    r.action = ds.actions.IndexOf(RequireString(j, "action", line));
    if (j.contains("object") && !j["object"].is_null())
      r.object = ds.objects.IndexOf(j["object"].get<std::string>());
    r.frames_dir = ResolveExisting(ds.root, RequireString(j, "frames_dir", line), r.id,
                                   "frames directory");
    r.frame_files = ListFrames(r.frames_dir, r.id);
    r.inactive_image = ResolveExisting(ds.root, RequireString(j, "inactive_image", line),
                                       r.id, "inactive image");
    if (j.contains("inactive_source"))
      r.inactive_source = ParseInactiveSource(j["inactive_source"].get<std::string>());
    if (j.contains("negative_image") && !j["negative_image"].is_null())
      r.negative_image = ResolveExisting(ds.root, j["negative_image"].get<std::string>(),
                                         r.id, "negative image");
    if (j.contains("split") && !j["split"].is_null()) {
      r.split = j["split"].get<std::string>();
      if (r.split != "train" && r.split != "test")
        throw LoadError("instance " + r.id + ": split must be 'train' or 'test'");
    }
    if (j.contains("keypoints") && !j["keypoints"].is_null()) {
      KeypointAnnotation ann;
      auto [h, w] = ImageSize(r.inactive_image);
      ann.height = h;
      ann.width = w;
      ann.action = r.action;
      if (j.contains("annotator")) ann.annotator = j["annotator"].dump();
      for (const auto& p : j["keypoints"]) {
        if (!p.is_array() || p.size() != 2)
          throw LoadError("instance " + r.id + ": keypoints must be [x, y] pairs");
        ann.points.push_back({p[0].get<double>(), p[1].get<double>()});
      }
      if (ann.points.empty())
        throw LoadError("instance " + r.id + ": empty keypoint list");
      for (const auto& p : ann.points)
        if (p.x < 0 || p.x >= w || p.y < 0 || p.y >= h)
          throw LoadError("instance " + r.id + ": keypoint outside image bounds");
      r.annotation = std::move(ann);
    }
    if (options.decode_images) {
      ImageSize(r.inactive_image);
      for (const auto& f : r.frame_files) ImageSize(f);
      if (r.negative_image) ImageSize(*r.negative_image);
    }
    ds.instances.push_back(std::move(r));
  }
  if (ds.actions.size() < 1) throw EmptyDatasetError("manifest has no actions");
  return ds;
}

void WriteManifest(const Dataset& dataset, const fs::path& path) {
  const fs::path root = fs::absolute(path).parent_path().lexically_normal();
  fs::create_directories(root);
  std::ofstream out(path);
  if (!out) throw LoadError("cannot write manifest: " + path.string());
  for (const auto& r : dataset.instances) {
    json j;
    j["id"] = r.id;
    j["frames_dir"] = Relative(r.frames_dir, root);
    j["inactive_image"] = Relative(r.inactive_image, root);
    j["action"] = dataset.actions.Label(r.action);
    j["object"] = r.object ? json(dataset.objects.Label(*r.object)) : json(nullptr);
    if (r.inactive_source != InactiveSource::kCatalog)
      j["inactive_source"] = InactiveSourceName(r.inactive_source);
    if (r.negative_image) j["negative_image"] = Relative(*r.negative_image, root);
    if (r.annotation) {
      json pts = json::array();
      for (const auto& p : r.annotation->points) pts.push_back({p.x, p.y});
      j["keypoints"] = pts;
    }
    if (!r.split.empty()) j["split"] = r.split;
    out << j.dump() << '\n';
  }
  dataset.actions.SaveFile(root / "actions.txt");
  dataset.objects.SaveFile(root / "objects.txt");
}

std::vector<GtSidecarEntry> LoadGtSidecar(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open ground-truth sidecar: " + path.string());
  const fs::path root = fs::absolute(path).parent_path();
  std::vector<GtSidecarEntry> entries;
  std::string text;
  while (std::getline(in, text)) {
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j = json::parse(text);
    GtSidecarEntry e;
    e.id = j.at("id").get<std::string>();
    e.action = j.at("action").get<std::string>();
    e.heatmap = ResolveExisting(root, j.at("heatmap").get<std::string>(), e.id,
                                "ground-truth heatmap");
    entries.push_back(std::move(e));
  }
  return entries;
}

void WriteGtSidecar(const std::vector<GtSidecarEntry>& entries, const fs::path& path) {
  const fs::path root = fs::absolute(path).parent_path();
  std::ofstream out(path);
  if (!out) throw LoadError("cannot write ground-truth sidecar: " + path.string());
  for (const auto& e : entries) {
    json j{{"id", e.id}, {"action", e.action},
           {"heatmap", Relative(fs::absolute(e.heatmap), root)}};
    out << j.dump() << '\n';
  }
}

Heatmap LoadGtHeatmap(const fs::path& png) {
  return NormalizeSum(Heatmap{LoadGray16Png(png), false});
}

void ValidateInstance(const TrainInstance& inst, int num_actions) {
  const auto& frames = inst.clip.frames;
  if (frames.empty()) throw LoadError("instance " + inst.id + ": clip has no frames");
  for (const auto& f : frames)
    if (f.height != frames[0].height || f.width != frames[0].width)
      throw LoadError("instance " + inst.id + ": frames differ in size");
  if (inst.clip.action < 0 || inst.clip.action >= num_actions)
    throw LoadError("instance " + inst.id + ": action index out of range");
  if (inst.negative && inst.negative->object && inst.inactive.object &&
      *inst.negative->object == *inst.inactive.object)
    throw LoadError("instance " + inst.id +
                    ": negative image has the same object class as the inactive image");
}

InactiveImage LoadInactive(const std::string& id, const fs::path& path,
                           std::optional<int> object, int input_size) {
  InactiveImage img;
  img.id = id;
  img.image = CenterCropResize(LoadRgb(path), input_size);
  img.object = object;
  return img;
}

TrainInstance LoadInstance(const Dataset& dataset, const InstanceRecord& r,
                           int input_size) {
  TrainInstance inst;
  inst.id = r.id;
  inst.clip.action = r.action;
  inst.clip.object = r.object;
  inst.clip.frames.reserve(r.frame_files.size());
  for (const auto& f : r.frame_files)
    inst.clip.frames.push_back(CenterCropResize(LoadRgb(f), input_size));
  inst.inactive = LoadInactive(r.id, r.inactive_image, r.object, input_size);
  inst.inactive.source = r.inactive_source;
  if (r.negative_image) {
    // The manifest does not label the negative's class; it is only known to
    // differ from the positive.
    inst.negative = LoadInactive(r.id + ":negative", *r.negative_image, std::nullopt,
                                 input_size);
  }
  ValidateInstance(inst, dataset.actions.size());
  return inst;
}

int SampleNegativeIndex(const Dataset& dataset, int object, std::mt19937_64& rng,
                        const std::vector<int>& candidates) {
  std::vector<int> eligible;
  auto consider = [&](int i) {
    const auto& r = dataset.instances[i];
    if (r.object && *r.object != object) eligible.push_back(i);
  };
  if (candidates.empty()) {
    for (int i = 0; i < static_cast<int>(dataset.instances.size()); ++i) consider(i);
  } else {
    for (int i : candidates) consider(i);
  }
  if (eligible.empty())
    throw LoadError("no inactive image of a different object class is available for "
                    "negative sampling; use the l2 anticipation loss instead of triplet");
  std::uniform_int_distribution<std::size_t> pick(0, eligible.size() - 1);
  return eligible[pick(rng)];
}

InactiveImage SampleNegative(const Dataset& dataset, int object, std::mt19937_64& rng,
                             int input_size) {
  const auto& r = dataset.instances[SampleNegativeIndex(dataset, object, rng)];
  return LoadInactive(r.id, r.inactive_image, r.object, input_size);
}

}  // namespace hotspots::data
