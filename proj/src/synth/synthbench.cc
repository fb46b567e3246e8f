#include "hotspots/synth/synthbench.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <random>

#include <opencv2/imgproc.hpp>

namespace hotspots::synth {

using nlohmann::json;
namespace fs = std::filesystem;

void SynthConfig::Validate() const {
  if (height < 48 || width < 48) throw SynthError("image size must be at least 48x48");
  if (clip_length < 4) throw SynthError("clip_length must be >= 4");
  if (actions.size() < 2) throw SynthError("need at least two actions");
  if (static_cast<int>(actions.size()) > kMaxActions)
    throw SynthError("at most " + std::to_string(kMaxActions) + " actions are supported");
  if (objects_per_action < 1) throw SynthError("objects_per_action must be >= 1");
  if (clips_per_object < 1) throw SynthError("clips_per_object must be >= 1");
  if (!(noise >= 0)) throw SynthError("noise must be >= 0");
  if (!(test_fraction >= 0 && test_fraction < 1)) throw SynthError("test_fraction must be in [0, 1)");
  if (!(gt_sigma > 0)) throw SynthError("gt_sigma must be positive");
  data::Vocab check(actions);  // rejects duplicates
}

json SynthConfig::ToJson() const {
  return json{{"height", height},
              {"width", width},
              {"clip_length", clip_length},
              {"actions", actions},
              {"objects_per_action", objects_per_action},
              {"clips_per_object", clips_per_object},
              {"noise", noise},
              {"seed", seed},
              {"test_fraction", test_fraction},
              {"gt_sigma", gt_sigma}};
}

SynthConfig SynthConfig::FromJson(const json& j) {
  static const std::vector<std::string> keys = {
      "height", "width", "clip_length", "actions", "objects_per_action", "clips_per_object",
      "noise", "seed", "test_fraction", "gt_sigma"};
  if (!j.is_object()) throw SynthError("synth config must be a JSON object");
  for (const auto& [k, _] : j.items())
    if (std::find(keys.begin(), keys.end(), k) == keys.end())
      throw SynthError("unknown synth config key: " + k);
  SynthConfig c;
  try {
    c.height = j.value("height", c.height);
    c.width = j.value("width", c.width);
    c.clip_length = j.value("clip_length", c.clip_length);
    c.actions = j.value("actions", c.actions);
    c.objects_per_action = j.value("objects_per_action", c.objects_per_action);
    c.clips_per_object = j.value("clips_per_object", c.clips_per_object);
    c.noise = j.value("noise", c.noise);
    c.seed = j.value("seed", c.seed);
    c.test_fraction = j.value("test_fraction", c.test_fraction);
    c.gt_sigma = j.value("gt_sigma", c.gt_sigma);
  } catch (const json::exception& e) {
    throw SynthError(std::string("synth config: ") + e.what());
  }
  c.Validate();
  return c;
}

SynthConfig SynthConfig::Load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw SynthError("cannot open synth config: " + path.string());
  try {
    return FromJson(json::parse(in));
  } catch (const json::parse_error& e) {
    throw SynthError("synth config " + path.string() + ": " + e.what());
  }
}

namespace {

using Color = std::array<double, 3>;

const char* const kShapeNames[] = {"box", "disc", "diamond", "slab"};
const std::array<Color, 8> kBodyColors = {{{200, 60, 60},
                                           {60, 90, 200},
                                           {60, 160, 80},
                                           {140, 70, 170},
                                           {150, 100, 50},
                                           {120, 120, 40},
                                           {40, 60, 110},
                                           {170, 90, 120}}};
const Color kBackground = {205, 200, 190};
const Color kActorColor = {225, 175, 140};
constexpr double kActorRadius = 5.0;

// Interaction-part style of an action: direction from the body centre to the
// attachment point, part half-extents, resting / manipulated colours (each
// distinct from every body colour and the background). All
// styles attach at the top-left of the body, so a part's appearance rather
// than its position is what tells actions apart.
struct PartStyle {
  double dx, dy;
  bool round;
  double half_w, half_h;
  Color rest, active;
};

constexpr double kDiag = 0.70710678118654752;
const std::array<PartStyle, kMaxActions> kParts = {{
    {-kDiag, -kDiag, false, 5.0, 5.0, {235, 225, 80}, {40, 220, 230}},   // button
    {-kDiag, -kDiag, true, 6.0, 6.0, {90, 200, 235}, {250, 150, 30}},   // knob
    {-kDiag, -kDiag, false, 7.0, 3.0, {245, 245, 245}, {230, 40, 200}},  // handle
    {-kDiag, -kDiag, false, 3.0, 7.0, {230, 130, 200}, {180, 240, 40}},  // lever
}};

struct Body {
  int shape;
  double cx, cy, hw, hh;

  bool Contains(double x, double y) const {
    const double u = (x - cx) / hw, v = (y - cy) / hh;
    switch (shape) {
      case 0: return std::abs(u) <= 1 && std::abs(v) <= 1;
      case 1: return u * u + v * v <= 1;
      case 2: return std::abs(u) + std::abs(v) <= 1;
      default: return std::pow(u, 4) + std::pow(v, 4) <= 1;
    }
  }
};

struct Part {
  const PartStyle* style;
  double cx, cy;

  bool Contains(double x, double y) const {
    const double u = (x - cx) / style->half_w, v = (y - cy) / style->half_h;
    return style->round ? u * u + v * v <= 1 : std::abs(u) <= 1 && std::abs(v) <= 1;
  }
  // Resting-state marking: a dark dot or bar that tells the styles apart.
  bool Marked(double x, double y, bool active) const {
    const double u = x - cx, v = y - cy;
    if (style->round) return active ? std::abs(u) <= 1.0 : std::abs(v) <= 1.0;
    if (active) return false;
    return style->half_w == style->half_h ? u * u + v * v <= 2.25
                                          : std::abs(u) <= 1.0 && std::abs(v) <= 1.0;
  }
};

struct Placement {
  Body body;
  Part part;
};

Placement Place(const SynthConfig& c, int action, int k, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> size(7.0, 11.0);
  Body b{k % 4, 0, 0, size(rng), size(rng)};
  const double margin = std::max(kParts[action].half_w, kParts[action].half_h) + 1.0;
  std::uniform_real_distribution<double> px(b.hw + margin, c.width - 1 - b.hw - margin);
  std::uniform_real_distribution<double> py(b.hh + margin, c.height - 1 - b.hh - margin);
  b.cx = px(rng);
  b.cy = py(rng);
  const PartStyle& s = kParts[action];
  // March from the centre to the body boundary along the style direction.
  double t = 0;
  while (b.Contains(b.cx + s.dx * (t + 0.25), b.cy + s.dy * (t + 0.25))) t += 0.25;
  return {b, {&s, b.cx + s.dx * t, b.cy + s.dy * t}};
}

struct Stripe {
  double x0, y0, x1, y1;
  Color color;

  bool Contains(double x, double y) const {
    const double vx = x1 - x0, vy = y1 - y0;
    const double len2 = vx * vx + vy * vy;
    const double t = std::clamp(((x - x0) * vx + (y - y0) * vy) / len2, 0.0, 1.0);
    const double ex = x0 + t * vx - x, ey = y0 + t * vy - y;
    return ex * ex + ey * ey <= 1.0;
  }
};

Stripe DrawStripe(const SynthConfig& c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ux(0, c.width - 1), uy(0, c.height - 1);
  std::uniform_real_distribution<double> angle(0, M_PI), shade(60, 180);
  const double a = angle(rng), x = ux(rng), y = uy(rng);
  return {x - 8 * std::cos(a), y - 8 * std::sin(a), x + 8 * std::cos(a), y + 8 * std::sin(a),
          {shade(rng), shade(rng), shade(rng)}};
}

struct Actor {
  bool present = false;
  double x = 0, y = 0;
};

SynthLayers Render(const SynthConfig& c, const Placement& p, const Color& body_color,
                   const Stripe& stripe, bool part_active, const Actor& actor,
                   std::mt19937_64& rng) {
  const int h = c.height, w = c.width;
  SynthLayers out{RgbImage(h, w), Mask({h, w}), Mask({h, w}), Mask({h, w})};
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      Color px = kBackground;
      if (stripe.Contains(x, y)) px = stripe.color;
      const bool in_part = p.part.Contains(x, y);
      if (p.body.Contains(x, y) || in_part) {
        out.object.at(y, x) = 1;
        px = body_color;
      }
      if (in_part) {
        out.region.at(y, x) = 1;
        px = part_active ? p.part.style->active : p.part.style->rest;
        if (p.part.Marked(x, y, part_active)) px = {40, 40, 40};
      }
      if (actor.present) {
        const double dx = x - actor.x, dy = y - actor.y;
        if (dx * dx + dy * dy <= kActorRadius * kActorRadius) {
          out.actor.at(y, x) = 1;
          px = kActorColor;
        }
      }
      auto* dst = out.image.at(y, x);
      for (int k = 0; k < 3; ++k) {
        const double v = px[k] + (c.noise > 0 ? c.noise * noise(rng) : 0.0);
        dst[k] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  const double region_area = out.region.Sum();
  if (region_area == 0) throw SynthError("interaction region fell outside the image");
  return out;
}

void CheckInside(const SynthConfig& c, const Placement& p) {
  const auto& s = *p.part.style;
  if (p.part.cx - s.half_w < 0 || p.part.cy - s.half_h < 0 ||
      p.part.cx + s.half_w > c.width - 1 || p.part.cy + s.half_h > c.height - 1)
    throw SynthError("interaction region escapes the image bounds");
}

Tensor SmoothRegion(const Mask& region, double sigma) {
  const int h = region.dim(0), w = region.dim(1);
  cv::Mat m(h, w, CV_64FC1, const_cast<double*>(region.data()));
  cv::Mat blurred;
  const int k = 2 * static_cast<int>(std::ceil(3 * sigma)) + 1;
  cv::GaussianBlur(m, blurred, cv::Size(k, k), sigma, sigma, cv::BORDER_CONSTANT);
  Tensor out({h, w});
  double total = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) total += out.at(y, x) = std::max(0.0, blurred.at<double>(y, x));
  for (auto& v : out.storage()) v /= total;
  return out;
}

}  // namespace

std::vector<std::string> ObjectLabels(const SynthConfig& c) {
  std::vector<std::string> labels;
  for (int a = 0; a < static_cast<int>(c.actions.size()); ++a)
    for (int k = 0; k < c.objects_per_action; ++k) {
      const int o = ObjectIndex(c, a, k);
      labels.push_back("obj" + std::to_string(o) + "_" + kShapeNames[k % 4]);
    }
  return labels;
}

SynthInstance GenerateInstance(const SynthConfig& c, int index) {
  c.Validate();
  if (index < 0 || index >= c.num_instances()) throw SynthError("instance index out of range");
  const int o = index / c.clips_per_object, clip = index % c.clips_per_object;
  const int action = o / c.objects_per_action, k = o % c.objects_per_action;
  std::seed_seq seq{static_cast<std::uint32_t>(c.seed), static_cast<std::uint32_t>(c.seed >> 32),
                    static_cast<std::uint32_t>(index), 0x5EEDu};
  std::mt19937_64 rng(seq);

  SynthInstance inst;
  inst.action = action;
  inst.object = o;
  inst.id = c.actions[action] + "_o" + std::to_string(o) + "_c" + std::to_string(clip);
  const int num_test = static_cast<int>(std::lround(c.clips_per_object * c.test_fraction));
  inst.split = clip >= c.clips_per_object - num_test ? "test" : "train";

  const int T = c.clip_length;
  const int lo = std::max(2, (T + 2) / 3), hi = std::min(T - 1, 2 * T / 3);
  inst.contact_frame = std::uniform_int_distribution<int>(lo, std::max(lo, hi))(rng);

  // Shape and colour depend on k only, so the body itself never tells actions
  // apart; the part is the sole static cue.
  const Color& color = kBodyColors[k % kBodyColors.size()];
  const Placement scene = Place(c, action, k, rng);
  CheckInside(c, scene);
  const Stripe stripe = DrawStripe(c, rng);

  // Actor approaches along the part direction and rests touching the part.
  const PartStyle& s = *scene.part.style;
  const double reach = (s.round ? s.half_w : std::max(s.half_w, s.half_h)) + kActorRadius;
  std::normal_distribution<double> jitter(0.0, 1.5);
  const double end_x = scene.part.cx + s.dx * reach, end_y = scene.part.cy + s.dy * reach;
  const double start_x = end_x + s.dx * 22 + jitter(rng) * 3;
  const double start_y = end_y + s.dy * 22 + jitter(rng) * 3;
  for (int t = 1; t <= T; ++t) {
    Actor actor{true, end_x, end_y};
    if (t < inst.contact_frame) {
      const double f = static_cast<double>(t - 1) / (inst.contact_frame - 1);
      actor.x = start_x + f * (end_x - start_x);
      actor.y = start_y + f * (end_y - start_y);
    } else {
      actor.x += jitter(rng) * 0.3;
      actor.y += jitter(rng) * 0.3;
    }
    inst.frames.push_back(Render(c, scene, color, stripe, t >= inst.contact_frame, actor, rng));
  }

  const Placement rest = Place(c, action, k, rng);
  CheckInside(c, rest);
  inst.inactive = Render(c, rest, color, DrawStripe(c, rng), false, Actor{}, rng);
  inst.gt = SmoothRegion(inst.inactive.region, c.gt_sigma);
  return inst;
}

std::vector<SynthInstance> Generate(const SynthConfig& c) {
  c.Validate();
  std::vector<SynthInstance> out;
  out.reserve(c.num_instances());
  for (int i = 0; i < c.num_instances(); ++i) out.push_back(GenerateInstance(c, i));
  return out;
}

namespace {

void SaveMask(const Mask& m, const fs::path& path) {
  RgbImage img(m.dim(0), m.dim(1));
  for (int y = 0; y < m.dim(0); ++y)
    for (int x = 0; x < m.dim(1); ++x)
      std::fill_n(img.at(y, x), 3, m.at(y, x) > 0 ? 255 : 0);
  SaveRgbPng(img, path);
}

}  // namespace

data::Dataset WriteDataset(const SynthConfig& c, const fs::path& out_dir) {
  c.Validate();
  fs::create_directories(out_dir / "clips");
  fs::create_directories(out_dir / "inactive");
  fs::create_directories(out_dir / "gt");
  fs::create_directories(out_dir / "regions");
  data::Dataset ds;
  ds.actions = data::Vocab(c.actions);
  ds.objects = data::Vocab(ObjectLabels(c));
  std::vector<data::GtSidecarEntry> gt_entries;
  char name[32];
  for (int i = 0; i < c.num_instances(); ++i) {
    const SynthInstance inst = GenerateInstance(c, i);
    data::InstanceRecord r;
    r.id = inst.id;
    r.frames_dir = out_dir / "clips" / inst.id;
    fs::create_directories(r.frames_dir);
    for (std::size_t t = 0; t < inst.frames.size(); ++t) {
      std::snprintf(name, sizeof name, "frame_%04zu.png", t + 1);
      SaveRgbPng(inst.frames[t].image, r.frames_dir / name);
      r.frame_files.push_back(r.frames_dir / name);
    }
    r.inactive_image = out_dir / "inactive" / (inst.id + ".png");
    SaveRgbPng(inst.inactive.image, r.inactive_image);
    r.action = inst.action;
    r.object = inst.object;
    r.split = inst.split;
    const fs::path gt = out_dir / "gt" / (inst.id + ".png");
    SaveGray16Png(inst.gt, gt);
    SaveMask(inst.inactive.region, out_dir / "regions" / (inst.id + "_inactive.png"));
    SaveMask(inst.frames[0].region, out_dir / "regions" / (inst.id + "_clip.png"));
    gt_entries.push_back({inst.id, c.actions[inst.action], gt});
    ds.instances.push_back(std::move(r));
  }
  WriteManifest(ds, out_dir / "manifest.jsonl");
  data::WriteGtSidecar(gt_entries, out_dir / "gt.jsonl");
  std::ofstream(out_dir / "synth_config.json") << c.ToJson().dump(2) << "\n";
  ds.root = fs::absolute(out_dir);
  return ds;
}

data::TrainInstance ToTrainInstance(const SynthInstance& s) {
  data::TrainInstance t;
  t.id = s.id;
  t.clip.action = s.action;
  t.clip.object = s.object;
  for (const auto& f : s.frames) t.clip.frames.push_back(f.image);
  t.inactive.id = s.id;
  t.inactive.image = s.inactive.image;
  t.inactive.object = s.object;
  return t;
}

}  // namespace hotspots::synth
