#include "hotspots/hotspot/export.h"

#include <algorithm>
#include <bit>
#include <fstream>

#include <json.hpp>

namespace hotspots::hotspot {

std::array<std::uint8_t, 3> ActionColor(int index) {
  static constexpr std::array<std::array<std::uint8_t, 3>, 9> kPalette = {{
      {255, 0, 0}, {0, 255, 0}, {0, 0, 255},
      {255, 255, 0}, {255, 0, 255}, {0, 255, 255},
      {255, 128, 0}, {128, 0, 255}, {0, 255, 128},
  }};
  return kPalette[index % kPalette.size()];
}

RgbImage RenderOverlay(const RgbImage& image, const HotspotStack& stack) {
  if (stack.height != image.height || stack.width != image.width)
    throw HotspotError("overlay: stack and image sizes differ");
  RgbImage out(image.height, image.width);
  std::vector<double> peak(stack.maps.size(), 0.0);
  for (std::size_t a = 0; a < stack.maps.size(); ++a) {
    const auto v = stack.maps[a].values();
    peak[a] = v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
  }
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) {
      const auto* p = image.at(y, x);
      const double grey = 0.4 * (0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]);
      double rgb[3] = {grey, grey, grey};
      for (std::size_t a = 0; a < stack.maps.size(); ++a) {
        if (peak[a] <= 0) continue;
        const double w = stack.maps[a].at(y, x) / peak[a];
        const auto c = ActionColor(static_cast<int>(a));
        for (int k = 0; k < 3; ++k) rgb[k] += w * c[k];
      }
      for (int k = 0; k < 3; ++k)
        out.at(y, x)[k] = static_cast<std::uint8_t>(std::clamp(rgb[k] + 0.5, 0.0, 255.0));
    }
  return out;
}

static_assert(std::endian::native == std::endian::little, "raw maps are little-endian");

void SaveRawMap(const Tensor& map, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw HotspotError("cannot write " + path.string());
  for (double v : map.values()) {
    const float f = static_cast<float>(v);
    out.write(reinterpret_cast<const char*>(&f), sizeof f);
  }
}

Tensor LoadRawMap(const std::filesystem::path& path, int height, int width) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw HotspotError("cannot read " + path.string());
  Tensor out({height, width});
  for (auto& v : out.storage()) {
    float f;
    if (!in.read(reinterpret_cast<char*>(&f), sizeof f))
      throw HotspotError(path.string() + " is shorter than " + std::to_string(height) + "x" +
                         std::to_string(width));
    v = f;
  }
  return out;
}

ExportedFiles ExportStack(const HotspotStack& stack, const data::Vocab& actions,
                          const RgbImage& image, const std::filesystem::path& dir) {
  if (stack.size() != actions.size())
    throw HotspotError("stack has " + std::to_string(stack.size()) + " maps for " +
                       std::to_string(actions.size()) + " actions");
  std::filesystem::create_directories(dir);
  ExportedFiles files;
  for (int a = 0; a < stack.size(); ++a) {
    const std::string stem = stack.image_id + "_" + actions.Label(a);
    const auto png = dir / (stem + ".png");
    SaveGray16Png(stack.maps[a], png);
    const auto bin = dir / (stem + ".bin");
    SaveRawMap(stack.maps[a], bin);
    const auto side = dir / (stem + ".bin.json");
    std::ofstream(side) << nlohmann::json{{"shape", {stack.height, stack.width}},
                                          {"dtype", "float32-le"},
                                          {"action", actions.Label(a)},
                                          {"image_id", stack.image_id}}
                               .dump(2)
                        << "\n";
    files.pngs.push_back(png);
    files.raws.push_back(bin);
    files.sidecars.push_back(side);
  }
  files.overlay = dir / (stack.image_id + "_overlay.png");
  SaveRgbPng(RenderOverlay(image, stack), files.overlay);
  return files;
}

}  // namespace hotspots::hotspot
