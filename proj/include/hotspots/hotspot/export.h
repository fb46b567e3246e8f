#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "hotspots/data/vocab.h"
#include "hotspots/hotspot/hotspot.h"

namespace hotspots::hotspot {

// Overlay colour of action `index`: red, green, blue, then a fixed palette.
std::array<std::uint8_t, 3> ActionColor(int index);

// Darkened grey copy of `image` with each max-normalized map added in its
// action colour.
RgbImage RenderOverlay(const RgbImage& image, const HotspotStack& stack);

// Raw float32 little-endian map dump and its reader.
void SaveRawMap(const Tensor& map, const std::filesystem::path& path);
Tensor LoadRawMap(const std::filesystem::path& path, int height, int width);

struct ExportedFiles {
  std::vector<std::filesystem::path> pngs;      // one 16-bit map per action
  std::vector<std::filesystem::path> raws;      // one .bin per action
  std::vector<std::filesystem::path> sidecars;  // JSON next to each .bin
  std::filesystem::path overlay;
};

// Writes <id>_<action>.png / .bin / .bin.json for every action plus
// <id>_overlay.png into `dir`.
ExportedFiles ExportStack(const HotspotStack& stack, const data::Vocab& actions,
                          const RgbImage& image, const std::filesystem::path& dir);

}  // namespace hotspots::hotspot
