#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "hotspots/core/tensor.h"

namespace hotspots {

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// 8-bit RGB image, interleaved HWC.
struct RgbImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;

  RgbImage() = default;
  RgbImage(int h, int w) : height(h), width(w), pixels(3ull * h * w, 0) {}

  std::uint8_t* at(int y, int x) { return &pixels[3ull * (y * width + x)]; }
  const std::uint8_t* at(int y, int x) const { return &pixels[3ull * (y * width + x)]; }
  bool operator==(const RgbImage&) const = default;
};

RgbImage LoadRgb(const std::filesystem::path& path);
// Reads only the header-level dimensions (decodes the image).
std::pair<int, int> ImageSize(const std::filesystem::path& path);
void SaveRgbPng(const RgbImage& image, const std::filesystem::path& path);

// Writes an [H, W] map as 16-bit grayscale, scaled so its maximum maps to
// 65535. An all-zero map is written as zeros.
void SaveGray16Png(const Tensor& map, const std::filesystem::path& path);
// Returns an [H, W] tensor of raw 16-bit values as doubles.
Tensor LoadGray16Png(const std::filesystem::path& path);

// Centre square crop followed by bilinear resize to size x size.
RgbImage CenterCropResize(const RgbImage& image, int size);
// Same geometric transform for a single-channel [H, W] map.
Tensor CenterCropResizeMap(const Tensor& map, int size);

// Converts images of identical dimensions to an [N, 3, H, W] tensor in
// [0, 1] followed by per-channel mean/std standardization (ImageNet values).
Tensor ImagesToTensor(std::span<const RgbImage* const> images);
Tensor ImageToTensor(const RgbImage& image);

}  // namespace hotspots
