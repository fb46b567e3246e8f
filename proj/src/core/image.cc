#include "hotspots/core/image.h"

#include <algorithm>
#include <cmath>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace hotspots {

namespace {

constexpr double kMean[3] = {0.485, 0.456, 0.406};
constexpr double kStd[3] = {0.229, 0.224, 0.225};

cv::Mat ToMat(const RgbImage& image) {
  cv::Mat rgb(image.height, image.width, CV_8UC3,
              const_cast<std::uint8_t*>(image.pixels.data()));
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  return bgr;
}

RgbImage FromBgr(const cv::Mat& bgr) {
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  RgbImage out(rgb.rows, rgb.cols);
  for (int y = 0; y < rgb.rows; ++y)
    std::copy_n(rgb.ptr<std::uint8_t>(y), 3 * rgb.cols, out.at(y, 0));
  return out;
}

cv::Rect CenterSquare(int h, int w) {
  const int side = std::min(h, w);
  return cv::Rect((w - side) / 2, (h - side) / 2, side, side);
}

}  // namespace

RgbImage LoadRgb(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw ImageError("cannot read image: " + path.string());
  return FromBgr(bgr);
}

std::pair<int, int> ImageSize(const std::filesystem::path& path) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (m.empty()) throw ImageError("cannot read image: " + path.string());
  return {m.rows, m.cols};
}

void SaveRgbPng(const RgbImage& image, const std::filesystem::path& path) {
  if (!cv::imwrite(path.string(), ToMat(image)))
    throw ImageError("cannot write image: " + path.string());
}

void SaveGray16Png(const Tensor& map, const std::filesystem::path& path) {
  RequireShape(map, {map.dim(0), map.dim(1)}, "SaveGray16Png");
  const int h = map.dim(0), w = map.dim(1);
  double mx = 0.0;
  for (double v : map.values()) mx = std::max(mx, v);
  cv::Mat out(h, w, CV_16UC1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double v = mx > 0 ? std::max(0.0, map.at(y, x)) / mx : 0.0;
      out.at<std::uint16_t>(y, x) = static_cast<std::uint16_t>(std::lround(v * 65535.0));
    }
  if (!cv::imwrite(path.string(), out))
    throw ImageError("cannot write image: " + path.string());
}

Tensor LoadGray16Png(const std::filesystem::path& path) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (m.empty()) throw ImageError("cannot read image: " + path.string());
  if (m.channels() != 1) throw ImageError("expected grayscale map: " + path.string());
  cv::Mat m16;
  if (m.depth() == CV_16U) {
    m16 = m;
  } else {
    m.convertTo(m16, CV_16U, 257.0);
  }
  Tensor out({m16.rows, m16.cols});
  for (int y = 0; y < m16.rows; ++y)
    for (int x = 0; x < m16.cols; ++x) out.at(y, x) = m16.at<std::uint16_t>(y, x);
  return out;
}

RgbImage CenterCropResize(const RgbImage& image, int size) {
  if (image.height == size && image.width == size) return image;
  cv::Mat bgr = ToMat(image);
  cv::Mat cropped = bgr(CenterSquare(image.height, image.width));
  cv::Mat resized;
  cv::resize(cropped, resized, cv::Size(size, size), 0, 0, cv::INTER_LINEAR);
  return FromBgr(resized);
}

Tensor CenterCropResizeMap(const Tensor& map, int size) {
  const int h = map.dim(0), w = map.dim(1);
  if (h == size && w == size) return map;
  cv::Mat m(h, w, CV_64FC1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m.at<double>(y, x) = map.at(y, x);
  cv::Mat resized;
  cv::resize(m(CenterSquare(h, w)), resized, cv::Size(size, size), 0, 0,
             cv::INTER_LINEAR);
  Tensor out({size, size});
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) out.at(y, x) = std::max(0.0, resized.at<double>(y, x));
  return out;
}

Tensor ImagesToTensor(std::span<const RgbImage* const> images) {
  if (images.empty()) throw ShapeError("ImagesToTensor: no images");
  const int h = images[0]->height, w = images[0]->width;
  Tensor out({static_cast<int>(images.size()), 3, h, w});
  for (std::size_t n = 0; n < images.size(); ++n) {
    const RgbImage& img = *images[n];
    if (img.height != h || img.width != w)
      throw ShapeError("ImagesToTensor: images differ in size");
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          out.at(static_cast<int>(n), c, y, x) =
              (img.at(y, x)[c] / 255.0 - kMean[c]) / kStd[c];
  }
  return out;
}

Tensor ImageToTensor(const RgbImage& image) {
  const RgbImage* ptr = &image;
  return ImagesToTensor(std::span<const RgbImage* const>(&ptr, 1));
}

}  // namespace hotspots
