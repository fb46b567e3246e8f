#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hotspots {

using Shape = std::vector<int>;

class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string ShapeToString(const Shape& shape);
std::size_t NumElements(const Shape& shape);

// Dense row-major tensor of doubles. Layout for images and feature maps is
// NCHW; for batched vectors it is [rows, cols].
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor Zeros(Shape shape) { return Tensor(std::move(shape), 0.0); }
  static Tensor Ones(Shape shape) { return Tensor(std::move(shape), 1.0); }
  static Tensor Scalar(double v) { return Tensor(Shape{1}, v); }

  const Shape& shape() const { return shape_; }
  int dim(int i) const;
  int rank() const { return static_cast<int>(shape_.size()); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // 4-d accessor (n, c, h, w).
  double& at(int n, int c, int h, int w);
  double at(int n, int c, int h, int w) const;
  // 2-d accessor (row, col).
  double& at(int r, int c);
  double at(int r, int c) const;

  Tensor Reshaped(Shape shape) const;
  void Fill(double v);
  // this += other (same element count).
  void Add(const Tensor& other, double scale = 1.0);
  double Sum() const;
  bool AllFinite() const;

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

void RequireShape(const Tensor& t, const Shape& expected, const char* what);

}  // namespace hotspots
