#include "hotspots/core/tensor.h"

#include <cmath>
#include <numeric>
#include <sstream>

namespace hotspots {

std::string ShapeToString(const Shape& shape) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

std::size_t NumElements(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw ShapeError("negative dimension in " + ShapeToString(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(NumElements(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != NumElements(shape_))
    throw ShapeError("data size " + std::to_string(data_.size()) +
                     " does not match shape " + ShapeToString(shape_));
}

int Tensor::dim(int i) const {
  if (i < 0) i += rank();
  if (i < 0 || i >= rank())
    throw ShapeError("dimension index out of range for " + ShapeToString(shape_));
  return shape_[i];
}

double& Tensor::at(int n, int c, int h, int w) {
  return data_[((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) *
                   shape_[3] + w];
}

double Tensor::at(int n, int c, int h, int w) const {
  return data_[((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) *
                   shape_[3] + w];
}

double& Tensor::at(int r, int c) {
  return data_[static_cast<std::size_t>(r) * shape_[1] + c];
}

double Tensor::at(int r, int c) const {
  return data_[static_cast<std::size_t>(r) * shape_[1] + c];
}

Tensor Tensor::Reshaped(Shape shape) const {
  if (NumElements(shape) != data_.size())
    throw ShapeError("cannot reshape " + ShapeToString(shape_) + " to " +
                     ShapeToString(shape));
  return Tensor(std::move(shape), data_);
}

void Tensor::Fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void Tensor::Add(const Tensor& other, double scale) {
  if (other.size() != size())
    throw ShapeError("Add: " + ShapeToString(shape_) + " vs " +
                     ShapeToString(other.shape_));
  const double* src = other.data();
  double* dst = data();
  for (std::size_t i = 0; i < data_.size(); ++i) dst[i] += scale * src[i];
}

double Tensor::Sum() const {
  return std::accumulate(data_.begin(), data_.end(), 0.0);
}

bool Tensor::AllFinite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

void RequireShape(const Tensor& t, const Shape& expected, const char* what) {
  if (t.shape() != expected)
    throw ShapeError(std::string(what) + ": expected shape " +
                     ShapeToString(expected) + ", got " +
                     ShapeToString(t.shape()));
}

}  // namespace hotspots
