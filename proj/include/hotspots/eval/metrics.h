#pragma once

#include <stdexcept>

#include "hotspots/core/tensor.h"

namespace hotspots::eval {

class MetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kKldEps = 1e-12;

// Copy of a non-negative map scaled to sum 1; throws on all-zero input.
Tensor NormalizeMap(const Tensor& m);

// sum_i g_i log(g_i / (p_i + eps) + eps) over sum-normalized maps
// (divergence of the prediction from the ground truth).
double Kld(const Tensor& pred, const Tensor& gt);
// Histogram intersection of the sum-normalized maps.
double Sim(const Tensor& pred, const Tensor& gt);
// Ground truth max-normalized and thresholded at 0.5 gives the positive
// pixels; returns P(pred at a positive > pred at a negative), ties 1/2.
double AucJ(const Tensor& pred, const Tensor& gt);

}  // namespace hotspots::eval
