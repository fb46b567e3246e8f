#include "hotspots/eval/metrics.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace hotspots::eval {

namespace {

void CheckPair(const Tensor& pred, const Tensor& gt) {
  if (pred.shape() != gt.shape())
    throw MetricError("prediction " + ShapeToString(pred.shape()) + " and ground truth " +
                      ShapeToString(gt.shape()) + " differ in size");
}

}  // namespace

Tensor NormalizeMap(const Tensor& m) {
  double total = 0;
  for (double v : m.values()) {
    if (!(v >= 0)) throw MetricError("map has negative or non-finite entries");
    total += v;
  }
  if (total <= 0) throw MetricError("cannot normalize an all-zero map");
  Tensor out = m;
  for (double& v : out.storage()) v /= total;
  return out;
}

double Kld(const Tensor& pred, const Tensor& gt) {
  CheckPair(pred, gt);
  const Tensor p = NormalizeMap(pred), g = NormalizeMap(gt);
  double sum = 0;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (g[i] > 0) sum += g[i] * std::log(g[i] / (p[i] + kKldEps) + kKldEps);
  return sum;
}

double Sim(const Tensor& pred, const Tensor& gt) {
  CheckPair(pred, gt);
  const Tensor p = NormalizeMap(pred), g = NormalizeMap(gt);
  double sum = 0;
  for (std::size_t i = 0; i < g.size(); ++i) sum += std::min(p[i], g[i]);
  return std::min(sum, 1.0);
}

double AucJ(const Tensor& pred, const Tensor& gt) {
  CheckPair(pred, gt);
  const auto gv = gt.values();
  const double peak = gv.empty() ? 0.0 : *std::max_element(gv.begin(), gv.end());
  if (!(peak > 0)) throw MetricError("AUC-J: ground truth is all zero");
  const std::size_t n = gt.size();
  std::vector<char> positive(n);
  std::size_t num_pos = 0;
  for (std::size_t i = 0; i < n; ++i) num_pos += positive[i] = gv[i] / peak >= 0.5;
  const std::size_t num_neg = n - num_pos;
  if (num_pos == 0 || num_neg == 0)
    throw MetricError("AUC-J: binarized ground truth needs both positive and negative pixels");

  // Mann-Whitney U via average ranks of the predicted values.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return pred[a] < pred[b]; });
  double pos_rank_sum = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && pred[order[j]] == pred[order[i]]) ++j;
    const double rank = 0.5 * (static_cast<double>(i) + 1 + static_cast<double>(j));
    for (std::size_t k = i; k < j; ++k)
      if (positive[order[k]]) pos_rank_sum += rank;
    i = j;
  }
  const double u = pos_rank_sum - 0.5 * static_cast<double>(num_pos) * (num_pos + 1);
  return u / (static_cast<double>(num_pos) * num_neg);
}

}  // namespace hotspots::eval
