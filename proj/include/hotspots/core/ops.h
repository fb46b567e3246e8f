#pragma once

#include <vector>

#include "hotspots/core/autograd.h"

// Differentiable operations over ag::Var. Shapes follow the Tensor layout
// conventions: NCHW for maps, [rows, cols] for batched vectors.
namespace hotspots::ag {

// Elementwise.
Var Add(const Var& a, const Var& b);
Var Sub(const Var& a, const Var& b);
Var Mul(const Var& a, const Var& b);
Var Scale(const Var& a, double s);
Var AddScalar(const Var& a, double s);
Var Relu(const Var& a);
Var Sigmoid(const Var& a);
Var Tanh(const Var& a);
Var Sqrt(const Var& a);
Var Square(const Var& a);

// Reductions to a one-element tensor.
Var Sum(const Var& a);
Var Mean(const Var& a);
// Single element by flat index, as a one-element tensor.
Var Pick(const Var& a, std::size_t flat_index);

Var Detach(const Var& a);
Var Reshape(const Var& a, Shape shape);

// [B, p] ++ [B, q] -> [B, p + q].
Var ConcatCols(const Var& a, const Var& b);
// Columns [start, start + count) of a [B, n] tensor.
Var SliceCols(const Var& a, int start, int count);
// Row gather: out[i] = a[rows[i]] on the leading axis (any rank).
Var SelectRows(const Var& a, const std::vector<int>& rows);
// Row i taken from sources[which[i]] row i. All sources share shape [B, n].
Var GatherSteps(const std::vector<Var>& sources, const std::vector<int>& which);
// Per-row sum of a [B, n] tensor -> [B].
Var SumCols(const Var& a);
// Per-row L2 normalization of [B, n], with eps added under the root.
Var NormalizeRows(const Var& a, double eps);

// x [B, in], weight [out, in], bias [out] (may be undefined) -> [B, out].
Var Linear(const Var& x, const Var& weight, const Var& bias);

struct Conv2dOptions {
  int stride = 1;
  int padding = 0;
  int dilation = 1;
  // Out-of-range taps read the nearest edge pixel instead of zero.
  bool replicate = false;
};
// x [N, C, H, W], weight [O, C, K, K], bias [O] (may be undefined).
Var Conv2d(const Var& x, const Var& weight, const Var& bias,
           const Conv2dOptions& opt);
int ConvOutputSize(int in, int kernel, const Conv2dOptions& opt);

// Batch-statistics normalization; writes the batch mean/var (biased) so the
// caller can update running statistics.
Var BatchNormTrain(const Var& x, const Var& gamma, const Var& beta, double eps,
                   std::vector<double>* batch_mean,
                   std::vector<double>* batch_var);
// Running-statistics normalization (pure per-channel affine map of x).
Var BatchNormEval(const Var& x, const Var& gamma, const Var& beta,
                  const std::vector<double>& running_mean,
                  const std::vector<double>& running_var, double eps);

Var MaxPool2d(const Var& x, int kernel, int stride, int padding);

// Half-pixel-centre bilinear resampling (edge-clamped) to [N, C, out_h, out_w].
Var UpsampleBilinear(const Var& x, int out_h, int out_w);

// Per-channel sqrt(mean_{i,j} x^2 + eps): [N, C, H, W] -> [N, C].
Var L2Pool(const Var& x, double eps);

// Softmax cross-entropy per row of scores [B, A] -> [B].
Var CrossEntropyRows(const Var& scores, const std::vector<int>& labels);
// Mean binary cross-entropy over all elements, from logits.
Var BceWithLogits(const Var& logits, const Tensor& targets);

}  // namespace hotspots::ag
