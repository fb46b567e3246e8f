#include "hotspots/core/ops.h"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

namespace hotspots::ag {

namespace {

using MatR = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;

Tensor* InputGrad(Node& n, std::size_t i) {
  return n.inputs[i]->requires_grad ? &n.inputs[i]->grad : nullptr;
}

void RequireSameShape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     ShapeToString(a.shape()) + " vs " +
                     ShapeToString(b.shape()));
}

void RequireRank(const Var& a, int rank, const char* op) {
  if (a.value().rank() != rank)
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) +
                     ", got " + ShapeToString(a.shape()));
}

template <typename Fwd, typename Deriv>
Var Unary(const Var& a, Fwd fwd, Deriv deriv) {
  Tensor out(a.shape());
  const double* x = a.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(x[i]);
  return MakeResult(std::move(out), {a}, [deriv](Node& n) {
    Tensor* gx = InputGrad(n, 0);
    const double* x = n.inputs[0]->value.data();
    const double* y = n.value.data();
    const double* g = n.grad.data();
    for (std::size_t i = 0; i < n.value.size(); ++i)
      (*gx)[i] += g[i] * deriv(x[i], y[i]);
  });
}

}  // namespace

Var Add(const Var& a, const Var& b) {
  RequireSameShape(a, b, "Add");
  Tensor out = a.value();
  out.Add(b.value());
  return MakeResult(std::move(out), {a, b}, [](Node& n) {
    if (auto* ga = InputGrad(n, 0)) ga->Add(n.grad);
    if (auto* gb = InputGrad(n, 1)) gb->Add(n.grad);
  });
}

Var Sub(const Var& a, const Var& b) {
  RequireSameShape(a, b, "Sub");
  Tensor out = a.value();
  out.Add(b.value(), -1.0);
  return MakeResult(std::move(out), {a, b}, [](Node& n) {
    if (auto* ga = InputGrad(n, 0)) ga->Add(n.grad);
    if (auto* gb = InputGrad(n, 1)) gb->Add(n.grad, -1.0);
  });
}

Var Mul(const Var& a, const Var& b) {
  RequireSameShape(a, b, "Mul");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = a.value()[i] * b.value()[i];
  return MakeResult(std::move(out), {a, b}, [](Node& n) {
    const Tensor& av = n.inputs[0]->value;
    const Tensor& bv = n.inputs[1]->value;
    if (auto* ga = InputGrad(n, 0))
      for (std::size_t i = 0; i < av.size(); ++i) (*ga)[i] += n.grad[i] * bv[i];
    if (auto* gb = InputGrad(n, 1))
      for (std::size_t i = 0; i < av.size(); ++i) (*gb)[i] += n.grad[i] * av[i];
  });
}

Var Scale(const Var& a, double s) {
  return Unary(
      a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var AddScalar(const Var& a, double s) {
  return Unary(
      a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var Relu(const Var& a) {
  return Unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var Sigmoid(const Var& a) {
  return Unary(
      a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var Tanh(const Var& a) {
  return Unary(
      a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Var Sqrt(const Var& a) {
  return Unary(
      a, [](double x) { return std::sqrt(x); },
      [](double, double y) { return 0.5 / y; });
}

Var Square(const Var& a) {
  return Unary(
      a, [](double x) { return x * x; },
      [](double x, double) { return 2.0 * x; });
}

Var Sum(const Var& a) {
  return MakeResult(Tensor::Scalar(a.value().Sum()), {a}, [](Node& n) {
    Tensor* ga = InputGrad(n, 0);
    const double g = n.grad[0];
    for (std::size_t i = 0; i < ga->size(); ++i) (*ga)[i] += g;
  });
}

Var Mean(const Var& a) {
  const double count = static_cast<double>(a.value().size());
  return MakeResult(Tensor::Scalar(a.value().Sum() / count), {a},
                    [count](Node& n) {
                      Tensor* ga = InputGrad(n, 0);
                      const double g = n.grad[0] / count;
                      for (std::size_t i = 0; i < ga->size(); ++i) (*ga)[i] += g;
                    });
}

Var Pick(const Var& a, std::size_t flat_index) {
  if (flat_index >= a.value().size())
    throw ShapeError("Pick: index " + std::to_string(flat_index) +
                     " out of range for " + ShapeToString(a.shape()));
  return MakeResult(Tensor::Scalar(a.value()[flat_index]), {a},
                    [flat_index](Node& n) {
                      (*InputGrad(n, 0))[flat_index] += n.grad[0];
                    });
}

Var Detach(const Var& a) { return Var(a.value(), false); }

Var Reshape(const Var& a, Shape shape) {
  Tensor out = a.value().Reshaped(std::move(shape));
  return MakeResult(std::move(out), {a}, [](Node& n) {
    InputGrad(n, 0)->Add(n.grad);
  });
}

Var ConcatCols(const Var& a, const Var& b) {
  RequireRank(a, 2, "ConcatCols");
  RequireRank(b, 2, "ConcatCols");
  const int rows = a.dim(0), p = a.dim(1), q = b.dim(1);
  if (b.dim(0) != rows) throw ShapeError("ConcatCols: row count mismatch");
  Tensor out({rows, p + q});
  for (int r = 0; r < rows; ++r) {
    std::copy_n(a.value().data() + r * p, p, out.data() + r * (p + q));
    std::copy_n(b.value().data() + r * q, q, out.data() + r * (p + q) + p);
  }
  return MakeResult(std::move(out), {a, b}, [rows, p, q](Node& n) {
    const double* g = n.grad.data();
    if (auto* ga = InputGrad(n, 0))
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < p; ++c) (*ga)[r * p + c] += g[r * (p + q) + c];
    if (auto* gb = InputGrad(n, 1))
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < q; ++c) (*gb)[r * q + c] += g[r * (p + q) + p + c];
  });
}

Var SliceCols(const Var& a, int start, int count) {
  RequireRank(a, 2, "SliceCols");
  const int rows = a.dim(0), cols = a.dim(1);
  if (start < 0 || count < 0 || start + count > cols)
    throw ShapeError("SliceCols: range out of bounds");
  Tensor out({rows, count});
  for (int r = 0; r < rows; ++r)
    std::copy_n(a.value().data() + r * cols + start, count,
                out.data() + r * count);
  return MakeResult(std::move(out), {a}, [rows, cols, start, count](Node& n) {
    Tensor* ga = InputGrad(n, 0);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < count; ++c)
        (*ga)[r * cols + start + c] += n.grad[r * count + c];
  });
}

Var SelectRows(const Var& a, const std::vector<int>& rows) {
  const int total = a.dim(0);
  const std::size_t stride = a.value().size() / static_cast<std::size_t>(total);
  Shape shape = a.shape();
  shape[0] = static_cast<int>(rows.size());
  Tensor out(shape);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= total)
      throw ShapeError("SelectRows: row index out of range");
    std::copy_n(a.value().data() + rows[i] * stride, stride,
                out.data() + i * stride);
  }
  return MakeResult(std::move(out), {a}, [rows, stride](Node& n) {
    Tensor* ga = InputGrad(n, 0);
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t k = 0; k < stride; ++k)
        (*ga)[rows[i] * stride + k] += n.grad[i * stride + k];
  });
}

Var GatherSteps(const std::vector<Var>& sources, const std::vector<int>& which) {
  if (sources.empty()) throw ShapeError("GatherSteps: no sources");
  const Shape& shape = sources.front().shape();
  if (shape.size() != 2 || static_cast<std::size_t>(shape[0]) != which.size())
    throw ShapeError("GatherSteps: expected [B, n] sources with B = |which|");
  for (const Var& s : sources)
    if (s.shape() != shape) throw ShapeError("GatherSteps: source shape mismatch");
  const int cols = shape[1];
  Tensor out(shape);
  for (std::size_t r = 0; r < which.size(); ++r) {
    if (which[r] < 0 || which[r] >= static_cast<int>(sources.size()))
      throw ShapeError("GatherSteps: step index out of range");
    std::copy_n(sources[which[r]].value().data() + r * cols, cols,
                out.data() + r * cols);
  }
  return MakeResult(std::move(out), sources, [which, cols](Node& n) {
    for (std::size_t r = 0; r < which.size(); ++r) {
      Tensor* g = InputGrad(n, which[r]);
      if (!g) continue;
      for (int c = 0; c < cols; ++c) (*g)[r * cols + c] += n.grad[r * cols + c];
    }
  });
}

Var SumCols(const Var& a) {
  RequireRank(a, 2, "SumCols");
  const int rows = a.dim(0), cols = a.dim(1);
  Tensor out({rows});
  for (int r = 0; r < rows; ++r) {
    double s = 0.0;
    for (int c = 0; c < cols; ++c) s += a.value()[r * cols + c];
    out[r] = s;
  }
  return MakeResult(std::move(out), {a}, [rows, cols](Node& n) {
    Tensor* ga = InputGrad(n, 0);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) (*ga)[r * cols + c] += n.grad[r];
  });
}

Var NormalizeRows(const Var& a, double eps) {
  RequireRank(a, 2, "NormalizeRows");
  const int rows = a.dim(0), cols = a.dim(1);
  Tensor out(a.shape());
  std::vector<double> norms(rows);
  for (int r = 0; r < rows; ++r) {
    double s = 0.0;
    for (int c = 0; c < cols; ++c) s += a.value()[r * cols + c] * a.value()[r * cols + c];
    norms[r] = std::sqrt(s + eps);
    for (int c = 0; c < cols; ++c) out[r * cols + c] = a.value()[r * cols + c] / norms[r];
  }
  return MakeResult(std::move(out), {a}, [rows, cols, norms](Node& n) {
    Tensor* ga = InputGrad(n, 0);
    for (int r = 0; r < rows; ++r) {
      // d(x/|x|) = (g - y (y.g)) / |x|
      double dot = 0.0;
      for (int c = 0; c < cols; ++c) dot += n.grad[r * cols + c] * n.value[r * cols + c];
      for (int c = 0; c < cols; ++c)
        (*ga)[r * cols + c] +=
            (n.grad[r * cols + c] - n.value[r * cols + c] * dot) / norms[r];
    }
  });
}

Var Linear(const Var& x, const Var& weight, const Var& bias) {
  RequireRank(x, 2, "Linear");
  RequireRank(weight, 2, "Linear");
  const int batch = x.dim(0), in = x.dim(1), out_dim = weight.dim(0);
  if (weight.dim(1) != in)
    throw ShapeError("Linear: input width " + std::to_string(in) +
                     " does not match weight " + ShapeToString(weight.shape()));
  if (bias.defined() && bias.shape() != Shape{out_dim})
    throw ShapeError("Linear: bias shape mismatch");
  Tensor out({batch, out_dim});
  MapR y(out.data(), batch, out_dim);
  y.noalias() = CMapR(x.value().data(), batch, in) *
                CMapR(weight.value().data(), out_dim, in).transpose();
  if (bias.defined())
    y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias.value().data(), out_dim);
  std::vector<Var> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  return MakeResult(std::move(out), inputs, [batch, in, out_dim](Node& n) {
    CMapR g(n.grad.data(), batch, out_dim);
    if (auto* gx = InputGrad(n, 0))
      MapR(gx->data(), batch, in).noalias() +=
          g * CMapR(n.inputs[1]->value.data(), out_dim, in);
    if (auto* gw = InputGrad(n, 1))
      MapR(gw->data(), out_dim, in).noalias() +=
          g.transpose() * CMapR(n.inputs[0]->value.data(), batch, in);
    if (n.inputs.size() > 2)
      if (auto* gb = InputGrad(n, 2))
        Eigen::Map<Eigen::RowVectorXd>(gb->data(), out_dim) += g.colwise().sum();
  });
}

int ConvOutputSize(int in, int kernel, const Conv2dOptions& opt) {
  return (in + 2 * opt.padding - opt.dilation * (kernel - 1) - 1) / opt.stride + 1;
}

namespace {

struct ConvGeometry {
  int channels, height, width, kernel, out_h, out_w;
  Conv2dOptions opt;
  int col_rows() const { return channels * kernel * kernel; }
  int col_cols() const { return out_h * out_w; }
};

int Clamp(int i, int n) { return i < 0 ? 0 : i >= n ? n - 1 : i; }

void Im2Col(const double* img, const ConvGeometry& g, double* col) {
  const int ohw = g.col_cols();
  for (int c = 0; c < g.channels; ++c)
    for (int ki = 0; ki < g.kernel; ++ki)
      for (int kj = 0; kj < g.kernel; ++kj) {
        double* row = col + ((c * g.kernel + ki) * g.kernel + kj) * ohw;
        const double* plane = img + c * g.height * g.width;
        for (int oh = 0; oh < g.out_h; ++oh) {
          double* dst = row + oh * g.out_w;
          if (g.opt.replicate) {
            const double* src = plane + Clamp(oh * g.opt.stride - g.opt.padding +
                                              ki * g.opt.dilation, g.height) * g.width;
            for (int ow = 0; ow < g.out_w; ++ow)
              dst[ow] = src[Clamp(ow * g.opt.stride - g.opt.padding + kj * g.opt.dilation,
                                  g.width)];
            continue;
          }
          const int ih = oh * g.opt.stride - g.opt.padding + ki * g.opt.dilation;
          if (ih < 0 || ih >= g.height) {
            std::fill_n(dst, g.out_w, 0.0);
            continue;
          }
          const double* src = plane + ih * g.width;
          for (int ow = 0; ow < g.out_w; ++ow) {
            const int iw = ow * g.opt.stride - g.opt.padding + kj * g.opt.dilation;
            dst[ow] = (iw >= 0 && iw < g.width) ? src[iw] : 0.0;
          }
        }
      }
}

void Col2ImAdd(const double* col, const ConvGeometry& g, double* img) {
  const int ohw = g.col_cols();
  for (int c = 0; c < g.channels; ++c)
    for (int ki = 0; ki < g.kernel; ++ki)
      for (int kj = 0; kj < g.kernel; ++kj) {
        const double* row = col + ((c * g.kernel + ki) * g.kernel + kj) * ohw;
        double* plane = img + c * g.height * g.width;
        for (int oh = 0; oh < g.out_h; ++oh) {
          const double* src = row + oh * g.out_w;
          if (g.opt.replicate) {
            double* dst = plane + Clamp(oh * g.opt.stride - g.opt.padding +
                                        ki * g.opt.dilation, g.height) * g.width;
            for (int ow = 0; ow < g.out_w; ++ow)
              dst[Clamp(ow * g.opt.stride - g.opt.padding + kj * g.opt.dilation, g.width)] +=
                  src[ow];
            continue;
          }
          const int ih = oh * g.opt.stride - g.opt.padding + ki * g.opt.dilation;
          if (ih < 0 || ih >= g.height) continue;
          double* dst = plane + ih * g.width;
          for (int ow = 0; ow < g.out_w; ++ow) {
            const int iw = ow * g.opt.stride - g.opt.padding + kj * g.opt.dilation;
            if (iw >= 0 && iw < g.width) dst[iw] += src[ow];
          }
        }
      }
}

bool IsPointwise(const ConvGeometry& g) {
  return g.kernel == 1 && g.opt.stride == 1 && g.opt.padding == 0;
}

}  // namespace

Var Conv2d(const Var& x, const Var& weight, const Var& bias,
           const Conv2dOptions& opt) {
  RequireRank(x, 4, "Conv2d");
  RequireRank(weight, 4, "Conv2d");
  const int batch = x.dim(0);
  const int out_c = weight.dim(0);
  ConvGeometry g{x.dim(1), x.dim(2), x.dim(3), weight.dim(2), 0, 0, opt};
  if (weight.dim(1) != g.channels || weight.dim(3) != g.kernel)
    throw ShapeError("Conv2d: weight " + ShapeToString(weight.shape()) +
                     " incompatible with input " + ShapeToString(x.shape()));
  g.out_h = ConvOutputSize(g.height, g.kernel, opt);
  g.out_w = ConvOutputSize(g.width, g.kernel, opt);
  if (g.out_h <= 0 || g.out_w <= 0)
    throw ShapeError("Conv2d: input " + ShapeToString(x.shape()) +
                     " too small for kernel");
  if (bias.defined() && bias.shape() != Shape{out_c})
    throw ShapeError("Conv2d: bias shape mismatch");

  Tensor out({batch, out_c, g.out_h, g.out_w});
  const int rows = g.col_rows(), cols = g.col_cols();
  const std::size_t in_stride = static_cast<std::size_t>(g.channels) * g.height * g.width;
  const std::size_t out_stride = static_cast<std::size_t>(out_c) * cols;
  CMapR w(weight.value().data(), out_c, rows);
  std::vector<double> col(IsPointwise(g) ? 0 : static_cast<std::size_t>(rows) * cols);
  for (int n = 0; n < batch; ++n) {
    const double* src = x.value().data() + n * in_stride;
    if (!IsPointwise(g)) {
      Im2Col(src, g, col.data());
      src = col.data();
    }
    MapR y(out.data() + n * out_stride, out_c, cols);
    y.noalias() = w * CMapR(src, rows, cols);
    if (bias.defined())
      y.colwise() += Eigen::Map<const Eigen::VectorXd>(bias.value().data(), out_c);
  }

  std::vector<Var> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  return MakeResult(std::move(out), inputs,
                    [g, batch, out_c, in_stride, out_stride](Node& node) {
    const int rows = g.col_rows(), cols = g.col_cols();
    const Tensor& xv = node.inputs[0]->value;
    CMapR w(node.inputs[1]->value.data(), out_c, rows);
    Tensor* gx = InputGrad(node, 0);
    Tensor* gw = InputGrad(node, 1);
    Tensor* gb = node.inputs.size() > 2 ? InputGrad(node, 2) : nullptr;
    const bool pointwise = IsPointwise(g);
    std::vector<double> col(pointwise ? 0 : static_cast<std::size_t>(rows) * cols);
    MatR dcol;
    for (int n = 0; n < batch; ++n) {
      CMapR dy(node.grad.data() + n * out_stride, out_c, cols);
      if (gw) {
        const double* src = xv.data() + n * in_stride;
        if (!pointwise) {
          Im2Col(src, g, col.data());
          src = col.data();
        }
        MapR(gw->data(), out_c, rows).noalias() +=
            dy * CMapR(src, rows, cols).transpose();
      }
      if (gb) Eigen::Map<Eigen::VectorXd>(gb->data(), out_c) += dy.rowwise().sum();
      if (gx) {
        if (pointwise) {
          MapR(gx->data() + n * in_stride, rows, cols).noalias() += w.transpose() * dy;
        } else {
          dcol.noalias() = w.transpose() * dy;
          Col2ImAdd(dcol.data(), g, gx->data() + n * in_stride);
        }
      }
    }
  });
}

Var BatchNormTrain(const Var& x, const Var& gamma, const Var& beta, double eps,
                   std::vector<double>* batch_mean,
                   std::vector<double>* batch_var) {
  RequireRank(x, 4, "BatchNormTrain");
  const int batch = x.dim(0), ch = x.dim(1), hw = x.dim(2) * x.dim(3);
  if (gamma.shape() != Shape{ch} || beta.shape() != Shape{ch})
    throw ShapeError("BatchNormTrain: affine parameter shape mismatch");
  const double count = static_cast<double>(batch) * hw;
  std::vector<double> mean(ch, 0.0), var(ch, 0.0), inv_std(ch);
  const double* xv = x.value().data();
  for (int n = 0; n < batch; ++n)
    for (int c = 0; c < ch; ++c) {
      const double* p = xv + (static_cast<std::size_t>(n) * ch + c) * hw;
      for (int i = 0; i < hw; ++i) mean[c] += p[i];
    }
  for (double& m : mean) m /= count;
  for (int n = 0; n < batch; ++n)
    for (int c = 0; c < ch; ++c) {
      const double* p = xv + (static_cast<std::size_t>(n) * ch + c) * hw;
      for (int i = 0; i < hw; ++i) var[c] += (p[i] - mean[c]) * (p[i] - mean[c]);
    }
  for (double& v : var) v /= count;
  for (int c = 0; c < ch; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + eps);
  if (batch_mean) *batch_mean = mean;
  if (batch_var) *batch_var = var;

  Tensor xhat(x.shape());
  Tensor out(x.shape());
  for (int n = 0; n < batch; ++n)
    for (int c = 0; c < ch; ++c) {
      const std::size_t base = (static_cast<std::size_t>(n) * ch + c) * hw;
      for (int i = 0; i < hw; ++i) {
        xhat[base + i] = (xv[base + i] - mean[c]) * inv_std[c];
        out[base + i] = gamma.value()[c] * xhat[base + i] + beta.value()[c];
      }
    }
  return MakeResult(std::move(out), {x, gamma, beta},
                    [xhat = std::move(xhat), inv_std, batch, ch, hw, count](Node& node) {
    const double* g = node.grad.data();
    const Tensor& gam = node.inputs[1]->value;
    std::vector<double> sum_dy(ch, 0.0), sum_dy_xhat(ch, 0.0);
    for (int n = 0; n < batch; ++n)
      for (int c = 0; c < ch; ++c) {
        const std::size_t base = (static_cast<std::size_t>(n) * ch + c) * hw;
        for (int i = 0; i < hw; ++i) {
          sum_dy[c] += g[base + i];
          sum_dy_xhat[c] += g[base + i] * xhat[base + i];
        }
      }
    if (auto* gg = InputGrad(node, 1))
      for (int c = 0; c < ch; ++c) (*gg)[c] += sum_dy_xhat[c];
    if (auto* gbeta = InputGrad(node, 2))
      for (int c = 0; c < ch; ++c) (*gbeta)[c] += sum_dy[c];
    if (auto* gx = InputGrad(node, 0))
      for (int n = 0; n < batch; ++n)
        for (int c = 0; c < ch; ++c) {
          const std::size_t base = (static_cast<std::size_t>(n) * ch + c) * hw;
          const double k = gam[c] * inv_std[c] / count;
          for (int i = 0; i < hw; ++i)
            (*gx)[base + i] += k * (count * g[base + i] - sum_dy[c] -
                                    xhat[base + i] * sum_dy_xhat[c]);
        }
  });
}

Var BatchNormEval(const Var& x, const Var& gamma, const Var& beta,
                  const std::vector<double>& running_mean,
                  const std::vector<double>& running_var, double eps) {
  RequireRank(x, 4, "BatchNormEval");
  const int batch = x.dim(0), ch = x.dim(1), hw = x.dim(2) * x.dim(3);
  if (gamma.shape() != Shape{ch} || beta.shape() != Shape{ch} ||
      running_mean.size() != static_cast<std::size_t>(ch) ||
      running_var.size() != static_cast<std::size_t>(ch))
    throw ShapeError("BatchNormEval: parameter shape mismatch");
  std::vector<double> inv_std(ch);
  for (int c = 0; c < ch; ++c) inv_std[c] = 1.0 / std::sqrt(running_var[c] + eps);
  Tensor out(x.shape());
  const double* xv = x.value().data();
  for (int n = 0; n < batch; ++n)
    for (int c = 0; c < ch; ++c) {
      const std::size_t base = (static_cast<std::size_t>(n) * ch + c) * hw;
      const double s = gamma.value()[c] * inv_std[c];
      const double b = beta.value()[c] - s * running_mean[c];
      for (int i = 0; i < hw; ++i) out[base + i] = s * xv[base + i] + b;
    }
  return MakeResult(std::move(out), {x, gamma, beta},
                    [inv_std, running_mean, batch, ch, hw](Node& node) {
    const double* g = node.grad.data();
    const Tensor& xv = node.inputs[0]->value;
    const Tensor& gam = node.inputs[1]->value;
    Tensor* gx = InputGrad(node, 0);
    Tensor* gg = InputGrad(node, 1);
    Tensor* gb = InputGrad(node, 2);
    for (int n = 0; n < batch; ++n)
      for (int c = 0; c < ch; ++c) {
        const std::size_t base = (static_cast<std::size_t>(n) * ch + c) * hw;
        const double s = gam[c] * inv_std[c];
        for (int i = 0; i < hw; ++i) {
          if (gx) (*gx)[base + i] += g[base + i] * s;
          if (gg) (*gg)[c] += g[base + i] * (xv[base + i] - running_mean[c]) * inv_std[c];
          if (gb) (*gb)[c] += g[base + i];
        }
      }
  });
}

Var MaxPool2d(const Var& x, int kernel, int stride, int padding) {
  RequireRank(x, 4, "MaxPool2d");
  const int batch = x.dim(0), ch = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int oh = (h + 2 * padding - kernel) / stride + 1;
  const int ow = (w + 2 * padding - kernel) / stride + 1;
  if (oh <= 0 || ow <= 0) throw ShapeError("MaxPool2d: input too small");
  Tensor out({batch, ch, oh, ow});
  std::vector<std::size_t> argmax(out.size());
  const double* xv = x.value().data();
  std::size_t o = 0;
  for (int p = 0; p < batch * ch; ++p) {
    const std::size_t base = static_cast<std::size_t>(p) * h * w;
    for (int i = 0; i < oh; ++i)
      for (int j = 0; j < ow; ++j, ++o) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_idx = base;
        for (int ki = 0; ki < kernel; ++ki) {
          const int ih = i * stride - padding + ki;
          if (ih < 0 || ih >= h) continue;
          for (int kj = 0; kj < kernel; ++kj) {
            const int iw = j * stride - padding + kj;
            if (iw < 0 || iw >= w) continue;
            const std::size_t idx = base + ih * w + iw;
            if (xv[idx] > best) {
              best = xv[idx];
              best_idx = idx;
            }
          }
        }
        out[o] = best;
        argmax[o] = best_idx;
      }
  }
  return MakeResult(std::move(out), {x}, [argmax = std::move(argmax)](Node& n) {
    Tensor* gx = InputGrad(n, 0);
    for (std::size_t i = 0; i < argmax.size(); ++i) (*gx)[argmax[i]] += n.grad[i];
  });
}

namespace {

struct BilinearTap {
  int i0, i1;
  double w1;
};

std::vector<BilinearTap> BilinearTaps(int in, int out) {
  std::vector<BilinearTap> taps(out);
  const double scale = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    double src = (o + 0.5) * scale - 0.5;
    if (src < 0) src = 0;
    int i0 = static_cast<int>(std::floor(src));
    if (i0 > in - 1) i0 = in - 1;
    const int i1 = std::min(i0 + 1, in - 1);
    taps[o] = {i0, i1, src - i0};
  }
  return taps;
}

}  // namespace

Var UpsampleBilinear(const Var& x, int out_h, int out_w) {
  RequireRank(x, 4, "UpsampleBilinear");
  const int planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  if (out_h <= 0 || out_w <= 0) throw ShapeError("UpsampleBilinear: bad size");
  const auto ty = BilinearTaps(h, out_h);
  const auto tx = BilinearTaps(w, out_w);
  Tensor out({x.dim(0), x.dim(1), out_h, out_w});
  const double* xv = x.value().data();
  for (int p = 0; p < planes; ++p) {
    const double* src = xv + static_cast<std::size_t>(p) * h * w;
    double* dst = out.data() + static_cast<std::size_t>(p) * out_h * out_w;
    for (int i = 0; i < out_h; ++i) {
      const auto& a = ty[i];
      for (int j = 0; j < out_w; ++j) {
        const auto& b = tx[j];
        const double top = src[a.i0 * w + b.i0] * (1 - b.w1) + src[a.i0 * w + b.i1] * b.w1;
        const double bot = src[a.i1 * w + b.i0] * (1 - b.w1) + src[a.i1 * w + b.i1] * b.w1;
        dst[i * out_w + j] = top * (1 - a.w1) + bot * a.w1;
      }
    }
  }
  return MakeResult(std::move(out), {x}, [ty, tx, planes, h, w, out_h, out_w](Node& n) {
    Tensor* gx = InputGrad(n, 0);
    for (int p = 0; p < planes; ++p) {
      const double* g = n.grad.data() + static_cast<std::size_t>(p) * out_h * out_w;
      double* dst = gx->data() + static_cast<std::size_t>(p) * h * w;
      for (int i = 0; i < out_h; ++i) {
        const auto& a = ty[i];
        for (int j = 0; j < out_w; ++j) {
          const auto& b = tx[j];
          const double v = g[i * out_w + j];
          dst[a.i0 * w + b.i0] += v * (1 - a.w1) * (1 - b.w1);
          dst[a.i0 * w + b.i1] += v * (1 - a.w1) * b.w1;
          dst[a.i1 * w + b.i0] += v * a.w1 * (1 - b.w1);
          dst[a.i1 * w + b.i1] += v * a.w1 * b.w1;
        }
      }
    }
  });
}

Var L2Pool(const Var& x, double eps) {
  RequireRank(x, 4, "L2Pool");
  const int batch = x.dim(0), ch = x.dim(1), hw = x.dim(2) * x.dim(3);
  Tensor out({batch, ch});
  const double* xv = x.value().data();
  for (int p = 0; p < batch * ch; ++p) {
    const double* src = xv + static_cast<std::size_t>(p) * hw;
    double s = 0.0;
    for (int i = 0; i < hw; ++i) s += src[i] * src[i];
    out[p] = std::sqrt(s / hw + eps);
  }
  return MakeResult(std::move(out), {x}, [batch, ch, hw](Node& n) {
    Tensor* gx = InputGrad(n, 0);
    const double* xv = n.inputs[0]->value.data();
    for (int p = 0; p < batch * ch; ++p) {
      const double k = n.grad[p] / (hw * n.value[p]);
      const std::size_t base = static_cast<std::size_t>(p) * hw;
      for (int i = 0; i < hw; ++i) (*gx)[base + i] += k * xv[base + i];
    }
  });
}

Var CrossEntropyRows(const Var& scores, const std::vector<int>& labels) {
  RequireRank(scores, 2, "CrossEntropyRows");
  const int rows = scores.dim(0), classes = scores.dim(1);
  if (labels.size() != static_cast<std::size_t>(rows))
    throw ShapeError("CrossEntropyRows: label count mismatch");
  Tensor probs(scores.shape());
  Tensor out({rows});
  for (int r = 0; r < rows; ++r) {
    if (labels[r] < 0 || labels[r] >= classes)
      throw std::out_of_range("CrossEntropyRows: label " + std::to_string(labels[r]) +
                              " outside [0, " + std::to_string(classes) + ")");
    const double* s = scores.value().data() + r * classes;
    const double mx = *std::max_element(s, s + classes);
    double z = 0.0;
    for (int c = 0; c < classes; ++c) z += std::exp(s[c] - mx);
    const double lse = mx + std::log(z);
    for (int c = 0; c < classes; ++c) probs[r * classes + c] = std::exp(s[c] - lse);
    out[r] = lse - s[labels[r]];
  }
  return MakeResult(std::move(out), {scores},
                    [probs = std::move(probs), labels, rows, classes](Node& n) {
    Tensor* gs = InputGrad(n, 0);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < classes; ++c) {
        const double target = c == labels[r] ? 1.0 : 0.0;
        (*gs)[r * classes + c] += n.grad[r] * (probs[r * classes + c] - target);
      }
  });
}

Var BceWithLogits(const Var& logits, const Tensor& targets) {
  if (logits.shape() != targets.shape())
    throw ShapeError("BceWithLogits: target shape mismatch");
  const double count = static_cast<double>(targets.size());
  double total = 0.0;
  const double* z = logits.value().data();
  for (std::size_t i = 0; i < targets.size(); ++i)
    total += std::max(z[i], 0.0) - z[i] * targets[i] + std::log1p(std::exp(-std::abs(z[i])));
  return MakeResult(Tensor::Scalar(total / count), {logits},
                    [targets, count](Node& n) {
    Tensor* gz = InputGrad(n, 0);
    const double* z = n.inputs[0]->value.data();
    const double g = n.grad[0] / count;
    for (std::size_t i = 0; i < targets.size(); ++i) {
      const double s = z[i] >= 0 ? 1.0 / (1.0 + std::exp(-z[i]))
                                 : std::exp(z[i]) / (1.0 + std::exp(z[i]));
      (*gz)[i] += g * (s - targets[i]);
    }
  });
}

}  // namespace hotspots::ag
