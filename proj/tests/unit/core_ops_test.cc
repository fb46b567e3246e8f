#include <gtest/gtest.h>

#include "hotspots/core/layers.h"
#include "hotspots/core/ops.h"
#include "test_util.h"

namespace hotspots {
namespace {

using ag::Var;
using testing::CheckGradients;
using testing::RandomTensor;

constexpr double kTol = 1e-5;

TEST(Tensor, ShapeAndIndexing) {
  Tensor t({2, 3, 4, 5});
  EXPECT_EQ(t.size(), 120u);
  t.at(1, 2, 3, 4) = 7.0;
  EXPECT_EQ(t[119], 7.0);
  EXPECT_THROW(t.Reshaped({7}), ShapeError);
  EXPECT_EQ(t.Reshaped({120}).rank(), 1);
}

TEST(Autograd, LeafGradientsAccumulateAcrossCalls) {
  Var x(Tensor::Scalar(3.0), true);
  Var y = ag::Square(x);
  ag::Backward(y);
  ag::Backward(y);
  EXPECT_DOUBLE_EQ(x.grad()[0], 12.0);
  x.ZeroGrad();
  ag::Backward(y);
  EXPECT_DOUBLE_EQ(x.grad()[0], 6.0);
}

TEST(Autograd, NoGradGuardBuildsConstants) {
  Var x(Tensor::Scalar(2.0), true);
  ag::NoGradGuard guard;
  Var y = ag::Square(x);
  EXPECT_FALSE(y.requires_grad());
}

TEST(Ops, ElementwiseGradients) {
  std::mt19937_64 rng(1);
  const Tensor a = RandomTensor({3, 4}, rng), b = RandomTensor({3, 4}, rng);
  auto ops = std::vector<std::function<Var(const std::vector<Var>&)>>{
      [](const auto& v) { return ag::Add(v[0], v[1]); },
      [](const auto& v) { return ag::Sub(v[0], v[1]); },
      [](const auto& v) { return ag::Mul(v[0], v[1]); },
      [](const auto& v) { return ag::Scale(v[0], -2.5); },
      [](const auto& v) { return ag::Sigmoid(v[0]); },
      [](const auto& v) { return ag::Tanh(v[1]); },
      [](const auto& v) { return ag::Square(v[0]); },
      [](const auto& v) { return ag::Sqrt(ag::AddScalar(ag::Square(v[0]), 0.5)); },
      [](const auto& v) { return ag::Mean(ag::Mul(v[0], v[1])); },
      [](const auto& v) { return ag::SumCols(v[0]); },
      [](const auto& v) { return ag::NormalizeRows(v[0], 1e-12); },
      [](const auto& v) { return ag::ConcatCols(v[0], v[1]); },
      [](const auto& v) { return ag::SliceCols(v[0], 1, 2); },
      [](const auto& v) { return ag::SelectRows(v[0], {2, 0, 2}); },
      [](const auto& v) { return ag::GatherSteps({v[0], v[1]}, {1, 0, 1}); },
  };
  for (std::size_t i = 0; i < ops.size(); ++i)
    EXPECT_LT(CheckGradients(ops[i], {a, b}, rng).max_rel_error, kTol) << "op " << i;
}

TEST(Ops, ReluGradientAwayFromKink) {
  std::mt19937_64 rng(2);
  Tensor a = RandomTensor({20}, rng);
  for (double& v : a.storage()) v += v > 0 ? 0.1 : -0.1;
  EXPECT_LT(CheckGradients([](const auto& v) { return ag::Relu(v[0]); }, {a}, rng).max_rel_error,
            kTol);
}

TEST(Ops, LinearGradient) {
  std::mt19937_64 rng(3);
  EXPECT_LT(CheckGradients([](const auto& v) { return ag::Linear(v[0], v[1], v[2]); },
                           {RandomTensor({4, 5}, rng), RandomTensor({3, 5}, rng),
                            RandomTensor({3}, rng)},
                           rng)
                .max_rel_error,
            kTol);
}

// Direct sum over the kernel support; independent of im2col.
Tensor NaiveConv(const Tensor& x, const Tensor& w, const Tensor& b, ag::Conv2dOptions o) {
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int oc = w.dim(0), k = w.dim(2);
  const int oh = ag::ConvOutputSize(h, k, o), ow = ag::ConvOutputSize(wd, k, o);
  Tensor out({n, oc, oh, ow});
  for (int b0 = 0; b0 < n; ++b0)
    for (int f = 0; f < oc; ++f)
      for (int y = 0; y < oh; ++y)
        for (int xx = 0; xx < ow; ++xx) {
          double s = b.size() ? b[f] : 0.0;
          for (int ch = 0; ch < c; ++ch)
            for (int i = 0; i < k; ++i)
              for (int j = 0; j < k; ++j) {
                int iy = y * o.stride - o.padding + i * o.dilation;
                int ix = xx * o.stride - o.padding + j * o.dilation;
                if (o.replicate) {
                  iy = std::clamp(iy, 0, h - 1);
                  ix = std::clamp(ix, 0, wd - 1);
                }
                if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
                s += w.at(f, ch, i, j) * x.at(b0, ch, iy, ix);
              }
          out.at(b0, f, y, xx) = s;
        }
  return out;
}

TEST(Ops, ConvMatchesDirectSumAndFiniteDifferences) {
  std::mt19937_64 rng(4);
  for (const auto& o : {ag::Conv2dOptions{1, 1, 1}, ag::Conv2dOptions{2, 1, 1},
                        ag::Conv2dOptions{1, 2, 2}, ag::Conv2dOptions{1, 4, 4},
                        ag::Conv2dOptions{2, 0, 1}, ag::Conv2dOptions{1, 2, 2, true},
                        ag::Conv2dOptions{2, 1, 1, true}}) {
    const Tensor x = RandomTensor({2, 3, 7, 7}, rng), w = RandomTensor({4, 3, 3, 3}, rng),
                 b = RandomTensor({4}, rng);
    ag::NoGradGuard guard;
    const Tensor got = ag::Conv2d(Var(x), Var(w), Var(b), o).value();
    const Tensor want = NaiveConv(x, w, b, o);
    ASSERT_EQ(got.shape(), want.shape());
    for (std::size_t i = 0; i < got.size(); ++i) ASSERT_NEAR(got[i], want[i], 1e-12);
  }
  for (const auto& o : {ag::Conv2dOptions{1, 2, 2}, ag::Conv2dOptions{2, 1, 1},
                        ag::Conv2dOptions{1, 4, 4, true}}) {
    auto f = [o](const std::vector<Var>& v) { return ag::Conv2d(v[0], v[1], v[2], o); };
    EXPECT_LT(CheckGradients(f,
                             {RandomTensor({2, 2, 6, 6}, rng), RandomTensor({3, 2, 3, 3}, rng),
                              RandomTensor({3}, rng)},
                             rng)
                  .max_rel_error,
              kTol);
  }
  // 1x1 fast path.
  auto pw = [](const std::vector<Var>& v) { return ag::Conv2d(v[0], v[1], Var(), {}); };
  EXPECT_LT(CheckGradients(pw, {RandomTensor({2, 3, 4, 4}, rng), RandomTensor({5, 3, 1, 1}, rng)},
                           rng)
                .max_rel_error,
            kTol);
}

TEST(Ops, BatchNormGradients) {
  std::mt19937_64 rng(5);
  auto train = [](const std::vector<Var>& v) {
    std::vector<double> m, s;
    return ag::BatchNormTrain(v[0], v[1], v[2], 1e-5, &m, &s);
  };
  EXPECT_LT(CheckGradients(train,
                           {RandomTensor({3, 2, 3, 3}, rng), RandomTensor({2}, rng, 0.5, 1.5),
                            RandomTensor({2}, rng)},
                           rng)
                .max_rel_error,
            1e-4);
  auto eval = [](const std::vector<Var>& v) {
    return ag::BatchNormEval(v[0], v[1], v[2], {0.1, -0.2}, {1.5, 0.7}, 1e-5);
  };
  EXPECT_LT(CheckGradients(eval,
                           {RandomTensor({2, 2, 3, 3}, rng), RandomTensor({2}, rng),
                            RandomTensor({2}, rng)},
                           rng)
                .max_rel_error,
            kTol);
}

TEST(Ops, BatchNormTrainNormalizesPerChannel) {
  std::mt19937_64 rng(6);
  const Tensor x = RandomTensor({4, 3, 5, 5}, rng, -3, 5);
  std::vector<double> m, s;
  ag::NoGradGuard g;
  const Tensor y = ag::BatchNormTrain(Var(x), Var(Tensor::Ones({3})), Var(Tensor::Zeros({3})),
                                      1e-5, &m, &s)
                       .value();
  for (int c = 0; c < 3; ++c) {
    double mean = 0, sq = 0;
    for (int n = 0; n < 4; ++n)
      for (int i = 0; i < 25; ++i) {
        const double v = y[(n * 3 + c) * 25 + i];
        mean += v;
        sq += v * v;
      }
    EXPECT_NEAR(mean / 100, 0.0, 1e-10);
    EXPECT_NEAR(sq / 100, 1.0, 1e-4);
  }
}

TEST(Ops, MaxPoolAndUpsampleGradients) {
  std::mt19937_64 rng(7);
  EXPECT_LT(CheckGradients([](const auto& v) { return ag::MaxPool2d(v[0], 2, 2, 0); },
                           {RandomTensor({1, 2, 6, 6}, rng)}, rng)
                .max_rel_error,
            kTol);
  EXPECT_LT(CheckGradients([](const auto& v) { return ag::UpsampleBilinear(v[0], 9, 7); },
                           {RandomTensor({2, 2, 3, 4}, rng)}, rng)
                .max_rel_error,
            kTol);
}

TEST(Ops, UpsampleIdentityAndConstant) {
  std::mt19937_64 rng(8);
  const Tensor x = RandomTensor({1, 1, 4, 4}, rng);
  ag::NoGradGuard g;
  const Tensor same = ag::UpsampleBilinear(Var(x), 4, 4).value();
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(same[i], x[i], 1e-15);
  Tensor c({1, 1, 3, 3});
  c.Fill(2.5);
  const Tensor up = ag::UpsampleBilinear(Var(c), 11, 5).value();
  for (double v : up.values()) EXPECT_NEAR(v, 2.5, 1e-14);
}

TEST(Ops, CrossEntropyMatchesLogSoftmaxAndIsStable) {
  Tensor s({2, 3});
  s.storage() = {1.0, 2.0, 3.0, 1000.0, 0.0, -1000.0};
  ag::NoGradGuard g;
  const Tensor ce = ag::CrossEntropyRows(Var(s), {2, 0}).value();
  const double lse = std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0));
  EXPECT_NEAR(ce[0], lse - 3.0, 1e-12);
  EXPECT_NEAR(ce[1], 0.0, 1e-12);
  EXPECT_THROW(ag::CrossEntropyRows(Var(s), {3, 0}), std::out_of_range);
}

TEST(Ops, LossGradients) {
  std::mt19937_64 rng(9);
  EXPECT_LT(CheckGradients([](const auto& v) { return ag::CrossEntropyRows(v[0], {1, 0, 2}); },
                           {RandomTensor({3, 4}, rng, -3, 3)}, rng)
                .max_rel_error,
            kTol);
  const Tensor t = RandomTensor({2, 5}, rng, 0, 1);
  EXPECT_LT(CheckGradients([&](const auto& v) { return ag::BceWithLogits(v[0], t); },
                           {RandomTensor({2, 5}, rng, -3, 3)}, rng)
                .max_rel_error,
            kTol);
}

TEST(Layers, LstmStepGradient) {
  std::mt19937_64 rng(10);
  nn::LstmCell cell(3, 4, rng);
  auto f = [&](const std::vector<Var>& v) {
    const auto s0 = nn::LstmState{v[1], v[2]};
    const auto s1 = cell.Step(v[0], s0);
    const auto s2 = cell.Step(v[0], s1);
    return ag::ConcatCols(s2.h, s2.c);
  };
  EXPECT_LT(CheckGradients(f,
                           {RandomTensor({2, 3}, rng), RandomTensor({2, 4}, rng),
                            RandomTensor({2, 4}, rng)},
                           rng)
                .max_rel_error,
            kTol);
}

TEST(Layers, AdamMovesAgainstGradientAndClipBoundsNorm) {
  Var p(Tensor::Scalar(1.0), true);
  nn::Adam::Options o;
  o.lr = 0.1;
  o.weight_decay = 0.0;
  nn::Adam adam({p}, o);
  ag::Backward(ag::Square(p));
  adam.Step();
  EXPECT_NEAR(p.value()[0], 0.9, 1e-9);  // first Adam step has magnitude lr

  std::vector<Var> ps = {Var(Tensor::Zeros({2}), true)};
  ps[0].mutable_grad().storage() = {30.0, 40.0};
  EXPECT_DOUBLE_EQ(nn::ClipGradNorm(ps, 10.0), 50.0);
  EXPECT_NEAR(ps[0].grad()[0], 6.0, 1e-12);
  EXPECT_NEAR(ps[0].grad()[1], 8.0, 1e-12);
}

}  // namespace
}  // namespace hotspots
