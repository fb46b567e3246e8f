#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "hotspots/hotspot/export.h"
#include "hotspots/hotspot/hotspot.h"
#include "hotspots/synth/synthbench.h"
#include "test_util.h"

namespace hotspots::hotspot {
namespace {

using hotspots::testing::RandomTensor;
using hotspots::testing::TempDir;

std::unique_ptr<training::Model> RandomModel(std::uint64_t seed, int input = 48) {
  training::TrainConfig c = training::TrainConfig::Desk();
  c.input_size = input;
  c.feature_channels = 8;
  c.hidden_size = 10;
  c.seed = seed;
  return training::MakeModel(c, data::Vocab({"press", "rotate", "pull"}), data::Vocab({"o"}));
}

RgbImage RandomImage(int h, int w, std::mt19937_64& rng) {
  RgbImage img(h, w);
  std::uniform_int_distribution<int> u(0, 255);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(u(rng));
  return img;
}

TEST(ActivationMap, HandExampleAndAnnihilation) {
  const Tensor grad({1, 2, 2}, {1, -1, 2, 0}), act({1, 2, 2}, {3, 5, 7, 1});
  EXPECT_EQ(ActivationMap(grad, act).storage(), (std::vector<double>{3, 0, 14, 0}));
  std::mt19937_64 rng(1);
  const Tensor a = RandomTensor({4, 3, 3}, rng, 0, 1);
  const Tensor g = RandomTensor({4, 3, 3}, rng, -1, 0);
  const Tensor zero = ActivationMap(g, a);
  for (double v : zero.values()) EXPECT_EQ(v, 0);
  EXPECT_THROW(ActivationMap(g, Tensor({4, 3, 2})), std::exception);
}

TEST(Hotspot, MatchesIndependentChannelLoop) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 5; ++trial) {
    auto model = RandomModel(trial);
    HotspotExtractor ex(model.get());
    const RgbImage img = RandomImage(48, 48, rng);
    const int a = trial % 3;
    // Oracle: own graph, own backward, one channel at a time.
    const Tensor x = ex.Features(ex.Preprocess(img));
    ag::Var leaf(x, true);
    ag::Var scores = model->InactiveScores(leaf, true);
    Tensor seed(scores.shape(), 0.0);
    seed[a] = 1;
    ag::Backward(scores, &seed);
    const int d = x.dim(1), n = x.dim(2);
    Tensor oracle({n, n});
    for (int k = 0; k < d; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          oracle.at(i, j) += std::max(0.0, leaf.grad().at(0, k, i, j) * x.at(0, k, i, j));
    const Tensor got = ex.Trace(x, a).map;
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], oracle[i], 1e-5);
    const auto all = ex.RawMaps(x, GradientPath::kThroughAnticipation);
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(all[a][i], oracle[i], 1e-12);
  }
}

TEST(Hotspot, LinearInGradientScale) {
  std::mt19937_64 rng(3);
  auto model = RandomModel(5);
  HotspotExtractor ex(model.get());
  const Tensor x = ex.Features(ex.Preprocess(RandomImage(48, 48, rng)));
  const Tensor m1 = ex.Trace(x, 1, GradientPath::kThroughAnticipation, 1.0).map;
  const Tensor m3 = ex.Trace(x, 1, GradientPath::kThroughAnticipation, 3.0).map;
  for (std::size_t i = 0; i < m1.size(); ++i) EXPECT_NEAR(m3[i], 3 * m1[i], 1e-12);
}

TEST(Hotspot, AblationPathDiffers) {
  std::mt19937_64 rng(4);
  auto model = RandomModel(6);
  HotspotExtractor ex(model.get());
  const RgbImage img = RandomImage(48, 48, rng);
  const Tensor through = ex.HotspotMap(img, 0), at = ex.HotspotMap(img, 0, GradientPath::kAtAnticipated);
  double diff = 0;
  for (std::size_t i = 0; i < at.size(); ++i) diff += std::abs(at[i] - through[i]);
  EXPECT_GT(diff, 0);
  EXPECT_EQ(ParseGradientPath(GradientPathName(GradientPath::kAtAnticipated)),
            GradientPath::kAtAnticipated);
  EXPECT_THROW(ParseGradientPath("sideways"), std::exception);
  EXPECT_THROW(ex.HotspotMap(img, 3), HotspotError);
}

TEST(Hotspot, StackShapesAndNonNegativity) {
  std::mt19937_64 rng(5);
  auto model = RandomModel(7);
  HotspotExtractor ex(model.get());
  const auto stack = ex.Stack(RandomImage(60, 80, rng), "img");
  ASSERT_EQ(stack.size(), 3);
  for (const auto& m : stack.maps) {
    EXPECT_EQ(m.shape(), (Shape{60, 80}));
    for (double v : m.values()) EXPECT_GE(v, 0);
  }
  EXPECT_EQ(stack.raw[0].shape(), (Shape{6, 6}));
  EXPECT_THROW(HotspotExtractor(nullptr), HotspotError);
}

double Pearson(const Tensor& a, const Tensor& b) {
  const double n = a.size();
  double ma = a.Sum() / n, mb = b.Sum() / n, sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

TEST(Upsample, RoundTripCorrelatesWithRaw) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor raw = RandomTensor({8, 8}, rng, 0, 1);
    const Tensor up = UpsampleToSource(raw, 64, 64);
    Tensor down({8, 8});
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x) down.at(y / 8, x / 8) += up.at(y, x) / 64;
    EXPECT_GT(Pearson(raw, down), 0.9);
  }
  const Tensor wide = UpsampleToSource(Tensor({4, 4}, 1.0), 8, 16);
  EXPECT_EQ(wide.at(3, 0), 0);   // outside the centre square
  EXPECT_GT(wide.at(3, 8), 0);
}

TEST(Hotspot, VideoGivesOneStackPerFrame) {
  std::mt19937_64 rng(7);
  auto model = RandomModel(8);
  HotspotExtractor ex(model.get());
  data::VideoClip clip;
  const RgbImage img = RandomImage(48, 48, rng);
  clip.frames = {img, img, img};
  const auto stacks = ex.Video(clip);
  ASSERT_EQ(stacks.size(), 3u);
  for (int a = 0; a < 3; ++a) {
    EXPECT_EQ(stacks[0].maps[a].storage(), stacks[2].maps[a].storage());
    EXPECT_EQ(stacks[1].raw[a].storage(), stacks[2].raw[a].storage());
  }
}

TEST(Export, FilesPerActionAndRawRoundTrip) {
  std::mt19937_64 rng(8);
  auto model = RandomModel(9);
  HotspotExtractor ex(model.get());
  const RgbImage img = RandomImage(48, 48, rng);
  const auto stack = ex.Stack(img, "cup");
  TempDir dir;
  const auto files = ExportStack(stack, model->actions(), img, dir.path());
  EXPECT_EQ(files.pngs.size(), 3u);
  EXPECT_EQ(files.raws.size(), 3u);
  EXPECT_TRUE(std::filesystem::exists(files.overlay));
  int pngs = 0, bins = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir.path())) {
    pngs += e.path().extension() == ".png";
    bins += e.path().extension() == ".bin";
  }
  EXPECT_EQ(pngs, 3 + 1);
  EXPECT_EQ(bins, 3);
  const Tensor back = LoadRawMap(files.raws[1], 48, 48);
  for (std::size_t i = 0; i < back.size(); ++i)
    EXPECT_EQ(back[i], static_cast<double>(static_cast<float>(stack.maps[1][i])));
  const auto side = nlohmann::json::parse(std::ifstream(files.sidecars[1]));
  EXPECT_EQ(side["action"], "rotate");
  EXPECT_EQ(side["image_id"], "cup");
  EXPECT_EQ(side["shape"], nlohmann::json::array({48, 48}));
  const auto overlay = LoadRgb(files.overlay);
  EXPECT_EQ(overlay.height, 48);
  EXPECT_EQ(ActionColor(0), (std::array<std::uint8_t, 3>{255, 0, 0}));
  EXPECT_EQ(ActionColor(2), (std::array<std::uint8_t, 3>{0, 0, 255}));
}

TEST(Export, SynthPngSheetUsesSixteenBits) {
  const auto inst = synth::GenerateInstance(synth::SynthConfig{}, 0);
  TempDir dir;
  SaveGray16Png(inst.gt, dir / "gt.png");
  const Tensor back = LoadGray16Png(dir / "gt.png");
  double mx = 0;
  for (double v : inst.gt.values()) mx = std::max(mx, v);
  for (std::size_t i = 0; i < back.size(); ++i) EXPECT_NEAR(back[i] / 65535, inst.gt[i] / mx, 1.0 / 65535);
}

}  // namespace
}  // namespace hotspots::hotspot
