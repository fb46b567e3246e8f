#include <gtest/gtest.h>

#include "hotspots/data/dataset.h"
#include "hotspots/synth/synthbench.h"
#include "test_util.h"

namespace hotspots::synth {
namespace {

using hotspots::testing::TempDir;

SynthConfig Small() {
  SynthConfig c;
  c.objects_per_action = 3;
  c.clips_per_object = 10;
  return c;
}

TEST(Synth, CountsAndNormalizedGroundTruth) {
  const auto all = Generate(Small());
  ASSERT_EQ(all.size(), 60u);
  int test = 0;
  for (const auto& s : all) {
    EXPECT_NEAR(s.gt.Sum(), 1.0, 1e-9);
    EXPECT_EQ(static_cast<int>(s.frames.size()), 8);
    test += s.split == "test";
  }
  EXPECT_EQ(test, 6 * 3);  // round(10 * 0.25) per object
}

TEST(Synth, DeterministicPerIndex) {
  const SynthConfig c = Small();
  const auto a = GenerateInstance(c, 17), b = GenerateInstance(c, 17);
  for (std::size_t t = 0; t < a.frames.size(); ++t)
    EXPECT_EQ(a.frames[t].image.pixels, b.frames[t].image.pixels);
  EXPECT_EQ(a.inactive.image.pixels, b.inactive.image.pixels);
  SynthConfig other = c;
  other.seed = 1;
  EXPECT_NE(GenerateInstance(other, 17).inactive.image.pixels, a.inactive.image.pixels);
}

TEST(Synth, SceneInvariants) {
  SynthConfig c = Small();
  c.actions = {"press", "rotate", "pull", "lift"};
  for (const auto& s : Generate(c)) {
    const auto v = s.gt.values();
    const auto peak = std::max_element(v.begin(), v.end()) - v.begin();
    EXPECT_GT(s.inactive.region[peak], 0) << s.id;  // GT argmax inside the region
    for (std::size_t i = 0; i < s.gt.size(); ++i) {
      EXPECT_EQ(s.inactive.actor[i], 0);
      if (s.inactive.region[i] > 0) EXPECT_GT(s.inactive.object[i], 0);
    }
    EXPECT_GT(s.contact_frame, 1);
    EXPECT_LT(s.contact_frame, c.clip_length);
    bool touched = false;
    const auto& contact = s.frames[s.contact_frame - 1];
    for (std::size_t i = 0; i < contact.actor.size(); ++i) touched |= contact.actor[i] > 0;
    EXPECT_TRUE(touched);
  }
}

TEST(Synth, ContactFrameSpansMiddleThird) {
  SynthConfig c = Small();
  c.clip_length = 12;
  int lo = 100, hi = 0;
  for (const auto& s : Generate(c)) {
    lo = std::min(lo, s.contact_frame);
    hi = std::max(hi, s.contact_frame);
  }
  EXPECT_GE(lo, 4);
  EXPECT_LE(hi, 8);
  EXPECT_LT(lo, hi);
}

TEST(Synth, ConfigValidation) {
  SynthConfig c;
  c.clip_length = 3;
  EXPECT_THROW(c.Validate(), SynthError);
  c = {};
  c.actions = {"press"};
  EXPECT_THROW(c.Validate(), SynthError);
  c = {};
  c.noise = -1;
  EXPECT_THROW(c.Validate(), SynthError);
  c = {};
  c.actions = {"a", "b", "c", "d", "e"};
  EXPECT_THROW(c.Validate(), SynthError);
  auto j = SynthConfig{}.ToJson();
  EXPECT_EQ(SynthConfig::FromJson(j).ToJson(), j);
  j["colour"] = "red";
  EXPECT_THROW(SynthConfig::FromJson(j), SynthError);
}

TEST(Synth, WrittenDatasetLoadsBack) {
  SynthConfig c = Small();
  c.objects_per_action = 1;
  c.clips_per_object = 4;
  TempDir dir;
  const auto written = WriteDataset(c, dir.path());
  const auto loaded = data::LoadManifest(dir / "manifest.jsonl");
  EXPECT_TRUE(written.SameContent(loaded));
  EXPECT_EQ(loaded.instances.size(), 8u);
  EXPECT_EQ(loaded.instances[0].frame_files.size(), 8u);
  EXPECT_TRUE(std::filesystem::exists(dir / "gt.jsonl"));
  EXPECT_TRUE(std::filesystem::exists(dir / "synth_config.json"));
  const auto gt = data::LoadGtSidecar(dir / "gt.jsonl");
  EXPECT_EQ(gt.size(), 8u);
  const auto inst = GenerateInstance(c, 0);
  const auto png = LoadRgb(loaded.instances[0].inactive_image);
  EXPECT_EQ(png.pixels, inst.inactive.image.pixels);
}

}  // namespace
}  // namespace hotspots::synth
