#include <gtest/gtest.h>

#include <fstream>

#include "hotspots/synth/synthbench.h"
#include "hotspots/training/checkpoint.h"
#include "hotspots/training/trainer.h"
#include "test_util.h"

namespace hotspots::training {
namespace {

using hotspots::testing::TempDir;

synth::SynthConfig TinySynth() {
  synth::SynthConfig c;
  c.height = c.width = 48;
  c.clip_length = 4;
  c.objects_per_action = 2;
  c.clips_per_object = 3;
  c.test_fraction = 0;
  return c;
}

TrainConfig TinyConfig() {
  TrainConfig c = TrainConfig::Desk();
  c.input_size = 48;
  c.feature_channels = 8;
  c.hidden_size = 12;
  c.batch_size = 4;
  c.epochs = 2;
  c.seed = 3;
  return c;
}

struct Fixture : ::testing::Test {
  synth::SynthConfig sc = TinySynth();
  std::vector<PreparedInstance> data;
  data::Vocab actions{sc.actions}, objects{synth::ObjectLabels(sc)};

  void SetUp() override {
    for (const auto& s : synth::Generate(sc)) data.push_back(Prepare(synth::ToTrainInstance(s)));
  }
  std::vector<const PreparedInstance*> Batch(int n) {
    std::vector<const PreparedInstance*> b;
    for (int i = 0; i < n; ++i) b.push_back(&data[i * data.size() / n]);
    return b;
  }
};

TEST(Config, DefaultsAndValidation) {
  const TrainConfig c;
  EXPECT_EQ(c.lambda_cls, 1.0);
  EXPECT_EQ(c.lambda_ant, 0.1);
  EXPECT_EQ(c.lambda_aux, 1.0);
  EXPECT_EQ(c.learning_rate, 1e-4);
  EXPECT_EQ(c.weight_decay, 5e-4);
  EXPECT_EQ(c.chunk_length, 16);
  EXPECT_EQ(TrainConfig::Paper().batch_size, 128);
  EXPECT_EQ(TrainConfig::Paper().hidden_size, 2048);
  TrainConfig bad;
  bad.lambda_ant = -1;
  EXPECT_THROW(bad.Validate(), ConfigError);
  bad = {};
  bad.loss_variant = "cosine";
  EXPECT_THROW(bad.Validate(), ConfigError);
  bad = {};
  bad.chunk_length = 0;
  EXPECT_THROW(bad.Validate(), ConfigError);
}

TEST(Config, JsonRoundTripOverridesAndUnknownKeys) {
  TrainConfig c = TrainConfig::Desk();
  c.unfamiliar_objects = {"pan"};
  c.ApplyOverrides({"lambda_ant=0.25", "loss_variant=triplet", "epochs=3"});
  EXPECT_EQ(c.lambda_ant, 0.25);
  EXPECT_EQ(c.variant(), LossVariant::kTriplet);
  const TrainConfig back = TrainConfig::FromJson(c.ToJson());
  EXPECT_EQ(back.ToJson(), c.ToJson());
  EXPECT_EQ(c.ToJson().size(), TrainConfig::FieldNames().size());
  auto j = c.ToJson();
  j["lamda_ant"] = 1;
  EXPECT_THROW(TrainConfig::FromJson(j), ConfigError);
  EXPECT_THROW(c.ApplyOverrides({"nonsense=1"}), ConfigError);
}

TEST_F(Fixture, BreakdownResumsToTotalAndZeroWeightsReduceToCls) {
  auto model = MakeModel(TinyConfig(), actions, objects);
  const auto batch = Batch(4);
  const auto loss = ComputeBatchLoss(*model, batch, {}, false);
  const auto& t = loss.terms;
  EXPECT_NEAR(t.total, t.cls + 0.1 * t.ant + t.aux, 1e-6);
  EXPECT_NEAR(loss.total.value()[0], t.total, 1e-9);
  for (int f : loss.active_frames) {
    EXPECT_GE(f, 1);
    EXPECT_LE(f, sc.clip_length);
  }
  auto cfg = TinyConfig();
  cfg.lambda_ant = cfg.lambda_aux = 0;
  auto reduced = MakeModel(cfg, actions, objects);
  const auto r = ComputeBatchLoss(*reduced, batch, {}, false);
  EXPECT_NEAR(r.terms.total, r.terms.cls, 1e-12);
  EXPECT_NEAR(r.total.value()[0], r.terms.cls, 1e-12);
}

TEST_F(Fixture, EveryParameterGroupReceivesGradient) {
  auto model = MakeModel(TinyConfig(), actions, objects);
  const auto loss = ComputeBatchLoss(*model, Batch(4), {}, true);
  ag::Backward(loss.total);
  for (const auto& group : Model::GroupNames()) {
    double mag = 0;
    for (const auto& p : model->parameters().params)
      if (p.name.rfind(group, 0) == 0 && p.var.grad().size())
        for (double g : p.var.grad().values()) mag += std::abs(g);
    EXPECT_GT(mag, 0) << group;
  }
}

TEST_F(Fixture, TripletNeedsNegative) {
  auto cfg = TinyConfig();
  cfg.loss_variant = "triplet";
  auto model = MakeModel(cfg, actions, objects);
  data::TrainInstance inst = synth::ToTrainInstance(synth::GenerateInstance(sc, 0));
  EXPECT_THROW(TotalLoss(*model, inst), TrainingError);
  inst.negative = inst.inactive;
  inst.negative->image = synth::GenerateInstance(sc, 7).inactive.image;
  const auto t = TotalLoss(*model, inst);
  EXPECT_GE(t.ant, 0);
  EXPECT_LE(t.ant, 2.5);
}

TEST_F(Fixture, OverfitSmokeTestLowersLoss) {
  // At the full-scale learning rate; at 1e-3 the detached anticipation target
  // grows faster than a 4-clip batch lets F_ant follow.
  auto cfg = TinyConfig();
  cfg.learning_rate = 1e-4;
  auto model = MakeModel(cfg, actions, objects);
  std::vector<PreparedInstance> batch(data.begin(), data.begin() + 2);
  batch.push_back(data[data.size() - 1]);
  batch.push_back(data[data.size() - 2]);
  const auto losses = OverfitBatch(*model, batch, 50);
  ASSERT_EQ(losses.size(), 50u);
  EXPECT_LT(losses.back(), losses.front());
}

TEST_F(Fixture, TrainingIsDeterministicAndLogsEveryStep) {
  const auto a = Train(data, actions, objects, TinyConfig());
  const auto b = Train(data, actions, objects, TinyConfig());
  EXPECT_EQ(LossLogCsv(a.log), LossLogCsv(b.log));
  EXPECT_EQ(a.rng_state, b.rng_state);
  EXPECT_EQ(a.epochs_run, 2);
  EXPECT_EQ(a.log.size(), 2u * 3u);  // 12 instances / batch 4
  const std::string csv = LossLogCsv(a.log);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "epoch,step,L_cls,L_ant,L_aux,total");
  auto other = TinyConfig();
  other.seed = 4;
  EXPECT_NE(LossLogCsv(Train(data, actions, objects, other).log), csv);
}

TEST_F(Fixture, TrainRejectsEmptyInput) {
  EXPECT_THROW(Train({}, actions, objects, TinyConfig()), std::exception);
}

TEST_F(Fixture, CheckpointRoundTripIsBitwise) {
  TempDir dir;
  auto cfg = TinyConfig();
  cfg.lambda_ant = 0.3;
  auto trained = Train(data, actions, objects, cfg);
  SaveCheckpoint(*trained.model, dir / "m.ckpt", {2, trained.rng_state});
  const auto loaded = LoadCheckpoint(dir / "m.ckpt");
  EXPECT_EQ(loaded.meta.epoch, 2);
  EXPECT_EQ(loaded.meta.rng_state, trained.rng_state);
  EXPECT_EQ(loaded.model->config().lambda_ant, 0.3);
  EXPECT_EQ(loaded.model->config().ToJson(), cfg.ToJson());
  EXPECT_EQ(loaded.model->actions().labels(), actions.labels());
  ag::NoGradGuard g;
  const Tensor probe = data[0].frames;
  const Tensor a = trained.model->Encode(probe).value();
  const Tensor b = loaded.model->Encode(probe).value();
  EXPECT_EQ(a.storage(), b.storage());
  Tensor inactive = data[1].inactive.Reshaped({1, 3, 48, 48});
  EXPECT_EQ(trained.model->InactiveScores(trained.model->Encode(inactive)).value().storage(),
            loaded.model->InactiveScores(loaded.model->Encode(inactive)).value().storage());
}

TEST_F(Fixture, CheckpointCorruptionAndVersionErrors) {
  TempDir dir;
  auto model = MakeModel(TinyConfig(), actions, objects);
  SaveCheckpoint(*model, dir / "m.ckpt");
  std::string bytes;
  {
    std::ifstream in(dir / "m.ckpt", std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  std::ofstream(dir / "short.ckpt", std::ios::binary) << bytes.substr(0, bytes.size() / 2);
  EXPECT_THROW(LoadCheckpoint(dir / "short.ckpt"), CheckpointError);
  std::string flipped = bytes;
  flipped[flipped.size() - 20] ^= 0x40;
  std::ofstream(dir / "flip.ckpt", std::ios::binary) << flipped;
  EXPECT_THROW(LoadCheckpoint(dir / "flip.ckpt"), CheckpointError);
  std::string versioned = bytes;
  versioned[8] = 9;  // version field follows the 8-byte magic
  std::ofstream(dir / "v.ckpt", std::ios::binary) << versioned;
  EXPECT_THROW(LoadCheckpoint(dir / "v.ckpt"), CheckpointVersionError);
  EXPECT_THROW(LoadCheckpoint(dir / "missing.ckpt"), CheckpointError);
}

TEST_F(Fixture, EncoderWeightsTransfer) {
  TempDir dir;
  auto source = MakeModel(TinyConfig(), actions, objects);
  SaveCheckpoint(*source, dir / "m.ckpt");
  auto cfg = TinyConfig();
  cfg.seed = 99;
  auto target = MakeModel(cfg, actions, objects);
  LoadEncoderWeights(*target, dir / "m.ckpt");
  ag::NoGradGuard g;
  EXPECT_EQ(source->Encode(data[0].frames).value().storage(),
            target->Encode(data[0].frames).value().storage());
}

}  // namespace
}  // namespace hotspots::training
