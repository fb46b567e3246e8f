// Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned below.
// Exit status is non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hotspots/cli/pipeline.h"
#include "hotspots/eval/baselines.h"
#include "hotspots/eval/metrics.h"
#include "hotspots/hotspot/hotspot.h"
#include "hotspots/synth/synthbench.h"
#include "hotspots/temporal/temporal.h"
#include "hotspots/training/checkpoint.h"
#include "hotspots/training/trainer.h"
#include "test_util.h"

namespace hotspots {
namespace {

namespace fs = std::filesystem;
using ag::Var;
using hotspots::testing::RandomTensor;
using hotspots::testing::TempDir;

constexpr double kGradRelTol = 1e-4;
constexpr double kGradFdStep = 1e-5;
constexpr double kGradRelFloor = 1e-6;
constexpr double kMinProbeActivation = 0.1;
constexpr int kGradProbes = 100;
constexpr double kMapOracleTol = 1e-5;
constexpr double kMetricTol = 1e-9;
constexpr double kMinTrainAccuracy = 0.95;
constexpr double kAblationMargin = 0.01;
constexpr double kReductionTol = 1e-6;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string Fmt(const char* fmt, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, fmt, a, b, c, d);
  return buf;
}

RgbImage RandomImage(int s, std::mt19937_64& rng) {
  RgbImage img(s, s);
  std::uniform_int_distribution<int> u(0, 255);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(u(rng));
  return img;
}

std::unique_ptr<training::Model> DeskModel(std::uint64_t seed, int actions = 2) {
  training::TrainConfig c = training::TrainConfig::Desk();
  c.seed = seed;
  std::vector<std::string> labels;
  for (int a = 0; a < actions; ++a) labels.push_back("a" + std::to_string(a));
  return training::MakeModel(c, data::Vocab(labels), data::Vocab({"o"}));
}

double RelError(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max({std::abs(analytic), std::abs(numeric), kGradRelFloor});
}

// Random indices of `x` whose magnitude is at least kMinProbeActivation.
std::vector<std::size_t> Probes(const Tensor& x, int count, std::mt19937_64& rng) {
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (std::abs(x[i]) >= kMinProbeActivation) eligible.push_back(i);
  std::shuffle(eligible.begin(), eligible.end(), rng);
  eligible.resize(std::min<std::size_t>(eligible.size(), count));
  return eligible;
}

Outcome GradientCorrectness() {
  std::mt19937_64 rng(101);
  double worst_pool = 0, worst_path = 0;
  int pool_probes = 0, path_probes = 0;

  // L2 pooling on its own: weighted sum of pooled channels.
  for (int trial = 0; trial < 4; ++trial) {
    Tensor x = RandomTensor({1, 32, 8, 8}, rng, -1.5, 1.5);
    const Tensor w = RandomTensor({1, 32}, rng);
    auto objective = [&](const Tensor& in) {
      ag::NoGradGuard guard;
      const Tensor p = ag::L2Pool(Var(in), encoder::kL2PoolEps).value();
      double s = 0;
      for (std::size_t i = 0; i < p.size(); ++i) s += w[i] * p[i];
      return s;
    };
    Var leaf(x, true);
    ag::Backward(ag::L2Pool(leaf, encoder::kL2PoolEps), &w);
    for (std::size_t i : Probes(x, kGradProbes / 4, rng)) {
      Tensor plus = x, minus = x;
      plus[i] += kGradFdStep;
      minus[i] -= kGradFdStep;
      const double numeric = (objective(plus) - objective(minus)) / (2 * kGradFdStep);
      worst_pool = std::max(worst_pool, RelError(leaf.grad()[i], numeric));
      ++pool_probes;
    }
  }

  // Score of one action through anticipation net, pooling, aggregator and
  // classifier, differentiated with respect to the encoder output.
  for (int trial = 0; trial < 5; ++trial) {
    auto model = DeskModel(200 + trial);
    hotspot::HotspotExtractor ex(model.get());
    const Tensor x = ex.Features(ex.Preprocess(RandomImage(64, rng)));
    const int a = trial % 2;
    auto score = [&](const Tensor& in) {
      ag::NoGradGuard guard;
      return model->InactiveScores(Var(in), true).value()[a];
    };
    const Tensor grad = ex.Trace(x, a).grad;
    for (std::size_t i : Probes(x, kGradProbes / 5, rng)) {
      Tensor plus = x, minus = x;
      plus[i] += kGradFdStep;
      minus[i] -= kGradFdStep;
      const double numeric = (score(plus) - score(minus)) / (2 * kGradFdStep);
      worst_path = std::max(worst_path, RelError(grad[i], numeric));
      ++path_probes;
    }
  }
  Outcome o;
  o.pass = pool_probes >= kGradProbes && path_probes >= kGradProbes &&
           worst_pool <= kGradRelTol && worst_path <= kGradRelTol;
  o.detail = Fmt("l2_pool %.0f probes max rel err %.2e; hotspot path %.0f probes max rel err %.2e",
                 pool_probes, worst_pool, path_probes, worst_path);
  o.detail += Fmt(" (tol %.0e)", kGradRelTol);
  return o;
}

Outcome ActivationMapOracle() {
  std::mt19937_64 rng(102);
  double worst = 0;
  int models = 0;
  for (int trial = 0; trial < 50; ++trial, ++models) {
    auto model = DeskModel(300 + trial, 3);
    hotspot::HotspotExtractor ex(model.get());
    const Tensor x = ex.Features(ex.Preprocess(RandomImage(64, rng)));
    const int a = trial % 3;
    // Brute force: fresh graph and backward, then a loop over channels and cells.
    Var leaf(x, true);
    const Var scores = model->InactiveScores(leaf, true);
    Tensor seed(scores.shape(), 0.0);
    seed[a] = 1;
    ag::Backward(scores, &seed);
    const int d = x.dim(1), n = x.dim(2);
    Tensor oracle({n, n});
    for (int k = 0; k < d; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          oracle.at(i, j) += std::max(0.0, leaf.grad().at(0, k, i, j) * x.at(0, k, i, j));
    const Tensor one = ex.Trace(x, a).map;
    const Tensor all = ex.RawMaps(x, hotspot::GradientPath::kThroughAnticipation)[a];
    for (std::size_t i = 0; i < oracle.size(); ++i)
      worst = std::max({worst, std::abs(one[i] - oracle[i]), std::abs(all[i] - oracle[i])});
  }
  return {worst <= kMapOracleTol,
          Fmt("%.0f random models, max abs diff %.2e (tol %.0e)", models, worst, kMapOracleTol)};
}

Outcome ActiveFrameOracle() {
  std::mt19937_64 rng(103);
  std::uniform_int_distribution<int> length(1, 32);
  std::uniform_real_distribution<double> feature(0.0, 2.0);
  int agree = 0, total = 0;
  for (int trial = 0; trial < 200; ++trial, ++total) {
    temporal::Aggregator agg(6, 8, rng);
    temporal::Classifier cls(8, 4, rng);
    const int t_len = length(rng);
    std::vector<encoder::PooledFeature> seq(t_len);
    for (auto& g : seq)
      for (int k = 0; k < 6; ++k) g.values.push_back(feature(rng));
    const int a = trial % 4;
    int best = 1;
    double best_loss = INFINITY;
    for (int t = 1; t <= t_len; ++t) {
      const double l =
          temporal::ClassificationLoss(cls.Classify(agg.Aggregate(std::span(seq).first(t))), a);
      if (l < best_loss) best_loss = l, best = t;
    }
    agree += temporal::SelectActiveFrame(agg, cls, seq, a) == best;
  }
  return {agree == total, Fmt("%.0f/%.0f sequences match exhaustive enumeration", agree, total)};
}

double PairwiseAuc(const Tensor& pred, const Tensor& gt) {
  double mx = 0;
  for (double g : gt.values()) mx = std::max(mx, g);
  double wins = 0;
  long pairs = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] / mx < 0.5) continue;
    for (std::size_t j = 0; j < gt.size(); ++j) {
      if (gt[j] / mx >= 0.5) continue;
      wins += pred[i] > pred[j] ? 1.0 : pred[i] == pred[j] ? 0.5 : 0.0;
      ++pairs;
    }
  }
  return wins / pairs;
}

Outcome MetricOracles() {
  std::mt19937_64 rng(104);
  std::uniform_int_distribution<int> side(1, 8), levels(0, 5);
  double worst_auc = 0;
  int grids = 0;
  while (grids < 100) {
    const int h = side(rng), w = side(rng);
    if (h * w < 2) continue;
    Tensor pred({h, w}), gt = RandomTensor({h, w}, rng, 0, 1);
    for (double& v : pred.storage()) v = levels(rng);
    gt[0] = 1.0;  // at least one positive and one negative pixel
    gt[1] = 0.0;
    worst_auc = std::max(worst_auc, std::abs(eval::AucJ(pred, gt) - PairwiseAuc(pred, gt)));
    ++grids;
  }
  const double kld = eval::Kld(Tensor({1, 2}, {0.5, 0.5}), Tensor({1, 2}, {1, 0}));
  const double sim = eval::Sim(Tensor({1, 2}, {0.7, 0.3}), Tensor({1, 2}, {0.5, 0.5}));
  const Tensor g = RandomTensor({6, 7}, rng, 0.05, 1);
  const double id_kld = eval::Kld(g, g), id_sim = eval::Sim(g, g), id_auc = eval::AucJ(g, g);
  const bool pass = worst_auc <= kMetricTol && std::abs(kld - std::log(2.0)) <= kMetricTol &&
                    std::abs(sim - 0.8) <= kMetricTol && std::abs(id_kld) <= kMetricTol &&
                    std::abs(id_sim - 1) <= kMetricTol && std::abs(id_auc - 1) <= kMetricTol;
  std::string detail = Fmt("AUC-J vs pairwise on %.0f grids max diff %.1e; KLD %.12f (ln 2); SIM %.12f",
                           grids, worst_auc, kld, sim);
  detail += Fmt("; identity (%.1e, %.12f, %.12f)", id_kld, id_sim, id_auc);
  return {pass, detail};
}

// Shared synthetic benchmark: 2 actions x 4 objects x 40 clips, 64x64.
struct Bench {
  TempDir dir;
  synth::SynthConfig synth;
  data::Dataset dataset;

  Bench() {
    synth.seed = 0;
    dataset = synth::WriteDataset(synth, dir / "synth");
    dataset = data::LoadManifest(dir / "synth" / "manifest.jsonl");
  }

  training::TrainConfig Config() const {
    training::TrainConfig c = training::TrainConfig::Desk();
    c.manifest = (dir / "synth" / "manifest.jsonl").string();
    return c;
  }
};

struct TrainedRun {
  data::SplitSpec split;
  std::vector<training::PreparedInstance> train;
  std::vector<eval::EvalImage> test;
  training::TrainResult result;
};

TrainedRun TrainOn(const Bench& bench, const training::TrainConfig& config, bool novel) {
  TrainedRun run;
  run.split = cli::ResolveSplit(bench.dataset, config,
                                novel ? cli::SplitMode::kNovel : cli::SplitMode::kStandard);
  run.train = cli::PrepareInstances(bench.dataset, run.split.train_ids, config.input_size);
  run.test = eval::LoadEvalImages(bench.dataset, run.split.test_ids,
                                  bench.dir / "synth" / "gt.jsonl");
  run.result = training::Train(run.train, bench.dataset.actions, bench.dataset.objects, config);
  return run;
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Experiment {
  Bench bench;
  TrainedRun ours, baseline;
  double train_accuracy = 0;
  eval::MetricsReport through, at, center, gradcam;
};

Outcome SyntheticEndToEnd(Experiment* ex) {
  const auto config = ex->bench.Config();
  ex->ours = TrainOn(ex->bench, config, false);
  auto base_config = config;
  base_config.lambda_ant = 0;
  base_config.lambda_aux = 0;
  ex->baseline = TrainOn(ex->bench, base_config, false);
  ex->train_accuracy = training::ClassificationAccuracy(*ex->ours.result.model, ex->ours.train);

  cli::MethodResources res{ex->ours.result.model.get(), ex->baseline.result.model.get(), nullptr,
                           config.seed};
  ex->through = cli::RunMethod("hotspots", "standard", ex->ours.test, res);
  ex->at = cli::RunMethod("hotspots-at-anticipated", "standard", ex->ours.test, res);
  ex->center = cli::RunMethod("center-bias", "standard", ex->ours.test, res);
  ex->gradcam = cli::RunMethod("gradcam", "standard", ex->ours.test, res);

  // Same seed, short schedule, twice: logs and checkpoints must agree bitwise.
  auto short_config = config;
  short_config.epochs = 2;
  const auto r1 = TrainOn(ex->bench, short_config, false);
  const auto r2 = TrainOn(ex->bench, short_config, false);
  training::SaveCheckpoint(*r1.result.model, ex->bench.dir / "det1");
  training::SaveCheckpoint(*r2.result.model, ex->bench.dir / "det2");
  const bool deterministic =
      training::LossLogCsv(r1.result.log) == training::LossLogCsv(r2.result.log) &&
      Slurp(ex->bench.dir / "det1") == Slurp(ex->bench.dir / "det2");

  const double ours = ex->through.mean_auc_j;
  Outcome o;
  o.pass = ex->train_accuracy >= kMinTrainAccuracy && ours > ex->center.mean_auc_j &&
           ours > ex->gradcam.mean_auc_j && deterministic;
  o.detail = Fmt("train acc %.3f (>= %.2f); test AUC-J ours %.4f, center bias %.4f", ex->train_accuracy,
                 kMinTrainAccuracy, ours, ex->center.mean_auc_j);
  o.detail += Fmt(", gradcam %.4f (%.0f pairs)", ex->gradcam.mean_auc_j, ex->through.count());
  o.detail += deterministic ? "; reruns bitwise identical" : "; reruns DIFFER";
  return o;
}

Outcome NovelObjects(const Bench& bench) {
  auto config = bench.Config();
  const auto& objects = bench.dataset.objects;
  for (int a = 0; a < bench.synth.num_objects() / bench.synth.objects_per_action; ++a)
    config.unfamiliar_objects.push_back(
        objects.Label(synth::ObjectIndex(bench.synth, a, bench.synth.objects_per_action - 1)));
  const auto run = TrainOn(bench, config, true);
  cli::MethodResources res{run.result.model.get(), nullptr, nullptr, config.seed};
  const auto ours = cli::RunMethod("hotspots", "novel", run.test, res);
  const auto center = cli::RunMethod("center-bias", "novel", run.test, res);
  std::string held;
  for (const auto& l : config.unfamiliar_objects) held += (held.empty() ? "" : ",") + l;
  Outcome o;
  o.pass = ours.mean_auc_j > center.mean_auc_j;
  o.detail = Fmt("held-out objects AUC-J ours %.4f vs center bias %.4f (%.0f pairs, %.0f train clips)",
                 ours.mean_auc_j, center.mean_auc_j, ours.count(), run.train.size());
  o.detail += "; held out " + held;
  return o;
}

Outcome AblationPath(const Experiment& ex) {
  const double through = ex.through.mean_auc_j, at = ex.at.mean_auc_j;
  // The default extraction path must be the through-anticipation one.
  hotspot::HotspotExtractor extractor(ex.ours.result.model.get());
  const auto& img = ex.ours.test.front().image;
  const bool default_is_through =
      extractor.HotspotMap(img, 0) ==
          extractor.HotspotMap(img, 0, hotspot::GradientPath::kThroughAnticipation) &&
      hotspot::ParseGradientPath("through") == hotspot::GradientPath::kThroughAnticipation;
  Outcome o;
  o.pass = std::abs(through - at) > kAblationMargin && default_is_through;
  o.detail = Fmt("AUC-J through %.4f vs at-anticipated %.4f, |diff| %.4f (> %.2f)", through, at,
                 std::abs(through - at), kAblationMargin);
  o.detail += through > at ? "; through-path higher" : "; at-anticipated higher";
  return o;
}

Outcome ReductionInvariant(Experiment& ex) {
  const auto& log = ex.baseline.result.log;
  double worst = 0;
  for (const auto& row : log) worst = std::max(worst, std::abs(row.total - row.cls));
  // Every batch of the training split, recomputed directly.
  auto& model = *ex.baseline.result.model;
  const int b = model.config().batch_size;
  int batches = 0;
  for (std::size_t i = 0; i < ex.baseline.train.size(); i += b, ++batches) {
    std::vector<const training::PreparedInstance*> batch;
    for (std::size_t j = i; j < std::min(ex.baseline.train.size(), i + b); ++j)
      batch.push_back(&ex.baseline.train[j]);
    ag::NoGradGuard guard;
    const auto loss = training::ComputeBatchLoss(model, batch, {}, false);
    worst = std::max(worst, std::abs(loss.terms.total - loss.terms.cls));
  }
  // Trunk contract: same encoder geometry as the full model, weights load
  // into it, and Grad-CAM runs on it.
  const auto& a = model.encoder().config();
  const auto& o = ex.ours.result.model->encoder().config();
  bool compatible = a.input_size == o.input_size && a.channels == o.channels &&
                    a.output_size == o.output_size;
  try {
    training::SaveCheckpoint(model, ex.bench.dir / "gradcam_ckpt");
    auto fresh = training::MakeModel(ex.bench.Config(), ex.bench.dataset.actions,
                                     ex.bench.dataset.objects);
    training::LoadEncoderWeights(*fresh, ex.bench.dir / "gradcam_ckpt");
    eval::GradCam gc(&model);
    const auto& img = ex.ours.test.front().image;
    compatible = compatible && gc.Map(img, 0).shape() == (Shape{img.height, img.width});
  } catch (const std::exception&) {
    compatible = false;
  }
  Outcome out;
  out.pass = worst <= kReductionTol && compatible && !log.empty();
  out.detail = Fmt("max |total - L_cls| %.1e over %.0f logged steps and %.0f recomputed batches",
                   worst, log.size(), batches);
  out.detail += compatible ? "; trunk loads into the full model and feeds Grad-CAM"
                           : "; trunk INCOMPATIBLE";
  return out;
}

Outcome Reproducibility(const Bench& bench) {
  auto config = bench.Config();
  config.epochs = 2;
  // Subset of the benchmark keeps the two full runs short.
  auto split = cli::ResolveSplit(bench.dataset, config, cli::SplitMode::kStandard);
  split.train_ids.resize(std::min<std::size_t>(split.train_ids.size(), 64));
  split.test_ids.resize(std::min<std::size_t>(split.test_ids.size(), 16));
  const auto test = eval::LoadEvalImages(bench.dataset, split.test_ids, bench.dir / "synth" / "gt.jsonl");
  std::string logs[2], metrics[2];
  std::unique_ptr<training::Model> models[2];
  for (int r = 0; r < 2; ++r) {
    const auto train = cli::PrepareInstances(bench.dataset, split.train_ids, config.input_size);
    auto result = training::Train(train, bench.dataset.actions, bench.dataset.objects, config);
    logs[r] = training::LossLogCsv(result.log);
    cli::MethodResources res{result.model.get(), nullptr, nullptr, config.seed};
    metrics[r] = cli::RunMethod("hotspots", "standard", test, res).RowsCsv(bench.dataset.actions);
    models[r] = std::move(result.model);
  }
  training::SaveCheckpoint(*models[0], bench.dir / "repro_ckpt");
  auto loaded = training::LoadCheckpoint(bench.dir / "repro_ckpt").model;
  bool bitwise = true;
  for (const auto& img : test) {
    hotspot::HotspotExtractor e1(models[0].get()), e2(loaded.get());
    const Tensor in = e1.Preprocess(img.image);
    bitwise = bitwise && e1.Features(in) == e2.Features(in) &&
              e1.InactiveActionScores(img.image) == e2.InactiveActionScores(img.image) &&
              e1.Stack(img.image, img.id).raw == e2.Stack(img.image, img.id).raw;
  }
  const bool same_logs = logs[0] == logs[1], same_metrics = metrics[0] == metrics[1];
  Outcome o;
  o.pass = same_logs && same_metrics && bitwise;
  o.detail = std::string("loss logs ") + (same_logs ? "identical" : "DIFFER") + ", metrics CSVs " +
             (same_metrics ? "identical" : "DIFFER") + ", checkpoint round-trip forward " +
             (bitwise ? "bitwise equal" : "NOT bitwise equal");
  return o;
}

}  // namespace
}  // namespace hotspots

// Optional arguments select criteria by number; default runs all nine.
int main(int argc, char** argv) {
  using namespace hotspots;
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
  auto wanted = [&](int id) {
    return selected.empty() || std::find(selected.begin(), selected.end(), id) != selected.end();
  };
  int failures = 0, ran = 0;
  auto run = [&](int id, const char* name, const std::function<Outcome()>& f) {
    if (!wanted(id)) return;
    ++ran;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failures;
    std::printf("%s criterion %d (%s): %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", id, name,
                o.detail.c_str(), s);
    std::fflush(stdout);
  };
  run(1, "gradient correctness", GradientCorrectness);
  run(2, "activation-map oracle", ActivationMapOracle);
  run(3, "active-frame oracle", ActiveFrameOracle);
  run(4, "metric oracles", MetricOracles);
  std::unique_ptr<Experiment> ex_holder;
  if (wanted(5) || wanted(6) || wanted(7) || wanted(8) || wanted(9))
    ex_holder = std::make_unique<Experiment>();
  Experiment& ex = *ex_holder;
  bool trained = false;
  run(5, "synthetic end-to-end", [&] {
    auto o = SyntheticEndToEnd(&ex);
    trained = true;
    return o;
  });
  run(6, "novel-object generalization", [&] { return NovelObjects(ex.bench); });
  run(7, "gradient-path ablation", [&] {
    if (!trained) return Outcome{false, "needs the criterion 5 models"};
    return AblationPath(ex);
  });
  run(8, "reduction invariant", [&] {
    if (!trained) return Outcome{false, "needs the criterion 5 models"};
    return ReductionInvariant(ex);
  });
  run(9, "reproducibility", [&] { return Reproducibility(ex.bench); });
  std::printf("%d/%d criteria passed\n", ran - failures, ran);
  return failures == 0 ? 0 : 1;
}
