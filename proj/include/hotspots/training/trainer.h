#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hotspots/data/dataset.h"
#include "hotspots/training/model.h"

namespace hotspots::training {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Instance converted once to network-ready tensors.
struct PreparedInstance {
  std::string id;
  Tensor frames;    // [T, 3, S, S]
  Tensor inactive;  // [3, S, S]
  std::optional<Tensor> negative;  // [3, S, S], manifest-provided
  int action = 0;
  std::optional<int> object;

  int length() const { return frames.dim(0); }
};

PreparedInstance Prepare(const data::TrainInstance& instance);

struct LossBreakdown {
  double cls = 0.0;
  double ant = 0.0;
  double aux = 0.0;
  double total = 0.0;
};

struct BatchLoss {
  Var total;  // differentiable weighted sum
  LossBreakdown terms;  // batch means
  std::vector<int> active_frames;  // 1-based t* per instance
  std::vector<int> predictions;    // argmax of the clip scores
};

// Combined objective over a batch. `negatives[i]` ([3, S, S]) is required for
// the triplet variant. Terms with zero weight are reported but not
// differentiated.
BatchLoss ComputeBatchLoss(Model& model, std::span<const PreparedInstance* const> batch,
                           std::span<const Tensor* const> negatives, bool training);

// Single-instance objective with inference-mode normalization.
LossBreakdown TotalLoss(Model& model, const data::TrainInstance& instance);

struct LossLogRow {
  int epoch = 0;
  long step = 0;
  double cls = 0.0, ant = 0.0, aux = 0.0, total = 0.0;
};

void WriteLossLog(const std::vector<LossLogRow>& rows, const std::filesystem::path& path);
std::string LossLogCsv(const std::vector<LossLogRow>& rows);

struct TrainResult {
  std::unique_ptr<Model> model;
  std::vector<LossLogRow> log;
  std::vector<double> epoch_accuracy;  // running train accuracy per epoch
  std::string rng_state;
  int epochs_run = 0;
};

struct TrainHooks {
  std::function<void(int epoch, double accuracy, const LossBreakdown& mean)> on_epoch;
};

// Deterministic given config.seed: shuffling, negative draws and
// initialization all derive from it.
TrainResult Train(std::span<const PreparedInstance> instances, const data::Vocab& actions,
                  const data::Vocab& objects, const TrainConfig& config,
                  const TrainHooks& hooks = {});

// Continues optimizing an existing model for `steps` passes over a fixed
// batch (used by smoke tests); returns the total loss before each step.
std::vector<double> OverfitBatch(Model& model, std::span<const PreparedInstance> batch,
                                 int steps);

double ClassificationAccuracy(Model& model, std::span<const PreparedInstance> instances);
// Predicted action of a clip (eval mode).
int PredictClip(Model& model, const PreparedInstance& instance);

}  // namespace hotspots::training
