#pragma once

#include <memory>
#include <random>
#include <vector>

#include "hotspots/anticipation/anticipation.h"
#include "hotspots/data/vocab.h"
#include "hotspots/encoder/encoder.h"
#include "hotspots/temporal/temporal.h"
#include "hotspots/training/config.h"

namespace hotspots::training {

using ag::Var;

// Encoder, aggregator, classifier and anticipation network sharing one
// parameter list. Owned through unique_ptr: parameter and buffer handles
// point into the object, so it never moves after construction.
class Model {
 public:
  Model(const TrainConfig& config, data::Vocab actions, data::Vocab objects);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  // images [N, 3, S, S] -> features [N, d, n, n].
  Var Encode(const Tensor& images, bool training = false) const;
  Var Pool(const Var& features) const { return ag::L2Pool(features, encoder::kL2PoolEps); }
  Var Anticipate(const Var& features, bool training = false) {
    return anticipation_.Forward(features, training);
  }
  // Scores after a single aggregator step from the zero state on pooled
  // features [B, d].
  Var ScoresFromPooled(const Var& pooled) const;
  // Inactive-image scores from encoder features x_I. With
  // `through_anticipation` the pooled input is P(F_ant(x_I)), otherwise P(x_I).
  Var InactiveScores(const Var& features, bool through_anticipation = true);

  const encoder::Encoder& encoder() const { return encoder_; }
  const temporal::Aggregator& aggregator() const { return aggregator_; }
  const temporal::Classifier& classifier() const { return classifier_; }
  anticipation::AnticipationNet& anticipation_net() { return anticipation_; }

  const TrainConfig& config() const { return config_; }
  TrainConfig& mutable_config() { return config_; }
  const data::Vocab& actions() const { return actions_; }
  const data::Vocab& objects() const { return objects_; }
  int num_actions() const { return actions_.size(); }
  int input_size() const { return encoder_.config().input_size; }

  nn::ParameterList& parameters() { return params_; }
  std::vector<Var> ParameterVars() const;
  // Parameter names grouped by sub-network prefix (encoder, aggregator, ...).
  static std::vector<std::string> GroupNames();

 private:
  TrainConfig config_;
  data::Vocab actions_, objects_;
  std::mt19937_64 init_rng_;
  encoder::Encoder encoder_;
  temporal::Aggregator aggregator_;
  temporal::Classifier classifier_;
  anticipation::AnticipationNet anticipation_;
  nn::ParameterList params_;
};

std::unique_ptr<Model> MakeModel(const TrainConfig& config, const data::Vocab& actions,
                                 const data::Vocab& objects);

}  // namespace hotspots::training
