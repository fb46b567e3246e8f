#include "hotspots/training/model.h"

namespace hotspots::training {

Model::Model(const TrainConfig& config, data::Vocab actions, data::Vocab objects)
    : config_(config),
      actions_(std::move(actions)),
      objects_(std::move(objects)),
      init_rng_(config.seed),
      encoder_(config.EncoderConfig(), init_rng_),
      aggregator_(encoder_.config().channels, config.hidden_size, init_rng_),
      classifier_(config.hidden_size, actions_.size(), init_rng_),
      anticipation_(encoder_.config().channels, init_rng_) {
  if (actions_.size() < 1) throw ConfigError("model needs at least one action");
  encoder_.Collect("encoder", &params_);
  aggregator_.Collect("aggregator", &params_);
  classifier_.Collect("classifier", &params_);
  anticipation_.Collect("anticipation", &params_);
}

Var Model::Encode(const Tensor& images, bool training) const {
  return encoder_.Forward(Var(images), training);
}

Var Model::ScoresFromPooled(const Var& pooled) const {
  const auto state = aggregator_.Step(pooled, aggregator_.ZeroState(pooled.dim(0)));
  return classifier_.Forward(state.h);
}

Var Model::InactiveScores(const Var& features, bool through_anticipation) {
  Var x = through_anticipation ? anticipation_.Forward(features, false) : features;
  return ScoresFromPooled(Pool(x));
}

std::vector<Var> Model::ParameterVars() const {
  std::vector<Var> out;
  for (const auto& p : params_.params) out.push_back(p.var);
  return out;
}

std::vector<std::string> Model::GroupNames() {
  return {"encoder", "aggregator", "classifier", "anticipation"};
}

std::unique_ptr<Model> MakeModel(const TrainConfig& config, const data::Vocab& actions,
                                 const data::Vocab& objects) {
  config.Validate();
  return std::make_unique<Model>(config, actions, objects);
}

}  // namespace hotspots::training
