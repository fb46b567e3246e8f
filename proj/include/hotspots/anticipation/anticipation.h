#pragma once

#include <random>
#include <string>

#include "hotspots/core/layers.h"
#include "hotspots/encoder/encoder.h"
#include "hotspots/temporal/temporal.h"

namespace hotspots::anticipation {

using ag::Var;
using encoder::FeatureMap;

struct TripletConfig {
  double margin = 0.5;
  bool normalize = true;
  void Validate() const;
};

// Two (3x3 conv, batch norm, ReLU) blocks mapping inactive-object features
// to hypothesized active-state features; d -> d channels, n -> n cells.
class AnticipationNet {
 public:
  AnticipationNet(int channels, std::mt19937_64& rng);

  Var Forward(const Var& x, bool training = false);
  FeatureMap Anticipate(const FeatureMap& x_inactive);
  void Collect(const std::string& prefix, nn::ParameterList* out);

  int channels() const { return channels_; }

 private:
  int channels_;
  nn::Conv2d conv1_, conv2_;
  nn::BatchNorm2d bn1_, bn2_;
};

// Graph-level losses over pooled features [B, d]; each returns [B].
Var PooledDistance(const Var& a, const Var& b);
Var TripletRows(const Var& anchor, const Var& positive, const Var& negative,
                const TripletConfig& cfg);

// ||P(anticipated) - P(active)||_2.
double AnticipationLossL2(const FeatureMap& anticipated, const FeatureMap& active);
// max(0, d(P(a), P(p)) - d(P(a), P(n)) + margin) over L2-normalized pooled
// vectors.
double AnticipationLossTriplet(const FeatureMap& anchor, const FeatureMap& positive,
                               const FeatureMap& negative, const TripletConfig& cfg);
// Cross-entropy after one aggregator step on the pooled anticipated feature.
double AuxLoss(const FeatureMap& anticipated, int a, const temporal::Aggregator& aggregator,
               const temporal::Classifier& classifier);

}  // namespace hotspots::anticipation
