#include "hotspots/anticipation/anticipation.h"

#include <stdexcept>

namespace hotspots::anticipation {

namespace {

constexpr double kDistanceEps = 1e-12;

Var AsBatch(const FeatureMap& f) {
  const Shape& s = f.values.shape();
  if (s.size() != 3) throw ShapeError("expected a [d, n, n] feature map");
  return Var(f.values.Reshaped({1, s[0], s[1], s[2]}));
}

void RequireSame(const FeatureMap& a, const FeatureMap& b, const char* what) {
  if (a.values.shape() != b.values.shape())
    throw ShapeError(std::string(what) + ": feature shapes differ " +
                     ShapeToString(a.values.shape()) + " vs " +
                     ShapeToString(b.values.shape()));
}

}  // namespace

void TripletConfig::Validate() const {
  if (!(margin > 0)) throw std::invalid_argument("triplet margin must be positive");
}

AnticipationNet::AnticipationNet(int channels, std::mt19937_64& rng)
    : channels_(channels),
      conv1_(channels, channels, 3, {1, 1, 1, true}, false, rng),
      conv2_(channels, channels, 3, {1, 1, 1, true}, false, rng),
      bn1_(channels),
      bn2_(channels) {}

Var AnticipationNet::Forward(const Var& x, bool training) {
  if (x.value().rank() != 4 || x.dim(1) != channels_)
    throw ShapeError("anticipate: expected [N, " + std::to_string(channels_) +
                     ", n, n], got " + ShapeToString(x.shape()));
  Var y = ag::Relu(bn1_.Forward(conv1_.Forward(x), training));
  return ag::Relu(bn2_.Forward(conv2_.Forward(y), training));
}

FeatureMap AnticipationNet::Anticipate(const FeatureMap& x_inactive) {
  ag::NoGradGuard no_grad;
  Var y = Forward(AsBatch(x_inactive), false);
  return {y.value().Reshaped(x_inactive.values.shape()), x_inactive.provenance + ":anticipated"};
}

void AnticipationNet::Collect(const std::string& prefix, nn::ParameterList* out) {
  conv1_.Collect(prefix + ".conv1", out);
  bn1_.Collect(prefix + ".bn1", out);
  conv2_.Collect(prefix + ".conv2", out);
  bn2_.Collect(prefix + ".bn2", out);
}

Var PooledDistance(const Var& a, const Var& b) {
  return ag::Sqrt(ag::AddScalar(ag::SumCols(ag::Square(ag::Sub(a, b))), kDistanceEps));
}

Var TripletRows(const Var& anchor, const Var& positive, const Var& negative,
                const TripletConfig& cfg) {
  cfg.Validate();
  Var a = anchor, p = positive, n = negative;
  if (cfg.normalize) {
    a = ag::NormalizeRows(a, kDistanceEps);
    p = ag::NormalizeRows(p, kDistanceEps);
    n = ag::NormalizeRows(n, kDistanceEps);
  }
  Var gap = ag::Sub(PooledDistance(a, p), PooledDistance(a, n));
  return ag::Relu(ag::AddScalar(gap, cfg.margin));
}

double AnticipationLossL2(const FeatureMap& anticipated, const FeatureMap& active) {
  RequireSame(anticipated, active, "anticipation_loss_l2");
  ag::NoGradGuard no_grad;
  Var pa = ag::L2Pool(AsBatch(anticipated), encoder::kL2PoolEps);
  Var pb = ag::L2Pool(AsBatch(active), encoder::kL2PoolEps);
  return PooledDistance(pa, pb).value()[0];
}

double AnticipationLossTriplet(const FeatureMap& anchor, const FeatureMap& positive,
                               const FeatureMap& negative, const TripletConfig& cfg) {
  RequireSame(anchor, positive, "anticipation_loss_triplet");
  RequireSame(anchor, negative, "anticipation_loss_triplet");
  ag::NoGradGuard no_grad;
  auto pool = [](const FeatureMap& f) {
    return ag::L2Pool(AsBatch(f), encoder::kL2PoolEps);
  };
  return TripletRows(pool(anchor), pool(positive), pool(negative), cfg).value()[0];
}

double AuxLoss(const FeatureMap& anticipated, int a, const temporal::Aggregator& aggregator,
               const temporal::Classifier& classifier) {
  const encoder::PooledFeature g = encoder::L2Pool(anticipated);
  const auto h = aggregator.Aggregate(std::span<const encoder::PooledFeature>(&g, 1));
  return temporal::ClassificationLoss(classifier.Classify(h), a);
}

}  // namespace hotspots::anticipation
