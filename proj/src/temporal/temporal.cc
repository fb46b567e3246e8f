#include "hotspots/temporal/temporal.h"

#include <cmath>
#include <stdexcept>

namespace hotspots::temporal {

Aggregator::Aggregator(int input_size, int hidden_size, std::mt19937_64& rng)
    : cell_(input_size, hidden_size, rng) {}

std::vector<nn::LstmState> Aggregator::Unroll(const std::vector<Var>& steps,
                                              const nn::LstmState& initial,
                                              int chunk) const {
  if (steps.empty()) throw std::invalid_argument("aggregate: empty sequence");
  std::vector<nn::LstmState> states;
  states.reserve(steps.size());
  nn::LstmState s = initial;
  for (std::size_t t = 0; t < steps.size(); ++t) {
    if (chunk > 0 && t > 0 && t % chunk == 0) s = {ag::Detach(s.h), ag::Detach(s.c)};
    s = cell_.Step(steps[t], s);
    states.push_back(s);
  }
  return states;
}

AggregateFeature Aggregator::Continue(std::span<const PooledFeature> features,
                                      const AggregateFeature& from,
                                      std::vector<AggregateFeature>* prefixes) const {
  ag::NoGradGuard no_grad;
  const int hidden = hidden_size();
  nn::LstmState s{Var(Tensor({1, hidden}, from.hidden)), Var(Tensor({1, hidden}, from.cell))};
  AggregateFeature out = from;
  for (const auto& g : features) {
    if (static_cast<int>(g.values.size()) != input_size())
      throw ShapeError("aggregate: feature has " + std::to_string(g.values.size()) +
                       " channels, expected " + std::to_string(input_size()));
    s = cell_.Step(Var(Tensor({1, input_size()}, g.values)), s);
    out.hidden = s.h.value().storage();
    out.cell = s.c.value().storage();
    ++out.step;
    if (prefixes) prefixes->push_back(out);
  }
  return out;
}

AggregateFeature Aggregator::Aggregate(std::span<const PooledFeature> features,
                                       std::vector<AggregateFeature>* prefixes) const {
  if (features.empty()) throw std::invalid_argument("aggregate: empty sequence");
  AggregateFeature zero{std::vector<double>(hidden_size(), 0.0),
                        std::vector<double>(hidden_size(), 0.0), 0};
  return Continue(features, zero, prefixes);
}

AggregateFeature Aggregator::AggregateChunked(std::span<const PooledFeature> features,
                                              int chunk) const {
  if (features.empty()) throw std::invalid_argument("aggregate: empty sequence");
  if (chunk < 1) throw std::invalid_argument("aggregate: chunk length must be >= 1");
  AggregateFeature state{std::vector<double>(hidden_size(), 0.0),
                         std::vector<double>(hidden_size(), 0.0), 0};
  for (std::size_t start = 0; start < features.size(); start += chunk) {
    const std::size_t len = std::min<std::size_t>(chunk, features.size() - start);
    state = Continue(features.subspan(start, len), state, nullptr);
  }
  return state;
}

ActionScores Classifier::Classify(const AggregateFeature& h) const {
  ag::NoGradGuard no_grad;
  const int hidden = linear_.in_features();
  if (static_cast<int>(h.hidden.size()) != hidden)
    throw ShapeError("classify: hidden state size mismatch");
  Var y = linear_.Forward(Var(Tensor({1, hidden}, h.hidden)));
  return {y.value().storage()};
}

double ClassificationLoss(const ActionScores& scores, int a) {
  const int n = static_cast<int>(scores.values.size());
  if (a < 0 || a >= n)
    throw std::out_of_range("classification_loss: action " + std::to_string(a) +
                            " outside [0, " + std::to_string(n) + ")");
  double mx = scores.values[0];
  for (double v : scores.values) mx = std::max(mx, v);
  double z = 0.0;
  for (double v : scores.values) z += std::exp(v - mx);
  return mx + std::log(z) - scores.values[a];
}

int ArgminEarliest(std::span<const double> losses) {
  if (losses.empty()) throw std::invalid_argument("argmin of an empty list");
  int best = 0;
  for (int t = 1; t < static_cast<int>(losses.size()); ++t)
    if (losses[t] < losses[best]) best = t;
  return best;
}

int SelectActiveFrame(const Aggregator& aggregator, const Classifier& classifier,
                      std::span<const PooledFeature> features, int a) {
  std::vector<AggregateFeature> prefixes;
  aggregator.Aggregate(features, &prefixes);
  std::vector<double> losses;
  losses.reserve(prefixes.size());
  for (const auto& h : prefixes)
    losses.push_back(ClassificationLoss(classifier.Classify(h), a));
  return ArgminEarliest(losses) + 1;
}

}  // namespace hotspots::temporal
