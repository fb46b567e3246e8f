#pragma once

#include <random>
#include <span>
#include <vector>

#include "hotspots/core/layers.h"
#include "hotspots/encoder/encoder.h"

namespace hotspots::temporal {

using ag::Var;
using encoder::PooledFeature;

struct AggregateFeature {
  std::vector<double> hidden;
  std::vector<double> cell;
  int step = 0;  // number of frames consumed, 1-based
};

// Pre-softmax action scores.
struct ActionScores {
  std::vector<double> values;
};

// LSTM over per-frame pooled features.
class Aggregator {
 public:
  Aggregator(int input_size, int hidden_size, std::mt19937_64& rng);

  nn::LstmState ZeroState(int batch) const { return cell_.ZeroState(batch); }
  nn::LstmState Step(const Var& x, const nn::LstmState& s) const { return cell_.Step(x, s); }

  // Runs `steps` (each [B, input]) from `initial` and returns the state after
  // every step. Every `chunk` steps the carried state is detached, so
  // gradients are truncated at chunk boundaries while forward values equal a
  // one-shot unroll. chunk <= 0 disables truncation.
  std::vector<nn::LstmState> Unroll(const std::vector<Var>& steps,
                                    const nn::LstmState& initial, int chunk = 0) const;

  // Value-level aggregation of one sequence. `prefixes`, when given, receives
  // the state after each of the T steps (prefixes->back() is the result).
  AggregateFeature Aggregate(std::span<const PooledFeature> features,
                             std::vector<AggregateFeature>* prefixes = nullptr) const;
  // Same result, feeding `chunk` frames at a time and carrying the state.
  AggregateFeature AggregateChunked(std::span<const PooledFeature> features, int chunk) const;

  void Collect(const std::string& prefix, nn::ParameterList* out) const {
    cell_.Collect(prefix, out);
  }
  int input_size() const { return cell_.input_size(); }
  int hidden_size() const { return cell_.hidden_size(); }

 private:
  AggregateFeature Continue(std::span<const PooledFeature> features,
                            const AggregateFeature& from,
                            std::vector<AggregateFeature>* prefixes) const;
  nn::LstmCell cell_;
};

// Linear map from the aggregate feature to |A| scores.
class Classifier {
 public:
  Classifier(int hidden_size, int num_actions, std::mt19937_64& rng)
      : linear_(hidden_size, num_actions, rng) {}

  Var Forward(const Var& h) const { return linear_.Forward(h); }
  ActionScores Classify(const AggregateFeature& h) const;
  void Collect(const std::string& prefix, nn::ParameterList* out) const {
    linear_.Collect(prefix, out);
  }
  int num_actions() const { return linear_.out_features(); }
  const nn::Linear& linear() const { return linear_; }

 private:
  nn::Linear linear_;
};

// Softmax cross-entropy of the scores against action `a`.
double ClassificationLoss(const ActionScores& scores, int a);

// Index of the smallest loss, earliest on ties.
int ArgminEarliest(std::span<const double> losses);

// 1-based prefix length t* minimizing the classification loss of the prefix
// aggregate for action `a`.
int SelectActiveFrame(const Aggregator& aggregator, const Classifier& classifier,
                      std::span<const PooledFeature> features, int a);

}  // namespace hotspots::temporal
