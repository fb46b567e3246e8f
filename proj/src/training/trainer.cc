#include "hotspots/training/trainer.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace hotspots::training {

namespace {

void CopyImage(const Tensor& src, std::size_t src_index, Tensor* dst, std::size_t dst_index) {
  const std::size_t plane = src.size() / static_cast<std::size_t>(src.dim(0));
  std::copy_n(src.data() + src_index * plane, plane, dst->data() + dst_index * plane);
}

Tensor StackImages(std::span<const Tensor* const> images, int size) {
  Tensor out({static_cast<int>(images.size()), 3, size, size});
  const std::size_t plane = 3ull * size * size;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i]->size() != plane) throw ShapeError("image tensor has the wrong size");
    std::copy_n(images[i]->data(), plane, out.data() + i * plane);
  }
  return out;
}

int Argmax(const double* v, int n) {
  return static_cast<int>(std::max_element(v, v + n) - v);
}

void CheckFinite(double v, const char* term, int epoch, long step) {
  if (!std::isfinite(v))
    throw TrainingError(std::string("non-finite ") + term + " at epoch " +
                        std::to_string(epoch) + ", step " + std::to_string(step));
}

}  // namespace

PreparedInstance Prepare(const data::TrainInstance& instance) {
  PreparedInstance p;
  p.id = instance.id;
  p.action = instance.clip.action;
  p.object = instance.clip.object;
  std::vector<const RgbImage*> frames;
  for (const auto& f : instance.clip.frames) frames.push_back(&f);
  p.frames = ImagesToTensor(frames);
  const Tensor inactive = ImageToTensor(instance.inactive.image);
  p.inactive = inactive.Reshaped({3, inactive.dim(2), inactive.dim(3)});
  if (instance.negative) {
    const Tensor neg = ImageToTensor(instance.negative->image);
    p.negative = neg.Reshaped({3, neg.dim(2), neg.dim(3)});
  }
  return p;
}

BatchLoss ComputeBatchLoss(Model& model, std::span<const PreparedInstance* const> batch,
                           std::span<const Tensor* const> negatives, bool training) {
  const TrainConfig& cfg = model.config();
  const int batch_size = static_cast<int>(batch.size());
  if (batch_size == 0) throw TrainingError("empty batch");
  const int size = model.input_size();
  const bool triplet = cfg.variant() == LossVariant::kTriplet;
  if (triplet && negatives.size() != batch.size())
    throw TrainingError("triplet anticipation loss needs a negative image per instance");

  std::vector<int> offsets(batch_size), lengths(batch_size), labels(batch_size);
  int total_frames = 0, max_len = 0;
  for (int b = 0; b < batch_size; ++b) {
    offsets[b] = total_frames;
    lengths[b] = batch[b]->length();
    labels[b] = batch[b]->action;
    if (lengths[b] < 1) throw TrainingError("instance " + batch[b]->id + " has no frames");
    total_frames += lengths[b];
    max_len = std::max(max_len, lengths[b]);
  }
  Tensor frames({total_frames, 3, size, size});
  for (int b = 0; b < batch_size; ++b)
    for (int t = 0; t < lengths[b]; ++t) CopyImage(batch[b]->frames, t, &frames, offsets[b] + t);

  // Video branch: per-frame features, L2 pooling, recurrent aggregation.
  Var features = model.Encode(frames, training);
  Var pooled = model.Pool(features);
  std::vector<Var> steps;
  for (int t = 0; t < max_len; ++t) {
    std::vector<int> rows(batch_size);
    for (int b = 0; b < batch_size; ++b) rows[b] = offsets[b] + std::min(t, lengths[b] - 1);
    steps.push_back(ag::SelectRows(pooled, rows));
  }
  const auto& aggregator = model.aggregator();
  const auto states = aggregator.Unroll(steps, aggregator.ZeroState(batch_size), cfg.chunk_length);
  std::vector<Var> hidden;
  for (const auto& s : states) hidden.push_back(s.h);
  std::vector<int> last(batch_size);
  for (int b = 0; b < batch_size; ++b) last[b] = lengths[b] - 1;
  Var scores = model.classifier().Forward(ag::GatherSteps(hidden, last));
  Var loss_cls = ag::Mean(ag::CrossEntropyRows(scores, labels));

  BatchLoss out;
  const int num_actions = model.num_actions();
  for (int b = 0; b < batch_size; ++b)
    out.predictions.push_back(Argmax(scores.value().data() + b * num_actions, num_actions));

  // Active frame: earliest prefix with the lowest loss, from detached states.
  std::vector<std::vector<double>> prefix_losses(batch_size);
  {
    ag::NoGradGuard no_grad;
    for (int t = 0; t < max_len; ++t) {
      Var s = model.classifier().Forward(Var(states[t].h.value()));
      Var ce = ag::CrossEntropyRows(s, labels);
      for (int b = 0; b < batch_size; ++b)
        if (t < lengths[b]) prefix_losses[b].push_back(ce.value()[b]);
    }
  }
  std::vector<int> target_rows(batch_size);
  for (int b = 0; b < batch_size; ++b) {
    const int t_star = temporal::ArgminEarliest(prefix_losses[b]);
    out.active_frames.push_back(t_star + 1);
    target_rows[b] = offsets[b] + t_star;
  }
  Var target = model.Pool(ag::SelectRows(ag::Detach(features), target_rows));

  // Inactive branch, with negatives appended to the same batch.
  const bool differentiate = cfg.lambda_ant > 0 || cfg.lambda_aux > 0;
  Var loss_ant, loss_aux;
  {
    std::optional<ag::NoGradGuard> no_grad;
    if (!differentiate) no_grad.emplace();
    const bool branch_training = training && differentiate;
    std::vector<const Tensor*> images;
    for (const auto* inst : batch) images.push_back(&inst->inactive);
    if (triplet)
      for (const Tensor* neg : negatives) images.push_back(neg);
    Var x_inactive = model.Encode(StackImages(images, size), branch_training);
    Var anticipated = model.Pool(model.Anticipate(x_inactive, branch_training));
    std::vector<int> pos_rows(batch_size);
    std::iota(pos_rows.begin(), pos_rows.end(), 0);
    Var positive = triplet ? ag::SelectRows(anticipated, pos_rows) : anticipated;
    if (triplet) {
      std::vector<int> neg_rows(batch_size);
      std::iota(neg_rows.begin(), neg_rows.end(), batch_size);
      Var negative = ag::SelectRows(anticipated, neg_rows);
      anticipation::TripletConfig tc{cfg.triplet_margin, true};
      loss_ant = ag::Mean(anticipation::TripletRows(target, positive, negative, tc));
    } else {
      loss_ant = ag::Mean(anticipation::PooledDistance(positive, target));
    }
    loss_aux = ag::Mean(ag::CrossEntropyRows(model.ScoresFromPooled(positive), labels));
  }

  out.terms.cls = loss_cls.value()[0];
  out.terms.ant = loss_ant.value()[0];
  out.terms.aux = loss_aux.value()[0];
  out.terms.total = cfg.lambda_cls * out.terms.cls + cfg.lambda_ant * out.terms.ant +
                    cfg.lambda_aux * out.terms.aux;

  Var total = ag::Scale(loss_cls, cfg.lambda_cls);
  if (cfg.lambda_ant > 0) total = ag::Add(total, ag::Scale(loss_ant, cfg.lambda_ant));
  if (cfg.lambda_aux > 0) total = ag::Add(total, ag::Scale(loss_aux, cfg.lambda_aux));
  out.total = total;
  return out;
}

LossBreakdown TotalLoss(Model& model, const data::TrainInstance& instance) {
  if (model.config().variant() == LossVariant::kTriplet && !instance.negative)
    throw TrainingError("instance " + instance.id +
                        ": triplet anticipation loss requires a negative image");
  const PreparedInstance p = Prepare(instance);
  const PreparedInstance* ptr = &p;
  std::vector<const Tensor*> negs;
  if (p.negative) negs.push_back(&*p.negative);
  if (model.config().variant() != LossVariant::kTriplet) negs.clear();
  ag::NoGradGuard no_grad;
  return ComputeBatchLoss(model, std::span<const PreparedInstance* const>(&ptr, 1), negs,
                          false)
      .terms;
}

std::string LossLogCsv(const std::vector<LossLogRow>& rows) {
  std::ostringstream os;
  os << "epoch,step,L_cls,L_ant,L_aux,total\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%ld,%.17g,%.17g,%.17g,%.17g\n", r.epoch, r.step, r.cls,
                  r.ant, r.aux, r.total);
    os << buf;
  }
  return os.str();
}

void WriteLossLog(const std::vector<LossLogRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw TrainingError("cannot write loss log: " + path.string());
  out << LossLogCsv(rows);
}

namespace {

// Negative for instance i: a uniformly drawn instance showing another object,
// falling back to the manifest-provided negative image.
const Tensor* DrawNegative(std::span<const PreparedInstance> instances, int i,
                           const std::vector<std::vector<int>>& by_object_complement,
                           std::mt19937_64& rng) {
  const auto& inst = instances[i];
  if (inst.object && !by_object_complement[*inst.object].empty()) {
    const auto& pool = by_object_complement[*inst.object];
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    return &instances[pool[pick(rng)]].inactive;
  }
  if (inst.negative) return &*inst.negative;
  throw TrainingError("instance " + inst.id +
                      ": no inactive image of a different object class for the triplet "
                      "loss; set loss_variant to l2");
}

std::vector<std::vector<int>> ComplementPools(std::span<const PreparedInstance> instances,
                                              int num_objects) {
  std::vector<std::vector<int>> pools(std::max(num_objects, 0));
  for (int o = 0; o < num_objects; ++o)
    for (int i = 0; i < static_cast<int>(instances.size()); ++i)
      if (instances[i].object && *instances[i].object != o) pools[o].push_back(i);
  return pools;
}

nn::Adam MakeOptimizer(Model& model) {
  const auto& c = model.config();
  nn::Adam::Options opt;
  opt.lr = c.learning_rate;
  opt.weight_decay = c.weight_decay;
  return nn::Adam(model.ParameterVars(), opt);
}

}  // namespace

TrainResult Train(std::span<const PreparedInstance> instances, const data::Vocab& actions,
                  const data::Vocab& objects, const TrainConfig& config,
                  const TrainHooks& hooks) {
  config.Validate();
  if (instances.empty()) throw TrainingError("empty training set");
  if (actions.size() < 2) throw TrainingError("training needs at least two actions");

  TrainResult result;
  result.model = MakeModel(config, actions, objects);
  Model& model = *result.model;
  nn::Adam optimizer = MakeOptimizer(model);
  std::vector<Var> params = model.ParameterVars();
  std::mt19937_64 rng(config.seed ^ 0x5DEECE66DULL);
  const bool triplet = config.variant() == LossVariant::kTriplet;
  const auto pools = ComplementPools(instances, objects.size());

  std::vector<int> order(instances.size());
  std::iota(order.begin(), order.end(), 0);
  long step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<const Tensor*> epoch_negatives(instances.size(), nullptr);
    if (triplet)
      for (int i : order) epoch_negatives[i] = DrawNegative(instances, i, pools, rng);

    int correct = 0;
    LossBreakdown sum;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<const PreparedInstance*> batch;
      std::vector<const Tensor*> negatives;
      for (std::size_t k = start; k < end; ++k) {
        batch.push_back(&instances[order[k]]);
        if (triplet) negatives.push_back(epoch_negatives[order[k]]);
      }
      model.parameters().ZeroGrad();
      BatchLoss loss = ComputeBatchLoss(model, batch, negatives, true);
      CheckFinite(loss.terms.cls, "L_cls", epoch, step);
      CheckFinite(loss.terms.ant, "L_ant", epoch, step);
      CheckFinite(loss.terms.aux, "L_aux", epoch, step);
      ag::Backward(loss.total);
      nn::ClipGradNorm(params, config.grad_clip_norm);
      optimizer.Step();

      for (std::size_t k = 0; k < batch.size(); ++k)
        correct += loss.predictions[k] == batch[k]->action;
      result.log.push_back({epoch, step, loss.terms.cls, loss.terms.ant, loss.terms.aux,
                            loss.terms.total});
      sum.cls += loss.terms.cls;
      sum.ant += loss.terms.ant;
      sum.aux += loss.terms.aux;
      sum.total += loss.terms.total;
      ++batches;
      ++step;
    }
    const double acc = static_cast<double>(correct) / instances.size();
    result.epoch_accuracy.push_back(acc);
    ++result.epochs_run;
    if (hooks.on_epoch) {
      LossBreakdown mean{sum.cls / batches, sum.ant / batches, sum.aux / batches,
                         sum.total / batches};
      hooks.on_epoch(epoch, acc, mean);
    }
  }
  std::ostringstream rng_state;
  rng_state << rng;
  result.rng_state = rng_state.str();
  return result;
}

std::vector<double> OverfitBatch(Model& model, std::span<const PreparedInstance> batch,
                                 int steps) {
  nn::Adam optimizer = MakeOptimizer(model);
  std::vector<Var> params = model.ParameterVars();
  std::vector<const PreparedInstance*> ptrs;
  for (const auto& p : batch) ptrs.push_back(&p);
  std::vector<const Tensor*> negatives;
  if (model.config().variant() == LossVariant::kTriplet) {
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const Tensor* neg = batch[i].negative ? &*batch[i].negative : nullptr;
      for (std::size_t k = 1; !neg && k < batch.size(); ++k) {
        const auto& other = batch[(i + k) % batch.size()];
        if (other.object != batch[i].object) neg = &other.inactive;
      }
      if (!neg) throw TrainingError("no negative available in the batch");
      negatives.push_back(neg);
    }
  }
  std::vector<double> totals;
  for (int s = 0; s < steps; ++s) {
    model.parameters().ZeroGrad();
    BatchLoss loss = ComputeBatchLoss(model, ptrs, negatives, true);
    totals.push_back(loss.terms.total);
    ag::Backward(loss.total);
    nn::ClipGradNorm(params, model.config().grad_clip_norm);
    optimizer.Step();
  }
  return totals;
}

int PredictClip(Model& model, const PreparedInstance& instance) {
  ag::NoGradGuard no_grad;
  Var pooled = model.Pool(model.Encode(instance.frames, false));
  std::vector<Var> steps;
  for (int t = 0; t < instance.length(); ++t) steps.push_back(ag::SelectRows(pooled, {t}));
  const auto& agg = model.aggregator();
  const auto states = agg.Unroll(steps, agg.ZeroState(1));
  Var scores = model.classifier().Forward(states.back().h);
  return Argmax(scores.value().data(), model.num_actions());
}

double ClassificationAccuracy(Model& model, std::span<const PreparedInstance> instances) {
  if (instances.empty()) return 0.0;
  int correct = 0;
  for (const auto& inst : instances) correct += PredictClip(model, inst) == inst.action;
  return static_cast<double>(correct) / instances.size();
}

}  // namespace hotspots::training
