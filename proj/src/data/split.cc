#include "hotspots/data/split.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

namespace hotspots::data {

SplitSpec MakeNovelSplit(const Dataset& dataset,
                         const std::vector<std::string>& unfamiliar_labels) {
  SplitSpec split;
  std::set<int> unfamiliar;
  for (const auto& label : unfamiliar_labels) unfamiliar.insert(dataset.objects.IndexOf(label));
  if (!unfamiliar.empty() &&
      static_cast<int>(unfamiliar.size()) >= dataset.objects.size())
    throw LoadError("novel-object split leaves no familiar objects to train on");
  for (int o = 0; o < dataset.objects.size(); ++o)
    (unfamiliar.count(o) ? split.unfamiliar : split.familiar).push_back(o);

  for (const auto& r : dataset.instances) {
    if (unfamiliar.empty()) {
      (r.split == "test" ? split.test_ids : split.train_ids).push_back(r.id);
      continue;
    }
    if (!r.object)
      throw LoadError("instance " + r.id + " has no object label; cannot apply a "
                      "novel-object split");
    if (unfamiliar.count(*r.object)) {
      split.test_ids.push_back(r.id);
    } else if (r.split != "test") {
      split.train_ids.push_back(r.id);
    }
  }
  if (split.train_ids.empty()) throw EmptyDatasetError("split has an empty training set");
  return split;
}

std::vector<std::string> ChooseUnfamiliar(const Vocab& objects,
                                          const HeldOutPreset& preset,
                                          std::uint64_t seed) {
  int count = preset.held_out;
  if (objects.size() != preset.total)
    count = static_cast<int>(std::lround(static_cast<double>(objects.size()) *
                                         preset.held_out / preset.total));
  count = std::clamp(count, 0, std::max(0, objects.size() - 1));
  std::vector<std::string> labels = objects.labels();
  std::mt19937_64 rng(seed);
  std::shuffle(labels.begin(), labels.end(), rng);
  labels.resize(count);
  std::sort(labels.begin(), labels.end());
  return labels;
}

void CheckSplit(const Dataset& dataset, const SplitSpec& split) {
  std::set<int> familiar(split.familiar.begin(), split.familiar.end());
  for (int u : split.unfamiliar)
    if (familiar.count(u)) throw LoadError("object is both familiar and unfamiliar");
  if (familiar.size() + split.unfamiliar.size() !=
      static_cast<std::size_t>(dataset.objects.size()))
    throw LoadError("familiar and unfamiliar objects do not cover the vocabulary");
  if (split.unfamiliar.empty()) return;
  for (const auto& id : split.train_ids) {
    const auto& r = dataset.Find(id);
    if (!r.object || !familiar.count(*r.object))
      throw LoadError("training instance " + id + " shows an unfamiliar object");
  }
}

}  // namespace hotspots::data
