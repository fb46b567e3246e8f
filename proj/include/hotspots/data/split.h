#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hotspots/data/dataset.h"

namespace hotspots::data {

// Familiar / unfamiliar object partition and the instance ids on each side.
struct SplitSpec {
  std::vector<int> familiar;    // object indices, ascending
  std::vector<int> unfamiliar;  // object indices, ascending
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
};

// With no unfamiliar objects this is the dataset's own train/test split
// (records without a split tag count as training). Otherwise training keeps
// only familiar-object records not tagged "test", and testing takes every
// unfamiliar-object record.
SplitSpec MakeNovelSplit(const Dataset& dataset,
                         const std::vector<std::string>& unfamiliar_labels);

// Held-out object counts used for novel-object evaluation on the two video
// datasets the toolkit targets.
struct HeldOutPreset {
  const char* name;
  int held_out;
  int total;
};
inline constexpr HeldOutPreset kEpicHeldOut{"epic", 10, 31};
inline constexpr HeldOutPreset kOpraHeldOut{"opra", 9, 26};

// Draws round(|objects| * held_out / total) labels without replacement
// (exactly `held_out` when the vocabulary has `total` entries).
std::vector<std::string> ChooseUnfamiliar(const Vocab& objects,
                                          const HeldOutPreset& preset,
                                          std::uint64_t seed);

void CheckSplit(const Dataset& dataset, const SplitSpec& split);

}  // namespace hotspots::data
