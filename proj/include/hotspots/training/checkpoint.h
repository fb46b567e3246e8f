#pragma once

#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>

#include "hotspots/training/model.h"

namespace hotspots::training {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when the file is a checkpoint written by another format version.
class CheckpointVersionError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
  int epoch = 0;
  std::string rng_state;
};

// Single file: magic, version, JSON header (config, vocabularies, epoch, RNG
// state, tensor names and shapes), raw little-endian doubles, checksum.
void SaveCheckpoint(Model& model, const std::filesystem::path& path,
                    const CheckpointMeta& meta = {});

struct LoadedCheckpoint {
  std::unique_ptr<Model> model;
  CheckpointMeta meta;
};

LoadedCheckpoint LoadCheckpoint(const std::filesystem::path& path);

// Copies encoder tensors from a checkpoint into `model` (names and shapes
// must match); other groups are left untouched.
void LoadEncoderWeights(Model& model, const std::filesystem::path& path);

}  // namespace hotspots::training
