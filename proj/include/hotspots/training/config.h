#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hotspots/encoder/encoder.h"

namespace hotspots::training {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class LossVariant { kL2, kTriplet };

struct TrainConfig {
  double lambda_cls = 1.0;
  double lambda_ant = 0.1;
  double lambda_aux = 1.0;
  std::string optimizer = "adam";
  double learning_rate = 1e-4;
  double weight_decay = 5e-4;
  int batch_size = 8;
  int chunk_length = 16;
  int epochs = 20;
  std::uint64_t seed = 0;
  std::string loss_variant = "l2";  // "l2" | "triplet"
  std::string preset = "desk";      // "desk" | "paper"
  int input_size = 64;
  int feature_channels = 32;
  int hidden_size = 64;
  double grad_clip_norm = 10.0;
  double triplet_margin = 0.5;
  std::string manifest;
  std::vector<std::string> unfamiliar_objects;

  // Full-scale hyperparameters (ResNet-50 encoder, hidden 2048, batch 128).
  static TrainConfig Paper();
  // Desk-scale defaults (small encoder; see README for the values).
  static TrainConfig Desk();

  LossVariant variant() const;
  encoder::EncoderConfig EncoderConfig() const;
  void Validate() const;

  // Every serialized key, in declaration order.
  static const std::vector<std::string>& FieldNames();

  nlohmann::json ToJson() const;
  // Unknown keys are rejected.
  static TrainConfig FromJson(const nlohmann::json& j);
  static TrainConfig Load(const std::filesystem::path& path);
  // Applies "key=value" overrides; the value is parsed as JSON, falling back
  // to a plain string.
  void ApplyOverrides(const std::vector<std::string>& overrides);
};

}  // namespace hotspots::training
