#include "hotspots/training/config.h"

#include <fstream>

namespace hotspots::training {

using nlohmann::json;

TrainConfig TrainConfig::Paper() {
  TrainConfig c;
  c.preset = "paper";
  c.batch_size = 128;
  c.learning_rate = 1e-4;
  c.input_size = 224;
  c.feature_channels = 2048;
  c.hidden_size = 2048;
  return c;
}

TrainConfig TrainConfig::Desk() {
  TrainConfig c;
  c.learning_rate = 1e-3;
  return c;
}

LossVariant TrainConfig::variant() const {
  if (loss_variant == "l2") return LossVariant::kL2;
  if (loss_variant == "triplet") return LossVariant::kTriplet;
  throw ConfigError("loss_variant must be 'l2' or 'triplet', got '" + loss_variant + "'");
}

encoder::EncoderConfig TrainConfig::EncoderConfig() const {
  if (preset == "paper") return encoder::EncoderConfig::Paper();
  if (preset == "desk") return encoder::EncoderConfig::Desk(input_size, feature_channels);
  throw ConfigError("preset must be 'desk' or 'paper', got '" + preset + "'");
}

void TrainConfig::Validate() const {
  if (lambda_cls < 0 || lambda_ant < 0 || lambda_aux < 0)
    throw ConfigError("loss weights must be non-negative");
  if (optimizer != "adam") throw ConfigError("only the adam optimizer is supported");
  if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
  if (weight_decay < 0) throw ConfigError("weight_decay must be non-negative");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (chunk_length < 1) throw ConfigError("chunk_length must be >= 1");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (hidden_size < 1) throw ConfigError("hidden_size must be >= 1");
  if (!(grad_clip_norm > 0)) throw ConfigError("grad_clip_norm must be positive");
  if (!(triplet_margin > 0)) throw ConfigError("triplet_margin must be positive");
  variant();
  EncoderConfig().Validate();
}

const std::vector<std::string>& TrainConfig::FieldNames() {
  static const std::vector<std::string> names = {
      "lambda_cls",     "lambda_ant",       "lambda_aux",    "optimizer",
      "learning_rate",  "weight_decay",     "batch_size",    "chunk_length",
      "epochs",         "seed",             "loss_variant",  "preset",
      "input_size",     "feature_channels", "hidden_size",   "grad_clip_norm",
      "triplet_margin", "manifest",         "unfamiliar_objects"};
  return names;
}

json TrainConfig::ToJson() const {
  return json{{"lambda_cls", lambda_cls},
              {"lambda_ant", lambda_ant},
              {"lambda_aux", lambda_aux},
              {"optimizer", optimizer},
              {"learning_rate", learning_rate},
              {"weight_decay", weight_decay},
              {"batch_size", batch_size},
              {"chunk_length", chunk_length},
              {"epochs", epochs},
              {"seed", seed},
              {"loss_variant", loss_variant},
              {"preset", preset},
              {"input_size", input_size},
              {"feature_channels", feature_channels},
              {"hidden_size", hidden_size},
              {"grad_clip_norm", grad_clip_norm},
              {"triplet_margin", triplet_margin},
              {"manifest", manifest},
              {"unfamiliar_objects", unfamiliar_objects}};
}

namespace {

template <typename T>
void Read(const json& j, const char* key, T* out) {
  if (!j.contains(key)) return;
  try {
    *out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

}  // namespace

TrainConfig TrainConfig::FromJson(const json& j) {
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  const auto& names = FieldNames();
  for (const auto& [key, _] : j.items())
    if (std::find(names.begin(), names.end(), key) == names.end())
      throw ConfigError("unknown config key: " + key);
  // A preset key selects the base defaults before individual keys apply.
  TrainConfig c = j.contains("preset") && j["preset"] == "paper" ? Paper() : Desk();
  Read(j, "lambda_cls", &c.lambda_cls);
  Read(j, "lambda_ant", &c.lambda_ant);
  Read(j, "lambda_aux", &c.lambda_aux);
  Read(j, "optimizer", &c.optimizer);
  Read(j, "learning_rate", &c.learning_rate);
  Read(j, "weight_decay", &c.weight_decay);
  Read(j, "batch_size", &c.batch_size);
  Read(j, "chunk_length", &c.chunk_length);
  Read(j, "epochs", &c.epochs);
  Read(j, "seed", &c.seed);
  Read(j, "loss_variant", &c.loss_variant);
  Read(j, "preset", &c.preset);
  Read(j, "input_size", &c.input_size);
  Read(j, "feature_channels", &c.feature_channels);
  Read(j, "hidden_size", &c.hidden_size);
  Read(j, "grad_clip_norm", &c.grad_clip_norm);
  Read(j, "triplet_margin", &c.triplet_margin);
  Read(j, "manifest", &c.manifest);
  Read(j, "unfamiliar_objects", &c.unfamiliar_objects);
  c.Validate();
  return c;
}

TrainConfig TrainConfig::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return FromJson(j);
}

void TrainConfig::ApplyOverrides(const std::vector<std::string>& overrides) {
  json j = ToJson();
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("override must be key=value: " + kv);
    const std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
    json parsed;
    try {
      parsed = json::parse(value);
    } catch (const json::parse_error&) {
      parsed = value;
    }
    j[key] = parsed;
  }
  *this = FromJson(j);
}

}  // namespace hotspots::training
