#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

namespace radis::model {

struct ModelConfig {
  int n_layers = 4;
  int n_heads = 4;
  int d_model = 128;
  int d_ff = 512;
  int max_seq_len = 96;
  int vocab_size = 128;

  int head_dim() const { return d_model / n_heads; }
  // Throws ConfigError on non-positive sizes or d_model % n_heads != 0.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// Closed-form parameter count of the dense model.
size_t parameter_count(const ModelConfig& cfg);

struct LoraConfig {
  int rank = 16;
  double alpha = 32.0;

  double scale() const { return alpha / rank; }
  void validate() const;
  bool operator==(const LoraConfig&) const = default;
};

// Trainable parameters added by adapters on every linear map.
size_t lora_parameter_count(const ModelConfig& cfg, const LoraConfig& lora);

struct DecodeConfig {
  enum class Mode { kGreedy, kTemperature };
  Mode mode = Mode::kGreedy;
  double temperature = 1.0;
  int max_new_tokens = 64;
  std::vector<int> stop_tokens;
  uint64_t seed = 0;  // temperature mode only

  void validate() const;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);
void to_json(nlohmann::json& j, const LoraConfig& c);
void from_json(const nlohmann::json& j, LoraConfig& c);

}  // namespace radis::model
