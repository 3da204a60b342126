#include "radis/model/config.hpp"

#include "radis/util/error.hpp"

namespace radis::model {

void ModelConfig::validate() const {
  if (n_layers <= 0 || n_heads <= 0 || d_model <= 0 || d_ff <= 0 ||
      max_seq_len <= 0 || vocab_size <= 0) {
    throw ConfigError("model config: all sizes must be positive");
  }
  if (d_model % n_heads != 0) {
    throw ConfigError("model config: d_model (" + std::to_string(d_model) +
                      ") not divisible by n_heads (" + std::to_string(n_heads) + ")");
  }
}

size_t parameter_count(const ModelConfig& c) {
  const size_t d = c.d_model, ff = c.d_ff, v = c.vocab_size, p = c.max_seq_len;
  const size_t per_block = 2 * d              // ln1
                           + d * 3 * d + 3 * d  // qkv
                           + d * d + d          // attn out
                           + 2 * d              // ln2
                           + d * ff + ff        // fc
                           + ff * d + d;        // proj
  return v * d + p * d + c.n_layers * per_block + 2 * d + d * v;
}

void LoraConfig::validate() const {
  if (rank < 1) throw ConfigError("lora rank must be >= 1");
  if (!(alpha > 0.0)) throw ConfigError("lora alpha must be positive");
}

size_t lora_parameter_count(const ModelConfig& c, const LoraConfig& lora) {
  const size_t d = c.d_model, ff = c.d_ff, r = lora.rank;
  const size_t per_block = r * (d + 3 * d) + r * (d + d) + r * (d + ff) + r * (ff + d);
  return c.n_layers * per_block + r * (d + c.vocab_size);
}

void DecodeConfig::validate() const {
  if (max_new_tokens < 1) throw ConfigError("decode: max_new_tokens must be >= 1");
  if (mode == Mode::kTemperature && !(temperature > 0.0)) {
    throw ConfigError("decode: temperature must be > 0");
  }
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"n_layers", c.n_layers},   {"n_heads", c.n_heads},
       {"d_model", c.d_model},     {"d_ff", c.d_ff},
       {"max_seq_len", c.max_seq_len}, {"vocab_size", c.vocab_size}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  c.n_layers = j.value("n_layers", c.n_layers);
  c.n_heads = j.value("n_heads", c.n_heads);
  c.d_model = j.value("d_model", c.d_model);
  c.d_ff = j.value("d_ff", c.d_ff);
  c.max_seq_len = j.value("max_seq_len", c.max_seq_len);
  c.vocab_size = j.value("vocab_size", c.vocab_size);
}

void to_json(nlohmann::json& j, const LoraConfig& c) {
  j = {{"rank", c.rank}, {"alpha", c.alpha}};
}

void from_json(const nlohmann::json& j, LoraConfig& c) {
  c.rank = j.value("rank", c.rank);
  c.alpha = j.value("alpha", c.alpha);
}

}  // namespace radis::model
