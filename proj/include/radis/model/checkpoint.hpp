#pragma once

#include <cstdint>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "radis/model/transformer.hpp"

namespace radis::model {

// Binary layout:
//   "RADISCKP" | u32 version | u64 header_len | JSON header | f32 base params
//   | f32 adapter params
// The header carries the model config, seed, adapter config, tensor sizes,
// the content checksum and free-form metadata.
struct Checkpoint {
  Transformer<float> model;
  uint64_t seed = 0;
  nlohmann::json meta = nlohmann::json::object();
};

void save_checkpoint(const std::filesystem::path& path, const Transformer<float>& model,
                     uint64_t seed, const nlohmann::json& meta = nlohmann::json::object());

// Throws CheckpointError on bad magic, version, sizes or checksum.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace radis::model
