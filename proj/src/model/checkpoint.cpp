#include "radis/model/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "radis/util/error.hpp"
#include "radis/util/hash.hpp"

namespace radis::model {
namespace {

constexpr char kMagic[8] = {'R', 'A', 'D', 'I', 'S', 'C', 'K', 'P'};
constexpr uint32_t kVersion = 1;

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Transformer<float>& model,
                     uint64_t seed, const nlohmann::json& meta) {
  nlohmann::json header;
  header["config"] = model.config();
  header["seed"] = seed;
  header["lora"] = model.has_adapters() ? nlohmann::json(model.lora()) : nlohmann::json();
  header["n_params"] = model.params().size();
  header["n_adapter_params"] = model.adapter_params().size();
  header["checksum"] = to_hex(model.checksum());
  header["meta"] = meta;
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open " + path.string() + " for writing");
  const uint64_t len = text.size();
  out.write(kMagic, sizeof(kMagic));
  out.write(reinterpret_cast<const char*>(&kVersion), sizeof(kVersion));
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(len));
  out.write(reinterpret_cast<const char*>(model.params().data()),
            static_cast<std::streamsize>(model.params().size_bytes()));
  out.write(reinterpret_cast<const char*>(model.adapter_params().data()),
            static_cast<std::streamsize>(model.adapter_params().size_bytes()));
  if (!out) throw CheckpointError("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  char magic[8];
  uint32_t version = 0;
  uint64_t len = 0;
  in.read(magic, sizeof(magic));
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError(path.string() + ": not a checkpoint file");
  }
  if (version != kVersion) {
    throw CheckpointError(path.string() + ": unsupported version " + std::to_string(version));
  }
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(path.string() + ": corrupt header: " + e.what());
  }
  const auto cfg = header.at("config").get<ModelConfig>();
  std::vector<float> params(header.at("n_params").get<size_t>());
  std::vector<float> adapters(header.at("n_adapter_params").get<size_t>());
  in.read(reinterpret_cast<char*>(params.data()),
          static_cast<std::streamsize>(params.size() * sizeof(float)));
  in.read(reinterpret_cast<char*>(adapters.data()),
          static_cast<std::streamsize>(adapters.size() * sizeof(float)));
  if (!in) throw CheckpointError(path.string() + ": truncated tensor data");

  Checkpoint ckpt{Transformer<float>(cfg, std::move(params)), header.at("seed").get<uint64_t>(),
                  header.value("meta", nlohmann::json::object())};
  if (!header.at("lora").is_null()) {
    ckpt.model.attach_lora(header.at("lora").get<LoraConfig>(), std::move(adapters));
  }
  if (to_hex(ckpt.model.checksum()) != header.at("checksum").get<std::string>()) {
    throw CheckpointError(path.string() + ": checksum mismatch");
  }
  return ckpt;
}

}  // namespace radis::model
