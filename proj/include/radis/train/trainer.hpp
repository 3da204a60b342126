#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "radis/model/config.hpp"
#include "radis/model/transformer.hpp"
#include "radis/train/example.hpp"
#include "radis/train/optimizer.hpp"

namespace radis::train {

enum class Regime { kVanilla, kRadis, kSeqKd, kSdft };

std::string_view regime_name(Regime r);
Regime parse_regime(std::string_view name);  // ConfigError on unknown names

struct TrainConfig {
  Regime regime = Regime::kVanilla;
  int epochs = 3;
  double lr = 1e-4;
  // Examples per optimizer step. For seqkd this counts golden and pseudo
  // targets together, so each step sees batch_size / 2 instructions.
  int batch_size = 128;
  uint64_t seed = 0;
  bool lora = true;
  model::LoraConfig lora_config;
  double clip_norm = 1.0;
  AdamWConfig adamw;
  bool save_checkpoints = true;
  std::filesystem::path resume_from;  // epoch checkpoint to continue from

  void validate() const;
  int instructions_per_step() const { return regime == Regime::kSeqKd ? batch_size / 2 : batch_size; }
};

int default_batch_size(Regime r);

// Serialized without resume_from; this is what a resume compares against.
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

// golden[i] and pseudo[i] share an instruction. pseudo is empty except
// for seqkd.
struct TrainSet {
  std::vector<Example> golden;
  std::vector<Example> pseudo;
};

// Per-token means over the mask-active tokens of the batch. For seqkd the
// golden and pseudo halves are normalized separately and added, so
// total = mt + rationale + pseudo.
struct BatchLoss {
  double total = 0.0;
  double mt = 0.0;
  double rationale = 0.0;
  double pseudo = 0.0;
  size_t active_golden = 0;
  size_t active_pseudo = 0;
};

// Gradient of the batch loss w.r.t. the trainable parameters. The work is
// split into a fixed number of shards reduced in order, so the result does
// not depend on the worker count.
template <typename T>
BatchLoss batch_gradient(const model::Transformer<T>& model, std::span<const Example* const> golden,
                         std::span<const Example* const> pseudo, std::span<T> grad);

struct StepResult {
  BatchLoss loss;
  double grad_norm = 0.0;  // before clipping
};

// One clipped AdamW update. Throws NumericalError on a non-finite loss or
// gradient; batches without active tokens leave the parameters untouched.
template <typename T>
StepResult sft_step(model::Transformer<T>& model, std::span<const Example* const> batch,
                    AdamW& opt, double lr, double clip_norm);

// Throws DataError unless golden[i] and pseudo[i] share an instruction.
template <typename T>
StepResult seqkd_step(model::Transformer<T>& model, std::span<const Example* const> golden,
                      std::span<const Example* const> pseudo, AdamW& opt, double lr,
                      double clip_norm);

struct StepLog {
  int64_t step = 0;
  int epoch = 0;
  double lr = 0.0;
  double loss_total = 0.0;
  double loss_mt = 0.0;
  double loss_rationale = 0.0;
  double loss_pseudo = 0.0;
  double grad_norm = 0.0;
};

inline constexpr const char* kMetricsHeader =
    "step,epoch,lr,loss_total,loss_mt,loss_rationale,loss_pseudo,grad_norm";
std::string metrics_row(const StepLog& s);

struct TrainResult {
  std::vector<StepLog> log;
  uint64_t checksum = 0;  // of the final (merged, if LoRA) model
};

int64_t steps_per_epoch(const TrainConfig& cfg, size_t n_examples);

// Trains in place. Attaches adapters when cfg.lora is set and none are
// present; the model is returned merged. When run_dir is non-empty it
// receives metrics.csv, epoch{k}.ckpt (+ optimizer state) and, under LoRA,
// final_merged.ckpt.
TrainResult train_run(const TrainConfig& cfg, const TrainSet& data, model::Transformer<float>& model,
                      const std::filesystem::path& run_dir = {},
                      const nlohmann::json& meta = nlohmann::json::object());

}  // namespace radis::train
