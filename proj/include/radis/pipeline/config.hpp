#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "radis/corpus/general.hpp"
#include "radis/corpus/language.hpp"
#include "radis/model/config.hpp"
#include "radis/train/trainer.hpp"

namespace radis::pipeline {

struct CorpusConfig {
  uint64_t seed = 7;
  corpus::LanguageSpec language;
  corpus::GeneralTaskSpec general;
  size_t n_train = 2000;
  size_t n_test = 512;
  size_t n_pretrain_translation = 4000;  // gloss-style pairs seen by the backbone
  size_t n_general_pretrain_per_task = 2000;
  size_t n_general_eval_per_task = 200;
  double rationale_fraction = 0.7;
  // Share of pretraining pairs drawn with the real word order; the rest are
  // glossed.
  double pretrain_reorder_fraction = 0.0;
  // Category names of the clauses in pretraining translation rationales.
  std::vector<std::string> translation_clauses{"word_phrase_translation", "back_translation",
                                               "grammar", "helpful_safety"};
};

struct PretrainConfig {
  train::TrainConfig train;
  double floor_general = 0.9;
  double floor_safety = 0.95;
  double floor_emission = 0.6;
};

struct FinetuneConfig {
  std::vector<std::string> regimes{"vanilla", "radis", "seqkd", "sdft"};
  train::TrainConfig base;                  // regime and seed are filled per run
  std::map<std::string, nlohmann::json> per_regime;  // leaf overrides per regime
  train::TrainConfig for_regime(train::Regime r, uint64_t seed) const;
};

struct DistillConfig {
  int max_rationale_len = 64;
  std::string paraphrase_template;
  std::string teacher_checkpoint;  // empty: the backbone writes the rationales
  int max_new_tokens = 80;
};

struct EvalConfig {
  size_t emission_samples = 200;
  int max_new_tokens = 80;
};

struct GradsimConfig {
  size_t k_per_direction = 128;
  // "backbone" or a regime name whose final_merged.ckpt to analyse.
  std::string checkpoint = "backbone";
};

struct ExperimentConfig {
  std::filesystem::path output_dir = "runs/default";
  std::vector<uint64_t> seeds{1, 2, 3};
  CorpusConfig corpus;
  model::ModelConfig model;
  PretrainConfig pretrain;
  FinetuneConfig finetune;
  DistillConfig distill;
  EvalConfig eval;
  GradsimConfig gradsim;

  void validate() const;
};

// Missing keys keep their defaults; unknown top-level sections are a
// ConfigError.
ExperimentConfig parse_config(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& c);

// Sets a leaf addressed by a dotted path ("finetune.base.lr"). The value
// text is parsed as JSON when possible and kept as a string otherwise.
void apply_override(nlohmann::json& doc, const std::string& dotted_path, const std::string& value);

nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace radis::pipeline
