#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "radis/corpus/dataset.hpp"
#include "radis/corpus/vocab.hpp"
#include "radis/eval/eval.hpp"
#include "radis/pipeline/config.hpp"
#include "radis/train/trainer.hpp"

namespace radis::pipeline {

// Every path a stage reads or writes, relative to the output directory.
struct Layout {
  std::filesystem::path root;

  std::filesystem::path corpus_dir() const { return root / "corpus"; }
  std::filesystem::path vocab() const { return corpus_dir() / "vocab.json"; }
  std::filesystem::path train() const { return corpus_dir() / "train.jsonl"; }
  std::filesystem::path test() const { return corpus_dir() / "test.jsonl"; }
  std::filesystem::path pretrain() const { return corpus_dir() / "pretrain.jsonl"; }
  std::filesystem::path general_eval() const { return corpus_dir() / "general_eval.jsonl"; }
  std::filesystem::path backbone_dir() const { return root / "backbone"; }
  std::filesystem::path backbone() const { return backbone_dir() / "final.ckpt"; }
  std::filesystem::path backbone_report() const { return backbone_dir() / "report.json"; }
  std::filesystem::path data_dir() const { return root / "data"; }
  std::filesystem::path dataset(train::Regime r) const;
  std::filesystem::path seed_dir(uint64_t seed) const { return root / ("seed" + std::to_string(seed)); }
  std::filesystem::path run_dir(uint64_t seed, train::Regime r) const;
  std::filesystem::path gradsim_dir(uint64_t seed) const { return seed_dir(seed) / "gradsim"; }
  std::filesystem::path report_dir() const { return root / "report"; }
};

// Refuses to overwrite `path` unless force is set.
void guard_output(const std::filesystem::path& path, bool force);

// Throws DependencyError naming the producing command when path is missing.
void require(const std::filesystem::path& path, const std::string& producer);

void write_text(const std::filesystem::path& path, const std::string& text);

struct Stage {
  ExperimentConfig cfg;
  Layout layout;
  bool force = false;

  explicit Stage(ExperimentConfig c, bool force_overwrite = false)
      : cfg(std::move(c)), layout{cfg.output_dir}, force(force_overwrite) {}

  // gen: vocab, train/test translation pairs, backbone pretraining mix and
  // the held-out general suite.
  void gen() const;

  // pretrain: backbone checkpoint plus its reference report. Throws
  // NumericalError when the backbone misses a configured floor.
  eval::RunReport pretrain() const;

  // synthesize: the regime's training set from the frozen backbone (or the
  // configured teacher for radis). Vanilla needs no synthesis.
  void synthesize(train::Regime regime, const std::string& teacher = {}) const;

  // finetune: trains one regime for one seed, then evaluates it.
  eval::RunReport finetune(train::Regime regime, uint64_t seed) const;

  // eval: report for any checkpoint; RP against the stored backbone report.
  eval::RunReport evaluate(const std::filesystem::path& checkpoint, const std::string& run_id,
                           const std::string& regime, uint64_t seed) const;

  // gradsim: per-layer cosines at the configured checkpoint for one seed.
  void gradsim(uint64_t seed) const;

  // report: tables and figures from every stored run.
  void report() const;

  // All stages in order for every seed.
  void run_all() const;

  corpus::Vocab vocab() const;
  model::ModelConfig model_config(const corpus::Vocab& vocab) const;
  train::TrainSet training_set(train::Regime regime, const corpus::Vocab& vocab) const;
};

}  // namespace radis::pipeline
