#include "radis/pipeline/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "radis/corpus/rationale.hpp"
#include "radis/util/error.hpp"

namespace radis::pipeline {
namespace {

template <typename T>
void take(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j[key].get<T>();
}

nlohmann::json train_json(const train::TrainConfig& c) {
  nlohmann::json j = c;
  return j;
}

void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, _] : j.items()) {
    if (!allowed.count(k)) throw ConfigError("unknown key '" + where + "." + k + "'");
  }
}

}  // namespace

train::TrainConfig FinetuneConfig::for_regime(train::Regime r, uint64_t seed) const {
  nlohmann::json j = base;
  j["regime"] = train::regime_name(r);
  j.erase("batch_size");
  auto it = per_regime.find(std::string(train::regime_name(r)));
  // The base batch size applies to single-target regimes; seqkd doubles it
  // so both see the same number of instructions per step.
  j["batch_size"] = r == train::Regime::kSeqKd ? 2 * base.batch_size : base.batch_size;
  if (it != per_regime.end()) j.merge_patch(it->second);
  train::TrainConfig out = j.get<train::TrainConfig>();
  out.seed = seed;
  return out;
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw ConfigError("seeds must be non-empty");
  if (output_dir.empty()) throw ConfigError("output_dir must be set");
  model.validate();
  if (corpus.n_train == 0 || corpus.n_test == 0) throw ConfigError("corpus sizes must be positive");
  if (corpus.rationale_fraction < 0 || corpus.rationale_fraction > 1) {
    throw ConfigError("corpus.rationale_fraction must lie in [0, 1]");
  }
  if (corpus.pretrain_reorder_fraction < 0 || corpus.pretrain_reorder_fraction > 1) {
    throw ConfigError("corpus.pretrain_reorder_fraction must lie in [0, 1]");
  }
  for (const auto& name : corpus.translation_clauses) {
    const auto c = corpus::parse_category(name);
    if (std::find(corpus::kTranslationClauses.begin(), corpus::kTranslationClauses.end(), c) ==
        corpus::kTranslationClauses.end()) {
      throw ConfigError("corpus.translation_clauses: no translation clause for '" + name + "'");
    }
  }
  for (const auto& r : finetune.regimes) train::parse_regime(r);
  pretrain.train.validate();
  finetune.base.validate();
  if (distill.max_rationale_len < 1) throw ConfigError("distill.max_rationale_len must be >= 1");
  if (gradsim.k_per_direction == 0) throw ConfigError("gradsim.k_per_direction must be positive");
}

nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json per_regime = nlohmann::json::object();
  for (const auto& [k, v] : c.finetune.per_regime) per_regime[k] = v;
  return {
      {"output_dir", c.output_dir.string()},
      {"seeds", c.seeds},
      {"corpus",
       {{"seed", c.corpus.seed},
        {"language", c.corpus.language},
        {"general", c.corpus.general},
        {"n_train", c.corpus.n_train},
        {"n_test", c.corpus.n_test},
        {"n_pretrain_translation", c.corpus.n_pretrain_translation},
        {"n_general_pretrain_per_task", c.corpus.n_general_pretrain_per_task},
        {"n_general_eval_per_task", c.corpus.n_general_eval_per_task},
        {"rationale_fraction", c.corpus.rationale_fraction},
        {"pretrain_reorder_fraction", c.corpus.pretrain_reorder_fraction},
        {"translation_clauses", c.corpus.translation_clauses}}},
      {"model", c.model},
      {"pretrain",
       {{"train", train_json(c.pretrain.train)},
        {"floor_general", c.pretrain.floor_general},
        {"floor_safety", c.pretrain.floor_safety},
        {"floor_emission", c.pretrain.floor_emission}}},
      {"finetune",
       {{"regimes", c.finetune.regimes}, {"base", train_json(c.finetune.base)}, {"per_regime", per_regime}}},
      {"distill",
       {{"max_rationale_len", c.distill.max_rationale_len},
        {"paraphrase_template", c.distill.paraphrase_template},
        {"teacher_checkpoint", c.distill.teacher_checkpoint},
        {"max_new_tokens", c.distill.max_new_tokens}}},
      {"eval", {{"emission_samples", c.eval.emission_samples}, {"max_new_tokens", c.eval.max_new_tokens}}},
      {"gradsim", {{"k_per_direction", c.gradsim.k_per_direction}, {"checkpoint", c.gradsim.checkpoint}}},
  };
}

ExperimentConfig parse_config(const nlohmann::json& j) {
  ExperimentConfig c;
  try {
    check_keys(j, {"output_dir", "seeds", "corpus", "model", "pretrain", "finetune", "distill", "eval",
                   "gradsim", "description"},
               "config");
    if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
    take(j, "seeds", c.seeds);
    if (j.contains("corpus")) {
      const auto& s = j["corpus"];
      check_keys(s, {"seed", "language", "general", "n_train", "n_test", "n_pretrain_translation",
                     "n_general_pretrain_per_task", "n_general_eval_per_task", "rationale_fraction",
                     "pretrain_reorder_fraction", "translation_clauses"},
                 "corpus");
      take(s, "seed", c.corpus.seed);
      if (s.contains("language")) c.corpus.language = s["language"].get<corpus::LanguageSpec>();
      if (s.contains("general")) c.corpus.general = s["general"].get<corpus::GeneralTaskSpec>();
      take(s, "n_train", c.corpus.n_train);
      take(s, "n_test", c.corpus.n_test);
      take(s, "n_pretrain_translation", c.corpus.n_pretrain_translation);
      take(s, "n_general_pretrain_per_task", c.corpus.n_general_pretrain_per_task);
      take(s, "n_general_eval_per_task", c.corpus.n_general_eval_per_task);
      take(s, "rationale_fraction", c.corpus.rationale_fraction);
      take(s, "pretrain_reorder_fraction", c.corpus.pretrain_reorder_fraction);
      take(s, "translation_clauses", c.corpus.translation_clauses);
    }
    if (j.contains("model")) c.model = j["model"].get<model::ModelConfig>();
    if (j.contains("pretrain")) {
      const auto& s = j["pretrain"];
      check_keys(s, {"train", "floor_general", "floor_safety", "floor_emission"}, "pretrain");
      if (s.contains("train")) {
        nlohmann::json t = c.pretrain.train;
        t.merge_patch(s["train"]);
        c.pretrain.train = t.get<train::TrainConfig>();
      }
      take(s, "floor_general", c.pretrain.floor_general);
      take(s, "floor_safety", c.pretrain.floor_safety);
      take(s, "floor_emission", c.pretrain.floor_emission);
    }
    if (j.contains("finetune")) {
      const auto& s = j["finetune"];
      check_keys(s, {"regimes", "base", "per_regime"}, "finetune");
      take(s, "regimes", c.finetune.regimes);
      if (s.contains("base")) {
        nlohmann::json t = c.finetune.base;
        t.merge_patch(s["base"]);
        c.finetune.base = t.get<train::TrainConfig>();
      }
      if (s.contains("per_regime")) {
        for (const auto& [k, v] : s["per_regime"].items()) {
          train::parse_regime(k);
          c.finetune.per_regime[k] = v;
        }
      }
    }
    if (j.contains("distill")) {
      const auto& s = j["distill"];
      check_keys(s, {"max_rationale_len", "paraphrase_template", "teacher_checkpoint", "max_new_tokens"},
                 "distill");
      take(s, "max_rationale_len", c.distill.max_rationale_len);
      take(s, "paraphrase_template", c.distill.paraphrase_template);
      take(s, "teacher_checkpoint", c.distill.teacher_checkpoint);
      take(s, "max_new_tokens", c.distill.max_new_tokens);
    }
    if (j.contains("eval")) {
      const auto& s = j["eval"];
      check_keys(s, {"emission_samples", "max_new_tokens"}, "eval");
      take(s, "emission_samples", c.eval.emission_samples);
      take(s, "max_new_tokens", c.eval.max_new_tokens);
    }
    if (j.contains("gradsim")) {
      const auto& s = j["gradsim"];
      check_keys(s, {"k_per_direction", "checkpoint"}, "gradsim");
      take(s, "k_per_direction", c.gradsim.k_per_direction);
      take(s, "checkpoint", c.gradsim.checkpoint);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.corpus.language.finalize();
  c.validate();
  return c;
}

void apply_override(nlohmann::json& doc, const std::string& dotted_path, const std::string& value) {
  if (dotted_path.empty()) throw ConfigError("empty override path");
  nlohmann::json parsed;
  try {
    parsed = nlohmann::json::parse(value);
  } catch (const nlohmann::json::parse_error&) {
    parsed = value;
  }
  nlohmann::json* node = &doc;
  size_t start = 0;
  for (;;) {
    const size_t dot = dotted_path.find('.', start);
    const std::string key = dotted_path.substr(start, dot - start);
    if (key.empty()) throw ConfigError("bad override path '" + dotted_path + "'");
    if (!node->is_object()) {
      if (!node->is_null()) throw ConfigError("override path '" + dotted_path + "' crosses a leaf");
      *node = nlohmann::json::object();
    }
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  *node = parsed;
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace radis::pipeline
