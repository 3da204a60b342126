#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "radis/corpus/dataset.hpp"
#include "radis/corpus/general.hpp"
#include "radis/corpus/language.hpp"
#include "radis/corpus/records.hpp"
#include "radis/corpus/templates.hpp"
#include "radis/corpus/vocab.hpp"
#include "radis/model/config.hpp"
#include "radis/model/transformer.hpp"
#include "radis/train/example.hpp"
#include "radis/util/rng.hpp"

namespace radis::testing {

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("radis_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline corpus::LanguageSpec small_language(int v = 8) {
  corpus::LanguageSpec s;
  s.vocab_size = v;
  s.max_len = 4;
  s.finalize();
  return s;
}

inline corpus::Vocab small_vocab(const corpus::LanguageSpec& lang) {
  corpus::GeneralTaskSpec tasks;
  tasks.content_vocab_size = lang.vocab_size;
  return corpus::build_vocab(lang, tasks);
}

inline model::ModelConfig tiny_model(const corpus::Vocab& v, int layers = 2) {
  model::ModelConfig c;
  c.n_layers = layers;
  c.n_heads = 2;
  c.d_model = 16;
  c.d_ff = 32;
  c.max_seq_len = 64;
  c.vocab_size = static_cast<int>(v.size());
  return c;
}

// Translation records with hand-made rationales of varying length, enriched
// the same way synthesis does.
inline std::vector<corpus::Record> enriched_records(const corpus::LanguageSpec& lang,
                                                    const corpus::Vocab& v, size_t n,
                                                    uint64_t seed, bool empty_rationales = false) {
  const auto pairs = corpus::gen_translation_splits(lang, {n}, seed)[0];
  Rng rng(seed);
  std::vector<corpus::Record> out;
  for (const auto& p : pairs) {
    const int t = static_cast<int>(rng.range(1, corpus::kNumTemplates));
    auto r = corpus::translation_record(static_cast<int>(out.size()), p, t, v);
    std::vector<std::string> rat;
    if (!empty_rationales) {
      rat = {"RATIONALE", ":"};
      const int extra = static_cast<int>(rng.range(0, 6));
      for (int i = 0; i < extra; ++i) rat.push_back(p.x[i % p.x.size()]);
    }
    r["rationale"] = rat.empty() ? nlohmann::json(nullptr) : nlohmann::json(corpus::join_tokens(rat));
    r["enriched"] = corpus::join_response(p.y, rat);
    r["boundary_T"] = p.y.size();
    r["rationale_len_R"] = rat.size();
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<train::Example> to_examples(const std::vector<corpus::Record>& recs,
                                               const corpus::Vocab& v,
                                               const char* field = "enriched") {
  std::vector<train::Example> out;
  for (const auto& r : recs) out.push_back(train::example_from_record(r, v, field));
  return out;
}

inline std::vector<const train::Example*> pointers(const std::vector<train::Example>& xs) {
  std::vector<const train::Example*> out;
  for (const auto& x : xs) out.push_back(&x);
  return out;
}

// A model whose greedy next token depends only on the position: blocks
// write nothing to the residual stream, position p embeds as the unit
// vector e_p, and the head maps e_p to script[p] (EOS where unscripted).
inline model::Transformer<float> scripted_model(const corpus::Vocab& v,
                                                const std::vector<std::pair<int, int>>& script,
                                                int max_seq_len = 48) {
  model::ModelConfig c;
  c.n_layers = 1;
  c.n_heads = 2;
  c.d_model = 128;
  c.d_ff = 16;
  c.max_seq_len = max_seq_len;
  c.vocab_size = static_cast<int>(v.size());
  model::Transformer<float> m(c, 1);
  auto p = m.mutable_params();
  const auto& lay = m.layout();
  const int d = c.d_model, n_vocab = c.vocab_size;
  auto zero = [&](size_t off, size_t n) { std::fill(p.begin() + off, p.begin() + off + n, 0.0f); };
  auto zero_linear = [&](const model::LinearLayout& l) {
    zero(l.weight, size_t(l.in) * l.out);
    if (l.bias != model::kNoBias) zero(l.bias, l.out);
  };
  for (const auto& b : lay.blocks) {
    zero_linear(b.attn_out);
    zero_linear(b.proj);
  }
  zero(lay.wte, size_t(n_vocab) * d);
  zero(lay.wpe, size_t(max_seq_len) * d);
  for (int pos = 0; pos < max_seq_len; ++pos) p[lay.wpe + size_t(pos) * d + pos] = 1.0f;
  zero_linear(lay.lm_head);
  std::vector<int> target(max_seq_len, v.eos());
  for (auto [pos, tok] : script) target.at(pos) = tok;
  for (int pos = 0; pos < max_seq_len; ++pos) {
    p[lay.lm_head.weight + size_t(pos) * n_vocab + target[pos]] = 10.0f;
  }
  return m;
}

}  // namespace radis::testing
