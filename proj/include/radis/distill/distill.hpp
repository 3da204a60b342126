#pragma once

#include <array>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "radis/corpus/dataset.hpp"
#include "radis/corpus/rationale.hpp"
#include "radis/corpus/vocab.hpp"
#include "radis/model/config.hpp"
#include "radis/model/transformer.hpp"

namespace radis::distill {

inline constexpr int kMaxRationaleLen = 64;

struct Rationale {
  std::vector<int> tokens;
  std::string emitted_by;
  bool truncated = false;  // cut at max_rationale_len or the sequence cap
  std::string skipped;     // non-empty when the prefix did not fit

  bool empty() const { return tokens.empty(); }
};

// Continues BOS . instruction . y . SEP with the frozen model. The result
// stops before EOS, is capped at max_len tokens and has special tokens
// removed. An over-length prefix yields an empty rationale with `skipped`
// set.
Rationale generate_rationale(const model::Transformer<float>& model, const corpus::Vocab& vocab,
                             std::span<const int> instruction, std::span<const int> reference,
                             const model::DecodeConfig& decode, const std::string& emitted_by,
                             int max_len = kMaxRationaleLen);

struct EnrichedExample {
  std::vector<int> instruction;
  std::vector<int> reference;  // y, length T
  std::vector<int> rationale;  // r, length R (after truncation)
  std::vector<int> response;   // y . SEP . r, or y when R = 0
  bool truncated = false;

  int boundary() const { return static_cast<int>(reference.size()); }
};

// Truncates r so that BOS . instruction . response . EOS fits max_seq_len.
EnrichedExample enrich(const corpus::Vocab& vocab, std::span<const int> instruction,
                       std::span<const int> reference, const Rationale& rationale, int max_seq_len);

// Adds rationale/enriched/boundary_T/rationale_len_R/emitted_by/truncated
// to every record. Order and ids are preserved; generation runs in parallel.
std::vector<corpus::Record> synthesize_radis(const model::Transformer<float>& model,
                                             const corpus::Vocab& vocab,
                                             const std::vector<corpus::Record>& records,
                                             const model::DecodeConfig& decode,
                                             const std::string& emitted_by,
                                             int max_rationale_len = kMaxRationaleLen);

// Same contract with a different model writing the rationales.
inline std::vector<corpus::Record> generate_teacher_rationales(
    const model::Transformer<float>& teacher, const corpus::Vocab& vocab,
    const std::vector<corpus::Record>& records, const model::DecodeConfig& decode,
    const std::string& teacher_id, int max_rationale_len = kMaxRationaleLen) {
  return synthesize_radis(teacher, vocab, records, decode, teacher_id, max_rationale_len);
}

// Every enriched record replaced by its plain (x, y) form.
std::vector<corpus::Record> strip_rationales(const std::vector<corpus::Record>& records);

// Adds "pseudo": the model's complete greedy response to the instruction,
// stored verbatim (EOS removed).
std::vector<corpus::Record> synthesize_seqkd(const model::Transformer<float>& model,
                                             const corpus::Vocab& vocab,
                                             const std::vector<corpus::Record>& records,
                                             const model::DecodeConfig& decode);

// Default rewriting prompt. {instruction} is the original instruction
// without role markers, {reference} the reference response.
inline constexpr const char* kParaphraseTemplate = "{instruction} Rewrite reference : {reference}";

// Replaces "reference" by the model's rewrite (answer part, before SEP) and
// keeps the original in "original_reference". An empty rewrite keeps y and
// records the reason in "paraphrase_fallback".
std::vector<corpus::Record> synthesize_sdft(const model::Transformer<float>& model,
                                            const corpus::Vocab& vocab,
                                            const std::vector<corpus::Record>& records,
                                            const std::string& paraphrase_template,
                                            const model::DecodeConfig& decode);

// Categories whose trigger keyword occurs in the rationale.
std::vector<corpus::RationaleCategory> tag_rationale(const std::vector<std::string>& rationale);

struct RationaleStats {
  size_t n = 0;
  size_t emitted = 0;
  double emission_rate = 0.0;
  double mean_len = 0.0;          // over emitted rationales
  size_t truncated = 0;
  std::array<double, corpus::kNumRationaleCategories> category_pct{};  // of emitted
};

RationaleStats rationale_stats(const std::vector<corpus::Record>& records);
nlohmann::json to_json(const RationaleStats& s);
std::string to_csv(const RationaleStats& s);

}  // namespace radis::distill
