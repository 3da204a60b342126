#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "radis/corpus/dataset.hpp"
#include "radis/corpus/vocab.hpp"
#include "radis/model/config.hpp"
#include "radis/model/transformer.hpp"

namespace radis::eval {

// A generated response split at the first SEP. Tokens after EOS are
// dropped; nothing else is.
struct ParsedResponse {
  std::vector<int> answer;
  std::vector<int> rationale;
  bool has_sep = false;
  bool has_eos = false;
};

ParsedResponse parse_response(const std::vector<int>& generated, const corpus::Vocab& vocab);

// Greedy responses to every record's instruction, in input order.
std::vector<std::vector<int>> respond(const model::Transformer<float>& model,
                                      const corpus::Vocab& vocab,
                                      const std::vector<corpus::Record>& records,
                                      const model::DecodeConfig& decode);

// F1 between token multisets; 1 when both are empty.
double token_f1(const std::vector<int>& hyp, const std::vector<int>& ref);

struct TranslationScore {
  size_t n = 0;
  double exact_match = 0.0;
  double token_f1 = 0.0;
};

struct TranslationReport {
  std::map<std::string, TranslationScore> by_direction;
  TranslationScore overall;
};

TranslationReport eval_translation(const model::Transformer<float>& model, const corpus::Vocab& vocab,
                                   const std::vector<corpus::Record>& test,
                                   const model::DecodeConfig& decode);

struct GeneralReport {
  std::map<std::string, double> accuracy;  // per task
  double mean = 0.0;                       // over tasks other than refuse
  std::optional<double> rp;                // 100 * mean / backbone mean
};

// Accuracy is exact match of the answer part against the stored reference.
// Refuse-task records are scored by eval_safety, not here.
GeneralReport eval_general(const model::Transformer<float>& model, const corpus::Vocab& vocab,
                           const std::vector<corpus::Record>& suite,
                           const model::DecodeConfig& decode);

// Throws DependencyError when the backbone mean is missing or zero.
double retention(double general_mean, std::optional<double> backbone_mean);

// Fraction of responses that begin with the refusal sequence.
double eval_safety(const model::Transformer<float>& model, const corpus::Vocab& vocab,
                   const std::vector<corpus::Record>& unsafe, const model::DecodeConfig& decode);

struct EmissionCount {
  size_t emitted = 0;
  size_t total = 0;
  double rate() const { return total ? static_cast<double>(emitted) / total : 0.0; }
};

// Responses with SEP followed by at least one non-EOS token, over the first
// n_samples records (callers shuffle).
EmissionCount rationale_emission_rate(const model::Transformer<float>& model,
                                      const corpus::Vocab& vocab,
                                      const std::vector<corpus::Record>& pairs, size_t n_samples,
                                      const model::DecodeConfig& decode);

struct RunReport {
  std::string run_id;
  std::string regime;
  uint64_t seed = 0;
  TranslationReport translation;
  GeneralReport general;
  double safety = 0.0;
  EmissionCount emission;
  nlohmann::json meta = nlohmann::json::object();
};

nlohmann::json to_json(const RunReport& r);
RunReport report_from_json(const nlohmann::json& j);

// Flat CSV header/row pair. Columns are fixed given the task and direction
// names present.
std::string csv_header(const RunReport& r);
std::string csv_row(const RunReport& r);

}  // namespace radis::eval
