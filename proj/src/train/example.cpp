#include "radis/train/example.hpp"

#include "radis/model/loss.hpp"
#include "radis/util/error.hpp"

namespace radis::train {

Example make_example(const corpus::Vocab& vocab, std::span<const int> instruction,
                     std::span<const int> response, int reference_len) {
  if (reference_len < 0 || static_cast<size_t>(reference_len) > response.size()) {
    throw DataError("example: boundary T=" + std::to_string(reference_len) +
                    " exceeds response length " + std::to_string(response.size()));
  }
  Example ex;
  ex.tokens.reserve(instruction.size() + response.size() + 2);
  ex.tokens.push_back(vocab.bos());
  ex.tokens.insert(ex.tokens.end(), instruction.begin(), instruction.end());
  ex.response_start = static_cast<int>(ex.tokens.size());
  ex.tokens.insert(ex.tokens.end(), response.begin(), response.end());
  ex.tokens.push_back(vocab.eos());
  ex.mask.assign(ex.tokens.size(), 0);
  for (size_t i = ex.response_start; i < ex.tokens.size(); ++i) ex.mask[i] = 1;
  ex.rationale_start = ex.response_start + reference_len;
  return ex;
}

Example example_from_record(const corpus::Record& r, const corpus::Vocab& vocab,
                            const char* field) {
  const auto instruction = vocab.encode(r.at("instruction").get<std::string>());
  const auto reference = vocab.encode(r.at("reference").get<std::string>());
  const std::string name = field;
  if (name == "reference") return make_example(vocab, instruction, reference, static_cast<int>(reference.size()));
  auto it = r.find(name);
  if (it == r.end() || it->is_null()) {
    if (name != "enriched") throw DataError("record " + r.at("id").dump() + " lacks \"" + name + "\"");
    return make_example(vocab, instruction, reference, static_cast<int>(reference.size()));
  }
  const auto response = vocab.encode(it->get<std::string>());
  if (name == "enriched") {
    int t = r.contains("boundary_T") ? r["boundary_T"].get<int>() : static_cast<int>(reference.size());
    return make_example(vocab, instruction, response, t);
  }
  return make_example(vocab, instruction, response, static_cast<int>(response.size()));
}

template <typename T>
LossBreakdown radis_loss(const model::Transformer<T>& model, const Example& ex) {
  if (ex.rationale_start < ex.response_start ||
      ex.rationale_start >= static_cast<int>(ex.tokens.size())) {
    throw DataError("radis_loss: boundary outside the sequence");
  }
  const auto logits = model::forward(model, std::span<const int>(ex.tokens));
  const auto res = model::nll(logits, std::span<const int>(ex.tokens),
                              std::span<const uint8_t>(ex.mask));
  LossBreakdown out;
  out.total = res.total;
  for (size_t i = 0; i < ex.tokens.size(); ++i) {
    if (!ex.mask[i]) continue;
    if (static_cast<int>(i) < ex.rationale_start) {
      out.mt_term += res.per_token[i];
      ++out.t_tokens;
    } else {
      out.rationale_term += res.per_token[i];
      ++out.r_tokens;
    }
  }
  return out;
}

template LossBreakdown radis_loss(const model::Transformer<float>&, const Example&);
template LossBreakdown radis_loss(const model::Transformer<double>&, const Example&);

}  // namespace radis::train
