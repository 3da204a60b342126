#pragma once

#include <span>
#include <vector>

#include "radis/corpus/dataset.hpp"
#include "radis/corpus/vocab.hpp"
#include "radis/model/transformer.hpp"

namespace radis::train {

// BOS . instruction . response . EOS with the loss restricted to the
// response and the terminal EOS.
struct Example {
  std::vector<int> tokens;
  std::vector<uint8_t> mask;
  int response_start = 0;
  // First target of the rationale term: the SEP after y, or the EOS when
  // the example has no rationale.
  int rationale_start = 0;

  int reference_len() const { return rationale_start - response_start; }
};

// `reference_len` is T, the number of leading response tokens that belong
// to y. Throws DataError when T exceeds the response.
Example make_example(const corpus::Vocab& vocab, std::span<const int> instruction,
                     std::span<const int> response, int reference_len);

// Response taken from record[field] when present and non-null, otherwise
// from "reference". T is always the length of "reference" unless `field`
// is a pseudo-target, in which case T is the whole response.
Example example_from_record(const corpus::Record& r, const corpus::Vocab& vocab,
                            const char* field = "enriched");

// Per-example loss split into the reference term (y tokens) and the
// rationale term (SEP . r . EOS). Sums, not means.
struct LossBreakdown {
  double total = 0.0;
  double mt_term = 0.0;
  double rationale_term = 0.0;
  size_t t_tokens = 0;
  size_t r_tokens = 0;
};

template <typename T>
LossBreakdown radis_loss(const model::Transformer<T>& model, const Example& ex);

}  // namespace radis::train
