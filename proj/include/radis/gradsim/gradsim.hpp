#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "radis/corpus/dataset.hpp"
#include "radis/corpus/vocab.hpp"
#include "radis/model/transformer.hpp"

namespace radis::gradsim {

enum class LossTerm { kMt, kRadisReg, kSeqKdReg };
std::string_view term_name(LossTerm t);

// k records per direction, sampled without replacement by seed and kept in
// sampling order. Throws DataError for k = 0 or too few records.
std::vector<corpus::Record> build_probe_set(const std::vector<corpus::Record>& test, size_t k,
                                            uint64_t seed);

struct GradientFeature {
  LossTerm term = LossTerm::kMt;
  std::vector<std::vector<double>> layers;  // one flattened vector per block
  std::vector<double> norms;
};

// Gradient of the loss term summed over the probes, w.r.t. the trainable
// parameters, pooled per transformer block.
//   mt:        NLL of the y tokens
//   radis_reg: NLL of SEP . r . EOS given x . y  (needs "enriched")
//   seqkd_reg: NLL of y' . EOS                   (needs "pseudo")
// `scale` multiplies the loss. Throws DataError if a probe lacks the field
// the term needs.
template <typename T>
GradientFeature grad_feature(const model::Transformer<T>& model, const corpus::Vocab& vocab,
                             LossTerm term, const std::vector<corpus::Record>& probes,
                             double scale = 1.0);

// Per-layer cosine; nullopt where either vector has zero norm. Throws
// DataError when layer sets or lengths differ.
std::vector<std::optional<double>> layer_cosine(const GradientFeature& a, const GradientFeature& b);

struct SignCounts {
  int negative = 0;
  int positive = 0;
  std::vector<int> undefined;  // layer indices
};

SignCounts count_signs(const std::vector<std::optional<double>>& cosines);

struct RegimeCosines {
  std::string regime;
  std::vector<std::optional<double>> cosine;
  std::vector<double> norm_a, norm_b;
};

// regime,layer,cosine,norm_a,norm_b. Undefined cosines are written empty.
std::string conflict_csv(const std::vector<RegimeCosines>& rows);
std::string conflict_svg(const std::vector<RegimeCosines>& rows);
std::map<std::string, SignCounts> conflict_summary(const std::vector<RegimeCosines>& rows);

}  // namespace radis::gradsim
