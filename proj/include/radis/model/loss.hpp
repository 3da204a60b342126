#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "radis/model/transformer.hpp"

namespace radis::model {

// Token i of the sequence is predicted from logits row i-1, so mask[0] must
// be 0. per_token[0] is always 0.
struct NllResult {
  double total = 0.0;
  std::vector<double> per_token;
};

template <typename T>
NllResult nll(const RowMatrix<T>& logits, std::span<const int> targets,
              std::span<const uint8_t> mask);

// d(scale * masked NLL sum)/d(logits).
template <typename T>
RowMatrix<T> nll_backward(const RowMatrix<T>& logits, std::span<const int> targets,
                          std::span<const uint8_t> mask, double scale);

}  // namespace radis::model
