#pragma once

#include <span>
#include <vector>

#include "radis/model/config.hpp"
#include "radis/model/transformer.hpp"

namespace radis::model {

// Index of the largest entry; ties go to the lowest index.
template <typename T>
int argmax(const RowVector<T>& row);

// Continuation of prefix. If a stop token is produced it is the last element
// of the result. Generation also ends at max_new_tokens or when the sequence
// reaches max_seq_len.
template <typename T>
std::vector<int> generate(const Transformer<T>& model, std::span<const int> prefix,
                          const DecodeConfig& decode);

}  // namespace radis::model
