#include "radis/model/loss.hpp"

#include <cmath>

#include "radis/util/error.hpp"

namespace radis::model {
namespace {

template <typename T>
void check_shapes(const RowMatrix<T>& logits, std::span<const int> targets,
                  std::span<const uint8_t> mask) {
  if (static_cast<size_t>(logits.rows()) != targets.size() || targets.size() != mask.size()) {
    throw DataError("nll: logits/targets/mask length mismatch");
  }
  if (!mask.empty() && mask[0] != 0) throw DataError("nll: mask[0] has no predicting row");
  for (uint8_t m : mask) {
    if (m > 1) throw DataError("nll: mask must be 0/1");
  }
  for (int t : targets) {
    if (t < 0 || t >= logits.cols()) throw DataError("nll: target id out of range");
  }
}

template <typename T>
double log_sum_exp(const RowMatrix<T>& logits, Eigen::Index row) {
  const double mx = static_cast<double>(logits.row(row).maxCoeff());
  double sum = 0.0;
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    sum += std::exp(static_cast<double>(logits(row, j)) - mx);
  }
  return mx + std::log(sum);
}

}  // namespace

template <typename T>
NllResult nll(const RowMatrix<T>& logits, std::span<const int> targets,
              std::span<const uint8_t> mask) {
  check_shapes(logits, targets, mask);
  NllResult out;
  out.per_token.assign(targets.size(), 0.0);
  for (size_t i = 1; i < targets.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i - 1);
    out.per_token[i] = log_sum_exp(logits, row) - static_cast<double>(logits(row, targets[i]));
    if (mask[i]) out.total += out.per_token[i];
  }
  return out;
}

template <typename T>
RowMatrix<T> nll_backward(const RowMatrix<T>& logits, std::span<const int> targets,
                          std::span<const uint8_t> mask, double scale) {
  check_shapes(logits, targets, mask);
  RowMatrix<T> d = RowMatrix<T>::Zero(logits.rows(), logits.cols());
  for (size_t i = 1; i < targets.size(); ++i) {
    if (!mask[i]) continue;
    const auto row = static_cast<Eigen::Index>(i - 1);
    const double lse = log_sum_exp(logits, row);
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      d(row, j) = static_cast<T>(scale * std::exp(static_cast<double>(logits(row, j)) - lse));
    }
    d(row, targets[i]) -= static_cast<T>(scale);
  }
  return d;
}

template NllResult nll(const RowMatrix<float>&, std::span<const int>, std::span<const uint8_t>);
template NllResult nll(const RowMatrix<double>&, std::span<const int>, std::span<const uint8_t>);
template RowMatrix<float> nll_backward(const RowMatrix<float>&, std::span<const int>,
                                       std::span<const uint8_t>, double);
template RowMatrix<double> nll_backward(const RowMatrix<double>&, std::span<const int>,
                                        std::span<const uint8_t>, double);

}  // namespace radis::model
