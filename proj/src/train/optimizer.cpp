#include "radis/train/optimizer.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include "radis/util/error.hpp"

namespace radis::train {

AdamW::AdamW(size_t n, AdamWConfig cfg) : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {}

template <typename T>
void AdamW::step(std::span<T> params, std::span<const T> grad, double lr) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw UsageError("AdamW: parameter/gradient size mismatch");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (size_t i = 0; i < params.size(); ++i) {
    const double g = grad[i];
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g * g;
    const double update = (m_[i] / c1) / (std::sqrt(v_[i] / c2) + cfg_.eps);
    const double p = params[i];
    params[i] = static_cast<T>(p - lr * (update + cfg_.weight_decay * p));
  }
}

template void AdamW::step(std::span<float>, std::span<const float>, double);
template void AdamW::step(std::span<double>, std::span<const double>, double);

void AdamW::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write optimizer state " + path.string());
  const uint64_t n = m_.size();
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  out.write(reinterpret_cast<const char*>(&t_), sizeof t_);
  out.write(reinterpret_cast<const char*>(m_.data()), n * sizeof(double));
  out.write(reinterpret_cast<const char*>(v_.data()), n * sizeof(double));
}

void AdamW::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read optimizer state " + path.string());
  uint64_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  if (!in || n != m_.size()) throw CheckpointError("optimizer state size mismatch: " + path.string());
  in.read(reinterpret_cast<char*>(&t_), sizeof t_);
  in.read(reinterpret_cast<char*>(m_.data()), n * sizeof(double));
  in.read(reinterpret_cast<char*>(v_.data()), n * sizeof(double));
  if (!in) throw CheckpointError("truncated optimizer state: " + path.string());
}

double cosine_lr(double base_lr, int64_t step, int64_t total_steps) {
  if (total_steps <= 1) return base_lr;
  const double progress = static_cast<double>(step) / static_cast<double>(total_steps - 1);
  return 0.5 * base_lr * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace radis::train
