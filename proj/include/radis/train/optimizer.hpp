#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace radis::train {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// Adam with decoupled weight decay. Moments are kept in double.
class AdamW {
 public:
  AdamW(size_t n, AdamWConfig cfg = {});

  template <typename T>
  void step(std::span<T> params, std::span<const T> grad, double lr);

  size_t size() const { return m_.size(); }
  int64_t steps() const { return t_; }

  void save(const std::filesystem::path& path) const;
  // Throws CheckpointError if the file is unreadable or sized differently.
  void load(const std::filesystem::path& path);

 private:
  AdamWConfig cfg_;
  std::vector<double> m_, v_;
  int64_t t_ = 0;
};

// Cosine annealing from base_lr at step 0 to 0 at step total_steps - 1.
double cosine_lr(double base_lr, int64_t step, int64_t total_steps);

}  // namespace radis::train
