#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "radis/model/config.hpp"

namespace radis::model {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;
// Heap buffers read through Eigen maps; a fixed base alignment keeps vector
// kernels summing in the same order on every run.
template <typename T>
using AlignedVector = std::vector<T, Eigen::aligned_allocator<T>>;

inline constexpr size_t kNoBias = static_cast<size_t>(-1);

// A linear map y = x W + b with W stored row-major as [in, out].
struct LinearLayout {
  size_t weight = 0;
  size_t bias = kNoBias;
  int in = 0;
  int out = 0;
};

struct BlockLayout {
  size_t ln1_gain = 0, ln1_bias = 0;
  LinearLayout qkv, attn_out;
  size_t ln2_gain = 0, ln2_bias = 0;
  LinearLayout fc, proj;
};

struct TensorInfo {
  std::string name;
  size_t offset = 0;
  size_t size = 0;
  int layer = -1;  // -1 for tensors outside the transformer blocks
};

// Offsets of every tensor in the flat base parameter vector.
struct ParamLayout {
  size_t wte = 0, wpe = 0;
  std::vector<BlockLayout> blocks;
  size_t lnf_gain = 0, lnf_bias = 0;
  LinearLayout lm_head;
  size_t total = 0;
  std::vector<TensorInfo> tensors;

  // Every linear map, block-major (qkv, attn_out, fc, proj), then lm_head.
  std::vector<LinearLayout> linears() const;
};

ParamLayout make_layout(const ModelConfig& cfg);

// Low-rank factors A [in, r] and B [r, out] for one linear map.
struct AdapterLayout {
  size_t a = 0;
  size_t b = 0;
  int in = 0;
  int out = 0;
  int layer = -1;
};

template <typename T>
class Transformer {
 public:
  // Deterministic initialization from seed.
  Transformer(const ModelConfig& cfg, uint64_t seed);
  Transformer(const ModelConfig& cfg, std::vector<T> params);

  const ModelConfig& config() const { return cfg_; }
  const ParamLayout& layout() const { return layout_; }
  std::span<const T> params() const { return params_; }
  std::span<T> mutable_params() { return params_; }

  bool has_adapters() const { return lora_.has_value(); }
  const LoraConfig& lora() const;
  const std::vector<AdapterLayout>& adapters() const { return adapters_; }
  std::span<const T> adapter_params() const { return adapter_params_; }
  std::span<T> mutable_adapter_params() { return adapter_params_; }

  // Adapters start with B = 0, so logits are unchanged at attach time.
  void attach_lora(const LoraConfig& lora, uint64_t seed);
  // Restores adapters from stored values (checkpoint load).
  void attach_lora(const LoraConfig& lora, std::vector<T> adapter_params);
  // Folds W += scale * A B into the dense weights and drops the adapters.
  void merge_lora();

  // Adapter parameters when attached, otherwise the dense parameters.
  std::span<const T> trainable() const;
  std::span<T> mutable_trainable();
  // Trainable tensors that belong to transformer block `layer`.
  std::vector<std::pair<size_t, size_t>> trainable_ranges_for_layer(int layer) const;

  template <typename U>
  Transformer<U> cast() const;

  // FNV-1a over the float32 image of every parameter (base, then adapters).
  uint64_t checksum() const;

 private:
  template <typename U>
  friend class Transformer;

  ModelConfig cfg_;
  ParamLayout layout_;
  AlignedVector<T> params_;
  std::optional<LoraConfig> lora_;
  std::vector<AdapterLayout> adapters_;
  AlignedVector<T> adapter_params_;
};

template <typename T>
struct BlockTape {
  RowMatrix<T> x;  // block input
  RowMatrix<T> a;  // ln1 output
  std::vector<T> mean1, rstd1;
  RowMatrix<T> qkv;
  std::vector<RowMatrix<T>> probs;  // per head, [L, L]
  RowMatrix<T> z;                   // concatenated head outputs
  RowMatrix<T> h;                   // residual after attention
  RowMatrix<T> m;                   // ln2 output
  std::vector<T> mean2, rstd2;
  RowMatrix<T> f;  // fc pre-activation
  RowMatrix<T> g;  // gelu output
  RowMatrix<T> qkv_xa, out_xa, fc_xa, proj_xa;
};

// Activations recorded by forward() for a later backward().
template <typename T>
struct Tape {
  bool recorded = false;
  std::vector<int> tokens;
  std::vector<BlockTape<T>> blocks;
  RowMatrix<T> hf;  // final residual stream
  RowMatrix<T> n;   // final norm output
  std::vector<T> meanf, rstdf;
  RowMatrix<T> head_xa;
};

// Logits [L, vocab]. Throws LengthError-style DataError on over-length input.
template <typename T>
RowMatrix<T> forward(const Transformer<T>& model, std::span<const int> tokens,
                     Tape<T>* tape = nullptr);

// Independent forward passes over several sequences, run in parallel.
template <typename T>
std::vector<RowMatrix<T>> forward_batch(const Transformer<T>& model,
                                        const std::vector<std::vector<int>>& batch);

// Accumulates d(loss)/d(trainable) into grad given d(loss)/d(logits).
// Consumes the tape; a second call without a new forward is a UsageError.
template <typename T>
void backward(const Transformer<T>& model, Tape<T>& tape,
              const RowMatrix<T>& dlogits, std::span<T> grad);

// Incremental decoding state (keys and values per block).
template <typename T>
class KvCache {
 public:
  explicit KvCache(const Transformer<T>& model);
  int length() const { return length_; }
  // Appends one token and returns its next-token logits.
  RowVector<T> step(int token);

 private:
  const Transformer<T>& model_;
  std::vector<RowMatrix<T>> keys_, values_;
  int length_ = 0;
};

}  // namespace radis::model
