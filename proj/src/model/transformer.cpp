#include "radis/model/transformer.hpp"

#include <cmath>
#include <limits>

#include "radis/util/error.hpp"
#include "radis/util/hash.hpp"
#include "radis/util/parallel.hpp"
#include "radis/util/rng.hpp"

namespace radis::model {
namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr double kInitStd = 0.02;

template <typename T>
using CMap = Eigen::Map<const RowMatrix<T>>;
template <typename T>
using MMap = Eigen::Map<RowMatrix<T>>;

LinearLayout add_linear(ParamLayout& layout, const std::string& name, int layer,
                        int in, int out, bool bias) {
  LinearLayout lin;
  lin.in = in;
  lin.out = out;
  lin.weight = layout.total;
  layout.tensors.push_back({name + ".weight", layout.total, size_t(in) * out, layer});
  layout.total += size_t(in) * out;
  if (bias) {
    lin.bias = layout.total;
    layout.tensors.push_back({name + ".bias", layout.total, size_t(out), layer});
    layout.total += out;
  }
  return lin;
}

size_t add_vector(ParamLayout& layout, const std::string& name, int layer, size_t n) {
  const size_t off = layout.total;
  layout.tensors.push_back({name, off, n, layer});
  layout.total += n;
  return off;
}

}  // namespace

std::vector<LinearLayout> ParamLayout::linears() const {
  std::vector<LinearLayout> out;
  for (const auto& b : blocks) {
    out.push_back(b.qkv);
    out.push_back(b.attn_out);
    out.push_back(b.fc);
    out.push_back(b.proj);
  }
  out.push_back(lm_head);
  return out;
}

ParamLayout make_layout(const ModelConfig& cfg) {
  cfg.validate();
  ParamLayout layout;
  const int d = cfg.d_model;
  layout.wte = add_vector(layout, "wte", -1, size_t(cfg.vocab_size) * d);
  layout.wpe = add_vector(layout, "wpe", -1, size_t(cfg.max_seq_len) * d);
  for (int l = 0; l < cfg.n_layers; ++l) {
    const std::string p = "block" + std::to_string(l) + ".";
    BlockLayout b;
    b.ln1_gain = add_vector(layout, p + "ln1.gain", l, d);
    b.ln1_bias = add_vector(layout, p + "ln1.bias", l, d);
    b.qkv = add_linear(layout, p + "attn.qkv", l, d, 3 * d, true);
    b.attn_out = add_linear(layout, p + "attn.out", l, d, d, true);
    b.ln2_gain = add_vector(layout, p + "ln2.gain", l, d);
    b.ln2_bias = add_vector(layout, p + "ln2.bias", l, d);
    b.fc = add_linear(layout, p + "mlp.fc", l, d, cfg.d_ff, true);
    b.proj = add_linear(layout, p + "mlp.proj", l, cfg.d_ff, d, true);
    layout.blocks.push_back(b);
  }
  layout.lnf_gain = add_vector(layout, "lnf.gain", -1, d);
  layout.lnf_bias = add_vector(layout, "lnf.bias", -1, d);
  layout.lm_head = add_linear(layout, "lm_head", -1, d, cfg.vocab_size, false);
  return layout;
}

// ---------------------------------------------------------------------------
// Transformer

template <typename T>
Transformer<T>::Transformer(const ModelConfig& cfg, uint64_t seed)
    : cfg_(cfg), layout_(make_layout(cfg)), params_(layout_.total, T(0)) {
  Rng rng(derive_seed(seed, "init"));
  const double proj_std = kInitStd / std::sqrt(2.0 * cfg.n_layers);
  auto fill_normal = [&](size_t off, size_t n, double std) {
    for (size_t i = 0; i < n; ++i) params_[off + i] = static_cast<T>(rng.normal() * std);
  };
  auto fill_ones = [&](size_t off, size_t n) {
    for (size_t i = 0; i < n; ++i) params_[off + i] = T(1);
  };
  const size_t d = cfg.d_model;
  fill_normal(layout_.wte, size_t(cfg.vocab_size) * d, kInitStd);
  fill_normal(layout_.wpe, size_t(cfg.max_seq_len) * d, kInitStd);
  for (const auto& b : layout_.blocks) {
    fill_ones(b.ln1_gain, d);
    fill_ones(b.ln2_gain, d);
    fill_normal(b.qkv.weight, d * 3 * d, kInitStd);
    fill_normal(b.attn_out.weight, d * d, proj_std);
    fill_normal(b.fc.weight, d * cfg.d_ff, kInitStd);
    fill_normal(b.proj.weight, size_t(cfg.d_ff) * d, proj_std);
  }
  fill_ones(layout_.lnf_gain, d);
  fill_normal(layout_.lm_head.weight, d * cfg.vocab_size, kInitStd);
}

template <typename T>
Transformer<T>::Transformer(const ModelConfig& cfg, std::vector<T> params)
    : cfg_(cfg), layout_(make_layout(cfg)), params_(params.begin(), params.end()) {
  if (params_.size() != layout_.total) {
    throw CheckpointError("parameter vector size " + std::to_string(params_.size()) +
                          " does not match config (" + std::to_string(layout_.total) + ")");
  }
}

template <typename T>
const LoraConfig& Transformer<T>::lora() const {
  if (!lora_) throw UsageError("model has no adapters attached");
  return *lora_;
}

template <typename T>
void Transformer<T>::attach_lora(const LoraConfig& lora, uint64_t seed) {
  if (lora_) throw UsageError("attach_lora: adapters already attached");
  lora.validate();
  const auto linears = layout_.linears();
  std::vector<T> values;
  Rng rng(derive_seed(seed, "lora"));
  for (const auto& lin : linears) {
    // A ~ U(-1/sqrt(in), 1/sqrt(in)), B = 0.
    const double bound = 1.0 / std::sqrt(static_cast<double>(lin.in));
    for (size_t i = 0; i < size_t(lin.in) * lora.rank; ++i) {
      values.push_back(static_cast<T>((2.0 * rng.uniform() - 1.0) * bound));
    }
    values.insert(values.end(), size_t(lora.rank) * lin.out, T(0));
  }
  attach_lora(lora, std::move(values));
}

template <typename T>
void Transformer<T>::attach_lora(const LoraConfig& lora, std::vector<T> adapter_params) {
  if (lora_) throw UsageError("attach_lora: adapters already attached");
  lora.validate();
  const auto linears = layout_.linears();
  std::vector<AdapterLayout> adapters;
  size_t off = 0;
  for (size_t i = 0; i < linears.size(); ++i) {
    AdapterLayout a;
    a.in = linears[i].in;
    a.out = linears[i].out;
    a.layer = i + 1 < linears.size() ? static_cast<int>(i / 4) : -1;
    a.a = off;
    off += size_t(a.in) * lora.rank;
    a.b = off;
    off += size_t(lora.rank) * a.out;
    adapters.push_back(a);
  }
  if (adapter_params.size() != off) {
    throw CheckpointError("adapter vector size mismatch");
  }
  lora_ = lora;
  adapters_ = std::move(adapters);
  adapter_params_.assign(adapter_params.begin(), adapter_params.end());
}

template <typename T>
void Transformer<T>::merge_lora() {
  if (!lora_) throw UsageError("merge_lora: no adapters attached");
  const auto linears = layout_.linears();
  const int r = lora_->rank;
  const T scale = static_cast<T>(lora_->scale());
  for (size_t i = 0; i < linears.size(); ++i) {
    const auto& lin = linears[i];
    const auto& ad = adapters_[i];
    CMap<T> a(adapter_params_.data() + ad.a, lin.in, r);
    CMap<T> b(adapter_params_.data() + ad.b, r, lin.out);
    MMap<T> w(params_.data() + lin.weight, lin.in, lin.out);
    w.noalias() += scale * (a * b);
  }
  lora_.reset();
  adapters_.clear();
  adapter_params_.clear();
}

template <typename T>
std::span<const T> Transformer<T>::trainable() const {
  return lora_ ? std::span<const T>(adapter_params_) : std::span<const T>(params_);
}

template <typename T>
std::span<T> Transformer<T>::mutable_trainable() {
  return lora_ ? std::span<T>(adapter_params_) : std::span<T>(params_);
}

template <typename T>
std::vector<std::pair<size_t, size_t>> Transformer<T>::trainable_ranges_for_layer(
    int layer) const {
  std::vector<std::pair<size_t, size_t>> out;
  if (lora_) {
    for (const auto& ad : adapters_) {
      if (ad.layer != layer) continue;
      out.emplace_back(ad.a, size_t(ad.in) * lora_->rank);
      out.emplace_back(ad.b, size_t(lora_->rank) * ad.out);
    }
  } else {
    for (const auto& t : layout_.tensors) {
      if (t.layer == layer) out.emplace_back(t.offset, t.size);
    }
  }
  return out;
}

template <typename T>
template <typename U>
Transformer<U> Transformer<T>::cast() const {
  std::vector<U> p(params_.begin(), params_.end());
  Transformer<U> out(cfg_, std::move(p));
  if (lora_) {
    std::vector<U> a(adapter_params_.begin(), adapter_params_.end());
    out.attach_lora(*lora_, std::move(a));
  }
  return out;
}

template <typename T>
uint64_t Transformer<T>::checksum() const {
  Fnv1a h;
  for (T v : params_) {
    const float f = static_cast<float>(v);
    h.update(&f, sizeof(f));
  }
  for (T v : adapter_params_) {
    const float f = static_cast<float>(v);
    h.update(&f, sizeof(f));
  }
  return h.digest();
}

// ---------------------------------------------------------------------------
// Kernels

namespace {

template <typename T>
void layer_norm(const RowMatrix<T>& x, const T* gain, const T* bias, RowMatrix<T>& y,
                std::vector<T>* mean_out, std::vector<T>* rstd_out) {
  const Eigen::Index rows = x.rows(), d = x.cols();
  y.resize(rows, d);
  if (mean_out) mean_out->resize(rows);
  if (rstd_out) rstd_out->resize(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const T mean = x.row(i).mean();
    const T var = (x.row(i).array() - mean).square().mean();
    const T rstd = T(1) / std::sqrt(var + T(kLayerNormEps));
    for (Eigen::Index j = 0; j < d; ++j) {
      y(i, j) = (x(i, j) - mean) * rstd * gain[j] + bias[j];
    }
    if (mean_out) (*mean_out)[i] = mean;
    if (rstd_out) (*rstd_out)[i] = rstd;
  }
}

// dx += layer-norm backward; gain/bias grads accumulated when pointers given.
template <typename T>
void layer_norm_backward(const RowMatrix<T>& x, const std::vector<T>& mean,
                         const std::vector<T>& rstd, const T* gain, const RowMatrix<T>& dy,
                         RowMatrix<T>& dx, T* dgain, T* dbias) {
  const Eigen::Index rows = x.rows(), d = x.cols();
  std::vector<T> xhat(d), dxhat(d);
  for (Eigen::Index i = 0; i < rows; ++i) {
    T sum_dxhat = 0, sum_dxhat_xhat = 0;
    for (Eigen::Index j = 0; j < d; ++j) {
      xhat[j] = (x(i, j) - mean[i]) * rstd[i];
      dxhat[j] = dy(i, j) * gain[j];
      sum_dxhat += dxhat[j];
      sum_dxhat_xhat += dxhat[j] * xhat[j];
      if (dgain) dgain[j] += dy(i, j) * xhat[j];
      if (dbias) dbias[j] += dy(i, j);
    }
    const T inv_d = T(1) / static_cast<T>(d);
    for (Eigen::Index j = 0; j < d; ++j) {
      dx(i, j) += rstd[i] * (dxhat[j] - sum_dxhat * inv_d - xhat[j] * sum_dxhat_xhat * inv_d);
    }
  }
}

template <typename T>
T gelu(T x) {
  constexpr T c = T(0.7978845608028654);  // sqrt(2/pi)
  return T(0.5) * x * (T(1) + std::tanh(c * (x + T(0.044715) * x * x * x)));
}

template <typename T>
T gelu_grad(T x) {
  constexpr T c = T(0.7978845608028654);
  const T u = c * (x + T(0.044715) * x * x * x);
  const T th = std::tanh(u);
  return T(0.5) * (T(1) + th) +
         T(0.5) * x * (T(1) - th * th) * c * (T(1) + T(3 * 0.044715) * x * x);
}

template <typename T>
void linear(const Transformer<T>& model, size_t index, const LinearLayout& lin,
            const RowMatrix<T>& x, RowMatrix<T>& y, RowMatrix<T>* xa_out) {
  const T* p = model.params().data();
  y.noalias() = x * CMap<T>(p + lin.weight, lin.in, lin.out);
  if (lin.bias != kNoBias) {
    y.rowwise() += Eigen::Map<const RowVector<T>>(p + lin.bias, lin.out);
  }
  if (model.has_adapters()) {
    const auto& ad = model.adapters()[index];
    const int r = model.lora().rank;
    const T* ap = model.adapter_params().data();
    RowMatrix<T> xa = x * CMap<T>(ap + ad.a, lin.in, r);
    y.noalias() += static_cast<T>(model.lora().scale()) * (xa * CMap<T>(ap + ad.b, r, lin.out));
    if (xa_out) *xa_out = std::move(xa);
  }
}

// dx = dy W^T (+ lora path); parameter grads accumulated into grad.
template <typename T>
void linear_backward(const Transformer<T>& model, size_t index, const LinearLayout& lin,
                     const RowMatrix<T>& x, const RowMatrix<T>& xa, const RowMatrix<T>& dy,
                     RowMatrix<T>& dx, std::span<T> grad) {
  const T* p = model.params().data();
  dx.noalias() = dy * CMap<T>(p + lin.weight, lin.in, lin.out).transpose();
  if (model.has_adapters()) {
    const auto& ad = model.adapters()[index];
    const int r = model.lora().rank;
    const T s = static_cast<T>(model.lora().scale());
    const T* ap = model.adapter_params().data();
    RowMatrix<T> dxa = s * (dy * CMap<T>(ap + ad.b, r, lin.out).transpose());  // [L, r]
    dx.noalias() += dxa * CMap<T>(ap + ad.a, lin.in, r).transpose();
    MMap<T>(grad.data() + ad.a, lin.in, r).noalias() += x.transpose() * dxa;
    MMap<T>(grad.data() + ad.b, r, lin.out).noalias() += s * (xa.transpose() * dy);
  } else {
    MMap<T>(grad.data() + lin.weight, lin.in, lin.out).noalias() += x.transpose() * dy;
    if (lin.bias != kNoBias) {
      Eigen::Map<RowVector<T>>(grad.data() + lin.bias, lin.out) += dy.colwise().sum();
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Forward / backward

template <typename T>
RowMatrix<T> forward(const Transformer<T>& model, std::span<const int> tokens, Tape<T>* tape) {
  const auto& cfg = model.config();
  const auto& lay = model.layout();
  const int len = static_cast<int>(tokens.size());
  if (len == 0) throw DataError("forward: empty token sequence");
  if (len > cfg.max_seq_len) {
    throw DataError("forward: sequence length " + std::to_string(len) +
                    " exceeds max_seq_len " + std::to_string(cfg.max_seq_len));
  }
  const int d = cfg.d_model, heads = cfg.n_heads, hd = cfg.head_dim();
  const T* p = model.params().data();
  for (int t : tokens) {
    if (t < 0 || t >= cfg.vocab_size) throw DataError("forward: token id out of range");
  }

  RowMatrix<T> x(len, d);
  for (int i = 0; i < len; ++i) {
    x.row(i) = Eigen::Map<const RowVector<T>>(p + lay.wte + size_t(tokens[i]) * d, d) +
               Eigen::Map<const RowVector<T>>(p + lay.wpe + size_t(i) * d, d);
  }
  if (tape) {
    tape->tokens.assign(tokens.begin(), tokens.end());
    tape->blocks.assign(cfg.n_layers, BlockTape<T>{});
  }
  const T att_scale = T(1) / std::sqrt(static_cast<T>(hd));
  RowMatrix<T> a, qkv, z(len, d), tmp, m, f, g;
  std::vector<T> mean1, rstd1, mean2, rstd2;
  std::vector<RowMatrix<T>> probs(heads);
  RowMatrix<T> qkv_xa, out_xa, fc_xa, proj_xa;

  for (int l = 0; l < cfg.n_layers; ++l) {
    const auto& b = lay.blocks[l];
    const size_t base_index = size_t(l) * 4;
    layer_norm(x, p + b.ln1_gain, p + b.ln1_bias, a, &mean1, &rstd1);
    linear(model, base_index + 0, b.qkv, a, qkv, &qkv_xa);
    for (int h = 0; h < heads; ++h) {
      auto q = qkv.block(0, h * hd, len, hd);
      auto k = qkv.block(0, d + h * hd, len, hd);
      auto v = qkv.block(0, 2 * d + h * hd, len, hd);
      RowMatrix<T>& pr = probs[h];
      pr.noalias() = (q * k.transpose()) * att_scale;
      for (int i = 0; i < len; ++i) {
        T mx = pr(i, 0);
        for (int j = 1; j <= i; ++j) mx = std::max(mx, pr(i, j));
        T sum = 0;
        for (int j = 0; j <= i; ++j) {
          pr(i, j) = std::exp(pr(i, j) - mx);
          sum += pr(i, j);
        }
        for (int j = 0; j <= i; ++j) pr(i, j) /= sum;
        for (int j = i + 1; j < len; ++j) pr(i, j) = T(0);
      }
      z.block(0, h * hd, len, hd).noalias() = pr * v;
    }
    linear(model, base_index + 1, b.attn_out, z, tmp, &out_xa);
    RowMatrix<T> hres = x + tmp;
    layer_norm(hres, p + b.ln2_gain, p + b.ln2_bias, m, &mean2, &rstd2);
    linear(model, base_index + 2, b.fc, m, f, &fc_xa);
    g = f.unaryExpr([](T v) { return gelu(v); });
    linear(model, base_index + 3, b.proj, g, tmp, &proj_xa);
    RowMatrix<T> next = hres + tmp;
    if (tape) {
      auto& bt = tape->blocks[l];
      bt.x = std::move(x);
      bt.a = a;
      bt.mean1 = mean1;
      bt.rstd1 = rstd1;
      bt.qkv = qkv;
      bt.probs = probs;
      bt.z = z;
      bt.h = std::move(hres);
      bt.m = m;
      bt.mean2 = mean2;
      bt.rstd2 = rstd2;
      bt.f = f;
      bt.g = g;
      bt.qkv_xa = qkv_xa;
      bt.out_xa = out_xa;
      bt.fc_xa = fc_xa;
      bt.proj_xa = proj_xa;
    }
    x = std::move(next);
  }
  RowMatrix<T> n, logits, head_xa;
  std::vector<T> meanf, rstdf;
  layer_norm(x, p + lay.lnf_gain, p + lay.lnf_bias, n, &meanf, &rstdf);
  linear(model, size_t(cfg.n_layers) * 4, lay.lm_head, n, logits, &head_xa);
  if (tape) {
    tape->hf = std::move(x);
    tape->n = std::move(n);
    tape->meanf = std::move(meanf);
    tape->rstdf = std::move(rstdf);
    tape->head_xa = std::move(head_xa);
    tape->recorded = true;
  }
  return logits;
}

template <typename T>
std::vector<RowMatrix<T>> forward_batch(const Transformer<T>& model,
                                        const std::vector<std::vector<int>>& batch) {
  std::vector<RowMatrix<T>> out(batch.size());
  parallel_for(batch.size(), [&](size_t i) { out[i] = forward(model, std::span<const int>(batch[i])); });
  return out;
}

template <typename T>
void backward(const Transformer<T>& model, Tape<T>& tape, const RowMatrix<T>& dlogits,
              std::span<T> grad) {
  if (!tape.recorded) throw UsageError("backward: no recorded forward pass");
  const auto& cfg = model.config();
  const auto& lay = model.layout();
  const int len = static_cast<int>(tape.tokens.size());
  if (dlogits.rows() != len || dlogits.cols() != cfg.vocab_size) {
    throw UsageError("backward: dlogits shape mismatch");
  }
  if (grad.size() != model.trainable().size()) {
    throw UsageError("backward: gradient buffer size mismatch");
  }
  const bool dense = !model.has_adapters();
  const int d = cfg.d_model, heads = cfg.n_heads, hd = cfg.head_dim();
  const T* p = model.params().data();
  const T att_scale = T(1) / std::sqrt(static_cast<T>(hd));
  T* gp = grad.data();

  RowMatrix<T> dn;
  linear_backward(model, size_t(cfg.n_layers) * 4, lay.lm_head, tape.n, tape.head_xa, dlogits,
                  dn, grad);
  RowMatrix<T> dx = RowMatrix<T>::Zero(len, d);
  layer_norm_backward(tape.hf, tape.meanf, tape.rstdf, p + lay.lnf_gain, dn, dx,
                      dense ? gp + lay.lnf_gain : nullptr, dense ? gp + lay.lnf_bias : nullptr);

  RowMatrix<T> dg, df, dm, dz, dqkv(len, 3 * d), da;
  for (int l = cfg.n_layers - 1; l >= 0; --l) {
    const auto& b = lay.blocks[l];
    const auto& bt = tape.blocks[l];
    const size_t base_index = size_t(l) * 4;
    // MLP branch; dx is the gradient w.r.t. the block output.
    linear_backward(model, base_index + 3, b.proj, bt.g, bt.proj_xa, dx, dg, grad);
    df = dg.cwiseProduct(bt.f.unaryExpr([](T v) { return gelu_grad(v); }));
    linear_backward(model, base_index + 2, b.fc, bt.m, bt.fc_xa, df, dm, grad);
    RowMatrix<T> dh = dx;
    layer_norm_backward(bt.h, bt.mean2, bt.rstd2, p + b.ln2_gain, dm, dh,
                        dense ? gp + b.ln2_gain : nullptr, dense ? gp + b.ln2_bias : nullptr);
    // Attention branch.
    linear_backward(model, base_index + 1, b.attn_out, bt.z, bt.out_xa, dh, dz, grad);
    for (int h = 0; h < heads; ++h) {
      auto q = bt.qkv.block(0, h * hd, len, hd);
      auto k = bt.qkv.block(0, d + h * hd, len, hd);
      auto v = bt.qkv.block(0, 2 * d + h * hd, len, hd);
      const RowMatrix<T>& pr = bt.probs[h];
      auto dout = dz.block(0, h * hd, len, hd);
      RowMatrix<T> dp = dout * v.transpose();
      dqkv.block(0, 2 * d + h * hd, len, hd).noalias() = pr.transpose() * dout;
      RowMatrix<T> ds(len, len);
      for (int i = 0; i < len; ++i) {
        T dot = 0;
        for (int j = 0; j <= i; ++j) dot += pr(i, j) * dp(i, j);
        for (int j = 0; j < len; ++j) ds(i, j) = j <= i ? pr(i, j) * (dp(i, j) - dot) : T(0);
      }
      dqkv.block(0, h * hd, len, hd).noalias() = (ds * k) * att_scale;
      dqkv.block(0, d + h * hd, len, hd).noalias() = (ds.transpose() * q) * att_scale;
    }
    linear_backward(model, base_index + 0, b.qkv, bt.a, bt.qkv_xa, dqkv, da, grad);
    RowMatrix<T> dxin = dh;
    layer_norm_backward(bt.x, bt.mean1, bt.rstd1, p + b.ln1_gain, da, dxin,
                        dense ? gp + b.ln1_gain : nullptr, dense ? gp + b.ln1_bias : nullptr);
    dx = std::move(dxin);
  }
  if (dense) {
    for (int i = 0; i < len; ++i) {
      Eigen::Map<RowVector<T>>(gp + lay.wte + size_t(tape.tokens[i]) * d, d) += dx.row(i);
      Eigen::Map<RowVector<T>>(gp + lay.wpe + size_t(i) * d, d) += dx.row(i);
    }
  }
  tape.recorded = false;
}

// ---------------------------------------------------------------------------
// Incremental decoding

template <typename T>
KvCache<T>::KvCache(const Transformer<T>& model) : model_(model) {
  const auto& cfg = model.config();
  keys_.assign(cfg.n_layers, RowMatrix<T>(cfg.max_seq_len, cfg.d_model));
  values_.assign(cfg.n_layers, RowMatrix<T>(cfg.max_seq_len, cfg.d_model));
}

template <typename T>
RowVector<T> KvCache<T>::step(int token) {
  const auto& cfg = model_.config();
  const auto& lay = model_.layout();
  if (length_ >= cfg.max_seq_len) throw DataError("decode: sequence reached max_seq_len");
  if (token < 0 || token >= cfg.vocab_size) throw DataError("decode: token id out of range");
  const int d = cfg.d_model, heads = cfg.n_heads, hd = cfg.head_dim();
  const int pos = length_;
  const T* p = model_.params().data();
  const T att_scale = T(1) / std::sqrt(static_cast<T>(hd));

  RowMatrix<T> x(1, d);
  x.row(0) = Eigen::Map<const RowVector<T>>(p + lay.wte + size_t(token) * d, d) +
             Eigen::Map<const RowVector<T>>(p + lay.wpe + size_t(pos) * d, d);
  RowMatrix<T> a, qkv, z(1, d), tmp, m, f;
  std::vector<T> scores(pos + 1);
  for (int l = 0; l < cfg.n_layers; ++l) {
    const auto& b = lay.blocks[l];
    const size_t base_index = size_t(l) * 4;
    layer_norm(x, p + b.ln1_gain, p + b.ln1_bias, a, static_cast<std::vector<T>*>(nullptr), static_cast<std::vector<T>*>(nullptr));
    linear(model_, base_index + 0, b.qkv, a, qkv, static_cast<RowMatrix<T>*>(nullptr));
    keys_[l].row(pos) = qkv.block(0, d, 1, d);
    values_[l].row(pos) = qkv.block(0, 2 * d, 1, d);
    for (int h = 0; h < heads; ++h) {
      auto q = qkv.row(0).segment(h * hd, hd);
      T mx = -std::numeric_limits<T>::infinity();
      for (int j = 0; j <= pos; ++j) {
        scores[j] = q.dot(keys_[l].row(j).segment(h * hd, hd)) * att_scale;
        mx = std::max(mx, scores[j]);
      }
      T sum = 0;
      for (int j = 0; j <= pos; ++j) {
        scores[j] = std::exp(scores[j] - mx);
        sum += scores[j];
      }
      auto out = z.row(0).segment(h * hd, hd);
      out.setZero();
      for (int j = 0; j <= pos; ++j) {
        out += (scores[j] / sum) * values_[l].row(j).segment(h * hd, hd);
      }
    }
    linear(model_, base_index + 1, b.attn_out, z, tmp, static_cast<RowMatrix<T>*>(nullptr));
    RowMatrix<T> hres = x + tmp;
    layer_norm(hres, p + b.ln2_gain, p + b.ln2_bias, m, static_cast<std::vector<T>*>(nullptr), static_cast<std::vector<T>*>(nullptr));
    linear(model_, base_index + 2, b.fc, m, f, static_cast<RowMatrix<T>*>(nullptr));
    f = f.unaryExpr([](T v) { return gelu(v); });
    linear(model_, base_index + 3, b.proj, f, tmp, static_cast<RowMatrix<T>*>(nullptr));
    x = hres + tmp;
  }
  RowMatrix<T> n, logits;
  layer_norm(x, p + lay.lnf_gain, p + lay.lnf_bias, n, static_cast<std::vector<T>*>(nullptr), static_cast<std::vector<T>*>(nullptr));
  linear(model_, size_t(cfg.n_layers) * 4, lay.lm_head, n, logits, static_cast<RowMatrix<T>*>(nullptr));
  ++length_;
  return logits.row(0);
}

template class Transformer<float>;
template class Transformer<double>;
template Transformer<double> Transformer<float>::cast<double>() const;
template Transformer<float> Transformer<double>::cast<float>() const;
template Transformer<float> Transformer<float>::cast<float>() const;
template Transformer<double> Transformer<double>::cast<double>() const;
template RowMatrix<float> forward(const Transformer<float>&, std::span<const int>, Tape<float>*);
template RowMatrix<double> forward(const Transformer<double>&, std::span<const int>,
                                   Tape<double>*);
template std::vector<RowMatrix<float>> forward_batch(const Transformer<float>&,
                                                     const std::vector<std::vector<int>>&);
template std::vector<RowMatrix<double>> forward_batch(const Transformer<double>&,
                                                      const std::vector<std::vector<int>>&);
template void backward(const Transformer<float>&, Tape<float>&, const RowMatrix<float>&,
                       std::span<float>);
template void backward(const Transformer<double>&, Tape<double>&, const RowMatrix<double>&,
                       std::span<double>);
template class KvCache<float>;
template class KvCache<double>;

}  // namespace radis::model
