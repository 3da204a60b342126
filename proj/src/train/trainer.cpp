#include "radis/train/trainer.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include <fmt/format.h>

#include "radis/model/checkpoint.hpp"
#include "radis/model/loss.hpp"
#include "radis/util/error.hpp"
#include "radis/util/parallel.hpp"
#include "radis/util/rng.hpp"

namespace radis::train {
namespace {

// Fixed shard count: the gradient summation order depends only on this.
constexpr size_t kShards = 16;

struct ShardSums {
  double mt = 0.0, rationale = 0.0, pseudo = 0.0;
};

struct WorkItem {
  const Example* ex;
  bool pseudo;
  double scale;
};

size_t active_tokens(std::span<const Example* const> batch) {
  size_t n = 0;
  for (const auto* ex : batch) n += std::accumulate(ex->mask.begin(), ex->mask.end(), size_t{0});
  return n;
}

template <typename T>
double l2_norm(std::span<const T> v) {
  double s = 0.0;
  for (T x : v) s += static_cast<double>(x) * x;
  return std::sqrt(s);
}

bool same_instruction(const Example& a, const Example& b) {
  return a.response_start == b.response_start &&
         std::equal(a.tokens.begin(), a.tokens.begin() + a.response_start, b.tokens.begin());
}

}  // namespace

std::string_view regime_name(Regime r) {
  switch (r) {
    case Regime::kVanilla: return "vanilla";
    case Regime::kRadis: return "radis";
    case Regime::kSeqKd: return "seqkd";
    case Regime::kSdft: return "sdft";
  }
  return "?";
}

Regime parse_regime(std::string_view name) {
  for (auto r : {Regime::kVanilla, Regime::kRadis, Regime::kSeqKd, Regime::kSdft}) {
    if (regime_name(r) == name) return r;
  }
  throw ConfigError("unknown regime '" + std::string(name) + "'");
}

int default_batch_size(Regime r) { return r == Regime::kSeqKd ? 256 : 128; }

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("train.lr must be finite and >= 0");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (regime == Regime::kSeqKd && (batch_size < 2 || batch_size % 2 != 0)) {
    throw ConfigError("seqkd batch_size must be even (golden + pseudo halves)");
  }
  if (!(clip_norm > 0.0)) throw ConfigError("train.clip_norm must be positive");
  if (lora) lora_config.validate();
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"regime", regime_name(c.regime)},
       {"epochs", c.epochs},
       {"lr", c.lr},
       {"batch_size", c.batch_size},
       {"seed", c.seed},
       {"lora", c.lora},
       {"lora_config", c.lora_config},
       {"clip_norm", c.clip_norm},
       {"beta1", c.adamw.beta1},
       {"beta2", c.adamw.beta2},
       {"eps", c.adamw.eps},
       {"weight_decay", c.adamw.weight_decay},
       {"save_checkpoints", c.save_checkpoints}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  if (j.contains("regime")) c.regime = parse_regime(j["regime"].get<std::string>());
  c.epochs = j.value("epochs", c.epochs);
  c.lr = j.value("lr", c.lr);
  c.batch_size = j.value("batch_size", default_batch_size(c.regime));
  c.seed = j.value("seed", c.seed);
  c.lora = j.value("lora", c.lora);
  if (j.contains("lora_config")) c.lora_config = j["lora_config"].get<model::LoraConfig>();
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.adamw.beta1 = j.value("beta1", c.adamw.beta1);
  c.adamw.beta2 = j.value("beta2", c.adamw.beta2);
  c.adamw.eps = j.value("eps", c.adamw.eps);
  c.adamw.weight_decay = j.value("weight_decay", c.adamw.weight_decay);
  c.save_checkpoints = j.value("save_checkpoints", c.save_checkpoints);
  if (j.contains("resume_from")) c.resume_from = j["resume_from"].get<std::string>();
}

template <typename T>
BatchLoss batch_gradient(const model::Transformer<T>& model, std::span<const Example* const> golden,
                         std::span<const Example* const> pseudo, std::span<T> grad) {
  BatchLoss out;
  out.active_golden = active_tokens(golden);
  out.active_pseudo = active_tokens(pseudo);
  std::vector<WorkItem> items;
  items.reserve(golden.size() + pseudo.size());
  const double sg = out.active_golden ? 1.0 / out.active_golden : 0.0;
  const double sp = out.active_pseudo ? 1.0 / out.active_pseudo : 0.0;
  for (const auto* ex : golden) items.push_back({ex, false, sg});
  for (const auto* ex : pseudo) items.push_back({ex, true, sp});

  const size_t n_shards = std::min(kShards, items.size());
  std::vector<model::AlignedVector<T>> shard_grad(n_shards);
  std::vector<ShardSums> sums(n_shards);
  parallel_for(n_shards, [&](size_t s) {
    auto& g = shard_grad[s];
    g.assign(grad.size(), T(0));
    const size_t lo = s * items.size() / n_shards, hi = (s + 1) * items.size() / n_shards;
    model::Tape<T> tape;
    for (size_t i = lo; i < hi; ++i) {
      const auto& it = items[i];
      const auto& ex = *it.ex;
      std::span<const int> toks(ex.tokens);
      std::span<const uint8_t> mask(ex.mask);
      const auto logits = model::forward(model, toks, &tape);
      const auto res = model::nll(logits, toks, mask);
      for (size_t k = 0; k < ex.tokens.size(); ++k) {
        if (!ex.mask[k]) continue;
        const double v = res.per_token[k] * it.scale;
        if (it.pseudo) {
          sums[s].pseudo += v;
        } else if (static_cast<int>(k) < ex.rationale_start) {
          sums[s].mt += v;
        } else {
          sums[s].rationale += v;
        }
      }
      const auto dlogits = model::nll_backward(logits, toks, mask, it.scale);
      model::backward(model, tape, dlogits, std::span<T>(g));
    }
  });
  std::fill(grad.begin(), grad.end(), T(0));
  for (size_t s = 0; s < n_shards; ++s) {
    for (size_t i = 0; i < grad.size(); ++i) grad[i] += shard_grad[s][i];
    out.mt += sums[s].mt;
    out.rationale += sums[s].rationale;
    out.pseudo += sums[s].pseudo;
  }
  out.total = out.mt + out.rationale + out.pseudo;
  return out;
}

namespace {

template <typename T>
StepResult apply_step(model::Transformer<T>& model, std::span<const Example* const> golden,
                      std::span<const Example* const> pseudo, AdamW& opt, double lr,
                      double clip_norm) {
  model::AlignedVector<T> grad(model.trainable().size());
  StepResult r;
  r.loss = batch_gradient(model, golden, pseudo, std::span<T>(grad));
  r.grad_norm = l2_norm(std::span<const T>(grad));
  if (!std::isfinite(r.loss.total) || !std::isfinite(r.grad_norm)) {
    throw NumericalError(fmt::format("non-finite loss ({}) or gradient norm ({})", r.loss.total,
                                     r.grad_norm));
  }
  if (r.loss.active_golden + r.loss.active_pseudo == 0) return r;
  if (r.grad_norm > clip_norm) {
    const T c = static_cast<T>(clip_norm / r.grad_norm);
    for (auto& g : grad) g *= c;
  }
  opt.step(model.mutable_trainable(), std::span<const T>(grad), lr);
  return r;
}

}  // namespace

template <typename T>
StepResult seqkd_step(model::Transformer<T>& model, std::span<const Example* const> golden,
                      std::span<const Example* const> pseudo, AdamW& opt, double lr,
                      double clip_norm) {
  if (golden.size() != pseudo.size()) throw DataError("seqkd: golden/pseudo batch sizes differ");
  for (size_t i = 0; i < golden.size(); ++i) {
    if (!same_instruction(*golden[i], *pseudo[i])) {
      throw DataError("seqkd: batch element " + std::to_string(i) + " pairs different instructions");
    }
  }
  return apply_step(model, golden, pseudo, opt, lr, clip_norm);
}

template <typename T>
StepResult sft_step(model::Transformer<T>& model, std::span<const Example* const> batch,
                    AdamW& opt, double lr, double clip_norm) {
  return apply_step<T>(model, batch, {}, opt, lr, clip_norm);
}

std::string metrics_row(const StepLog& s) {
  return fmt::format("{},{},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g}", s.step, s.epoch, s.lr,
                     s.loss_total, s.loss_mt, s.loss_rationale, s.loss_pseudo, s.grad_norm);
}

int64_t steps_per_epoch(const TrainConfig& cfg, size_t n_examples) {
  const size_t b = cfg.instructions_per_step();
  return static_cast<int64_t>((n_examples + b - 1) / b);
}

TrainResult train_run(const TrainConfig& cfg, const TrainSet& data, model::Transformer<float>& model,
                      const std::filesystem::path& run_dir, const nlohmann::json& meta) {
  cfg.validate();
  const size_t n = data.golden.size();
  if (n == 0) throw DataError("train_run: empty dataset");
  const bool paired = cfg.regime == Regime::kSeqKd;
  if (paired && data.pseudo.size() != n) throw DataError("seqkd dataset lacks pseudo targets");
  if (!paired && !data.pseudo.empty()) throw DataError("pseudo targets given to a non-seqkd regime");

  if (cfg.lora && !model.has_adapters()) model.attach_lora(cfg.lora_config, derive_seed(cfg.seed, "lora"));
  AdamW opt(model.trainable().size(), cfg.adamw);

  nlohmann::json cfg_json = cfg;
  int first_epoch = 1;
  if (!cfg.resume_from.empty()) {
    auto ck = model::load_checkpoint(cfg.resume_from);
    if (!ck.meta.contains("train_config") || ck.meta["train_config"] != cfg_json) {
      throw CheckpointError("resume: " + cfg.resume_from.string() +
                            " was written by a different training config");
    }
    if (ck.model.config() != model.config() || ck.model.has_adapters() != model.has_adapters()) {
      throw CheckpointError("resume: model shape differs from " + cfg.resume_from.string());
    }
    model = std::move(ck.model);
    auto opt_path = cfg.resume_from;
    opt.load(opt_path.replace_extension(".opt"));
    first_epoch = ck.meta.at("epoch").get<int>() + 1;
  }

  std::ofstream csv;
  if (!run_dir.empty()) {
    std::filesystem::create_directories(run_dir);
    const auto path = run_dir / "metrics.csv";
    if (first_epoch > 1) {
      csv.open(path, std::ios::app);
    } else {
      csv.open(path, std::ios::trunc);
      csv << kMetricsHeader << '\n';
    }
    if (!csv) throw DataError("cannot write " + path.string());
  }

  const int64_t per_epoch = steps_per_epoch(cfg, n);
  const int64_t total_steps = per_epoch * cfg.epochs;
  const size_t b = cfg.instructions_per_step();
  TrainResult result;
  std::vector<size_t> order(n);
  for (int epoch = first_epoch; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(cfg.seed, "order/epoch" + std::to_string(epoch)));
    rng.shuffle(std::span<size_t>(order));
    for (int64_t k = 0; k < per_epoch; ++k) {
      const int64_t step = (epoch - 1) * per_epoch + k;
      std::vector<const Example*> golden, pseudo;
      for (size_t i = k * b; i < std::min(n, (k + 1) * b); ++i) {
        golden.push_back(&data.golden[order[i]]);
        if (paired) pseudo.push_back(&data.pseudo[order[i]]);
      }
      const double lr = cosine_lr(cfg.lr, step, total_steps);
      StepResult r;
      try {
        r = paired ? seqkd_step<float>(model, golden, pseudo, opt, lr, cfg.clip_norm)
                   : sft_step<float>(model, golden, opt, lr, cfg.clip_norm);
      } catch (const NumericalError& e) {
        throw NumericalError(fmt::format("step {} (epoch {}, batch {}): {}", step, epoch, k, e.what()));
      }
      StepLog row{step, epoch, lr, r.loss.total, r.loss.mt, r.loss.rationale, r.loss.pseudo,
                  r.grad_norm};
      if (csv.is_open()) csv << metrics_row(row) << '\n';
      result.log.push_back(row);
    }
    if (!run_dir.empty() && cfg.save_checkpoints) {
      nlohmann::json m = meta;
      m["train_config"] = cfg_json;
      m["epoch"] = epoch;
      const auto path = run_dir / fmt::format("epoch{}.ckpt", epoch);
      model::save_checkpoint(path, model, cfg.seed, m);
      auto opt_path = path;
      opt.save(opt_path.replace_extension(".opt"));
    }
  }
  if (model.has_adapters()) {
    model.merge_lora();
    if (!run_dir.empty()) {
      nlohmann::json m = meta;
      m["train_config"] = cfg_json;
      m["epoch"] = cfg.epochs;
      m["merged"] = true;
      model::save_checkpoint(run_dir / "final_merged.ckpt", model, cfg.seed, m);
    }
  } else if (!run_dir.empty()) {
    nlohmann::json m = meta;
    m["train_config"] = cfg_json;
    m["epoch"] = cfg.epochs;
    model::save_checkpoint(run_dir / "final.ckpt", model, cfg.seed, m);
  }
  result.checksum = model.checksum();
  return result;
}

template BatchLoss batch_gradient(const model::Transformer<float>&, std::span<const Example* const>,
                                  std::span<const Example* const>, std::span<float>);
template BatchLoss batch_gradient(const model::Transformer<double>&, std::span<const Example* const>,
                                  std::span<const Example* const>, std::span<double>);
template StepResult sft_step(model::Transformer<float>&, std::span<const Example* const>, AdamW&,
                             double, double);
template StepResult sft_step(model::Transformer<double>&, std::span<const Example* const>, AdamW&,
                             double, double);
template StepResult seqkd_step(model::Transformer<float>&, std::span<const Example* const>,
                               std::span<const Example* const>, AdamW&, double, double);
template StepResult seqkd_step(model::Transformer<double>&, std::span<const Example* const>,
                               std::span<const Example* const>, AdamW&, double, double);

}  // namespace radis::train
