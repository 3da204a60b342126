// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance [--config configs/default.json] [--out build/acceptance] [--reuse]
//
// --reuse skips the first full pipeline run when its report already exists.

#include <chrono>
#include <cmath>
#include <iostream>
#include <map>
#include <thread>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "fixtures.hpp"
#include "radis/eval/eval.hpp"
#include "radis/gradsim/gradsim.hpp"
#include "radis/model/loss.hpp"
#include "radis/pipeline/config.hpp"
#include "radis/pipeline/pipeline.hpp"
#include "radis/train/trainer.hpp"
#include "radis/util/error.hpp"

namespace fs = std::filesystem;
using namespace radis;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void print(int id, const std::string& name, const Verdict& v) {
  std::cout << fmt::format("criterion {}: {} [{}] {}", id, v.pass ? "PASS" : "FAIL", name, v.detail) << std::endl;
  if (!v.pass) ++failures;
}

template <typename F>
void run(int id, const std::string& name, F&& f) {
  try {
    print(id, name, f());
  } catch (const std::exception& e) {
    print(id, name, {false, std::string("exception: ") + e.what()});
  }
}

double log_softmax_nll(const model::RowMatrix<double>& logits, const std::vector<int>& tokens, size_t i) {
  const auto row = logits.row(i - 1);
  const double mx = row.maxCoeff();
  double z = 0.0;
  for (int j = 0; j < row.size(); ++j) z += std::exp(row(j) - mx);
  return -(row(tokens[i]) - mx - std::log(z));
}

model::ModelConfig sized_like(const pipeline::ExperimentConfig& cfg, const corpus::Vocab& v) {
  auto m = cfg.model;
  m.vocab_size = static_cast<int>(v.size());
  return m;
}

// Single-pass loss split against a two-pass recomputation.
Verdict loss_identity(const pipeline::ExperimentConfig& cfg) {
  const auto t0 = Clock::now();
  const auto lang = testing::small_language(12);
  const auto v = testing::small_vocab(lang);
  model::Transformer<double> m(sized_like(cfg, v), 17);
  double worst_identity = 0.0, worst_oracle = 0.0;
  const auto recs = testing::enriched_records(lang, v, 100, 3);
  for (const auto& ex : testing::to_examples(recs, v)) {
    const auto lb = train::radis_loss(m, ex);
    worst_identity = std::max(worst_identity, std::abs(lb.total - (lb.mt_term + lb.rationale_term)) / lb.total);
    std::vector<int> prefix(ex.tokens.begin(), ex.tokens.begin() + ex.rationale_start);
    const auto pl = model::forward(m, std::span<const int>(prefix));
    double mt = 0.0;
    for (int i = ex.response_start; i < ex.rationale_start; ++i) mt += log_softmax_nll(pl, prefix, i);
    const auto fl = model::forward(m, std::span<const int>(ex.tokens));
    double rat = 0.0;
    for (size_t i = ex.rationale_start; i < ex.tokens.size(); ++i) rat += log_softmax_nll(fl, ex.tokens, i);
    worst_oracle = std::max(worst_oracle, std::abs(lb.total - (mt + rat)) / lb.total);
  }
  const double secs = seconds_since(t0);
  return {worst_identity <= 1e-6 && worst_oracle <= 1e-6 && secs < 10.0,
          fmt::format("n=100 identity_rel={:.2e} two_pass_rel={:.2e} time={:.2f}s", worst_identity, worst_oracle,
                      secs)};
}

double masked_loss(const model::Transformer<double>& m, const std::vector<int>& tokens,
                   const std::vector<uint8_t>& mask) {
  return model::nll(model::forward(m, std::span<const int>(tokens)), tokens, mask).total;
}

// Worst relative error over every entry of `ranges`, grouped by class.
void fd_check(model::Transformer<double>& m, const std::vector<int>& tokens, const std::vector<uint8_t>& mask,
              const std::map<std::string, std::vector<std::pair<size_t, size_t>>>& classes,
              std::map<std::string, double>& worst) {
  model::Tape<double> tape;
  const auto logits = model::forward(m, std::span<const int>(tokens), &tape);
  std::vector<double> grad(m.trainable().size(), 0.0);
  model::backward(m, tape, model::nll_backward(logits, tokens, mask, 1.0), std::span<double>(grad));
  auto theta = m.mutable_trainable();
  const double h = 1e-5;
  for (const auto& [name, ranges] : classes) {
    double w = 0.0;
    for (const auto& [off, len] : ranges) {
      for (size_t i = off; i < off + len; ++i) {
        const double saved = theta[i];
        theta[i] = saved + h;
        const double up = masked_loss(m, tokens, mask);
        theta[i] = saved - h;
        const double down = masked_loss(m, tokens, mask);
        theta[i] = saved;
        const double fd = (up - down) / (2 * h);
        w = std::max(w, std::abs(fd - grad[i]) / std::max({std::abs(fd), std::abs(grad[i]), 1e-6}));
      }
    }
    worst[name] = w;
  }
}

Verdict finite_differences() {
  const auto t0 = Clock::now();
  model::ModelConfig c;
  c.n_layers = 2;
  c.n_heads = 2;
  c.d_model = 8;
  c.d_ff = 12;
  c.max_seq_len = 8;
  c.vocab_size = 9;
  model::Transformer<double> m(c, 3);
  Rng rng(8);
  for (auto& p : m.mutable_params()) p += 0.05 * rng.normal();
  std::vector<int> tokens(7);
  for (auto& t : tokens) t = static_cast<int>(rng.below(c.vocab_size));
  const std::vector<uint8_t> mask{0, 0, 1, 1, 0, 1, 1};

  const auto& lay = m.layout();
  auto linear = [](const model::LinearLayout& l) {
    std::vector<std::pair<size_t, size_t>> r{{l.weight, size_t(l.in) * l.out}};
    if (l.bias != model::kNoBias) r.push_back({l.bias, size_t(l.out)});
    return r;
  };
  auto norm = [&](size_t gain, size_t bias) {
    return std::vector<std::pair<size_t, size_t>>{{gain, size_t(c.d_model)}, {bias, size_t(c.d_model)}};
  };
  std::map<std::string, std::vector<std::pair<size_t, size_t>>> dense{
      {"token_embedding", {{lay.wte, size_t(c.vocab_size) * c.d_model}}},
      {"position_embedding", {{lay.wpe, size_t(c.max_seq_len) * c.d_model}}},
      {"final_norm", norm(lay.lnf_gain, lay.lnf_bias)},
      {"lm_head", linear(lay.lm_head)},
  };
  for (const auto& b : lay.blocks) {
    auto add = [&](const std::string& k, const std::vector<std::pair<size_t, size_t>>& r) {
      dense[k].insert(dense[k].end(), r.begin(), r.end());
    };
    add("attn_norm", norm(b.ln1_gain, b.ln1_bias));
    add("qkv", linear(b.qkv));
    add("attn_out", linear(b.attn_out));
    add("mlp_norm", norm(b.ln2_gain, b.ln2_bias));
    add("mlp_fc", linear(b.fc));
    add("mlp_proj", linear(b.proj));
  }
  std::map<std::string, double> worst;
  fd_check(m, tokens, mask, dense, worst);

  m.attach_lora({2, 4.0}, 5);
  for (auto& p : m.mutable_adapter_params()) p += 0.1 * rng.normal();
  std::map<std::string, std::vector<std::pair<size_t, size_t>>> adapters;
  for (const auto& a : m.adapters()) {
    adapters["lora_A"].push_back({a.a, size_t(a.in) * m.lora().rank});
    adapters["lora_B"].push_back({a.b, size_t(m.lora().rank) * a.out});
  }
  fd_check(m, tokens, mask, adapters, worst);

  double overall = 0.0;
  std::string detail;
  for (const auto& [k, w] : worst) {
    overall = std::max(overall, w);
    detail += fmt::format("{}={:.1e} ", k, w);
  }
  const double secs = seconds_since(t0);
  return {overall <= 1e-4 && worst.size() == 12 && secs < 120.0,
          detail + fmt::format("classes={} time={:.2f}s", worst.size(), secs)};
}

Verdict lora_contract(const pipeline::ExperimentConfig& cfg) {
  const auto lang = testing::small_language(12);
  const auto v = testing::small_vocab(lang);
  const auto mc = sized_like(cfg, v);
  const auto lora = cfg.finetune.base.lora_config;
  model::Transformer<float> base(mc, 21);
  auto m = base;
  Rng rng(4);
  auto random_seq = [&] {
    std::vector<int> s(1 + rng.below(mc.max_seq_len));
    for (auto& t : s) t = static_cast<int>(rng.below(mc.vocab_size));
    return s;
  };
  float attach_delta = 0.0f;
  std::vector<std::vector<int>> seqs;
  for (int i = 0; i < 100; ++i) seqs.push_back(random_seq());
  std::vector<model::RowMatrix<float>> before;
  for (const auto& s : seqs) before.push_back(model::forward(m, std::span<const int>(s)));
  m.attach_lora(lora, 5);
  for (size_t i = 0; i < seqs.size(); ++i) {
    attach_delta = std::max(attach_delta, (model::forward(m, std::span<const int>(seqs[i])) - before[i]).cwiseAbs().maxCoeff());
  }

  // Count from the adapter shapes and from the closed form: rank * (in + out)
  // per adapted map; q,k,v packed, attention output, both MLP maps, head.
  size_t from_shapes = 0;
  for (const auto& a : m.adapters()) from_shapes += size_t(lora.rank) * (a.in + a.out);
  const size_t d = mc.d_model, ff = mc.d_ff, r = lora.rank;
  const size_t closed = mc.n_layers * r * ((d + 3 * d) + (d + d) + (d + ff) + (ff + d)) + r * (d + mc.vocab_size);
  const bool count_ok = m.trainable().size() == from_shapes && from_shapes == closed;

  for (auto& p : m.mutable_adapter_params()) p += 0.05f * static_cast<float>(rng.normal());
  auto merged = m;
  merged.merge_lora();
  float merge_delta = 0.0f;
  for (const auto& s : seqs) {
    merge_delta = std::max(merge_delta, (model::forward(m, std::span<const int>(s)) -
                                         model::forward(merged, std::span<const int>(s))).cwiseAbs().maxCoeff());
  }
  return {attach_delta == 0.0f && merge_delta <= 1e-5f && count_ok,
          fmt::format("attach_max_delta={:.1e} merge_max_delta={:.2e} over 100 seqs; trainable={} closed_form={}",
                      attach_delta, merge_delta, m.trainable().size(), closed)};
}

struct RegimeStats {
  double em = 0.0, rp = 0.0, safety = 0.0;
  int n = 0;
};

std::map<std::string, RegimeStats> regime_means(const nlohmann::json& summary) {
  std::map<std::string, RegimeStats> out;
  for (const auto& [name, runs] : summary.at("regimes").items()) {
    RegimeStats s;
    for (const auto& j : runs) {
      const auto r = eval::report_from_json(j);
      s.em += r.translation.overall.exact_match;
      s.rp += r.general.rp.value_or(0.0);
      s.safety += r.safety;
      ++s.n;
    }
    s.em /= s.n;
    s.rp /= s.n;
    s.safety /= s.n;
    out[name] = s;
  }
  return out;
}

Verdict equal_trajectories(const pipeline::ExperimentConfig& cfg) {
  const auto lang = testing::small_language(12);
  const auto v = testing::small_vocab(lang);
  const auto recs = testing::enriched_records(lang, v, 96, 11, /*empty_rationales=*/true);
  train::TrainSet radis_set, vanilla_set;
  radis_set.golden = testing::to_examples(recs, v, "enriched");
  vanilla_set.golden = testing::to_examples(recs, v, "reference");
  auto tc = cfg.finetune.base;
  tc.save_checkpoints = false;
  tc.seed = 1;
  model::Transformer<float> a(sized_like(cfg, v), 2), b(sized_like(cfg, v), 2);
  tc.regime = train::Regime::kRadis;
  const auto ra = train::train_run(tc, radis_set, a);
  tc.regime = train::Regime::kVanilla;
  const auto rv = train::train_run(tc, vanilla_set, b);
  if (ra.log.size() != rv.log.size() || ra.log.empty()) return {false, "step counts differ"};
  double worst = 0.0;
  for (size_t i = 0; i < ra.log.size(); ++i) {
    worst = std::max(worst, std::abs(ra.log[i].loss_total - rv.log[i].loss_total));
  }
  return {worst <= 1e-7, fmt::format("steps={} max_loss_delta={:.1e} checksums_equal={}", ra.log.size(), worst,
                                     ra.checksum == rv.checksum)};
}

// Every metrics CSV and report under two output trees, byte for byte. The
// first tree is the run behind criteria 4 to 7.
Verdict reproducible(pipeline::ExperimentConfig cfg, const fs::path& repeat) {
  std::vector<fs::path> roots{cfg.output_dir, repeat};
  fs::remove_all(repeat);
  cfg.output_dir = repeat;
  pipeline::Stage(cfg).run_all();
  size_t compared = 0, differing = 0;
  std::string first_diff;
  for (const auto& e : fs::recursive_directory_iterator(roots[0])) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), roots[0]);
    const auto name = rel.filename().string();
    const bool wanted = e.path().extension() == ".csv" || name.find("report") != std::string::npos ||
                        rel.begin()->string() == "report";
    if (!wanted) continue;
    ++compared;
    if (testing::slurp(e.path()) != testing::slurp(roots[1] / rel)) {
      ++differing;
      if (first_diff.empty()) first_diff = rel.string();
    }
  }
  return {compared > 0 && differing == 0,
          fmt::format("files_compared={} differing={}{}", compared, differing,
                      first_diff.empty() ? "" : " first=" + first_diff)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string config_path = RADIS_CONFIG_DIR "/default.json";
  std::string out = "acceptance";
  bool reuse = false;
  app.add_option("--config", config_path);
  app.add_option("--out", out);
  app.add_flag("--reuse", reuse);
  CLI11_PARSE(app, argc, argv);

  auto doc = pipeline::read_json_file(config_path);
  doc["output_dir"] = (fs::path(out) / "full").string();
  const auto cfg = pipeline::parse_config(doc);

  run(1, "loss split identity", [&] { return loss_identity(cfg); });
  run(2, "finite differences", [] { return finite_differences(); });
  run(3, "lora contract", [&] { return lora_contract(cfg); });

  // Criteria 4 to 7 share one full pipeline run.
  const pipeline::Stage stage(cfg, /*force=*/true);
  double pipeline_secs = -1.0;
  std::string pipeline_error;
  const auto summary_path = stage.layout.report_dir() / "summary.json";
  if (!(reuse && fs::exists(summary_path))) {
    const auto t0 = Clock::now();
    try {
      fs::remove_all(cfg.output_dir);
      stage.run_all();
    } catch (const std::exception& e) {
      pipeline_error = e.what();
    }
    pipeline_secs = seconds_since(t0);
  }
  std::map<std::string, RegimeStats> means;
  double backbone_em = 0.0;
  nlohmann::json summary;
  if (pipeline_error.empty()) {
    summary = pipeline::read_json_file(summary_path);
    means = regime_means(summary);
    backbone_em = eval::report_from_json(summary.at("backbone")).translation.overall.exact_match;
  }
  auto need_pipeline = [&] {
    if (!pipeline_error.empty()) throw std::runtime_error("pipeline failed: " + pipeline_error);
  };

  run(4, "vanilla vs radis", [&]() -> Verdict {
    need_pipeline();
    const auto& van = means.at("vanilla");
    const auto& rad = means.at("radis");
    const bool a = van.em >= backbone_em + 0.30 && rad.em >= backbone_em + 0.30 && std::abs(van.em - rad.em) <= 0.05;
    const bool b = rad.rp - van.rp >= 20.0 && rad.rp >= 80.0;
    const bool c = rad.safety - van.safety >= 0.2;
    const bool seeds_ok = van.n >= 3 && rad.n >= 3;
    const bool time_ok = pipeline_secs < 0 || pipeline_secs < 1800.0;
    return {a && b && c && seeds_ok && time_ok,
            fmt::format("seeds={} backbone_em={:.3f} em(vanilla)={:.3f} em(radis)={:.3f} [a:{}] "
                        "rp(vanilla)={:.1f} rp(radis)={:.1f} [b:{}] safety(vanilla)={:.3f} safety(radis)={:.3f} [c:{}] "
                        "pipeline={:.0f}s on {} hw threads",
                        rad.n, backbone_em, van.em, rad.em, a ? "ok" : "no", van.rp, rad.rp, b ? "ok" : "no",
                        van.safety, rad.safety, c ? "ok" : "no", pipeline_secs,
                        std::thread::hardware_concurrency())};
  });

  run(5, "seq-kd retention", [&]() -> Verdict {
    need_pipeline();
    const auto& van = means.at("vanilla");
    const auto& kd = means.at("seqkd");
    const double gain_v = van.em - backbone_em, gain_kd = kd.em - backbone_em;
    return {kd.rp >= van.rp + 20.0 && gain_kd <= 0.5 * gain_v,
            fmt::format("rp(seqkd)={:.1f} rp(vanilla)={:.1f} gain(seqkd)={:.3f} gain(vanilla)={:.3f}", kd.rp,
                        van.rp, gain_kd, gain_v)};
  });

  run(6, "gradient conflict signs", [&]() -> Verdict {
    need_pipeline();
    if (cfg.gradsim.checkpoint != "backbone" || cfg.gradsim.k_per_direction != 128) {
      return {false, "gradsim is not configured at the backbone with k=128"};
    }
    int seeds_ok = 0;
    std::string detail;
    for (uint64_t s : cfg.seeds) {
      const auto g = pipeline::read_json_file(stage.layout.gradsim_dir(s) / "summary.json");
      auto majority = [&](const char* regime, bool negative) {
        const auto& c = g.at(regime);
        const int n = c.at(negative ? "negative" : "positive").get<int>();
        const int defined = c.at("negative").get<int>() + c.at("positive").get<int>();
        return 2 * n > defined;
      };
      const bool ok = majority("seqkd_reg", true) && majority("radis_reg", false);
      seeds_ok += ok;
      detail += fmt::format("seed{}: seqkd -{}/+{} radis -{}/+{} ", s, g["seqkd_reg"]["negative"].get<int>(),
                            g["seqkd_reg"]["positive"].get<int>(), g["radis_reg"]["negative"].get<int>(),
                            g["radis_reg"]["positive"].get<int>());
    }
    return {seeds_ok >= 2 && cfg.seeds.size() >= 3, detail + fmt::format("seeds_ok={}", seeds_ok)};
  });

  run(7, "backbone rationale emission", [&]() -> Verdict {
    need_pipeline();
    const auto bb = eval::report_from_json(summary.at("backbone"));
    return {bb.emission.total >= 200 && bb.emission.rate() >= 0.6,
            fmt::format("emitted {}/{} = {:.3f}", bb.emission.emitted, bb.emission.total, bb.emission.rate())};
  });

  run(8, "empty rationales reduce to vanilla", [&] { return equal_trajectories(cfg); });
  run(9, "reproducible outputs", [&]() -> Verdict {
    need_pipeline();
    return reproducible(cfg, fs::path(out) / "full_repeat");
  });

  std::cout << (failures == 0 ? "ALL PASS" : fmt::format("{} criteria failed", failures)) << std::endl;
  return failures == 0 ? 0 : 1;
}
