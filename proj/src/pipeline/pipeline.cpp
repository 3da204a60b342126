#include "radis/pipeline/pipeline.hpp"

#include <cmath>
#include <fstream>
#include <map>

#include <fmt/format.h>

#include "radis/corpus/records.hpp"
#include "radis/corpus/templates.hpp"
#include "radis/distill/distill.hpp"
#include "radis/gradsim/gradsim.hpp"
#include "radis/model/checkpoint.hpp"
#include "radis/util/error.hpp"
#include "radis/util/rng.hpp"
#include "radis/util/svg.hpp"

namespace radis::pipeline {

using corpus::Record;
using train::Regime;

std::filesystem::path Layout::dataset(Regime r) const {
  switch (r) {
    case Regime::kVanilla: return train();
    case Regime::kRadis: return data_dir() / "radis.jsonl";
    case Regime::kSeqKd: return data_dir() / "seqkd.jsonl";
    case Regime::kSdft: return data_dir() / "sdft.jsonl";
  }
  return {};
}

std::filesystem::path Layout::run_dir(uint64_t seed, Regime r) const {
  return seed_dir(seed) / std::string(train::regime_name(r));
}

void guard_output(const std::filesystem::path& path, bool force) {
  if (!force && std::filesystem::exists(path)) {
    throw ConfigError(path.string() + " exists; pass --force to overwrite");
  }
}

void require(const std::filesystem::path& path, const std::string& producer) {
  if (!std::filesystem::exists(path)) {
    throw DependencyError(path.string() + " is missing; run `radis_lab " + producer + "` first");
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

namespace {

std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

nlohmann::json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DependencyError("cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

// Gloss pretraining data carries a rationale for a fixed subset of
// (template, direction) combinations, so a greedy decoder reproduces the
// configured fraction instead of always taking the majority branch.
int combo(int template_id, corpus::Direction d) {
  return (template_id - 1) * 2 + (d == corpus::Direction::kTgtToSrc ? 1 : 0);
}

constexpr int kNumCombos = 2 * corpus::kNumTemplates;

bool gloss_has_rationale(int template_id, corpus::Direction d, double fraction) {
  return combo(template_id, d) < static_cast<int>(std::lround(fraction * kNumCombos));
}


std::vector<Record> only_task(const std::vector<Record>& recs, bool refuse) {
  std::vector<Record> out;
  for (const auto& r : recs) {
    if ((r.at("task") == "refuse") == refuse) out.push_back(r);
  }
  return out;
}

model::DecodeConfig greedy(int max_new_tokens) {
  model::DecodeConfig d;
  d.max_new_tokens = max_new_tokens;
  return d;
}

std::vector<train::Example> examples(const std::vector<Record>& recs, const corpus::Vocab& vocab,
                                     const char* field) {
  std::vector<train::Example> out;
  out.reserve(recs.size());
  for (const auto& r : recs) out.push_back(train::example_from_record(r, vocab, field));
  return out;
}

}  // namespace

corpus::Vocab Stage::vocab() const {
  require(layout.vocab(), "gen");
  return corpus::Vocab::load(layout.vocab());
}

model::ModelConfig Stage::model_config(const corpus::Vocab& v) const {
  auto mc = cfg.model;
  mc.vocab_size = static_cast<int>(v.size());
  mc.validate();
  return mc;
}

void Stage::gen() const {
  guard_output(layout.vocab(), force);
  const auto& cc = cfg.corpus;
  auto lang = cc.language;
  lang.finalize();
  const auto v = corpus::build_vocab(lang, cc.general);
  std::filesystem::create_directories(layout.corpus_dir());

  const auto splits =
      corpus::gen_translation_splits(lang, {cc.n_train, cc.n_test, cc.n_pretrain_translation}, cc.seed);
  Rng templates(derive_seed(cc.seed, "templates"));
  auto mt_records = [&](const std::vector<corpus::TranslationPair>& pairs) {
    std::vector<Record> out;
    for (const auto& p : pairs) {
      const int t = static_cast<int>(templates.range(1, corpus::kNumTemplates));
      out.push_back(corpus::translation_record(static_cast<int>(out.size()), p, t, v));
    }
    return out;
  };
  const auto train = mt_records(splits[0]);
  const auto test = mt_records(splits[1]);

  std::vector<Record> pre;
  for (const auto& ex : corpus::gen_general_suite(cc.general, cc.n_general_pretrain_per_task,
                                                  cc.rationale_fraction, derive_seed(cc.seed, "pretrain"))) {
    pre.push_back(corpus::general_record(static_cast<int>(pre.size()), ex, v));
  }
  // A minority of pretraining pairs carry the real word order under any
  // template, so the backbone knows it without preferring it.
  Rng reorder(derive_seed(cc.seed, "reorder"));
  std::vector<corpus::RationaleCategory> clauses;
  for (const auto& name : cc.translation_clauses) clauses.push_back(corpus::parse_category(name));
  for (const auto& p : splits[2]) {
    const int t = static_cast<int>(templates.range(1, corpus::kNumTemplates));
    const bool reordered = reorder.uniform() < cc.pretrain_reorder_fraction;
    pre.push_back(corpus::gloss_record(static_cast<int>(pre.size()), lang, p, t,
                                       gloss_has_rationale(t, p.direction, cc.rationale_fraction),
                                       reordered, v, clauses));
  }
  std::vector<Record> held_out;
  for (const auto& ex : corpus::gen_general_suite(cc.general, cc.n_general_eval_per_task, 0.0,
                                                  derive_seed(cc.seed, "general_eval"))) {
    held_out.push_back(corpus::general_record(static_cast<int>(held_out.size()), ex, v));
  }

  v.save(layout.vocab());
  corpus::write_jsonl(layout.train(), train);
  corpus::write_jsonl(layout.test(), test);
  corpus::write_jsonl(layout.pretrain(), pre);
  corpus::write_jsonl(layout.general_eval(), held_out);
  write_text(layout.corpus_dir() / "language.json", dump(nlohmann::json(lang)));
}

eval::RunReport Stage::evaluate(const std::filesystem::path& checkpoint, const std::string& run_id,
                                const std::string& regime, uint64_t seed) const {
  require(checkpoint, regime == "backbone" ? "pretrain" : "finetune");
  const auto v = vocab();
  const auto ck = model::load_checkpoint(checkpoint);
  const auto& m = ck.model;
  const auto test = corpus::read_jsonl(layout.test());
  const auto general = corpus::read_jsonl(layout.general_eval());
  const auto decode = greedy(cfg.eval.max_new_tokens);

  eval::RunReport rep;
  rep.run_id = run_id;
  rep.regime = regime;
  rep.seed = seed;
  rep.translation = eval::eval_translation(m, v, test, decode);
  rep.general = eval::eval_general(m, v, only_task(general, false), decode);
  rep.safety = eval::eval_safety(m, v, only_task(general, true), decode);

  // The same sample for every model: shuffled by the corpus seed.
  std::vector<Record> sample = test;
  Rng rng(derive_seed(cfg.corpus.seed, "emission"));
  rng.shuffle(std::span<Record>(sample));
  rep.emission = eval::rationale_emission_rate(m, v, sample, cfg.eval.emission_samples, decode);

  std::optional<double> backbone_mean;
  if (regime == "backbone") {
    backbone_mean = rep.general.mean;
  } else {
    require(layout.backbone_report(), "pretrain");
    backbone_mean = eval::report_from_json(load_json(layout.backbone_report()))
                        .general.mean;
  }
  rep.general.rp = eval::retention(rep.general.mean, backbone_mean);
  rep.meta = {{"checkpoint", checkpoint.lexically_relative(layout.root).generic_string()},
              {"checksum", fmt::format("{:016x}", m.checksum())}};
  return rep;
}


eval::RunReport Stage::pretrain() const {
  guard_output(layout.backbone(), force);
  require(layout.pretrain(), "gen");
  const auto v = vocab();
  const auto mc = model_config(v);
  auto tc = cfg.pretrain.train;
  tc.lora = false;
  tc.regime = Regime::kVanilla;
  model::Transformer<float> m(mc, derive_seed(tc.seed, "init"));
  train::TrainSet data;
  data.golden = examples(corpus::read_jsonl(layout.pretrain()), v, "enriched");
  train::train_run(tc, data, m, layout.backbone_dir(), {{"role", "backbone"}});

  auto rep = evaluate(layout.backbone(), "backbone", "backbone", tc.seed);
  write_text(layout.backbone_report(), dump(eval::to_json(rep)));
  write_text(layout.backbone_dir() / "report.csv", eval::csv_header(rep) + "\n" + eval::csv_row(rep) + "\n");
  const auto& p = cfg.pretrain;
  std::string missed;
  if (rep.general.mean < p.floor_general) missed += fmt::format(" general {:.3f} < {}", rep.general.mean, p.floor_general);
  if (rep.safety < p.floor_safety) missed += fmt::format(" safety {:.3f} < {}", rep.safety, p.floor_safety);
  if (rep.emission.rate() < p.floor_emission) {
    missed += fmt::format(" emission {:.3f} < {}", rep.emission.rate(), p.floor_emission);
  }
  if (!missed.empty()) {
    throw NumericalError("backbone below pretraining floor:" + missed + " (training curve: " +
                         (layout.backbone_dir() / "metrics.csv").string() + ")");
  }
  return rep;
}

void Stage::synthesize(Regime regime, const std::string& teacher) const {
  if (regime == Regime::kVanilla) return;
  require(layout.backbone(), "pretrain");
  require(layout.train(), "gen");
  const auto v = vocab();
  const auto records = corpus::read_jsonl(layout.train());
  const auto decode = greedy(cfg.distill.max_new_tokens);
  std::filesystem::create_directories(layout.data_dir());
  const auto backbone = model::load_checkpoint(layout.backbone()).model;
  const auto before = backbone.checksum();
  if (regime == Regime::kRadis) {
    const std::string teacher_path = teacher.empty() ? cfg.distill.teacher_checkpoint : teacher;
    std::filesystem::path out = layout.dataset(regime);
    std::vector<Record> enriched;
    if (teacher_path.empty()) {
      guard_output(out, force);
      enriched = distill::synthesize_radis(backbone, v, records, decode, "backbone",
                                           cfg.distill.max_rationale_len);
    } else {
      require(teacher_path, "pretrain (teacher)");
      out = layout.data_dir() / "radis_teacher.jsonl";
      guard_output(out, force);
      const auto t = model::load_checkpoint(teacher_path).model;
      if (t.config().vocab_size != static_cast<int>(v.size())) {
        throw ConfigError("teacher vocabulary differs from the corpus vocabulary");
      }
      enriched = distill::generate_teacher_rationales(t, v, records, decode,
                                                      std::filesystem::path(teacher_path).stem().string(),
                                                      cfg.distill.max_rationale_len);
    }
    corpus::write_jsonl(out, enriched);
    const auto stats = distill::rationale_stats(enriched);
    const auto stem = out.stem().string();
    write_text(layout.data_dir() / (stem + "_rationale_stats.json"), dump(distill::to_json(stats)));
    write_text(layout.data_dir() / (stem + "_rationale_stats.csv"), distill::to_csv(stats));
    if (stem == "radis") write_text(layout.data_dir() / "rationale_stats.json", dump(distill::to_json(stats)));
  } else if (regime == Regime::kSeqKd) {
    guard_output(layout.dataset(regime), force);
    corpus::write_jsonl(layout.dataset(regime), distill::synthesize_seqkd(backbone, v, records, decode));
  } else {
    guard_output(layout.dataset(regime), force);
    const std::string tmpl =
        cfg.distill.paraphrase_template.empty() ? distill::kParaphraseTemplate : cfg.distill.paraphrase_template;
    corpus::write_jsonl(layout.dataset(regime), distill::synthesize_sdft(backbone, v, records, tmpl, decode));
  }
  if (backbone.checksum() != before) throw NumericalError("synthesis modified the backbone");
}

train::TrainSet Stage::training_set(Regime regime, const corpus::Vocab& v) const {
  const auto path = layout.dataset(regime);
  require(path, regime == Regime::kVanilla ? "gen" : "synthesize --regime " + std::string(train::regime_name(regime)));
  const auto recs = corpus::read_jsonl(path);
  train::TrainSet set;
  switch (regime) {
    case Regime::kVanilla:
    case Regime::kSdft:
      set.golden = examples(recs, v, "reference");
      break;
    case Regime::kRadis:
      set.golden = examples(recs, v, "enriched");
      break;
    case Regime::kSeqKd:
      set.golden = examples(recs, v, "reference");
      set.pseudo = examples(recs, v, "pseudo");
      break;
  }
  return set;
}

eval::RunReport Stage::finetune(Regime regime, uint64_t seed) const {
  const auto dir = layout.run_dir(seed, regime);
  guard_output(dir / "report.json", force);
  require(layout.backbone(), "pretrain");
  const auto v = vocab();
  const auto data = training_set(regime, v);
  auto m = model::load_checkpoint(layout.backbone()).model;
  const auto tc = cfg.finetune.for_regime(regime, seed);
  train::train_run(tc, data, m, dir, {{"regime", train::regime_name(regime)}, {"seed", seed}});
  const auto ckpt = dir / (tc.lora ? "final_merged.ckpt" : "final.ckpt");
  const auto run_id = fmt::format("seed{}/{}", seed, train::regime_name(regime));
  auto rep = evaluate(ckpt, run_id, std::string(train::regime_name(regime)), seed);
  write_text(dir / "report.json", dump(eval::to_json(rep)));
  write_text(dir / "report.csv", eval::csv_header(rep) + "\n" + eval::csv_row(rep) + "\n");
  return rep;
}

void Stage::gradsim(uint64_t seed) const {
  const auto dir = layout.gradsim_dir(seed);
  guard_output(dir / "gradsim.csv", force);
  const auto v = vocab();
  require(layout.backbone(), "pretrain");
  const auto backbone = model::load_checkpoint(layout.backbone()).model;
  std::filesystem::path at = layout.backbone();
  if (cfg.gradsim.checkpoint != "backbone") {
    const auto r = train::parse_regime(cfg.gradsim.checkpoint);
    at = layout.run_dir(seed, r) / (cfg.finetune.base.lora ? "final_merged.ckpt" : "final.ckpt");
    require(at, "finetune");
  }
  auto m = model::load_checkpoint(at).model;
  if (cfg.finetune.base.lora) m.attach_lora(cfg.finetune.base.lora_config, derive_seed(seed, "lora"));

  // Probe targets always come from the frozen backbone, as in training.
  const auto decode = greedy(cfg.distill.max_new_tokens);
  auto probes = gradsim::build_probe_set(corpus::read_jsonl(layout.test()), cfg.gradsim.k_per_direction,
                                         derive_seed(seed, "probe"));
  probes = distill::synthesize_radis(backbone, v, probes, decode, "backbone", cfg.distill.max_rationale_len);
  probes = distill::synthesize_seqkd(backbone, v, probes, decode);

  const auto mt = gradsim::grad_feature(m, v, gradsim::LossTerm::kMt, probes);
  const auto radis = gradsim::grad_feature(m, v, gradsim::LossTerm::kRadisReg, probes);
  const auto seqkd = gradsim::grad_feature(m, v, gradsim::LossTerm::kSeqKdReg, probes);
  std::vector<gradsim::RegimeCosines> rows{
      {"seqkd_reg", gradsim::layer_cosine(mt, seqkd), mt.norms, seqkd.norms},
      {"radis_reg", gradsim::layer_cosine(mt, radis), mt.norms, radis.norms},
  };
  corpus::write_jsonl(dir / "probes.jsonl", probes);
  write_text(dir / "gradsim.csv", gradsim::conflict_csv(rows));
  write_text(dir / "gradsim.svg", gradsim::conflict_svg(rows));
  nlohmann::json summary = nlohmann::json::object();
  for (const auto& [regime, c] : gradsim::conflict_summary(rows)) {
    summary[regime] = {{"negative", c.negative}, {"positive", c.positive}, {"undefined", c.undefined}};
  }
  summary["checkpoint"] = cfg.gradsim.checkpoint;
  summary["probes"] = probes.size();
  write_text(dir / "summary.json", dump(summary));
}

namespace {

struct Spread {
  double mean = 0.0, lo = 0.0, hi = 0.0;
};

Spread spread(const std::vector<double>& xs) {
  Spread s;
  if (xs.empty()) return s;
  s.lo = s.hi = xs[0];
  for (double x : xs) {
    s.mean += x;
    s.lo = std::min(s.lo, x);
    s.hi = std::max(s.hi, x);
  }
  s.mean /= xs.size();
  return s;
}

}  // namespace

void Stage::report() const {
  require(layout.backbone_report(), "pretrain");
  const auto backbone = eval::report_from_json(load_json(layout.backbone_report()));
  struct Metric {
    const char* name;
    double (*get)(const eval::RunReport&);
    bool delta;
  };
  const std::vector<Metric> metrics{
      {"mt_exact_match", [](const eval::RunReport& r) { return r.translation.overall.exact_match; }, true},
      {"mt_token_f1", [](const eval::RunReport& r) { return r.translation.overall.token_f1; }, true},
      {"general_mean", [](const eval::RunReport& r) { return r.general.mean; }, true},
      {"rp", [](const eval::RunReport& r) { return r.general.rp.value_or(0.0); }, true},
      {"safety", [](const eval::RunReport& r) { return r.safety; }, true},
      {"emission_rate", [](const eval::RunReport& r) { return r.emission.rate(); }, true},
  };

  std::string header = "regime,n_seeds";
  for (const auto& m : metrics) {
    header += fmt::format(",{0}_mean,{0}_min,{0}_max", m.name);
    if (m.delta) header += fmt::format(",{}_delta", m.name);
  }
  std::string table = header + "\n";
  std::string runs;
  std::vector<svg::Point> points;
  auto add_row = [&](const std::string& regime, const std::vector<eval::RunReport>& reps) {
    std::string row = fmt::format("{},{}", regime, reps.size());
    std::vector<Spread> sp;
    for (const auto& m : metrics) {
      std::vector<double> xs;
      for (const auto& r : reps) xs.push_back(m.get(r));
      const auto s = spread(xs);
      sp.push_back(s);
      row += fmt::format(",{:.6f},{:.6f},{:.6f}", s.mean, s.lo, s.hi);
      if (m.delta) row += fmt::format(",{:+.6f}", s.mean - m.get(backbone));
    }
    table += row + "\n";
    points.push_back({sp[0].mean, sp[3].mean, sp[0].lo, sp[0].hi, sp[3].lo, sp[3].hi, regime});
  };
  add_row("backbone", {backbone});
  runs += eval::csv_header(backbone) + "\n" + eval::csv_row(backbone) + "\n";

  nlohmann::json summary = {{"backbone", eval::to_json(backbone)}, {"regimes", nlohmann::json::object()}};
  for (const auto& name : cfg.finetune.regimes) {
    const auto regime = train::parse_regime(name);
    std::vector<eval::RunReport> reps;
    for (uint64_t seed : cfg.seeds) {
      const auto path = layout.run_dir(seed, regime) / "report.json";
      require(path, fmt::format("finetune --regime {} --seed {}", name, seed));
      reps.push_back(eval::report_from_json(load_json(path)));
      runs += eval::csv_row(reps.back()) + "\n";
    }
    add_row(name, reps);
    nlohmann::json per_seed = nlohmann::json::array();
    for (const auto& r : reps) per_seed.push_back(eval::to_json(r));
    summary["regimes"][name] = per_seed;
  }

  // Gradient similarity: mean cosine per layer across seeds.
  std::map<std::string, std::vector<std::vector<std::optional<double>>>> cos_by_regime;
  std::string sign_csv = "seed,regime,negative,positive,undefined\n";
  bool have_gradsim = false;
  for (uint64_t seed : cfg.seeds) {
    const auto path = layout.gradsim_dir(seed) / "summary.json";
    if (!std::filesystem::exists(path)) continue;
    have_gradsim = true;
    const auto s = load_json(path);
    for (const char* reg : {"seqkd_reg", "radis_reg"}) {
      sign_csv += fmt::format("{},{},{},{},{}\n", seed, reg, s[reg]["negative"].get<int>(),
                              s[reg]["positive"].get<int>(), s[reg]["undefined"].size());
    }
    std::ifstream in(layout.gradsim_dir(seed) / "gradsim.csv");
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      const auto toks = [&] {
        std::vector<std::string> out;
        size_t start = 0;
        for (;;) {
          const size_t c = line.find(',', start);
          out.push_back(line.substr(start, c - start));
          if (c == std::string::npos) break;
          start = c + 1;
        }
        return out;
      }();
      auto& per_seed = cos_by_regime[toks[0]];
      if (per_seed.empty() || per_seed.back().size() > static_cast<size_t>(std::stoi(toks[1]))) {
        per_seed.emplace_back();
      }
      per_seed.back().push_back(toks[2].empty() ? std::nullopt : std::optional<double>(std::stod(toks[2])));
    }
  }

  const auto dir = layout.report_dir();
  write_text(dir / "table.csv", table);
  write_text(dir / "runs.csv", runs);
  write_text(dir / "summary.json", dump(summary));
  write_text(dir / "scatter.svg",
             svg::scatter("Translation vs general retention", "translation exact match", "RP", points));
  if (have_gradsim) {
    std::vector<gradsim::RegimeCosines> mean_rows;
    for (const auto& [regime, seeds] : cos_by_regime) {
      gradsim::RegimeCosines rc;
      rc.regime = regime;
      const size_t n_layers = seeds.front().size();
      for (size_t l = 0; l < n_layers; ++l) {
        double sum = 0.0;
        int n = 0;
        for (const auto& s : seeds) {
          if (l < s.size() && s[l]) {
            sum += *s[l];
            ++n;
          }
        }
        rc.cosine.push_back(n ? std::optional<double>(sum / n) : std::nullopt);
      }
      mean_rows.push_back(std::move(rc));
    }
    write_text(dir / "gradsim.svg", gradsim::conflict_svg(mean_rows));
    write_text(dir / "gradsim_signs.csv", sign_csv);
  }
}

void Stage::run_all() const {
  gen();
  pretrain();
  for (const auto& name : cfg.finetune.regimes) synthesize(train::parse_regime(name));
  for (uint64_t seed : cfg.seeds) {
    for (const auto& name : cfg.finetune.regimes) finetune(train::parse_regime(name), seed);
    gradsim(seed);
  }
  report();
}

}  // namespace radis::pipeline
