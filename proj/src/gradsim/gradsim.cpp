#include "radis/gradsim/gradsim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "radis/train/example.hpp"
#include "radis/train/trainer.hpp"
#include "radis/util/error.hpp"
#include "radis/util/rng.hpp"
#include "radis/util/svg.hpp"

namespace radis::gradsim {

std::string_view term_name(LossTerm t) {
  switch (t) {
    case LossTerm::kMt: return "mt";
    case LossTerm::kRadisReg: return "radis_reg";
    case LossTerm::kSeqKdReg: return "seqkd_reg";
  }
  return "?";
}

std::vector<corpus::Record> build_probe_set(const std::vector<corpus::Record>& test, size_t k,
                                            uint64_t seed) {
  if (k == 0) throw DataError("probe set: k must be positive");
  std::map<std::string, std::vector<size_t>> by_dir;
  for (size_t i = 0; i < test.size(); ++i) {
    const auto& d = test[i]["direction"];
    if (d.is_string()) by_dir[d.get<std::string>()].push_back(i);
  }
  if (by_dir.empty()) throw DataError("probe set: no translation records");
  std::vector<corpus::Record> out;
  for (auto& [dir, idx] : by_dir) {
    if (idx.size() < k) {
      throw DataError(fmt::format("probe set: direction {} has {} records, {} requested", dir,
                                  idx.size(), k));
    }
    Rng rng(derive_seed(seed, "probe/" + dir));
    rng.shuffle(std::span<size_t>(idx));
    for (size_t i = 0; i < k; ++i) out.push_back(test[idx[i]]);
  }
  return out;
}

template <typename T>
GradientFeature grad_feature(const model::Transformer<T>& model, const corpus::Vocab& vocab,
                             LossTerm term, const std::vector<corpus::Record>& probes, double scale) {
  std::vector<train::Example> examples;
  examples.reserve(probes.size());
  for (const auto& p : probes) {
    train::Example ex;
    if (term == LossTerm::kSeqKdReg) {
      if (!p.contains("pseudo")) throw DataError("seqkd_reg probe lacks \"pseudo\"");
      ex = train::example_from_record(p, vocab, "pseudo");
    } else if (term == LossTerm::kRadisReg) {
      if (!p.contains("enriched") || p["enriched"].is_null()) {
        throw DataError("radis_reg probe lacks \"enriched\"");
      }
      ex = train::example_from_record(p, vocab, "enriched");
      for (int i = 0; i < ex.rationale_start; ++i) ex.mask[i] = 0;
    } else {
      ex = train::example_from_record(p, vocab, "reference");
      // y tokens only; the trailing EOS belongs to neither term's y part.
      ex.mask.back() = 0;
    }
    examples.push_back(std::move(ex));
  }
  std::vector<const train::Example*> ptrs;
  for (const auto& e : examples) ptrs.push_back(&e);
  model::AlignedVector<T> grad(model.trainable().size());
  const auto loss = train::batch_gradient(model, std::span<const train::Example* const>(ptrs), {},
                                          std::span<T>(grad));
  // batch_gradient returns the per-token mean; undo it to get the sum.
  const double to_sum = scale * static_cast<double>(loss.active_golden);

  GradientFeature f;
  f.term = term;
  for (int l = 0; l < model.config().n_layers; ++l) {
    std::vector<double> v;
    for (const auto& [off, len] : model.trainable_ranges_for_layer(l)) {
      for (size_t i = off; i < off + len; ++i) v.push_back(static_cast<double>(grad[i]) * to_sum);
    }
    double n2 = 0.0;
    for (double x : v) n2 += x * x;
    f.norms.push_back(std::sqrt(n2));
    f.layers.push_back(std::move(v));
  }
  return f;
}

template GradientFeature grad_feature(const model::Transformer<float>&, const corpus::Vocab&,
                                      LossTerm, const std::vector<corpus::Record>&, double);
template GradientFeature grad_feature(const model::Transformer<double>&, const corpus::Vocab&,
                                      LossTerm, const std::vector<corpus::Record>&, double);

std::vector<std::optional<double>> layer_cosine(const GradientFeature& a, const GradientFeature& b) {
  if (a.layers.size() != b.layers.size()) throw DataError("layer_cosine: layer counts differ");
  std::vector<std::optional<double>> out;
  for (size_t l = 0; l < a.layers.size(); ++l) {
    const auto& x = a.layers[l];
    const auto& y = b.layers[l];
    if (x.size() != y.size()) throw DataError(fmt::format("layer_cosine: layer {} sizes differ", l));
    double dot = 0.0, nx = 0.0, ny = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
      dot += x[i] * y[i];
      nx += x[i] * x[i];
      ny += y[i] * y[i];
    }
    if (nx == 0.0 || ny == 0.0) {
      out.push_back(std::nullopt);
    } else {
      out.push_back(std::clamp(dot / std::sqrt(nx * ny), -1.0, 1.0));
    }
  }
  return out;
}

SignCounts count_signs(const std::vector<std::optional<double>>& cosines) {
  SignCounts c;
  for (size_t l = 0; l < cosines.size(); ++l) {
    if (!cosines[l]) {
      c.undefined.push_back(static_cast<int>(l));
    } else if (*cosines[l] < 0) {
      ++c.negative;
    } else if (*cosines[l] > 0) {
      ++c.positive;
    }
  }
  return c;
}

std::string conflict_csv(const std::vector<RegimeCosines>& rows) {
  std::string out = "regime,layer,cosine,norm_a,norm_b\n";
  for (const auto& r : rows) {
    for (size_t l = 0; l < r.cosine.size(); ++l) {
      out += fmt::format("{},{},{},{:.9g},{:.9g}\n", r.regime, l,
                         r.cosine[l] ? fmt::format("{:.9f}", *r.cosine[l]) : std::string(),
                         r.norm_a[l], r.norm_b[l]);
    }
  }
  return out;
}

std::string conflict_svg(const std::vector<RegimeCosines>& rows) {
  std::vector<std::string> cats;
  size_t n_layers = 0;
  for (const auto& r : rows) n_layers = std::max(n_layers, r.cosine.size());
  for (size_t l = 0; l < n_layers; ++l) cats.push_back("L" + std::to_string(l));
  std::vector<svg::BarSeries> series;
  for (const auto& r : rows) series.push_back({"cos(mt, " + r.regime + ")", r.cosine});
  return svg::bar_chart("Per-layer gradient cosine with the MT loss", cats, series);
}

std::map<std::string, SignCounts> conflict_summary(const std::vector<RegimeCosines>& rows) {
  std::map<std::string, SignCounts> out;
  for (const auto& r : rows) out[r.regime] = count_signs(r.cosine);
  return out;
}

}  // namespace radis::gradsim
