#include "radis/distill/distill.hpp"

#include <fmt/format.h>

#include "radis/corpus/records.hpp"
#include "radis/model/generate.hpp"
#include "radis/util/error.hpp"
#include "radis/util/parallel.hpp"

namespace radis::distill {
namespace {

using corpus::Record;

template <typename Fn>
std::vector<Record> map_records(const std::vector<Record>& in, Fn fn) {
  std::vector<Record> out(in.size());
  parallel_for(in.size(), [&](size_t i) { out[i] = fn(in[i]); });
  return out;
}

std::vector<int> strip_markers(const std::vector<int>& ids, const corpus::Vocab& vocab) {
  if (ids.size() >= 2 && ids.front() == vocab.inst_open() && ids.back() == vocab.inst_close()) {
    return {ids.begin() + 1, ids.end() - 1};
  }
  return ids;
}

model::DecodeConfig with_eos(model::DecodeConfig d, const corpus::Vocab& vocab) {
  d.stop_tokens = {vocab.eos()};
  return d;
}

}  // namespace

Rationale generate_rationale(const model::Transformer<float>& model, const corpus::Vocab& vocab,
                             std::span<const int> instruction, std::span<const int> reference,
                             const model::DecodeConfig& decode, const std::string& emitted_by,
                             int max_len) {
  Rationale out;
  out.emitted_by = emitted_by;
  std::vector<int> prefix{vocab.bos()};
  prefix.insert(prefix.end(), instruction.begin(), instruction.end());
  prefix.insert(prefix.end(), reference.begin(), reference.end());
  prefix.push_back(vocab.sep());
  const int room = model.config().max_seq_len - static_cast<int>(prefix.size());
  if (room < 1) {
    out.skipped = "prefix of " + std::to_string(prefix.size()) + " tokens leaves no room";
    return out;
  }
  auto d = with_eos(decode, vocab);
  d.max_new_tokens = std::min(max_len, room);
  const auto cont = model::generate(model, std::span<const int>(prefix), d);
  const bool stopped = !cont.empty() && cont.back() == vocab.eos();
  for (int t : cont) {
    if (t == vocab.eos()) break;
    if (!vocab.is_special(t)) out.tokens.push_back(t);
  }
  out.truncated = !stopped && !out.tokens.empty();
  return out;
}

EnrichedExample enrich(const corpus::Vocab& vocab, std::span<const int> instruction,
                       std::span<const int> reference, const Rationale& rationale, int max_seq_len) {
  EnrichedExample ex;
  ex.instruction.assign(instruction.begin(), instruction.end());
  ex.reference.assign(reference.begin(), reference.end());
  ex.rationale = rationale.tokens;
  ex.truncated = rationale.truncated;
  // BOS + instruction + y + SEP + r + EOS
  const int fixed = 2 + static_cast<int>(instruction.size() + reference.size());
  const int budget = max_seq_len - fixed - 1;
  if (!ex.rationale.empty() && static_cast<int>(ex.rationale.size()) > budget) {
    ex.rationale.resize(std::max(budget, 0));
    ex.truncated = true;
  }
  ex.response = ex.reference;
  if (!ex.rationale.empty()) {
    ex.response.push_back(vocab.sep());
    ex.response.insert(ex.response.end(), ex.rationale.begin(), ex.rationale.end());
  }
  return ex;
}

std::vector<Record> synthesize_radis(const model::Transformer<float>& model,
                                     const corpus::Vocab& vocab, const std::vector<Record>& records,
                                     const model::DecodeConfig& decode,
                                     const std::string& emitted_by, int max_rationale_len) {
  decode.validate();
  return map_records(records, [&](const Record& rec) {
    const auto instr = vocab.encode(rec.at("instruction").get<std::string>());
    const auto y = vocab.encode(rec.at("reference").get<std::string>());
    const auto rat = generate_rationale(model, vocab, instr, y, decode, emitted_by, max_rationale_len);
    const auto ex = enrich(vocab, instr, y, rat, model.config().max_seq_len);
    Record out = rec;
    out["rationale"] = ex.rationale.empty() ? nlohmann::json(nullptr)
                                            : nlohmann::json(vocab.decode(ex.rationale));
    out["enriched"] = vocab.decode(ex.response);
    out["boundary_T"] = ex.boundary();
    out["rationale_len_R"] = static_cast<int>(ex.rationale.size());
    out["emitted_by"] = emitted_by;
    out["truncated"] = ex.truncated;
    if (!rat.skipped.empty()) out["skipped"] = rat.skipped;
    return out;
  });
}

std::vector<Record> strip_rationales(const std::vector<Record>& records) {
  std::vector<Record> out = records;
  for (auto& r : out) {
    r["rationale"] = nullptr;
    r["enriched"] = r["reference"];
    r["boundary_T"] = static_cast<int>(corpus::split_tokens(r["reference"].get<std::string>()).size());
    r["rationale_len_R"] = 0;
    r["truncated"] = false;
  }
  return out;
}

std::vector<Record> synthesize_seqkd(const model::Transformer<float>& model,
                                     const corpus::Vocab& vocab, const std::vector<Record>& records,
                                     const model::DecodeConfig& decode) {
  decode.validate();
  return map_records(records, [&](const Record& rec) {
    std::vector<int> prefix{vocab.bos()};
    const auto instr = vocab.encode(rec.at("instruction").get<std::string>());
    prefix.insert(prefix.end(), instr.begin(), instr.end());
    auto d = with_eos(decode, vocab);
    d.max_new_tokens = std::min(d.max_new_tokens, model.config().max_seq_len - 1 -
                                                      static_cast<int>(prefix.size()));
    auto cont = model::generate(model, std::span<const int>(prefix), d);
    if (!cont.empty() && cont.back() == vocab.eos()) cont.pop_back();
    Record out = rec;
    out["pseudo"] = vocab.decode(cont);
    return out;
  });
}

std::vector<Record> synthesize_sdft(const model::Transformer<float>& model,
                                    const corpus::Vocab& vocab, const std::vector<Record>& records,
                                    const std::string& paraphrase_template,
                                    const model::DecodeConfig& decode) {
  decode.validate();
  if (paraphrase_template.find("{reference}") == std::string::npos) {
    throw ConfigError("paraphrase template needs a {reference} placeholder");
  }
  return map_records(records, [&](const Record& rec) {
    const auto instr = strip_markers(vocab.encode(rec.at("instruction").get<std::string>()), vocab);
    const std::string y = rec.at("reference").get<std::string>();
    std::string prompt = paraphrase_template;
    auto sub = [&](const std::string& key, const std::string& value) {
      const auto pos = prompt.find(key);
      if (pos != std::string::npos) prompt.replace(pos, key.size(), value);
    };
    sub("{instruction}", vocab.decode(instr));
    sub("{reference}", y);
    std::vector<int> prefix{vocab.bos(), vocab.inst_open()};
    for (int t : vocab.encode(prompt)) prefix.push_back(t);
    prefix.push_back(vocab.inst_close());
    std::vector<int> answer;
    if (static_cast<int>(prefix.size()) < model.config().max_seq_len) {
      auto d = with_eos(decode, vocab);
      d.stop_tokens.push_back(vocab.sep());
      const auto cont = model::generate(model, std::span<const int>(prefix), d);
      for (int t : cont) {
        if (t == vocab.eos() || t == vocab.sep()) break;
        if (!vocab.is_special(t)) answer.push_back(t);
      }
    }
    Record out = rec;
    out["original_reference"] = y;
    if (answer.empty()) {
      out["paraphrase_fallback"] = "empty rewrite";
    } else {
      out["reference"] = vocab.decode(answer);
    }
    out["rationale"] = nullptr;
    out["enriched"] = nullptr;
    return out;
  });
}

std::vector<corpus::RationaleCategory> tag_rationale(const std::vector<std::string>& rationale) {
  std::vector<corpus::RationaleCategory> out;
  for (auto c : corpus::all_categories()) {
    const auto kw = corpus::category_keyword(c);
    if (std::find(rationale.begin(), rationale.end(), kw) != rationale.end()) out.push_back(c);
  }
  return out;
}

RationaleStats rationale_stats(const std::vector<Record>& records) {
  RationaleStats s;
  std::array<size_t, corpus::kNumRationaleCategories> hits{};
  size_t total_len = 0;
  for (const auto& r : records) {
    ++s.n;
    if (r.value("truncated", false)) ++s.truncated;
    auto it = r.find("rationale");
    if (it == r.end() || it->is_null()) continue;
    const auto toks = corpus::split_tokens(it->get<std::string>());
    if (toks.empty()) continue;
    ++s.emitted;
    total_len += toks.size();
    for (auto c : tag_rationale(toks)) hits[static_cast<size_t>(c)]++;
  }
  if (s.n) s.emission_rate = static_cast<double>(s.emitted) / s.n;
  if (s.emitted) {
    s.mean_len = static_cast<double>(total_len) / s.emitted;
    for (size_t c = 0; c < hits.size(); ++c) s.category_pct[c] = 100.0 * hits[c] / s.emitted;
  }
  return s;
}

nlohmann::json to_json(const RationaleStats& s) {
  nlohmann::json cats = nlohmann::json::object();
  for (auto c : corpus::all_categories()) {
    cats[std::string(corpus::category_name(c))] = s.category_pct[static_cast<size_t>(c)];
  }
  return {{"n", s.n},
          {"emitted", s.emitted},
          {"emission_rate", s.emission_rate},
          {"mean_rationale_len", s.mean_len},
          {"truncated", s.truncated},
          {"category_pct", cats}};
}

std::string to_csv(const RationaleStats& s) {
  std::string out = "category,percent\n";
  for (auto c : corpus::all_categories()) {
    out += fmt::format("{},{:.4f}\n", corpus::category_name(c), s.category_pct[static_cast<size_t>(c)]);
  }
  out += fmt::format("emission_rate,{:.6f}\n", s.emission_rate);
  out += fmt::format("emitted,{}\nn,{}\nmean_rationale_len,{:.4f}\n", s.emitted, s.n, s.mean_len);
  return out;
}

}  // namespace radis::distill
