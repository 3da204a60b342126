#include <algorithm>
#include <vector>

#include "doctest.h"
#include "fixtures.hpp"
#include "radis/corpus/general.hpp"
#include "radis/corpus/records.hpp"
#include "radis/distill/distill.hpp"
#include "radis/eval/eval.hpp"
#include "radis/train/example.hpp"
#include "radis/util/error.hpp"

using namespace radis;
using namespace radis::distill;
using radis::testing::enriched_records;
using radis::testing::scripted_model;
using radis::testing::small_language;
using radis::testing::small_vocab;
using radis::testing::tiny_model;

namespace {

model::DecodeConfig greedy(int n = 40) {
  model::DecodeConfig d;
  d.max_new_tokens = n;
  return d;
}

std::vector<corpus::Record> plain_records(const corpus::LanguageSpec& lang, const corpus::Vocab& v,
                                          size_t n, uint64_t seed) {
  auto recs = enriched_records(lang, v, n, seed);
  return strip_rationales(recs);
}

// Length of BOS . instruction . y . SEP for a record.
int rationale_prefix_len(const corpus::Record& r, const corpus::Vocab& v) {
  return 2 + static_cast<int>(v.encode(r["instruction"].get<std::string>()).size() +
                              v.encode(r["reference"].get<std::string>()).size());
}

}  // namespace

TEST_CASE("enrich concatenates y, SEP and r") {
  const auto lang = small_language();
  const auto v = small_vocab(lang);
  const std::vector<int> instr{v.inst_open(), v.id("s1"), v.inst_close()};
  const std::vector<int> y{v.id("t0"), v.id("t1"), v.id("t2")};
  Rationale r;
  for (int i = 0; i < 5; ++i) r.tokens.push_back(v.id("s" + std::to_string(i)));
  const auto ex = enrich(v, instr, y, r, 64);
  CHECK(ex.response.size() == 9);
  CHECK(ex.boundary() == 3);
  CHECK(ex.response[3] == v.sep());
  CHECK_FALSE(ex.truncated);

  const auto te = train::make_example(v, ex.instruction, ex.response, ex.boundary());
  CHECK(std::count(te.mask.begin(), te.mask.end(), 1) == 10);
  for (int i = 0; i < te.response_start; ++i) CHECK(te.mask[i] == 0);

  const auto bare = enrich(v, instr, y, Rationale{}, 64);
  CHECK(bare.response == y);

  // BOS + 3 + 3 + SEP + r + EOS must fit in 11: two rationale tokens survive.
  const auto cut = enrich(v, instr, y, r, 11);
  CHECK(cut.rationale.size() == 2);
  CHECK(cut.truncated);
  CHECK(cut.response.size() + instr.size() + 2 == 11);
}

TEST_CASE("generated rationales stop at EOS, respect the cap and drop role markers") {
  const auto lang = small_language();
  const auto v = small_vocab(lang);
  const auto rec = plain_records(lang, v, 1, 3)[0];
  const auto instr = v.encode(rec["instruction"].get<std::string>());
  const auto y = v.encode(rec["reference"].get<std::string>());
  const int L = rationale_prefix_len(rec, v);

  SUBCASE("immediate EOS gives an empty rationale") {
    const auto m = scripted_model(v, {});
    const auto r = generate_rationale(m, v, instr, y, greedy(), "backbone");
    CHECK(r.empty());
    CHECK_FALSE(r.truncated);
    CHECK(r.emitted_by == "backbone");
  }
  SUBCASE("a scripted continuation is returned verbatim") {
    const auto m = scripted_model(v, {{L - 1, v.id("RATIONALE")}, {L, v.id(":")}, {L + 1, v.id("s2")}});
    const auto r = generate_rationale(m, v, instr, y, greedy(), "backbone");
    CHECK(v.decode(r.tokens) == "RATIONALE : s2");
  }
  SUBCASE("role markers are stripped") {
    const auto m = scripted_model(v, {{L - 1, v.inst_open()}, {L, v.id("s2")}, {L + 1, v.inst_close()}});
    const auto r = generate_rationale(m, v, instr, y, greedy(), "backbone");
    CHECK(v.decode(r.tokens) == "s2");
  }
  SUBCASE("a run-on continuation is capped") {
    std::vector<std::pair<int, int>> script;
    for (int p = L - 1; p < 48; ++p) script.push_back({p, v.id("s1")});
    const auto m = scripted_model(v, script);
    const auto r = generate_rationale(m, v, instr, y, greedy(), "backbone", 5);
    CHECK(r.tokens.size() == 5);
    CHECK(r.truncated);
  }
  SUBCASE("an over-length prefix is skipped with a reason") {
    const auto m = scripted_model(v, {}, L);
    const auto r = generate_rationale(m, v, instr, y, greedy(), "backbone");
    CHECK(r.empty());
    CHECK_FALSE(r.skipped.empty());
  }
}

TEST_CASE("synthesis leaves the backbone untouched and is reproducible") {
  const auto lang = small_language();
  const auto v = small_vocab(lang);
  model::Transformer<float> m(tiny_model(v), 21);
  const auto recs = plain_records(lang, v, 24, 5);
  const auto before = m.checksum();
  const auto a = synthesize_radis(m, v, recs, greedy(), "backbone");
  const auto b = synthesize_radis(m, v, recs, greedy(), "backbone");
  synthesize_seqkd(m, v, recs, greedy());
  synthesize_sdft(m, v, recs, kParaphraseTemplate, greedy());
  CHECK(m.checksum() == before);
  CHECK(a == b);

  REQUIRE(a.size() == recs.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i]["id"] == recs[i]["id"]);
    corpus::validate_record(a[i]);
    const int t = a[i]["boundary_T"].get<int>();
    const int r = a[i]["rationale_len_R"].get<int>();
    const auto enriched = corpus::split_tokens(a[i]["enriched"].get<std::string>());
    CHECK(enriched.size() == static_cast<size_t>(t + (r > 0 ? 1 + r : 0)));
    CHECK(a[i]["rationale"].is_null() == (r == 0));
  }
}

TEST_CASE("a teacher equal to the student reproduces its rationales") {
  const auto lang = small_language();
  const auto v = small_vocab(lang);
  model::Transformer<float> m(tiny_model(v), 21);
  const auto recs = plain_records(lang, v, 12, 5);
  auto own = synthesize_radis(m, v, recs, greedy(), "teacher");
  auto teach = generate_teacher_rationales(m, v, recs, greedy(), "teacher");
  CHECK(own == teach);

  model::Transformer<float> big(tiny_model(v, 3), 4);
  const auto other = generate_teacher_rationales(big, v, recs, greedy(), "teacher-3l");
  for (const auto& r : other) CHECK(r["emitted_by"] == "teacher-3l");
}

TEST_CASE("seqkd pseudo targets are the greedy responses, kept as-is") {
  const auto lang = small_language();
  const auto v = small_vocab(lang);
  model::Transformer<float> m(tiny_model(v), 8);
  const auto recs = plain_records(lang, v, 16, 2);
  const auto out = synthesize_seqkd(m, v, recs, greedy());
  REQUIRE(out.size() == recs.size());
  const auto responses = eval::respond(m, v, recs, greedy());
  for (size_t i = 0; i < out.size(); ++i) {
    auto expect = responses[i];
    if (!expect.empty() && expect.back() == v.eos()) expect.pop_back();
    CHECK(out[i]["pseudo"] == v.decode(expect));
    CHECK(out[i]["reference"] == recs[i]["reference"]);
  }

  // A backbone that answers with the reference yields y' == y.
  const auto& rec = recs[0];
  const auto y = v.encode(rec["reference"].get<std::string>());
  const int start = 1 + static_cast<int>(v.encode(rec["instruction"].get<std::string>()).size());
  std::vector<std::pair<int, int>> script;
  for (size_t k = 0; k < y.size(); ++k) script.push_back({start - 1 + static_cast<int>(k), y[k]});
  const auto perfect = synthesize_seqkd(scripted_model(v, script), v, {rec}, greedy());
  CHECK(perfect[0]["pseudo"] == rec["reference"]);
}

TEST_CASE("sdft keeps the original reference and falls back on empty rewrites") {
  const auto lang = small_language();
  const auto v = small_vocab(lang);
  const auto recs = plain_records(lang, v, 4, 9);

  const auto silent = synthesize_sdft(scripted_model(v, {}, 64), v, recs, kParaphraseTemplate, greedy());
  for (size_t i = 0; i < recs.size(); ++i) {
    CHECK(silent[i]["reference"] == recs[i]["reference"]);
    CHECK(silent[i]["original_reference"] == recs[i]["reference"]);
    CHECK(silent[i].contains("paraphrase_fallback"));
  }

  // A rewriter that echoes the reference leaves the dataset unchanged.
  std::vector<corpus::Record> echoed;
  for (const auto& rec : recs) {
    const auto y = v.encode(rec["reference"].get<std::string>());
    auto instr = v.encode(rec["instruction"].get<std::string>());
    std::string prompt = kParaphraseTemplate;
    prompt.replace(prompt.find("{instruction}"), 13,
                   v.decode(std::vector<int>(instr.begin() + 1, instr.end() - 1)));
    prompt.replace(prompt.find("{reference}"), 11, rec["reference"].get<std::string>());
    const int start = 3 + static_cast<int>(v.encode(prompt).size());
    std::vector<std::pair<int, int>> script;
    for (size_t k = 0; k < y.size(); ++k) script.push_back({start - 1 + static_cast<int>(k), y[k]});
    const auto out = synthesize_sdft(scripted_model(v, script, 64), v, {rec}, kParaphraseTemplate, greedy());
    CHECK(out[0]["reference"] == rec["reference"]);
    CHECK_FALSE(out[0].contains("paraphrase_fallback"));
    echoed.push_back(out[0]);
  }
  CHECK(echoed.size() == recs.size());

  // Rewrites that change words are stored verbatim.
  std::vector<std::pair<int, int>> noisy;
  for (int p = 0; p < 64; ++p) noisy.push_back({p, v.id("t3")});
  const auto wrong = synthesize_sdft(scripted_model(v, noisy, 64), v, {recs[0]}, kParaphraseTemplate, greedy(3));
  CHECK(wrong[0]["reference"] == "t3 t3 t3");
  CHECK(wrong[0]["original_reference"] == recs[0]["reference"]);

  CHECK_THROWS_AS(synthesize_sdft(scripted_model(v, {}), v, recs, "{instruction}", greedy()), ConfigError);
}

TEST_CASE("rationale tagging and statistics") {
  using corpus::RationaleCategory;
  CHECK(tag_rationale(corpus::split_tokens("RATIONALE : s0 means t1")) ==
        std::vector<RationaleCategory>{RationaleCategory::kWordTranslation});
  const auto multi = tag_rationale(corpus::split_tokens("RATIONALE : s0 means t1 ; back : s0 ;"));
  CHECK(multi.size() == 2);
  CHECK(tag_rationale({}).empty());

  std::vector<corpus::Record> recs(4, corpus::Record{{"rationale", nullptr}});
  recs[0]["rationale"] = "RATIONALE : s0 means t1 ; back : s0 ;";
  recs[1]["rationale"] = "RATIONALE : s2 means t4 ;";
  const auto s = rationale_stats(recs);
  CHECK(s.n == 4);
  CHECK(s.emitted == 2);
  CHECK(s.emission_rate == 0.5);
  CHECK(s.mean_len == doctest::Approx(8.0));
  CHECK(s.category_pct[size_t(RationaleCategory::kWordTranslation)] == 100.0);
  CHECK(s.category_pct[size_t(RationaleCategory::kBackTranslation)] == 50.0);
  double sum = 0.0;
  for (double p : s.category_pct) {
    CHECK(p >= 0.0);
    CHECK(p <= 100.0);
    sum += p;
  }
  CHECK(sum > 100.0);
  CHECK(to_json(s)["emitted"] == 2);
  CHECK(to_csv(s).find("word_phrase_translation,100.0000") != std::string::npos);
}

TEST_CASE("a suite built at 70% rationale fraction measures 0.70") {
  const auto lang = small_language();
  const auto v = small_vocab(lang);
  corpus::GeneralTaskSpec spec;
  spec.content_vocab_size = lang.vocab_size;
  std::vector<corpus::Record> recs;
  for (const auto& ex : corpus::gen_general_suite(spec, 200, 0.7, 13)) {
    recs.push_back(corpus::general_record(static_cast<int>(recs.size()), ex, v));
  }
  const auto s = rationale_stats(recs);
  CHECK(s.emission_rate == doctest::Approx(0.70).epsilon(0.03 / 0.70));
}
