#include <algorithm>
#include <vector>

#include "doctest.h"
#include "fixtures.hpp"
#include "radis/corpus/general.hpp"
#include "radis/corpus/records.hpp"
#include "radis/eval/eval.hpp"
#include "radis/util/error.hpp"
#include "radis/util/rng.hpp"

using namespace radis;
using namespace radis::eval;
using radis::testing::enriched_records;
using radis::testing::scripted_model;
using radis::testing::small_language;
using radis::testing::small_vocab;
using radis::testing::tiny_model;

namespace {

model::DecodeConfig greedy(int n = 30) {
  model::DecodeConfig d;
  d.max_new_tokens = n;
  return d;
}

// A scripted model that answers the record's instruction with `answer`.
model::Transformer<float> answering(const corpus::Vocab& v, const corpus::Record& r,
                                    const std::vector<int>& answer) {
  const int start = 1 + static_cast<int>(v.encode(r["instruction"].get<std::string>()).size());
  std::vector<std::pair<int, int>> script;
  for (size_t k = 0; k < answer.size(); ++k) script.push_back({start - 1 + static_cast<int>(k), answer[k]});
  return scripted_model(v, script);
}

}  // namespace

TEST_CASE("responses are split at the first SEP and cut at EOS") {
  const auto lang = small_language();
  const auto v = small_vocab(lang);
  const auto p = parse_response(v.encode("t1 t2 <sep> RATIONALE : s0 <sep> s1 <eos> t7"), v);
  CHECK(v.decode(p.answer) == "t1 t2");
  CHECK(v.decode(p.rationale) == "RATIONALE : s0 <sep> s1");
  CHECK(p.has_sep);
  CHECK(p.has_eos);
  const auto bare = parse_response(v.encode("t1 t2"), v);
  CHECK(v.decode(bare.answer) == "t1 t2");
  CHECK_FALSE(bare.has_sep);
  CHECK_FALSE(bare.has_eos);
}

TEST_CASE("token F1 over multisets") {
  CHECK(token_f1({1, 1, 2}, {1, 2, 3}) == doctest::Approx(2.0 / 3.0));
  CHECK(token_f1({1, 1}, {1}) == doctest::Approx(2.0 / 3.0));
  CHECK(token_f1({}, {}) == 1.0);
  CHECK(token_f1({1}, {}) == 0.0);
  CHECK(token_f1({3, 2, 1}, {1, 2, 3}) == 1.0);

  // F1 is never below exact match.
  Rng rng(4);
  for (int i = 0; i < 500; ++i) {
    std::vector<int> a(rng.range(0, 4)), b(rng.range(0, 4));
    for (auto& x : a) x = static_cast<int>(rng.below(3));
    for (auto& x : b) x = static_cast<int>(rng.below(3));
    CHECK(token_f1(a, b) >= (a == b ? 1.0 : 0.0));
    CHECK(token_f1(a, b) <= 1.0);
  }
}

TEST_CASE("a perfect answer scores 1 and the rationale tail is ignored") {
  const auto lang = small_language();
  const auto v = small_vocab(lang);
  for (const auto& r : enriched_records(lang, v, 6, 3)) {
    auto answer = v.encode(r["reference"].get<std::string>());
    const auto exact = eval_translation(answering(v, r, answer), v, {r}, greedy());
    CHECK(exact.overall.exact_match == 1.0);
    CHECK(exact.overall.token_f1 == 1.0);
    CHECK(exact.by_direction.at(r["direction"].get<std::string>()).n == 1);

    answer.push_back(v.sep());
    for (int t : v.encode("RATIONALE : s0 means t1")) answer.push_back(t);
    CHECK(eval_translation(answering(v, r, answer), v, {r}, greedy()).overall.exact_match == 1.0);
    const auto em = rationale_emission_rate(answering(v, r, answer), v, {r}, 200, greedy());
    CHECK(em.emitted == 1);
    CHECK(em.total == 1);
  }
}

TEST_CASE("an untrained model is near chance") {
  const auto lang = small_language(24);
  const auto v = small_vocab(lang);
  model::Transformer<float> m(tiny_model(v), 5);
  const auto rep = eval_translation(m, v, enriched_records(lang, v, 100, 2), greedy());
  CHECK(rep.overall.n == 100);
  CHECK(rep.overall.exact_match <= 0.02);
  CHECK(rep.overall.token_f1 >= rep.overall.exact_match);
}

TEST_CASE("general accuracy skips refuse prompts, safety checks the refusal prefix") {
  const auto lang = small_language();
  const auto v = small_vocab(lang);
  corpus::GeneralTaskSpec spec;
  spec.content_vocab_size = lang.vocab_size;
  std::vector<corpus::Record> suite, unsafe;
  for (const auto& ex : corpus::gen_general_suite(spec, 3, 0.0, 1)) {
    auto r = corpus::general_record(static_cast<int>(suite.size()), ex, v);
    (ex.task == corpus::GeneralTask::kRefuse ? unsafe : suite).push_back(r);
    if (ex.task == corpus::GeneralTask::kRefuse) suite.push_back(r);
  }
  model::Transformer<float> m(tiny_model(v), 2);
  const auto rep = eval_general(m, v, suite, greedy());
  CHECK(rep.accuracy.size() == 4);
  CHECK_FALSE(rep.accuracy.count("refuse"));

  std::vector<int> refusal;
  for (const auto& w : corpus::refusal_sequence()) refusal.push_back(v.id(w));
  for (const auto& r : unsafe) {
    CHECK(eval_safety(answering(v, r, refusal), v, {r}, greedy()) == 1.0);
    auto partial = refusal;
    partial.pop_back();
    CHECK(eval_safety(answering(v, r, partial), v, {r}, greedy()) == 0.0);
  }
  CHECK(eval_safety(scripted_model(v, {}), v, unsafe, greedy()) == 0.0);
  CHECK(eval_safety(m, v, {}, greedy()) == 0.0);
}

TEST_CASE("retention is relative to the backbone") {
  CHECK(retention(0.8, 0.8) == 100.0);
  CHECK(retention(0.0, 0.8) == 0.0);
  CHECK(retention(0.4, 0.8) == doctest::Approx(50.0));
  CHECK_THROWS_AS(retention(0.4, std::nullopt), DependencyError);
  CHECK_THROWS_AS(retention(0.4, 0.0), DependencyError);
}

TEST_CASE("run reports round-trip through JSON and flatten to CSV") {
  RunReport r;
  r.run_id = "seed1/radis";
  r.regime = "radis";
  r.seed = 1;
  r.translation.overall = {4, 0.5, 0.75};
  r.translation.by_direction["src-tgt"] = {2, 0.5, 0.7};
  r.translation.by_direction["tgt-src"] = {2, 0.5, 0.8};
  r.general.accuracy = {{"copy", 1.0}, {"sort", 0.5}};
  r.general.mean = 0.75;
  r.general.rp = 90.0;
  r.safety = 0.95;
  r.emission = {3, 4};
  const auto back = report_from_json(to_json(r));
  CHECK(to_json(back) == to_json(r));
  CHECK(back.emission.rate() == 0.75);

  const auto header = csv_header(r), row = csv_row(r);
  CHECK(std::count(header.begin(), header.end(), ',') == std::count(row.begin(), row.end(), ','));
  CHECK(header.find("acc_sort") != std::string::npos);
  CHECK(row.find("90.0000") != std::string::npos);

  r.general.rp.reset();
  CHECK(report_from_json(to_json(r)).general.rp == std::nullopt);
  CHECK_THROWS_AS(report_from_json(nlohmann::json{{"run_id", "x"}}), DataError);
}
