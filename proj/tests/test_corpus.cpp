#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "doctest.h"
#include "radis/corpus/dataset.hpp"
#include "radis/corpus/general.hpp"
#include "radis/corpus/language.hpp"
#include "radis/corpus/rationale.hpp"
#include "radis/corpus/templates.hpp"
#include "radis/corpus/vocab.hpp"
#include "radis/util/error.hpp"
#include "radis/util/hash.hpp"
#include "radis/util/rng.hpp"

using namespace radis;
using namespace radis::corpus;

namespace {

std::vector<std::string> words(const std::string& s) { return split_tokens(s); }

std::filesystem::path tmp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "radis_test_corpus";
  std::filesystem::create_directories(dir);
  return dir / name;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

LanguageSpec spec_with(std::vector<int> perm, Reorder reorder) {
  LanguageSpec s;
  s.vocab_size = static_cast<int>(perm.size());
  s.permutation = std::move(perm);
  s.reorder = reorder;
  s.finalize();
  return s;
}

}  // namespace

TEST_CASE("oracle on hand-built languages") {
  auto id = spec_with({0, 1, 2}, Reorder::kIdentity);
  CHECK(oracle(id, words("s2 s0"), Direction::kSrcToTgt) == words("t2 t0"));

  // pi = (0->1, 1->0, 2->2), then reverse.
  auto swap = spec_with({1, 0, 2}, Reorder::kReverse);
  CHECK(oracle(swap, words("s0 s2"), Direction::kSrcToTgt) == words("t2 t1"));
  CHECK(gloss(swap, words("s0 s2"), Direction::kSrcToTgt) == words("t1 t2"));
  // The reverse direction inverts pi.
  CHECK(oracle(swap, words("t2 t1"), Direction::kTgtToSrc) == words("s0 s2"));

  LanguageSpec bad;
  bad.vocab_size = 3;
  bad.permutation = {0, 0, 2};
  CHECK_THROWS_AS(bad.finalize(), ConfigError);
}

TEST_CASE("oracle soundness and round trip over random pairs") {
  for (uint64_t seed : {1u, 2u, 3u}) {
    auto spec = make_language(seed, 24);
    auto corpus = gen_translation_corpus(spec, 1000, 10, seed);
    for (const auto& p : corpus.train) {
      // Independent recomputation from the permutation table.
      std::vector<std::string> expect;
      for (const auto& tok : p.x) {
        const int i = std::stoi(tok.substr(1));
        if (p.direction == Direction::kSrcToTgt) {
          expect.push_back("t" + std::to_string(spec.permutation[i]));
        } else {
          int j = 0;
          while (spec.permutation[j] != i) ++j;
          expect.push_back("s" + std::to_string(j));
        }
      }
      std::reverse(expect.begin(), expect.end());
      REQUIRE(p.y == expect);
      const auto back = p.direction == Direction::kSrcToTgt ? Direction::kTgtToSrc
                                                            : Direction::kSrcToTgt;
      REQUIRE(oracle(spec, p.y, back) == p.x);
      REQUIRE(p.x.size() >= 2);
      REQUIRE(p.x.size() <= 8);
    }
  }
}

TEST_CASE("translation corpus splits") {
  auto spec = make_language(7, 24);
  auto c = gen_translation_corpus(spec, 500, 200, 11);
  std::set<std::pair<int, std::vector<std::string>>> train;
  std::map<Direction, int> dirs;
  for (const auto& p : c.train) {
    train.insert({static_cast<int>(p.direction), p.x});
    dirs[p.direction]++;
  }
  CHECK(train.size() == c.train.size());
  for (const auto& p : c.test) CHECK(train.count({static_cast<int>(p.direction), p.x}) == 0);
  CHECK(dirs[Direction::kSrcToTgt] == 250);
  CHECK(dirs[Direction::kTgtToSrc] == 250);

  CHECK_THROWS_AS(gen_translation_corpus(spec, 0, 10, 1), ConfigError);
  auto tiny = make_language(1, 2);
  tiny.max_len = 2;  // 4 sequences per direction
  CHECK_THROWS_AS(gen_translation_corpus(tiny, 8, 4, 1), DataError);
  // Exhausting the space exactly still works.
  auto all = gen_translation_corpus(tiny, 4, 4, 1);
  CHECK(all.train.size() == 4);

  auto again = gen_translation_corpus(spec, 500, 200, 11);
  CHECK(again.train == c.train);
  CHECK(again.test == c.test);
}

TEST_CASE("general suite") {
  CHECK(task_oracle(GeneralTask::kReverse, words("3 1 2")) == words("2 1 3"));
  CHECK(task_oracle(GeneralTask::kModSum, words("3 4 5")) == words("2"));
  CHECK(task_oracle(GeneralTask::kSort, words("3 1 2")) == words("1 2 3"));
  CHECK(task_oracle(GeneralTask::kRefuse, words("s1 s2")) == refusal_sequence());

  GeneralTaskSpec spec;
  auto suite = gen_general_suite(spec, 101, 0.7, 5);
  CHECK(suite.size() == 5 * 101);
  std::map<GeneralTask, int> with_rationale;
  for (const auto& ex : suite) {
    CHECK(ex.answer == task_oracle(ex.task, ex.prompt));
    if (!ex.rationale.empty()) with_rationale[ex.task]++;
  }
  for (const auto& [task, n] : with_rationale) CHECK(n == 70);

  CHECK(gen_general_suite(spec, 10, 0.0, 1)[0].rationale.empty());
  CHECK_THROWS_AS(gen_general_suite(spec, 10, 1.5, 1), ConfigError);
  spec.tasks = {"copy", "juggle"};
  CHECK_THROWS_AS(gen_general_suite(spec, 10, 0.5, 1), ConfigError);
}

TEST_CASE("refuse prompts phrased as translation requests") {
  GeneralTaskSpec spec;
  spec.tasks = {"refuse"};
  const std::vector<std::string> ask{"Translate", "this", "sentence", "."};
  auto asks = [&](const GeneralExample& ex) {
    return ex.prompt.size() > ask.size() && std::equal(ask.begin(), ask.end(), ex.prompt.end() - 4);
  };
  int plain = 0, wrapped = 0;
  for (double f : {0.0, 1.0, 0.5}) {
    spec.refuse_request_fraction = f;
    int n = 0;
    for (const auto& ex : gen_general_suite(spec, 400, 0.0, 3)) {
      CHECK(ex.answer == refusal_sequence());
      n += asks(ex);
    }
    if (f == 0.0) plain = n;
    if (f == 1.0) wrapped = n;
    if (f == 0.5) CHECK(std::abs(n / 400.0 - 0.5) <= 0.08);
  }
  CHECK(plain == 0);
  CHECK(wrapped == 400);
  nlohmann::json j = spec;
  j["refuse_request_fraction"] = 1.5;
  CHECK_THROWS_AS(j.get<GeneralTaskSpec>(), ConfigError);
}

TEST_CASE("vocab construction and round trip") {
  LanguageSpec lang = make_language(1, 8);
  GeneralTaskSpec tasks;
  tasks.content_vocab_size = 8;
  Vocab v = build_vocab(lang, tasks);
  CHECK_THROWS_AS(build_vocab(make_language(1, 7), tasks), ConfigError);
  for (auto t : {"s0", "s7", "t0", "t7", "<pad>", "<bos>", "<eos>", "<sep>", "RATIONALE", "means",
                 ";", "0", "9", "COPY", "UNSAFE"}) {
    CHECK(v.contains(t));
  }
  CHECK_FALSE(v.contains("s8"));
  for (size_t i = 0; i < v.size(); ++i) CHECK(v.id(v.token(static_cast<int>(i))) == static_cast<int>(i));
  CHECK(v.encode("s0 s1") == std::vector<int>{v.id("s0"), v.id("s1")});
  CHECK(v.decode(v.encode("s0 s1")) == "s0 s1");
  CHECK_THROWS_AS(v.id("nope"), DataError);
  CHECK_THROWS_AS(Vocab({"<pad>", "<bos>", "<eos>", "<sep>", "[INST]", "[/INST]", "a", "a"}),
                  ConfigError);

  auto p1 = tmp_path("vocab1.json"), p2 = tmp_path("vocab2.json");
  build_vocab(make_language(3, 24), GeneralTaskSpec{}).save(p1);
  build_vocab(make_language(3, 24), GeneralTaskSpec{}).save(p2);
  CHECK(slurp(p1) == slurp(p2));
  CHECK(Vocab::load(p1).tokens() == build_vocab(make_language(3, 24), GeneralTaskSpec{}).tokens());
}

TEST_CASE("instruction templates") {
  Vocab v = build_vocab(make_language(1, 24), GeneralTaskSpec{});
  TranslationPair p{words("s0"), words("t5"), Direction::kSrcToTgt};
  auto ids = render_instruction(p, 2, v);
  CHECK(v.decode(ids) == "[INST] Translate the following sentence from SRC to TGT : s0 [/INST]");
  TranslationPair q{words("t1 t2"), words("s3 s4"), Direction::kTgtToSrc};
  CHECK(v.decode(render_instruction(q, 5, v)) ==
        "[INST] t1 t2 Translate this sentence to SRC . [/INST]");
  CHECK(render_instruction(q, 1, v) == render_instruction(q, 1, v));
  CHECK_THROWS_AS(render_instruction(q, 0, v), DataError);
  CHECK_THROWS_AS(render_instruction(q, 6, v), DataError);

  // Different templates never collide for the same pair.
  std::set<std::vector<int>> seen;
  for (int t = 1; t <= kNumTemplates; ++t) seen.insert(render_instruction(q, t, v));
  CHECK(seen.size() == kNumTemplates);

  // A vocabulary without language names cannot render.
  std::vector<std::string> toks;
  for (const auto& t : v.tokens()) {
    if (t != "SRC") toks.push_back(t);
  }
  CHECK_THROWS_AS(render_instruction(p, 2, Vocab(toks)), DataError);

  Rng rng(99);
  std::array<int, kNumTemplates> counts{};
  for (int i = 0; i < 10000; ++i) counts[rng.range(1, kNumTemplates) - 1]++;
  for (int c : counts) CHECK(std::abs(c / 10000.0 - 0.2) <= 0.02);
}

TEST_CASE("rationale scaffold") {
  auto spec = spec_with({1, 0, 2}, Reorder::kReverse);
  CHECK(translation_rationale(spec, words("s2 s0"), Direction::kSrcToTgt) ==
        words("RATIONALE : s2 means t2 ; s0 means t1 ; back : s2 s0 ; "
              "order : smallest s0 ; largest s2 ; caution : safe request ; fact : length 2 ;"));
  CHECK(translation_rationale(spec, words("s0 s2"), Direction::kSrcToTgt,
                              {RationaleCategory::kWordTranslation}) ==
        words("RATIONALE : s0 means t1 ; s2 means t2 ;"));
  CHECK(translation_rationale(spec, words("s0"), Direction::kSrcToTgt, {}) == words("RATIONALE :"));
  CHECK_THROWS_AS(translation_rationale(spec, words("s0"), Direction::kSrcToTgt,
                                        {RationaleCategory::kSemanticExplanation}),
                  ConfigError);
  CHECK(parse_category("back_translation") == RationaleCategory::kBackTranslation);
  CHECK_THROWS_AS(parse_category("poetry"), ConfigError);
  CHECK(general_rationale(GeneralTask::kModSum, words("3 4 5"), words("2")) ==
        words("RATIONALE : fact : total 1 2 ;"));
}

TEST_CASE("jsonl round trip and validation") {
  auto make = [](int id) {
    return Record{{"id", id},           {"kind", "mt"},         {"task", nullptr},
                  {"direction", "src-tgt"}, {"template_id", 2},  {"instruction", "[INST] s0 [/INST]"},
                  {"source", "s0 s1"},   {"reference", "t1 t0"}, {"rationale", nullptr},
                  {"enriched", nullptr}};
  };
  std::vector<Record> recs{make(0), make(1), make(2)};
  recs[1]["extra_field"] = {{"nested", 3}};
  auto p = tmp_path("three.jsonl");
  write_jsonl(p, recs);
  CHECK(read_jsonl(p) == recs);

  auto missing = make(0);
  missing.erase("source");
  try {
    validate_record(missing);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("\"source\"") != std::string::npos);
  }
  auto wrong_kind = make(0);
  wrong_kind["kind"] = "poem";
  CHECK_THROWS_AS(validate_record(wrong_kind), DataError);
  auto bad_enriched = make(0);
  bad_enriched["truncated"] = 1;
  CHECK_THROWS_AS(validate_record(bad_enriched), DataError);

  {
    std::ofstream out(p, std::ios::trunc);
    out << make(0).dump() << "\n{not json\n";
  }
  try {
    read_jsonl(p);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }

  { std::ofstream out(p, std::ios::trunc); }
  CHECK(read_jsonl(p).empty());
}
