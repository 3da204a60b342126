#include "radis/corpus/records.hpp"

#include "radis/corpus/rationale.hpp"
#include "radis/corpus/templates.hpp"

namespace radis::corpus {
namespace {

Record base(int id, const char* kind) {
  return Record{{"id", id},          {"kind", kind},         {"task", nullptr},
                {"direction", nullptr}, {"template_id", nullptr}, {"instruction", ""},
                {"source", ""},        {"reference", ""},      {"rationale", nullptr},
                {"enriched", nullptr}};
}

}  // namespace

std::string join_response(const std::vector<std::string>& y, const std::vector<std::string>& r) {
  if (r.empty()) return join_tokens(y);
  std::string out = join_tokens(y);
  if (!out.empty()) out += ' ';
  return out + std::string(kSep) + ' ' + join_tokens(r);
}

Record translation_record(int id, const TranslationPair& pair, int template_id, const Vocab& vocab) {
  Record r = base(id, "mt");
  r["direction"] = direction_name(pair.direction);
  r["template_id"] = template_id;
  r["instruction"] = vocab.decode(render_instruction(pair, template_id, vocab));
  r["source"] = join_tokens(pair.x);
  r["reference"] = join_tokens(pair.y);
  return r;
}

Record gloss_record(int id, const LanguageSpec& spec, const TranslationPair& pair, int template_id,
                    bool with_rationale, bool reordered, const Vocab& vocab,
                    const std::vector<RationaleCategory>& clauses) {
  Record r = translation_record(id, pair, template_id, vocab);
  const auto g = reordered ? pair.y : gloss(spec, pair.x, pair.direction);
  r["task"] = reordered ? "translate" : "gloss";
  r["reference"] = join_tokens(g);
  if (with_rationale) {
    const auto rat = translation_rationale(spec, pair.x, pair.direction, clauses);
    r["rationale"] = join_tokens(rat);
    r["enriched"] = join_response(g, rat);
  }
  return r;
}

Record general_record(int id, const GeneralExample& ex, const Vocab& vocab) {
  Record r = base(id, "general");
  r["task"] = task_name(ex.task);
  std::vector<int> ids{vocab.inst_open()};
  for (const auto& t : task_prompt_tokens(ex)) ids.push_back(vocab.id(t));
  ids.push_back(vocab.inst_close());
  r["instruction"] = vocab.decode(ids);
  r["source"] = join_tokens(ex.prompt);
  r["reference"] = join_tokens(ex.answer);
  if (!ex.rationale.empty()) {
    r["rationale"] = join_tokens(ex.rationale);
    r["enriched"] = join_response(ex.answer, ex.rationale);
  }
  return r;
}

}  // namespace radis::corpus
