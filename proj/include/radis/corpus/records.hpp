#pragma once

#include <vector>

#include "radis/corpus/dataset.hpp"
#include "radis/corpus/general.hpp"
#include "radis/corpus/language.hpp"
#include "radis/corpus/rationale.hpp"
#include "radis/corpus/vocab.hpp"

namespace radis::corpus {

// A translation instruction with the oracle reference.
Record translation_record(int id, const TranslationPair& pair, int template_id, const Vocab& vocab);

// Pretraining-style translation record: the response is the word-by-word
// gloss, optionally followed by SEP and a gloss rationale. task = "gloss".
// Word-by-word gloss of x in source order, or the oracle translation when
// `reordered` is set (task "translate").
Record gloss_record(int id, const LanguageSpec& spec, const TranslationPair& pair, int template_id,
                    bool with_rationale, bool reordered, const Vocab& vocab,
                    const std::vector<RationaleCategory>& clauses = kTranslationClauses);

Record general_record(int id, const GeneralExample& ex, const Vocab& vocab);

// "y <sep> r", or just y when r is empty.
std::string join_response(const std::vector<std::string>& y, const std::vector<std::string>& r);

}  // namespace radis::corpus
