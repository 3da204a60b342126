#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "radis/corpus/language.hpp"
#include "radis/corpus/vocab.hpp"

namespace radis::corpus {

inline constexpr int kNumTemplates = 5;

// Instruction patterns with {lang1}, {lang2} and {sent1} placeholders,
// tokenized on whitespace (punctuation is its own token).
const std::array<std::string_view, kNumTemplates>& instruction_patterns();

// Words the patterns need in the vocabulary.
std::vector<std::string> template_words();

// Template tokens with placeholders substituted; no role markers.
std::vector<std::string> render_template_tokens(const TranslationPair& pair, int template_id);

// INST_OPEN . rendered template . INST_CLOSE, as ids.
std::vector<int> render_instruction(const TranslationPair& pair, int template_id,
                                    const Vocab& vocab);

}  // namespace radis::corpus
