#include "radis/corpus/templates.hpp"

#include <algorithm>
#include <sstream>

#include "radis/util/error.hpp"

namespace radis::corpus {

const std::array<std::string_view, kNumTemplates>& instruction_patterns() {
  static const std::array<std::string_view, kNumTemplates> kPatterns{
      "Could you please translate this sentence from {lang1} to {lang2} ? {sent1}",
      "Translate the following sentence from {lang1} to {lang2} : {sent1}",
      "Translate this sentence from {lang1} to {lang2} . {sent1}",
      "Translate from {lang1} to {lang2} : {sent1}",
      "{sent1} Translate this sentence to {lang2} .",
  };
  return kPatterns;
}

std::vector<std::string> template_words() {
  std::vector<std::string> out;
  for (auto pattern : instruction_patterns()) {
    std::istringstream in{std::string(pattern)};
    std::string w;
    while (in >> w) {
      if (w.front() == '{') continue;
      if (std::find(out.begin(), out.end(), w) == out.end()) out.push_back(w);
    }
  }
  return out;
}

std::vector<std::string> render_template_tokens(const TranslationPair& pair, int template_id) {
  if (template_id < 1 || template_id > kNumTemplates) {
    throw DataError("template_id must be in 1..5, got " + std::to_string(template_id));
  }
  std::istringstream in{std::string(instruction_patterns()[template_id - 1])};
  std::vector<std::string> out;
  std::string w;
  while (in >> w) {
    if (w == "{lang1}") {
      out.emplace_back(source_language_name(pair.direction));
    } else if (w == "{lang2}") {
      out.emplace_back(target_language_name(pair.direction));
    } else if (w == "{sent1}") {
      out.insert(out.end(), pair.x.begin(), pair.x.end());
    } else {
      out.push_back(w);
    }
  }
  return out;
}

std::vector<int> render_instruction(const TranslationPair& pair, int template_id,
                                    const Vocab& vocab) {
  for (auto name : {source_language_name(pair.direction), target_language_name(pair.direction)}) {
    if (!vocab.contains(name)) {
      throw DataError("render: vocabulary lacks language name '" + std::string(name) + "'");
    }
  }
  std::vector<int> out{vocab.inst_open()};
  for (const auto& tok : render_template_tokens(pair, template_id)) out.push_back(vocab.id(tok));
  out.push_back(vocab.inst_close());
  return out;
}

}  // namespace radis::corpus
