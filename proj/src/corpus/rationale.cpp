#include "radis/corpus/rationale.hpp"

#include <algorithm>
#include <numeric>

#include "radis/util/error.hpp"

namespace radis::corpus {

std::string_view category_name(RationaleCategory c) {
  switch (c) {
    case RationaleCategory::kWordTranslation: return "word_phrase_translation";
    case RationaleCategory::kAlternativeTranslation: return "alternative_translation";
    case RationaleCategory::kHelpfulSafety: return "helpful_safety";
    case RationaleCategory::kSemanticExplanation: return "semantic_explanation";
    case RationaleCategory::kBackTranslation: return "back_translation";
    case RationaleCategory::kFactualSupplement: return "factual_supplement";
    case RationaleCategory::kWordExplanation: return "word_phrase_explanation";
    case RationaleCategory::kGrammar: return "grammar";
  }
  return "?";
}

std::string_view category_keyword(RationaleCategory c) {
  switch (c) {
    case RationaleCategory::kWordTranslation: return "means";
    case RationaleCategory::kAlternativeTranslation: return "alternatively";
    case RationaleCategory::kHelpfulSafety: return "caution";
    case RationaleCategory::kSemanticExplanation: return "meaning";
    case RationaleCategory::kBackTranslation: return "back";
    case RationaleCategory::kFactualSupplement: return "fact";
    case RationaleCategory::kWordExplanation: return "word";
    case RationaleCategory::kGrammar: return "order";
  }
  return "?";
}

const std::array<RationaleCategory, kNumRationaleCategories>& all_categories() {
  static const std::array<RationaleCategory, kNumRationaleCategories> kAll{
      RationaleCategory::kWordTranslation,     RationaleCategory::kAlternativeTranslation,
      RationaleCategory::kHelpfulSafety,       RationaleCategory::kSemanticExplanation,
      RationaleCategory::kBackTranslation,     RationaleCategory::kFactualSupplement,
      RationaleCategory::kWordExplanation,     RationaleCategory::kGrammar};
  return kAll;
}

const std::vector<std::string>& scaffold_words() {
  static const std::vector<std::string> kWords = [] {
    std::vector<std::string> w{std::string(kRationaleHead), ";", "same", "total", "smallest",
                               "largest", "harmful", "safe", "request", "length"};
    for (auto c : all_categories()) w.emplace_back(category_keyword(c));
    return w;
  }();
  return kWords;
}

std::vector<std::string> translation_rationale(const LanguageSpec& spec,
                                               const std::vector<std::string>& x,
                                               Direction direction,
                                               const std::vector<RationaleCategory>& clauses) {
  const auto words = gloss(spec, x, direction);
  std::vector<std::string> out{std::string(kRationaleHead), ":"};
  for (auto c : clauses) {
    switch (c) {
      case RationaleCategory::kWordTranslation:
        for (size_t i = 0; i < x.size(); ++i) out.insert(out.end(), {x[i], "means", words[i], ";"});
        break;
      case RationaleCategory::kBackTranslation:
        out.insert(out.end(), {"back", ":"});
        out.insert(out.end(), x.begin(), x.end());
        out.push_back(";");
        break;
      case RationaleCategory::kGrammar: {
        // Words order by their numeric index.
        auto index = [](const std::string& w) { return std::stoi(w.substr(1)); };
        auto [lo, hi] = std::minmax_element(
            x.begin(), x.end(), [&](const auto& a, const auto& b) { return index(a) < index(b); });
        out.insert(out.end(), {"order", ":", "smallest", *lo, ";", "largest", *hi, ";"});
        break;
      }
      case RationaleCategory::kFactualSupplement: {
        out.insert(out.end(), {"fact", ":", "length"});
        for (char ch : std::to_string(x.size())) out.emplace_back(1, ch);
        out.push_back(";");
        break;
      }
      case RationaleCategory::kHelpfulSafety:
        out.insert(out.end(), {"caution", ":", "safe", "request", ";"});
        break;
      default:
        throw ConfigError("no translation clause for category " + std::string(category_name(c)));
    }
  }
  return out;
}

RationaleCategory parse_category(std::string_view name) {
  for (auto c : all_categories()) {
    if (category_name(c) == name) return c;
  }
  throw ConfigError("unknown rationale category '" + std::string(name) + "'");
}

std::vector<std::string> general_rationale(GeneralTask task, const std::vector<std::string>& prompt,
                                           const std::vector<std::string>& answer) {
  std::vector<std::string> out{std::string(kRationaleHead), ":"};
  switch (task) {
    case GeneralTask::kCopy:
      out.insert(out.end(), {"meaning", ":", "same"});
      out.insert(out.end(), answer.begin(), answer.end());
      out.push_back(";");
      break;
    case GeneralTask::kReverse:
      out.insert(out.end(), {"back", ":"});
      out.insert(out.end(), prompt.begin(), prompt.end());
      out.push_back(";");
      break;
    case GeneralTask::kModSum: {
      int sum = 0;
      for (const auto& d : prompt) sum += std::stoi(d);
      out.insert(out.end(), {"fact", ":", "total"});
      for (char c : std::to_string(sum)) out.emplace_back(1, c);
      out.push_back(";");
      break;
    }
    case GeneralTask::kSort:
      out.insert(out.end(), {"order", ":", "smallest", answer.front(), ";", "largest",
                             answer.back(), ";"});
      break;
    case GeneralTask::kRefuse:
      out.insert(out.end(), {"caution", ":", "harmful", "request", ";"});
      break;
  }
  return out;
}

}  // namespace radis::corpus
