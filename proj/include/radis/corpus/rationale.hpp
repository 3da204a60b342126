#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "radis/corpus/general.hpp"
#include "radis/corpus/language.hpp"

namespace radis::corpus {

// Rationale content categories. Each clause of the scaffold grammar is
// introduced by one keyword, so a rule-based tagger can recover them.
enum class RationaleCategory {
  kWordTranslation,
  kAlternativeTranslation,
  kHelpfulSafety,
  kSemanticExplanation,
  kBackTranslation,
  kFactualSupplement,
  kWordExplanation,
  kGrammar,
};

inline constexpr size_t kNumRationaleCategories = 8;

std::string_view category_name(RationaleCategory c);
// Trigger keyword of each category's clause.
std::string_view category_keyword(RationaleCategory c);
const std::array<RationaleCategory, kNumRationaleCategories>& all_categories();

inline constexpr std::string_view kRationaleHead = "RATIONALE";

// Scaffold words that must exist in the vocabulary.
const std::vector<std::string>& scaffold_words();

// Throws ConfigError for an unknown name.
RationaleCategory parse_category(std::string_view name);

// Clauses a translation rationale can carry.
inline const std::vector<RationaleCategory> kTranslationClauses{
    RationaleCategory::kWordTranslation, RationaleCategory::kBackTranslation,
    RationaleCategory::kGrammar, RationaleCategory::kHelpfulSafety, RationaleCategory::kFactualSupplement};

// "RATIONALE : x1 means g1 ; ... ; back : x ; order : smallest a ; largest b ;
// caution : safe request ;" over the source words, keeping the listed clauses
// in the given order. Other categories throw ConfigError.
std::vector<std::string> translation_rationale(
    const LanguageSpec& spec, const std::vector<std::string>& x, Direction direction,
    const std::vector<RationaleCategory>& clauses = kTranslationClauses);

// Rationale suffix for a general-task example.
std::vector<std::string> general_rationale(GeneralTask task, const std::vector<std::string>& prompt,
                                           const std::vector<std::string>& answer);

}  // namespace radis::corpus
