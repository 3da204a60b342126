#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace radis::corpus {

enum class Direction { kSrcToTgt, kTgtToSrc };
enum class Reorder { kIdentity, kReverse };

std::string_view direction_name(Direction d);  // "src-tgt" / "tgt-src"
Direction parse_direction(std::string_view name);
// Language names substituted into instruction templates.
std::string_view source_language_name(Direction d);
std::string_view target_language_name(Direction d);

// The synthetic language pair: a token bijection plus an optional reversal.
struct LanguageSpec {
  uint64_t seed = 1;
  int vocab_size = 24;
  Reorder reorder = Reorder::kReverse;
  int min_len = 2;
  int max_len = 8;
  std::vector<int> permutation;  // empty: derived from seed by finalize()

  // Fills in the permutation (if empty) and validates it is a bijection.
  void finalize();
  void validate() const;
  int map(int i) const { return permutation.at(i); }
  int unmap(int j) const;
};

LanguageSpec make_language(uint64_t seed, int vocab_size, Reorder reorder = Reorder::kReverse);

struct TranslationPair {
  std::vector<std::string> x;
  std::vector<std::string> y;
  Direction direction = Direction::kSrcToTgt;
  bool operator==(const TranslationPair&) const = default;
};

// Exact reference translation of x.
std::vector<std::string> oracle(const LanguageSpec& spec, const std::vector<std::string>& x,
                                Direction direction);
// Word-by-word mapping with the source order kept. This is the partial
// translation skill the backbone is pretrained with.
std::vector<std::string> gloss(const LanguageSpec& spec, const std::vector<std::string>& x,
                               Direction direction);

// Disjoint splits of distinct source sequences. Directions alternate
// src-tgt / tgt-src within each split. Throws DataError if the requested
// sizes exceed the number of distinct sequences.
std::vector<std::vector<TranslationPair>> gen_translation_splits(
    const LanguageSpec& spec, const std::vector<size_t>& sizes, uint64_t seed);

struct TranslationCorpus {
  std::vector<TranslationPair> train;
  std::vector<TranslationPair> test;
};

TranslationCorpus gen_translation_corpus(const LanguageSpec& spec, size_t n_train,
                                         size_t n_test, uint64_t seed);

void to_json(nlohmann::json& j, const LanguageSpec& s);
void from_json(const nlohmann::json& j, LanguageSpec& s);

}  // namespace radis::corpus
