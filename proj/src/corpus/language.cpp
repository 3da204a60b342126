#include "radis/corpus/language.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "radis/corpus/vocab.hpp"
#include "radis/util/error.hpp"
#include "radis/util/rng.hpp"

namespace radis::corpus {
namespace {

int token_index(const std::string& tok, char prefix) {
  if (tok.size() < 2 || tok[0] != prefix) {
    throw DataError("token '" + tok + "' is not a " + std::string(1, prefix) + "-token");
  }
  return std::stoi(tok.substr(1));
}

}  // namespace

std::string_view direction_name(Direction d) {
  return d == Direction::kSrcToTgt ? "src-tgt" : "tgt-src";
}

Direction parse_direction(std::string_view name) {
  if (name == "src-tgt") return Direction::kSrcToTgt;
  if (name == "tgt-src") return Direction::kTgtToSrc;
  throw DataError("unknown direction '" + std::string(name) + "'");
}

std::string_view source_language_name(Direction d) {
  return d == Direction::kSrcToTgt ? "SRC" : "TGT";
}

std::string_view target_language_name(Direction d) {
  return d == Direction::kSrcToTgt ? "TGT" : "SRC";
}

void LanguageSpec::finalize() {
  if (permutation.empty()) {
    permutation.resize(vocab_size);
    for (int i = 0; i < vocab_size; ++i) permutation[i] = i;
    Rng rng(derive_seed(seed, "permutation"));
    rng.shuffle(std::span<int>(permutation));
  }
  validate();
}

void LanguageSpec::validate() const {
  if (vocab_size < 1) throw ConfigError("language: vocab_size must be positive");
  if (min_len < 1 || max_len < min_len) throw ConfigError("language: bad length range");
  if (static_cast<int>(permutation.size()) != vocab_size) {
    throw ConfigError("language: permutation size differs from vocab_size");
  }
  std::vector<bool> seen(vocab_size, false);
  for (int v : permutation) {
    if (v < 0 || v >= vocab_size || seen[v]) throw ConfigError("language: permutation is not a bijection");
    seen[v] = true;
  }
}

int LanguageSpec::unmap(int j) const {
  const auto it = std::find(permutation.begin(), permutation.end(), j);
  if (it == permutation.end()) throw DataError("language: index outside permutation");
  return static_cast<int>(it - permutation.begin());
}

LanguageSpec make_language(uint64_t seed, int vocab_size, Reorder reorder) {
  LanguageSpec s;
  s.seed = seed;
  s.vocab_size = vocab_size;
  s.reorder = reorder;
  s.finalize();
  return s;
}

std::vector<std::string> gloss(const LanguageSpec& spec, const std::vector<std::string>& x,
                               Direction direction) {
  std::vector<std::string> out;
  out.reserve(x.size());
  for (const auto& tok : x) {
    if (direction == Direction::kSrcToTgt) {
      out.push_back(target_token(spec.map(token_index(tok, 's'))));
    } else {
      out.push_back(source_token(spec.unmap(token_index(tok, 't'))));
    }
  }
  return out;
}

std::vector<std::string> oracle(const LanguageSpec& spec, const std::vector<std::string>& x,
                                Direction direction) {
  auto out = gloss(spec, x, direction);
  if (spec.reorder == Reorder::kReverse) std::reverse(out.begin(), out.end());
  return out;
}

std::vector<std::vector<TranslationPair>> gen_translation_splits(
    const LanguageSpec& spec, const std::vector<size_t>& sizes, uint64_t seed) {
  spec.validate();
  size_t total = 0;
  for (size_t s : sizes) total += s;
  // Distinct sequences per direction.
  double space = 0;
  for (int len = spec.min_len; len <= spec.max_len; ++len) space += std::pow(spec.vocab_size, len);
  const size_t per_direction = (total + 1) / 2;
  if (static_cast<double>(per_direction) > space) {
    throw DataError("requested " + std::to_string(total) +
                    " pairs but only " + std::to_string(static_cast<long long>(space)) +
                    " distinct sequences exist per direction");
  }
  Rng rng(derive_seed(seed, "translation"));
  std::set<std::vector<int>> used[2];
  auto draw = [&](Direction dir) {
    auto& seen = used[dir == Direction::kSrcToTgt ? 0 : 1];
    std::vector<int> idx;
    // Small spaces near exhaustion fall back to enumerating the remainder.
    if (static_cast<double>(seen.size()) > 0.5 * space) {
      std::vector<std::vector<int>> remaining;
      for (int len = spec.min_len; len <= spec.max_len; ++len) {
        std::vector<int> cur(len, 0);
        for (;;) {
          if (!seen.count(cur)) remaining.push_back(cur);
          int k = len - 1;
          while (k >= 0 && ++cur[k] == spec.vocab_size) cur[k--] = 0;
          if (k < 0) break;
        }
      }
      idx = remaining[rng.below(remaining.size())];
    } else {
      do {
        idx.assign(rng.range(spec.min_len, spec.max_len), 0);
        for (auto& v : idx) v = static_cast<int>(rng.below(spec.vocab_size));
      } while (seen.count(idx));
    }
    seen.insert(idx);
    TranslationPair p;
    p.direction = dir;
    for (int v : idx) p.x.push_back(dir == Direction::kSrcToTgt ? source_token(v) : target_token(v));
    p.y = oracle(spec, p.x, dir);
    return p;
  };
  std::vector<std::vector<TranslationPair>> out;
  for (size_t n : sizes) {
    std::vector<TranslationPair> split;
    split.reserve(n);
    for (size_t i = 0; i < n; ++i) {
      split.push_back(draw(i % 2 == 0 ? Direction::kSrcToTgt : Direction::kTgtToSrc));
    }
    out.push_back(std::move(split));
  }
  return out;
}

TranslationCorpus gen_translation_corpus(const LanguageSpec& spec, size_t n_train, size_t n_test,
                                         uint64_t seed) {
  if (n_train == 0 || n_test == 0) throw ConfigError("corpus sizes must be positive");
  auto splits = gen_translation_splits(spec, {n_train, n_test}, seed);
  return {std::move(splits[0]), std::move(splits[1])};
}

void to_json(nlohmann::json& j, const LanguageSpec& s) {
  j = {{"seed", s.seed},
       {"vocab_size", s.vocab_size},
       {"reorder", s.reorder == Reorder::kReverse ? "reverse" : "identity"},
       {"min_len", s.min_len},
       {"max_len", s.max_len},
       {"permutation", s.permutation}};
}

void from_json(const nlohmann::json& j, LanguageSpec& s) {
  s.seed = j.value("seed", s.seed);
  s.vocab_size = j.value("vocab_size", s.vocab_size);
  const std::string reorder = j.value("reorder", std::string("reverse"));
  if (reorder == "reverse") {
    s.reorder = Reorder::kReverse;
  } else if (reorder == "identity") {
    s.reorder = Reorder::kIdentity;
  } else {
    throw ConfigError("language.reorder must be 'identity' or 'reverse'");
  }
  s.min_len = j.value("min_len", s.min_len);
  s.max_len = j.value("max_len", s.max_len);
  s.permutation = j.value("permutation", std::vector<int>{});
}

}  // namespace radis::corpus
