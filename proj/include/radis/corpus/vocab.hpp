#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace radis::corpus {

struct LanguageSpec;
struct GeneralTaskSpec;

// Token strings of the special symbols.
inline constexpr std::string_view kPad = "<pad>";
inline constexpr std::string_view kBos = "<bos>";
inline constexpr std::string_view kEos = "<eos>";
inline constexpr std::string_view kSep = "<sep>";
inline constexpr std::string_view kInstOpen = "[INST]";
inline constexpr std::string_view kInstClose = "[/INST]";

class Vocab {
 public:
  // Throws ConfigError if two token strings collide.
  explicit Vocab(std::vector<std::string> tokens);

  size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& token(int id) const { return tokens_.at(id); }
  int id(std::string_view token) const;  // throws DataError if unknown
  bool contains(std::string_view token) const;

  int pad() const { return pad_; }
  int bos() const { return bos_; }
  int eos() const { return eos_; }
  int sep() const { return sep_; }
  int inst_open() const { return inst_open_; }
  int inst_close() const { return inst_close_; }
  bool is_special(int id) const;

  // Whitespace-separated tokens <-> ids.
  std::vector<int> encode(std::string_view text) const;
  std::string decode(const std::vector<int>& ids) const;

  // JSON array of token strings.
  void save(const std::filesystem::path& path) const;
  static Vocab load(const std::filesystem::path& path);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  int pad_, bos_, eos_, sep_, inst_open_, inst_close_;
};

// Specials, s0..s(V-1), t0..t(V-1), digits, task keywords, language names,
// instruction-template words, rationale scaffold words and the refusal words.
Vocab build_vocab(const LanguageSpec& language, const GeneralTaskSpec& tasks);

std::string source_token(int i);
std::string target_token(int i);

}  // namespace radis::corpus
