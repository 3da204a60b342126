#include "radis/corpus/vocab.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "radis/corpus/general.hpp"
#include "radis/corpus/language.hpp"
#include "radis/corpus/rationale.hpp"
#include "radis/corpus/templates.hpp"
#include "radis/util/error.hpp"

namespace radis::corpus {

std::string source_token(int i) { return "s" + std::to_string(i); }
std::string target_token(int i) { return "t" + std::to_string(i); }

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  for (size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i].empty() || tokens_[i].find(' ') != std::string::npos) {
      throw ConfigError("vocab: invalid token string '" + tokens_[i] + "'");
    }
    if (!index_.emplace(tokens_[i], static_cast<int>(i)).second) {
      throw ConfigError("vocab: token '" + tokens_[i] + "' generated twice");
    }
  }
  auto special = [&](std::string_view s) {
    auto it = index_.find(std::string(s));
    if (it == index_.end()) throw ConfigError("vocab: missing special token " + std::string(s));
    return it->second;
  };
  pad_ = special(kPad);
  bos_ = special(kBos);
  eos_ = special(kEos);
  sep_ = special(kSep);
  inst_open_ = special(kInstOpen);
  inst_close_ = special(kInstClose);
}

int Vocab::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) throw DataError("unknown token '" + std::string(token) + "'");
  return it->second;
}

bool Vocab::contains(std::string_view token) const {
  return index_.count(std::string(token)) != 0;
}

bool Vocab::is_special(int id) const {
  return id == pad_ || id == bos_ || id == eos_ || id == sep_ || id == inst_open_ ||
         id == inst_close_;
}

std::vector<int> Vocab::encode(std::string_view text) const {
  std::vector<int> out;
  std::istringstream in{std::string(text)};
  std::string w;
  while (in >> w) out.push_back(id(w));
  return out;
}

std::string Vocab::decode(const std::vector<int>& ids) const {
  std::string out;
  for (size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ' ';
    out += token(ids[i]);
  }
  return out;
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << nlohmann::json(tokens_).dump() << '\n';
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read vocab " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return Vocab(j.get<std::vector<std::string>>());
}

Vocab build_vocab(const LanguageSpec& language, const GeneralTaskSpec& tasks) {
  if (language.vocab_size < 8) throw ConfigError("language vocab_size must be >= 8");
  std::vector<std::string> tokens{std::string(kPad),      std::string(kBos),
                                  std::string(kEos),      std::string(kSep),
                                  std::string(kInstOpen), std::string(kInstClose)};
  const int content = std::max(language.vocab_size, tasks.content_vocab_size);
  for (int i = 0; i < content; ++i) tokens.push_back(source_token(i));
  for (int i = 0; i < content; ++i) tokens.push_back(target_token(i));
  for (int d = 0; d < 10; ++d) tokens.push_back(std::to_string(d));
  for (const auto& name : tasks.tasks) tokens.emplace_back(task_keyword(parse_task(name)));
  tokens.emplace_back("SRC");
  tokens.emplace_back("TGT");
  // Function words may be shared between groups; each is added once.
  std::vector<std::string> words = template_words();
  for (const auto& group : {scaffold_words(), refusal_sequence(),
                            std::vector<std::string>{"Rewrite", "reference"}}) {
    for (const auto& w : group) {
      if (std::find(words.begin(), words.end(), w) == words.end()) words.push_back(w);
    }
  }
  tokens.insert(tokens.end(), words.begin(), words.end());
  return Vocab(std::move(tokens));
}

}  // namespace radis::corpus
