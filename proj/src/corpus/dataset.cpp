#include "radis/corpus/dataset.hpp"

#include <fstream>
#include <sstream>

#include "radis/util/error.hpp"

namespace radis::corpus {
namespace {

enum class Kind { kInt, kString, kBool };

bool has_kind(const nlohmann::json& v, Kind k) {
  switch (k) {
    case Kind::kInt: return v.is_number_integer();
    case Kind::kString: return v.is_string();
    case Kind::kBool: return v.is_boolean();
  }
  return false;
}

struct Field {
  const char* name;
  Kind kind;
  bool nullable;
  bool required;
};

constexpr Field kFields[] = {
    {"id", Kind::kInt, false, true},
    {"kind", Kind::kString, false, true},
    {"task", Kind::kString, true, true},
    {"direction", Kind::kString, true, true},
    {"template_id", Kind::kInt, true, true},
    {"instruction", Kind::kString, false, true},
    {"source", Kind::kString, false, true},
    {"reference", Kind::kString, false, true},
    {"rationale", Kind::kString, true, true},
    {"enriched", Kind::kString, true, true},
    // Enriched-dataset extension.
    {"boundary_T", Kind::kInt, false, false},
    {"rationale_len_R", Kind::kInt, false, false},
    {"emitted_by", Kind::kString, true, false},
    {"truncated", Kind::kBool, false, false},
};

}  // namespace

void validate_record(const Record& r) {
  if (!r.is_object()) throw DataError("record is not a JSON object");
  for (const auto& f : kFields) {
    auto it = r.find(f.name);
    if (it == r.end()) {
      if (f.required) throw DataError(std::string("missing field \"") + f.name + "\"");
      continue;
    }
    if (it->is_null() && f.nullable) continue;
    if (!has_kind(*it, f.kind)) throw DataError(std::string("bad type for field \"") + f.name + "\"");
  }
  const auto& kind = r["kind"].get_ref<const std::string&>();
  if (kind != "mt" && kind != "general") {
    throw DataError("field \"kind\" must be \"mt\" or \"general\", got \"" + kind + "\"");
  }
}

void write_jsonl(const std::filesystem::path& path, const std::vector<Record>& records) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  for (size_t i = 0; i < records.size(); ++i) {
    try {
      validate_record(records[i]);
    } catch (const DataError& e) {
      throw DataError(path.string() + ": record " + std::to_string(i) + ": " + e.what());
    }
    out << records[i].dump() << '\n';
  }
  if (!out) throw DataError("write failed: " + path.string());
}

std::vector<Record> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::vector<Record> out;
  std::string line;
  for (size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno) + ": ";
    Record r;
    try {
      r = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      throw DataError(where + "malformed JSON");
    }
    try {
      validate_record(r);
    } catch (const DataError& e) {
      throw DataError(where + e.what());
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::vector<std::string> split_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

}  // namespace radis::corpus
