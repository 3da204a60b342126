#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace radis::corpus {

// One dataset line. Kept as a JSON object so fields outside the schema
// survive a read/write cycle untouched.
using Record = nlohmann::json;

// Throws DataError naming the first offending field.
void validate_record(const Record& r);

// Writes one compact JSON object per line, validating each record first.
void write_jsonl(const std::filesystem::path& path, const std::vector<Record>& records);

// Malformed JSON raises DataError with the 1-based line number; schema
// violations name the line and the field. Blank lines are skipped.
std::vector<Record> read_jsonl(const std::filesystem::path& path);

std::string join_tokens(const std::vector<std::string>& tokens);
std::vector<std::string> split_tokens(const std::string& text);

}  // namespace radis::corpus
