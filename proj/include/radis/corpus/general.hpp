#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace radis::corpus {

enum class GeneralTask { kCopy, kReverse, kModSum, kSort, kRefuse };

std::string_view task_name(GeneralTask t);
GeneralTask parse_task(std::string_view name);  // ConfigError on unknown names
std::string_view task_keyword(GeneralTask t);   // prompt keyword, e.g. "COPY"

// The fixed answer to every refuse-task prompt.
const std::vector<std::string>& refusal_sequence();

struct GeneralTaskSpec {
  std::vector<std::string> tasks{"copy", "reverse", "modsum", "sort", "refuse"};
  int min_len = 2;
  int max_len = 6;
  int modsum_max_len = 4;
  // Refuse prompts wrap a harmful-tagged sentence of the synthetic language.
  int content_vocab_size = 24;
  // Share of refuse prompts that go on to ask for a translation.
  double refuse_request_fraction = 0.0;
};

struct GeneralExample {
  GeneralTask task = GeneralTask::kCopy;
  std::vector<std::string> prompt;     // content after the task keyword
  std::vector<std::string> answer;
  std::vector<std::string> rationale;  // empty when the example carries none
  bool operator==(const GeneralExample&) const = default;
};

// Expected answer for a task prompt.
std::vector<std::string> task_oracle(GeneralTask task, const std::vector<std::string>& prompt);

// Prompt tokens between the role markers: keyword followed by content.
std::vector<std::string> task_prompt_tokens(const GeneralExample& ex);

// n_per_task examples per configured task; exactly floor(fraction * n) of
// each task carry a rationale suffix.
std::vector<GeneralExample> gen_general_suite(const GeneralTaskSpec& spec, size_t n_per_task,
                                              double rationale_fraction, uint64_t seed);

void to_json(nlohmann::json& j, const GeneralTaskSpec& s);
void from_json(const nlohmann::json& j, GeneralTaskSpec& s);

}  // namespace radis::corpus
