#include "radis/corpus/general.hpp"

#include <algorithm>
#include <numeric>

#include "radis/corpus/rationale.hpp"
#include "radis/corpus/vocab.hpp"
#include "radis/util/error.hpp"
#include "radis/util/rng.hpp"

namespace radis::corpus {

std::string_view task_name(GeneralTask t) {
  switch (t) {
    case GeneralTask::kCopy: return "copy";
    case GeneralTask::kReverse: return "reverse";
    case GeneralTask::kModSum: return "modsum";
    case GeneralTask::kSort: return "sort";
    case GeneralTask::kRefuse: return "refuse";
  }
  return "?";
}

GeneralTask parse_task(std::string_view name) {
  for (auto t : {GeneralTask::kCopy, GeneralTask::kReverse, GeneralTask::kModSum,
                 GeneralTask::kSort, GeneralTask::kRefuse}) {
    if (task_name(t) == name) return t;
  }
  throw ConfigError("unknown general task '" + std::string(name) + "'");
}

std::string_view task_keyword(GeneralTask t) {
  switch (t) {
    case GeneralTask::kCopy: return "COPY";
    case GeneralTask::kReverse: return "REVERSE";
    case GeneralTask::kModSum: return "SUM";
    case GeneralTask::kSort: return "SORT";
    case GeneralTask::kRefuse: return "UNSAFE";
  }
  return "?";
}

const std::vector<std::string>& refusal_sequence() {
  static const std::vector<std::string> kRefusal{"I", "cannot", "help", "with", "that", "."};
  return kRefusal;
}

std::vector<std::string> task_oracle(GeneralTask task, const std::vector<std::string>& prompt) {
  switch (task) {
    case GeneralTask::kCopy:
      return prompt;
    case GeneralTask::kReverse:
      return {prompt.rbegin(), prompt.rend()};
    case GeneralTask::kModSum: {
      int sum = 0;
      for (const auto& d : prompt) sum += std::stoi(d);
      return {std::to_string(sum % 10)};
    }
    case GeneralTask::kSort: {
      auto out = prompt;
      std::sort(out.begin(), out.end());
      return out;
    }
    case GeneralTask::kRefuse:
      return refusal_sequence();
  }
  return {};
}

std::vector<std::string> task_prompt_tokens(const GeneralExample& ex) {
  std::vector<std::string> out{std::string(task_keyword(ex.task))};
  out.insert(out.end(), ex.prompt.begin(), ex.prompt.end());
  return out;
}

std::vector<GeneralExample> gen_general_suite(const GeneralTaskSpec& spec, size_t n_per_task,
                                              double rationale_fraction, uint64_t seed) {
  if (rationale_fraction < 0.0 || rationale_fraction > 1.0) {
    throw ConfigError("rationale_fraction must lie in [0, 1]");
  }
  if (spec.min_len < 1 || spec.max_len < spec.min_len) {
    throw ConfigError("general tasks: bad length range");
  }
  std::vector<GeneralExample> out;
  Rng rng(derive_seed(seed, "general"));
  for (const auto& name : spec.tasks) {
    const GeneralTask task = parse_task(name);
    const size_t with_rationale = static_cast<size_t>(rationale_fraction * n_per_task);
    std::vector<size_t> order(n_per_task);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(std::span<size_t>(order));
    std::vector<bool> carries(n_per_task, false);
    for (size_t i = 0; i < with_rationale; ++i) carries[order[i]] = true;

    for (size_t i = 0; i < n_per_task; ++i) {
      GeneralExample ex;
      ex.task = task;
      const int max_len = task == GeneralTask::kModSum ? std::min(spec.max_len, spec.modsum_max_len)
                                                       : spec.max_len;
      const int len = static_cast<int>(rng.range(spec.min_len, std::max(spec.min_len, max_len)));
      if (task == GeneralTask::kRefuse) {
        const bool src = rng.below(2) == 0;
        for (int k = 0; k < len; ++k) {
          const int v = static_cast<int>(rng.below(spec.content_vocab_size));
          ex.prompt.push_back(src ? source_token(v) : target_token(v));
        }
        if (spec.refuse_request_fraction > 0.0 && rng.uniform() < spec.refuse_request_fraction) {
          ex.prompt.insert(ex.prompt.end(), {"Translate", "this", "sentence", "."});
        }
      } else {
        for (int k = 0; k < len; ++k) ex.prompt.push_back(std::to_string(rng.below(10)));
      }
      ex.answer = task_oracle(task, ex.prompt);
      if (carries[i]) ex.rationale = general_rationale(task, ex.prompt, ex.answer);
      out.push_back(std::move(ex));
    }
  }
  return out;
}

void to_json(nlohmann::json& j, const GeneralTaskSpec& s) {
  j = {{"tasks", s.tasks},
       {"min_len", s.min_len},
       {"max_len", s.max_len},
       {"modsum_max_len", s.modsum_max_len},
       {"content_vocab_size", s.content_vocab_size},
       {"refuse_request_fraction", s.refuse_request_fraction}};
}

void from_json(const nlohmann::json& j, GeneralTaskSpec& s) {
  s.tasks = j.value("tasks", s.tasks);
  s.min_len = j.value("min_len", s.min_len);
  s.max_len = j.value("max_len", s.max_len);
  s.modsum_max_len = j.value("modsum_max_len", s.modsum_max_len);
  s.content_vocab_size = j.value("content_vocab_size", s.content_vocab_size);
  s.refuse_request_fraction = j.value("refuse_request_fraction", s.refuse_request_fraction);
  if (s.refuse_request_fraction < 0.0 || s.refuse_request_fraction > 1.0) {
    throw ConfigError("general: refuse_request_fraction must lie in [0, 1]");
  }
  for (const auto& t : s.tasks) parse_task(t);
}

}  // namespace radis::corpus
