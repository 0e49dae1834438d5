#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ctrace/backend.hpp"
#include "ctrace/trace.hpp"

namespace ctrace {

struct SampleResult {
  std::string id;
  std::optional<Label> predicted;
  Label gold;
  int steps_in_output = 0;
  bool judged = false;
};

struct EvalResult {
  std::vector<SampleResult> per_sample;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double avg_steps = 0.0;
  double wilson_low = 0.0;
  double wilson_high = 0.0;
};

struct InvalidCounts : std::runtime_error {
  InvalidCounts() : std::runtime_error("wilson_interval needs 0 <= correct <= n, n >= 1") {}
};

// Extract-Match: last occurrence wins. Returns nullopt when no pattern
// matches; caller may fall back to judge_label.
std::optional<Label> extract_label(const std::string& trace_text, TaskKind task_kind);

// One judge call asking for the label alone, parsed with extract_label.
std::optional<Label> judge_label(const std::string& trace_text, TaskKind task_kind,
                                 LlmBackend& backend);

EvalResult score(std::vector<SampleResult> per_sample, TaskKind task_kind);

// 95% Wilson score interval, z = 1.959964.
std::pair<double, double> wilson_interval(int correct, int n, double confidence = 0.95);

// Majority-vote baseline over candidate traces.
Label self_consistency(const std::vector<Trace>& traces);

std::string eval_result_table(const EvalResult& result, const std::string& row_label,
                              TaskKind task_kind);
std::string eval_result_to_json_string(const EvalResult& result);
std::string sample_result_to_jsonl_line(const SampleResult& r);

}  // namespace ctrace
