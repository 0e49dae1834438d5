#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ctrace/trace.hpp"

namespace ctrace {

// The shared system prefix for all calls.
const std::string& system_prompt();

// Trace-generation prompt for one sample (no answer given).
std::string generation_prompt(const SampleRecord& sample);

// Dependency-extraction prompt over a trace's alive steps.
std::string extraction_prompt(const std::vector<std::string>& facts, const Trace& trace);

struct StepGenContext {
  std::string problem;
  std::vector<std::string> facts;
  std::vector<std::string> prior_steps;
  std::string ref_text;                 // consensus node text
  std::set<std::string> term_hints;
  std::optional<std::string> mv_hint;   // majority-vote label, final step only
  TaskKind task_kind = TaskKind::fld_folio;
  bool final_step = false;
};

// Built from the template asset; placeholders {problem, facts, prior_steps,
// ref_v, term_hints, mv_hint}.
std::string stepgen_prompt(const StepGenContext& ctx);

// Re-requests only the final label line.
std::string repair_prompt(const std::string& assembled_trace, TaskKind task_kind);

std::string judge_prompt(const std::string& trace_text, TaskKind task_kind);

// The format reminder for a task's label line ("Final Conclusion: ..." etc.).
std::string label_line_instruction(TaskKind kind);

}  // namespace ctrace
