#include "ctrace/prompts.hpp"

#include <sstream>

#include "stepgen_template.hpp"

namespace ctrace {

namespace {

std::string replace_all(std::string text, const std::string& from, const std::string& to) {
  size_t pos = 0;
  while ((pos = text.find(from, pos)) != std::string::npos) {
    text.replace(pos, from.size(), to);
    pos += to.size();
  }
  return text;
}

std::string facts_block(const std::vector<std::string>& facts) {
  if (facts.empty()) return "(none)";
  std::ostringstream out;
  for (size_t i = 0; i < facts.size(); ++i) {
    if (i) out << "\n";
    out << "Fact" << (i + 1) << ": " << facts[i];
  }
  return out.str();
}

}  // namespace

const std::string& system_prompt() {
  static const std::string prompt =
      "You are a meticulous logician. Produce exhaustive, atomic reasoning. "
      "Each step must cite the facts or earlier steps it depends on. Avoid "
      "circular references and avoid skipping steps.";
  return prompt;
}

std::string label_line_instruction(TaskKind kind) {
  switch (kind) {
    case TaskKind::fld_folio:
      return "Final Conclusion: __PROVED__ (or __DISPROVED__ / __UNKNOWN__)";
    case TaskKind::multiple_choice:
      return "Answer: A (or B / C / D)";
    case TaskKind::yes_no:
      return "Answer: yes (or no)";
    case TaskKind::numeric:
      return "Answer: <number>";
  }
  return "";
}

std::string generation_prompt(const SampleRecord& sample) {
  std::ostringstream out;
  out << "Generate extremely detailed reasoning for the following problem.\n\n"
      << "Problem Statement:\n"
      << sample.problem_text << "\n";
  if (!sample.facts.empty()) {
    out << "\nAvailable facts (given premises):\n" << facts_block(sample.facts) << "\n";
  }
  out << "\nInstructions:\n"
      << "- Provide reasoning steps in the format \"Step 1:\", \"Step 2:\", etc.\n"
      << "- Each step must cite the exact facts or previous steps it uses.\n"
      << "- Use natural language sentences without JSON or markdown code fences.\n"
      << "- After the steps, include a short summary paragraph.\n"
      << "- Do not stop early; if the answer is cut off, immediately continue until "
         "the summary and final conclusion are delivered.\n";
  switch (sample.task_kind) {
    case TaskKind::fld_folio:
      out << "- Determine whether the hypothesis is __PROVED__, __DISPROVED__, or "
             "__UNKNOWN__ based on your reasoning.\n"
          << "- End with a single line exactly formatted as: Final Conclusion: "
             "__PROVED__ (or __DISPROVED__ / __UNKNOWN__).\n";
      break;
    case TaskKind::multiple_choice:
      out << "- Select correct answers from options (A, B, C, or D) based on your "
             "reasoning.\n"
          << "- End with a single line exactly formatted as: Answer: A (or B / C / D).\n";
      break;
    case TaskKind::yes_no:
      out << "- Determine whether the answer is yes or no based on your reasoning.\n"
          << "- End with a single line exactly formatted as: Answer: yes (or no).\n";
      break;
    case TaskKind::numeric:
      out << "- Work the arithmetic carefully and state the final numeric result.\n"
          << "- End with a single line exactly formatted as: Answer: <number>.\n";
      break;
  }
  return out.str();
}

std::string extraction_prompt(const std::vector<std::string>& facts, const Trace& trace) {
  std::ostringstream steps;
  int position = 0;
  for (const auto& step : trace.steps) {
    if (!step.alive()) continue;
    if (position) steps << "\n";
    steps << "Step" << ++position << ": " << step.text;
  }
  std::ostringstream out;
  out << "You are analyzing a step-by-step reasoning trace. Your task is to identify "
         "the DIRECT dependencies between steps.\n\n"
      << "For each reasoning step, identify which facts or EARLIER steps it DIRECTLY "
         "depends on to reach its conclusion.\n"
      << "- Only list DIRECT dependencies (not transitive ones).\n"
      << "- A step depends on another step if it uses that step's conclusion as a "
         "premise.\n"
      << "- Do NOT list a step as depending on itself.\n"
      << "- If a step uses no earlier steps or facts, set \"uses\" to [].\n\n"
      << "Output ONLY valid JSON with this exact structure:\n\n"
      << "{\"dependencies\": [{\"step_id\": \"Step1\", \"uses\": []}, {\"step_id\": "
         "\"Step2\", \"uses\": [\"Fact1\", \"Step1\"]}, ...]}\n\n"
      << "Available facts (given premises):\n" << facts_block(facts) << "\n\n"
      << "Reasoning steps:\n" << steps.str() << "\n";
  return out.str();
}

std::string stepgen_prompt(const StepGenContext& ctx) {
  std::string text = detail::kStepGenTemplate;
  text = replace_all(text, "{problem}", ctx.problem);
  text = replace_all(text, "{facts}", facts_block(ctx.facts));

  std::ostringstream prior;
  if (ctx.prior_steps.empty()) {
    prior << "(none yet)";
  } else {
    for (size_t i = 0; i < ctx.prior_steps.size(); ++i) {
      if (i) prior << "\n";
      prior << "Step " << (i + 1) << ": " << ctx.prior_steps[i];
    }
  }
  text = replace_all(text, "{prior_steps}", prior.str());
  text = replace_all(text, "{ref_v}", ctx.ref_text);

  std::ostringstream hints;
  bool first = true;
  for (const auto& term : ctx.term_hints) {
    if (!first) hints << ", ";
    hints << term;
    first = false;
  }
  text = replace_all(text, "{term_hints}", hints.str());

  std::string mv;
  if (ctx.final_step) {
    mv = "This is the final step. After it, end with a single line exactly formatted "
         "as: " + label_line_instruction(ctx.task_kind) + "\n";
    if (ctx.mv_hint) {
      mv += "The majority of candidate traces concluded: " + *ctx.mv_hint + "\n";
    }
    mv += "\n";
  }
  text = replace_all(text, "{mv_hint}", mv);
  return text;
}

std::string repair_prompt(const std::string& assembled_trace, TaskKind task_kind) {
  std::ostringstream out;
  out << "The reasoning trace below is missing its final label line.\n\n"
      << assembled_trace << "\n"
      << "Reply with ONLY the final line, exactly formatted as: "
      << label_line_instruction(task_kind) << "\n";
  return out.str();
}

std::string judge_prompt(const std::string& trace_text, TaskKind task_kind) {
  std::ostringstream out;
  out << "Read the reasoning trace below and identify the final answer it reaches.\n\n"
      << trace_text << "\n"
      << "Reply with ONLY a single line exactly formatted as: "
      << label_line_instruction(task_kind) << "\n";
  return out.str();
}

}  // namespace ctrace
