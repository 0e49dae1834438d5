#include "ctrace/eval.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <regex>
#include <sstream>

#include "ctrace/prompts.hpp"
#include "ctrace/synth.hpp"
#include "json.hpp"

namespace ctrace {

namespace {

// Fixed so intervals are bit-reproducible.
constexpr double kWilsonZ = 1.959964;

std::optional<std::string> last_capture(const std::string& text, const std::regex& re) {
  std::optional<std::string> last;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), re);
       it != std::sregex_iterator(); ++it) {
    last = (*it)[1].str();
  }
  return last;
}

std::string strip_commas(std::string s) {
  s.erase(std::remove(s.begin(), s.end(), ','), s.end());
  return s;
}

}  // namespace

std::optional<Label> extract_label(const std::string& trace_text, TaskKind task_kind) {
  switch (task_kind) {
    case TaskKind::fld_folio: {
      static const std::regex re(
          R"(final\s+conclusion\s*:\s*_{0,2}\s*(proved|disproved|unknown)_{0,2})",
          std::regex::icase);
      auto m = last_capture(trace_text, re);
      if (!m) return std::nullopt;
      std::string lower = *m;
      std::transform(lower.begin(), lower.end(), lower.begin(),
                     [](unsigned char c) { return std::tolower(c); });
      if (lower == "proved") return Label::proved();
      if (lower == "disproved") return Label::disproved();
      return Label::unknown();
    }
    case TaskKind::multiple_choice: {
      static const std::regex re(R"(answer\s*:\s*\(?([A-Da-d])\)?(?![A-Za-z]))",
                                 std::regex::icase);
      auto m = last_capture(trace_text, re);
      if (!m) return std::nullopt;
      return Label::choice((*m)[0]);
    }
    case TaskKind::yes_no: {
      static const std::regex re(R"(answer\s*:\s*(yes|no)\b)", std::regex::icase);
      auto m = last_capture(trace_text, re);
      if (!m) return std::nullopt;
      return Label::yes_no((*m)[0] == 'y' || (*m)[0] == 'Y');
    }
    case TaskKind::numeric: {
      static const std::regex answer_re(R"(answer\s*:\s*\$?(-?[0-9][0-9,]*(?:\.[0-9]+)?))",
                                        std::regex::icase);
      if (auto m = last_capture(trace_text, answer_re))
        return Label::numeric(strip_commas(*m));
      // Fall back to the trailing number anywhere in the text.
      static const std::regex number_re(R"((-?[0-9]+(?:\.[0-9]+)?))");
      if (auto m = last_capture(trace_text, number_re)) return Label::numeric(*m);
      return std::nullopt;
    }
  }
  return std::nullopt;
}

std::optional<Label> judge_label(const std::string& trace_text, TaskKind task_kind,
                                 LlmBackend& backend) {
  CompletionRequest req;
  req.system = system_prompt();
  req.user = judge_prompt(trace_text, task_kind);
  req.temperature = 0.0;
  req.tag = CallTag::judge;
  try {
    return extract_label(backend.complete(req), task_kind);
  } catch (const BackendError&) {
    return std::nullopt;
  }
}

std::pair<double, double> wilson_interval(int correct, int n, double /*confidence*/) {
  if (n < 1 || correct < 0 || correct > n) throw InvalidCounts();
  const double z = kWilsonZ;
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(correct) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (p + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  double low = std::max(0.0, center - half);
  double high = std::min(1.0, center + half);
  return {low, high};
}

EvalResult score(std::vector<SampleResult> per_sample, TaskKind task_kind) {
  EvalResult result;
  result.per_sample = std::move(per_sample);
  const auto& samples = result.per_sample;
  if (samples.empty()) return result;

  int correct = 0;
  double steps = 0.0;
  for (const auto& s : samples) {
    if (s.predicted && *s.predicted == s.gold) ++correct;
    steps += s.steps_in_output;
  }
  const int n = static_cast<int>(samples.size());
  result.accuracy = static_cast<double>(correct) / n;
  result.avg_steps = steps / n;
  std::tie(result.wilson_low, result.wilson_high) = wilson_interval(correct, n);

  if (task_kind == TaskKind::numeric) {
    // Unique answers per problem make per-class F1 meaningless.
    result.macro_f1 = result.accuracy;
    return result;
  }

  std::map<Label, std::array<int, 3>> confusion;  // label -> {tp, fp, fn}
  for (const auto& s : samples) confusion[s.gold];  // classes present in gold
  for (const auto& s : samples) {
    if (s.predicted && *s.predicted == s.gold) {
      ++confusion[s.gold][0];
    } else {
      ++confusion[s.gold][2];
      if (s.predicted && confusion.count(*s.predicted)) ++confusion[*s.predicted][1];
    }
  }
  double f1_sum = 0.0;
  for (const auto& [label, c] : confusion) {
    int denom = 2 * c[0] + c[1] + c[2];
    f1_sum += denom > 0 ? 2.0 * c[0] / denom : 0.0;
  }
  result.macro_f1 = f1_sum / static_cast<double>(confusion.size());
  return result;
}

Label self_consistency(const std::vector<Trace>& traces) {
  return majority_label(traces);
}

std::string eval_result_table(const EvalResult& result, const std::string& row_label,
                              TaskKind task_kind) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-24s %7s %7s %11s\n", "Method", "Acc", "F1",
                "Avg.Steps");
  out << line;
  char f1[16];
  if (task_kind == TaskKind::numeric) {
    std::snprintf(f1, sizeof(f1), "%s", "-");
  } else {
    std::snprintf(f1, sizeof(f1), "%.2f", result.macro_f1);
  }
  std::snprintf(line, sizeof(line), "%-24s %7.1f %7s %11.1f\n", row_label.c_str(),
                100.0 * result.accuracy, f1, result.avg_steps);
  out << line;
  return out.str();
}

std::string eval_result_to_json_string(const EvalResult& result) {
  nlohmann::ordered_json doc;
  doc["n"] = result.per_sample.size();
  doc["accuracy"] = result.accuracy;
  doc["macro_f1"] = result.macro_f1;
  doc["avg_steps"] = result.avg_steps;
  doc["wilson_low"] = result.wilson_low;
  doc["wilson_high"] = result.wilson_high;
  return doc.dump(2) + "\n";
}

std::string sample_result_to_jsonl_line(const SampleResult& r) {
  nlohmann::ordered_json doc;
  doc["id"] = r.id;
  if (r.predicted) {
    doc["predicted"] = r.predicted->to_string();
  } else {
    doc["predicted"] = nullptr;
  }
  doc["gold"] = r.gold.to_string();
  doc["correct"] = r.predicted && *r.predicted == r.gold;
  doc["steps_in_output"] = r.steps_in_output;
  doc["judged"] = r.judged;
  return doc.dump();
}

}  // namespace ctrace
