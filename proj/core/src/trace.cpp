#include "ctrace/trace.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "ctrace/eval.hpp"
#include "json.hpp"

namespace ctrace {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

const std::regex kStepMarker(R"(^\s*step\s*(\d+)\s*:\s*)", std::regex::icase);
const std::regex kLabelLine(R"(^\s*(final\s+conclusion|answer)\s*:)", std::regex::icase);

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::string cur;
  for (char c : text) {
    if (c == '\n') {
      lines.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  lines.push_back(cur);
  return lines;
}

}  // namespace

std::string to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::fld_folio: return "fld_folio";
    case TaskKind::multiple_choice: return "multiple_choice";
    case TaskKind::yes_no: return "yes_no";
    case TaskKind::numeric: return "numeric";
  }
  return "fld_folio";
}

TaskKind task_kind_from_string(const std::string& s) {
  if (s == "fld_folio") return TaskKind::fld_folio;
  if (s == "multiple_choice") return TaskKind::multiple_choice;
  if (s == "yes_no") return TaskKind::yes_no;
  if (s == "numeric") return TaskKind::numeric;
  throw ConfigError("unknown task_kind: " + s);
}

std::string to_string(RemovalReason r) {
  switch (r) {
    case RemovalReason::zscore: return "zscore";
    case RemovalReason::isolated: return "isolated";
    case RemovalReason::forward_ref: return "forward_ref";
    case RemovalReason::low_consensus: return "low_consensus";
  }
  return "zscore";
}

std::string canonicalize_number(const std::string& raw) {
  std::string s = trim(raw);
  if (!s.empty() && s.front() == '+') s.erase(s.begin());
  if (s.find('.') != std::string::npos) {
    while (!s.empty() && s.back() == '0') s.pop_back();
    if (!s.empty() && s.back() == '.') s.pop_back();
  }
  if (s == "-0" || s.empty()) s = "0";
  return s;
}

Label Label::choice(char letter) {
  letter = static_cast<char>(std::toupper(static_cast<unsigned char>(letter)));
  if (letter < 'A' || letter > 'D') throw ConfigError(std::string("choice letter out of range: ") + letter);
  return Label(Choice{letter});
}

Label Label::yes_no(bool value) { return Label(YesNo{value}); }

Label Label::numeric(const std::string& raw) { return Label(Numeric{canonicalize_number(raw)}); }

Label Label::from_dataset_string(TaskKind kind, const std::string& raw) {
  std::string s = trim(raw);
  std::string upper = s;
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return std::toupper(c); });
  switch (kind) {
    case TaskKind::fld_folio:
      if (upper == "PROVED") return proved();
      if (upper == "DISPROVED") return disproved();
      if (upper == "UNKNOWN") return unknown();
      throw ConfigError("bad fld_folio label: " + s);
    case TaskKind::multiple_choice:
      if (s.size() == 1) return choice(s[0]);
      throw ConfigError("bad multiple_choice label: " + s);
    case TaskKind::yes_no:
      if (upper == "YES") return yes_no(true);
      if (upper == "NO") return yes_no(false);
      throw ConfigError("bad yes_no label: " + s);
    case TaskKind::numeric:
      return numeric(s);
  }
  throw ConfigError("bad label: " + s);
}

std::string Label::to_string() const {
  struct Visitor {
    std::string operator()(const Proved&) const { return "PROVED"; }
    std::string operator()(const Disproved&) const { return "DISPROVED"; }
    std::string operator()(const Unknown&) const { return "UNKNOWN"; }
    std::string operator()(const Choice& c) const { return std::string(1, c.letter); }
    std::string operator()(const YesNo& y) const { return y.value ? "yes" : "no"; }
    std::string operator()(const Numeric& n) const { return n.canonical; }
  };
  return std::visit(Visitor{}, value_);
}

bool Label::operator==(const Label& other) const {
  if (value_.index() != other.value_.index()) return false;
  return to_string() == other.to_string();
}

bool Label::operator<(const Label& other) const {
  if (value_.index() != other.value_.index()) return value_.index() < other.value_.index();
  return to_string() < other.to_string();
}

int Trace::alive_step_count() const {
  int n = 0;
  for (const auto& s : steps)
    if (s.alive()) ++n;
  return n;
}

void PipelineConfig::validate() const {
  if (k < 1) throw ConfigError("k must be positive");
  if (gen_temperature < 0) throw ConfigError("gen_temperature must be >= 0");
  if (beta < 0 || beta > 1) throw ConfigError("beta must be in [0,1]");
  if (theta < 0 || theta > 1) throw ConfigError("theta must be in [0,1]");
  if (phi < 0 || phi > 1) throw ConfigError("phi must be in [0,1]");
  if (node_match_threshold < 0 || node_match_threshold > 1)
    throw ConfigError("node_match_threshold must be in [0,1]");
}

Trace parse_trace(const std::string& raw_text, TaskKind task_kind) {
  Trace trace;
  trace.raw_text = raw_text;
  trace.extracted_label = extract_label(raw_text, task_kind);

  std::vector<std::string> lines = split_lines(raw_text);
  struct Marker {
    size_t line;
    size_t text_start;  // column after the "Step N:" prefix
  };
  std::vector<Marker> markers;
  for (size_t i = 0; i < lines.size(); ++i) {
    std::smatch m;
    if (std::regex_search(lines[i], m, kStepMarker) && m.position(0) == 0) {
      markers.push_back({i, static_cast<size_t>(m.length(0))});
    }
  }
  if (markers.empty()) {
    trace.no_steps_found = true;
    return trace;
  }

  auto is_label_line = [&](const std::string& line) {
    return std::regex_search(line, kLabelLine);
  };

  for (size_t s = 0; s < markers.size(); ++s) {
    size_t begin = markers[s].line;
    size_t end = (s + 1 < markers.size()) ? markers[s + 1].line : lines.size();
    bool last = (s + 1 == markers.size());

    std::string text = lines[begin].substr(markers[s].text_start);
    size_t stopped_at = end;
    for (size_t i = begin + 1; i < end; ++i) {
      if (is_label_line(lines[i]) || (last && trim(lines[i]).empty())) {
        stopped_at = i;
        break;
      }
      text += "\n" + lines[i];
    }

    Step step;
    step.ordinal = static_cast<int>(s + 1);  // renumber in encounter order
    step.text = trim(text);
    trace.steps.push_back(std::move(step));

    if (last) {
      // Text between the last step and the label line becomes the summary.
      std::string summary;
      for (size_t i = stopped_at; i < lines.size(); ++i) {
        if (is_label_line(lines[i])) break;
        if (!summary.empty()) summary += "\n";
        summary += lines[i];
      }
      summary = trim(summary);
      if (!summary.empty()) trace.summary = summary;
    }
  }
  return trace;
}

std::string serialize_trace(const Trace& trace, TaskKind task_kind) {
  std::ostringstream out;
  int n = 0;
  for (const auto& step : trace.steps) {
    if (!step.alive()) continue;
    out << "Step " << ++n << ": " << step.text << "\n";
  }
  if (trace.extracted_label) {
    const Label& label = *trace.extracted_label;
    if (task_kind == TaskKind::fld_folio) {
      out << "Final Conclusion: __" << label.to_string() << "__\n";
    } else {
      out << "Answer: " << label.to_string() << "\n";
    }
  }
  return out.str();
}

std::vector<SampleRecord> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset file: " + path);

  std::vector<SampleRecord> records;
  std::set<std::string> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw MalformedRecord(line_no, e.what());
    }
    if (!obj.is_object()) throw MalformedRecord(line_no, "not a JSON object");
    for (const char* key : {"id", "problem", "facts", "gold_label", "task_kind"}) {
      if (!obj.contains(key)) throw MalformedRecord(line_no, std::string("missing key ") + key);
    }
    SampleRecord rec;
    try {
      rec.id = obj.at("id").get<std::string>();
      rec.problem_text = obj.at("problem").get<std::string>();
      rec.facts = obj.at("facts").get<std::vector<std::string>>();
      rec.task_kind = task_kind_from_string(obj.at("task_kind").get<std::string>());
      rec.gold_label = Label::from_dataset_string(rec.task_kind, obj.at("gold_label").get<std::string>());
    } catch (const DuplicateId&) {
      throw;
    } catch (const std::exception& e) {
      throw MalformedRecord(line_no, e.what());
    }
    if (rec.id.empty()) throw MalformedRecord(line_no, "empty id");
    if (!seen.insert(rec.id).second) throw DuplicateId(rec.id);
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace ctrace
