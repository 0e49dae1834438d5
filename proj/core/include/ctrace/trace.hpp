#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace ctrace {

enum class TaskKind { fld_folio, multiple_choice, yes_no, numeric };

std::string to_string(TaskKind kind);
TaskKind task_kind_from_string(const std::string& s);

// Final label of a trace. The active alternative is constrained by the
// sample's TaskKind.
class Label {
 public:
  struct Proved {};
  struct Disproved {};
  struct Unknown {};
  struct Choice {
    char letter;  // 'A'..'D'
  };
  struct YesNo {
    bool value;
  };
  struct Numeric {
    std::string canonical;  // no leading '+', no trailing zeros after '.'
  };

  using Value = std::variant<Proved, Disproved, Unknown, Choice, YesNo, Numeric>;

  Label() = default;
  explicit Label(Value v) : value_(std::move(v)) {}

  static Label proved() { return Label(Proved{}); }
  static Label disproved() { return Label(Disproved{}); }
  static Label unknown() { return Label(Unknown{}); }
  static Label choice(char letter);
  static Label yes_no(bool value);
  static Label numeric(const std::string& raw);

  // Parses the dataset-file representation ("PROVED", "B", "yes", "42.5").
  static Label from_dataset_string(TaskKind kind, const std::string& s);

  const Value& value() const { return value_; }
  std::string to_string() const;

  bool operator==(const Label& other) const;
  bool operator!=(const Label& other) const { return !(*this == other); }
  bool operator<(const Label& other) const;  // for use as map key

 private:
  Value value_ = Unknown{};
};

// Strips a leading '+' and trailing zeros after the decimal point.
std::string canonicalize_number(const std::string& raw);

enum class RemovalReason { zscore, isolated, forward_ref, low_consensus };

std::string to_string(RemovalReason r);

struct Step {
  int ordinal = 0;  // 1-based, contiguous before any removal
  std::string text;
  std::map<std::string, int> terms;  // filled by text_analysis
  std::optional<double> z_score;
  std::optional<RemovalReason> removed_by;

  bool alive() const { return !removed_by.has_value(); }
};

struct Trace {
  int trace_index = 0;  // 0..K-1
  std::string raw_text;
  std::vector<Step> steps;
  std::optional<std::string> summary;
  std::optional<Label> extracted_label;
  bool no_steps_found = false;  // diagnostic: zero "Step N:" markers
  bool fallback = false;        // synthesis fallback (majority vote, 0 steps)

  int alive_step_count() const;
};

struct SampleRecord {
  std::string id;
  std::string problem_text;
  std::vector<std::string> facts;  // may be empty for math tasks
  Label gold_label;
  TaskKind task_kind = TaskKind::fld_folio;
};

struct PipelineConfig {
  int k = 10;
  double gen_temperature = 0.7;
  double alpha = 0.01;
  double beta = 0.3;
  double gamma = -1.0;
  double theta = 0.3;
  double phi = 0.3;
  double synth_temperature = 0.0;
  bool mv_hint = true;
  double node_match_threshold = 0.5;
  std::int64_t seed = 0;

  // Throws ConfigError on any out-of-range value.
  void validate() const;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MalformedRecord : std::runtime_error {
  int line;
  MalformedRecord(int line_no, const std::string& what)
      : std::runtime_error("malformed record at line " + std::to_string(line_no) + ": " + what),
        line(line_no) {}
};

struct DuplicateId : std::runtime_error {
  explicit DuplicateId(const std::string& id)
      : std::runtime_error("duplicate sample id: " + id) {}
};

// Splits raw LLM output at "Step N:" markers, renumbering 1..n in encounter
// order. Never throws: zero markers yields an empty trace with the
// no_steps_found flag set.
Trace parse_trace(const std::string& raw_text, TaskKind task_kind);

// Serializes alive steps as "Step i: <text>" lines plus the label line.
std::string serialize_trace(const Trace& trace, TaskKind task_kind);

// JSONL loader; keys exactly {"id","problem","facts","gold_label","task_kind"}.
std::vector<SampleRecord> load_dataset(const std::string& path);

}  // namespace ctrace
