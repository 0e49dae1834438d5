#include <filesystem>
#include <fstream>

#include "ctrace/trace.hpp"
#include "doctest.h"

using namespace ctrace;

TEST_CASE("parse_trace splits at step markers and renumbers") {
  std::string raw =
      "Some preamble the model emitted.\n"
      "Step 1: first claim.\n"
      "Step 3: second claim spanning\ntwo lines.\n"
      "Step 7: third claim.\n"
      "\n"
      "A closing summary paragraph.\n"
      "\n"
      "Final Conclusion: __PROVED__\n";
  Trace t = parse_trace(raw, TaskKind::fld_folio);
  REQUIRE(t.steps.size() == 3);
  CHECK(t.steps[0].ordinal == 1);
  CHECK(t.steps[1].ordinal == 2);
  CHECK(t.steps[2].ordinal == 3);
  CHECK(t.steps[0].text == "first claim.");
  CHECK(t.steps[1].text == "second claim spanning\ntwo lines.");
  CHECK(!t.no_steps_found);
  REQUIRE(t.summary.has_value());
  CHECK(t.summary->find("closing summary") != std::string::npos);
  REQUIRE(t.extracted_label.has_value());
  CHECK(*t.extracted_label == Label::proved());
}

TEST_CASE("parse_trace without markers sets no_steps_found") {
  Trace t = parse_trace("just prose with no markers\nAnswer: B\n", TaskKind::multiple_choice);
  CHECK(t.steps.empty());
  CHECK(t.no_steps_found);
  REQUIRE(t.extracted_label.has_value());
  CHECK(*t.extracted_label == Label::choice('B'));
}

TEST_CASE("parse_trace handles missing label") {
  Trace t = parse_trace("Step 1: a claim.\n", TaskKind::yes_no);
  CHECK(t.steps.size() == 1);
  CHECK(!t.extracted_label.has_value());
}

TEST_CASE("serialize_trace emits alive steps and the label line") {
  Trace t = parse_trace(
      "Step 1: alpha.\nStep 2: beta.\nStep 3: gamma.\n\nFinal Conclusion: __DISPROVED__\n",
      TaskKind::fld_folio);
  t.steps[1].removed_by = RemovalReason::zscore;
  std::string out = serialize_trace(t, TaskKind::fld_folio);
  CHECK(out.find("alpha.") != std::string::npos);
  CHECK(out.find("beta.") == std::string::npos);
  CHECK(out.find("Final Conclusion: __DISPROVED__") != std::string::npos);

  Trace round = parse_trace(out, TaskKind::fld_folio);
  CHECK(round.steps.size() == 2);
  CHECK(*round.extracted_label == Label::disproved());
}

TEST_CASE("label comparisons and numeric canonicalization") {
  CHECK(Label::numeric("+42.50") == Label::numeric("42.5"));
  CHECK(Label::numeric("7") != Label::numeric("8"));
  CHECK(canonicalize_number("3.1400") == "3.14");
  CHECK(canonicalize_number("10.000") == "10");
  CHECK(canonicalize_number("-0.5") == "-0.5");
  CHECK(Label::yes_no(true).to_string() == "yes");
  CHECK(Label::choice('C').to_string() == "C");
  CHECK(Label::from_dataset_string(TaskKind::fld_folio, "proved") == Label::proved());
}

namespace {

std::filesystem::path write_temp(const std::string& name, const std::string& content) {
  auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream out(path);
  out << content;
  return path;
}

}  // namespace

TEST_CASE("load_dataset parses records and validates") {
  auto path = write_temp(
      "ds_ok.jsonl",
      R"({"id": "a", "problem": "p", "facts": ["f1"], "gold_label": "PROVED", "task_kind": "fld_folio"})"
      "\n"
      R"({"id": "b", "problem": "q", "facts": [], "gold_label": "17", "task_kind": "numeric"})"
      "\n");
  auto samples = load_dataset(path.string());
  REQUIRE(samples.size() == 2);
  CHECK(samples[0].facts.size() == 1);
  CHECK(samples[1].gold_label == Label::numeric("17"));

  auto bad = write_temp("ds_bad.jsonl", "{\"id\": \"a\"}\n");
  CHECK_THROWS_AS(load_dataset(bad.string()), MalformedRecord);

  auto dup = write_temp(
      "ds_dup.jsonl",
      R"({"id": "a", "problem": "p", "facts": [], "gold_label": "yes", "task_kind": "yes_no"})"
      "\n"
      R"({"id": "a", "problem": "p", "facts": [], "gold_label": "no", "task_kind": "yes_no"})"
      "\n");
  CHECK_THROWS_AS(load_dataset(dup.string()), DuplicateId);
}

TEST_CASE("config validation rejects out-of-range values") {
  PipelineConfig config;
  CHECK_NOTHROW(config.validate());
  config.k = 0;
  CHECK_THROWS_AS(config.validate(), ConfigError);
  config = PipelineConfig{};
  config.theta = 1.5;
  CHECK_THROWS_AS(config.validate(), ConfigError);
  config = PipelineConfig{};
  config.gen_temperature = -0.1;
  CHECK_THROWS_AS(config.validate(), ConfigError);
}
