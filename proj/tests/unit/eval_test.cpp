#include <cmath>

#include "ctrace/eval.hpp"
#include "doctest.h"

using namespace ctrace;

TEST_CASE("extract_label fld: last occurrence wins, underscores optional") {
  auto label = extract_label(
      "Final Conclusion: __UNKNOWN__\nmore text\nFinal Conclusion: PROVED\n",
      TaskKind::fld_folio);
  REQUIRE(label.has_value());
  CHECK(*label == Label::proved());

  CHECK(extract_label("final conclusion: __disproved__", TaskKind::fld_folio) ==
        Label::disproved());
  CHECK(!extract_label("no label here", TaskKind::fld_folio).has_value());
}

TEST_CASE("extract_label multiple choice") {
  CHECK(extract_label("Answer: C", TaskKind::multiple_choice) == Label::choice('C'));
  CHECK(extract_label("Answer: (b)", TaskKind::multiple_choice) == Label::choice('B'));
  CHECK(extract_label("Answer: A\nAnswer: D", TaskKind::multiple_choice) ==
        Label::choice('D'));
  CHECK(!extract_label("Answer: Maybe", TaskKind::multiple_choice).has_value());
}

TEST_CASE("extract_label yes/no") {
  CHECK(extract_label("Answer: Yes", TaskKind::yes_no) == Label::yes_no(true));
  CHECK(extract_label("answer: no.", TaskKind::yes_no) == Label::yes_no(false));
  CHECK(!extract_label("Answer: definitely", TaskKind::yes_no).has_value());
}

TEST_CASE("extract_label numeric with fallback and canonicalization") {
  CHECK(extract_label("Answer: 1,234.50", TaskKind::numeric) == Label::numeric("1234.5"));
  CHECK(extract_label("Answer: $72", TaskKind::numeric) == Label::numeric("72"));
  // no Answer line: trailing number wins
  CHECK(extract_label("first 3 then 4 then 5", TaskKind::numeric) == Label::numeric("5"));
  CHECK(!extract_label("no numbers at all", TaskKind::numeric).has_value());
  CHECK(extract_label("Answer: -42", TaskKind::numeric) == Label::numeric("-42"));
}

TEST_CASE("wilson_interval reproduces 71.6 +/- 3.9 for 358 of 500") {
  auto [low, high] = wilson_interval(358, 500);
  double half = (high - low) / 2.0;
  CHECK(half == doctest::Approx(0.0394).epsilon(0.03));
  CHECK(std::abs(half - 0.0394) < 0.001);
  CHECK(low < 0.716);
  CHECK(high > 0.716);
}

TEST_CASE("wilson_interval boundaries clamp to [0,1]") {
  auto [l0, h0] = wilson_interval(0, 20);
  CHECK(l0 == doctest::Approx(0.0));
  CHECK(h0 < 1.0);
  auto [ln, hn] = wilson_interval(20, 20);
  CHECK(hn == doctest::Approx(1.0));
  CHECK(ln > 0.0);
  CHECK_THROWS_AS(wilson_interval(5, 0), InvalidCounts);
  CHECK_THROWS_AS(wilson_interval(-1, 10), InvalidCounts);
  CHECK_THROWS_AS(wilson_interval(11, 10), InvalidCounts);
}

namespace {

SampleResult result(const std::string& id, std::optional<Label> predicted, Label gold,
                    int steps = 3) {
  SampleResult r;
  r.id = id;
  r.predicted = predicted;
  r.gold = gold;
  r.steps_in_output = steps;
  return r;
}

}  // namespace

TEST_CASE("score computes accuracy and macro-F1 over gold classes") {
  std::vector<SampleResult> results{
      result("a", Label::proved(), Label::proved()),
      result("b", Label::proved(), Label::disproved()),
      result("c", Label::disproved(), Label::disproved()),
      result("d", std::nullopt, Label::proved()),  // unlabeled counts as wrong
  };
  EvalResult eval = score(results, TaskKind::fld_folio);
  CHECK(eval.accuracy == doctest::Approx(0.5));
  CHECK(eval.avg_steps == doctest::Approx(3.0));
  // proved: tp=1 fp=1 fn=1 -> F1 = 0.5; disproved: tp=1 fp=0 fn=1 -> F1 = 2/3
  CHECK(eval.macro_f1 == doctest::Approx((0.5 + 2.0 / 3.0) / 2.0));
  CHECK(eval.wilson_low < 0.5);
  CHECK(eval.wilson_high > 0.5);
}

TEST_CASE("score on numeric collapses macro-F1 to accuracy") {
  std::vector<SampleResult> results{
      result("a", Label::numeric("7"), Label::numeric("7")),
      result("b", Label::numeric("8"), Label::numeric("9")),
  };
  EvalResult eval = score(results, TaskKind::numeric);
  CHECK(eval.macro_f1 == doctest::Approx(eval.accuracy));
  CHECK(eval.accuracy == doctest::Approx(0.5));
}

TEST_CASE("self_consistency is the majority vote over candidate labels") {
  std::vector<Trace> traces(3);
  traces[0].trace_index = 0;
  traces[0].extracted_label = Label::choice('A');
  traces[1].trace_index = 1;
  traces[1].extracted_label = Label::choice('B');
  traces[2].trace_index = 2;
  traces[2].extracted_label = Label::choice('B');
  CHECK(self_consistency(traces) == Label::choice('B'));
}

TEST_CASE("judge_label parses the judge response") {
  CallbackBackend backend([](const CompletionRequest& req) -> std::string {
    CHECK(req.tag == CallTag::judge);
    return "Answer: no\n";
  });
  auto label = judge_label("some trace", TaskKind::yes_no, backend);
  REQUIRE(label.has_value());
  CHECK(*label == Label::yes_no(false));
}

TEST_CASE("eval serializers") {
  EvalResult eval = score({result("a", Label::yes_no(true), Label::yes_no(true))},
                          TaskKind::yes_no);
  std::string json = eval_result_to_json_string(eval);
  CHECK(json.find("\"accuracy\": 1.0") != std::string::npos);
  std::string line = sample_result_to_jsonl_line(eval.per_sample[0]);
  CHECK(line.find("\"correct\":true") != std::string::npos);
  std::string table = eval_result_table(eval, "pipeline", TaskKind::yes_no);
  CHECK(table.find("pipeline") != std::string::npos);
}
