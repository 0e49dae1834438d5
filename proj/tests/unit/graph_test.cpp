#include "ctrace/backend.hpp"
#include "ctrace/graph.hpp"
#include "doctest.h"

using namespace ctrace;

namespace {

Trace text_trace(int index, std::vector<std::string> step_texts) {
  const auto& lex = Lexicons::builtin();
  Trace t;
  t.trace_index = index;
  int ordinal = 0;
  for (auto& text : step_texts) {
    Step s;
    s.ordinal = ++ordinal;
    s.text = text;
    s.terms = tokenize(text, lex);
    t.steps.push_back(std::move(s));
  }
  return t;
}

}  // namespace

TEST_CASE("zscore_filter removes low-similarity steps below gamma") {
  std::vector<Trace> traces{text_trace(
      0, {"the swallow carries coconut payload", "the swallow carries coconut payload",
          "the swallow carries coconut payload", "unrelated zebra xylophone"})};
  ConsensusTerms t_con;
  t_con.t_con = {{"swallow", 0.3}, {"coconut", 0.3}, {"payload", 0.2}, {"carries", 0.2}};

  auto [report, stats] = zscore_filter(traces, t_con, -1.0);
  CHECK(stats.original_steps == 4);
  CHECK(stats.removed == 1);
  CHECK(!traces[0].steps[3].alive());
  CHECK(*traces[0].steps[3].removed_by == RemovalReason::zscore);
  CHECK(traces[0].steps[0].alive());
  CHECK(report.per_step_scores.size() == 4);
  CHECK(*traces[0].steps[3].z_score < -1.0);
}

TEST_CASE("zscore_filter with empty consensus removes nothing") {
  std::vector<Trace> traces{text_trace(0, {"alpha beta", "gamma delta", "epsilon zeta"})};
  auto [report, stats] = zscore_filter(traces, ConsensusTerms{}, 10.0);
  CHECK(stats.removed == 0);
  for (const auto& s : traces[0].steps) CHECK(s.alive());
  (void)report;
}

TEST_CASE("zscore_filter with zero variance keeps everything") {
  std::vector<Trace> traces{
      text_trace(0, {"coconut swallow", "coconut swallow", "coconut swallow"})};
  ConsensusTerms t_con;
  t_con.t_con = {{"coconut", 1.0}};
  auto [report, stats] = zscore_filter(traces, t_con, -0.0001);
  CHECK(stats.removed == 0);
  CHECK(report.group_std == 0.0);
}

TEST_CASE("extract_dependencies_regex finds facts and earlier steps only") {
  Trace t = text_trace(0, {"uses Fact1 and Fact9", "builds on Step 1 and Step 5",
                           "repeats Step 2, Step 2 again"});
  auto deps = extract_dependencies_regex(t, {"f1", "f2"});
  REQUIRE(deps.size() == 3);
  CHECK(deps[0].uses == std::vector<std::string>{"Fact1"});  // Fact9 out of range
  CHECK(deps[1].uses == std::vector<std::string>{"Step1"});  // Step5 not earlier
  CHECK(deps[2].uses == std::vector<std::string>{"Step2"});  // deduplicated
  CHECK(deps[0].c_llm == doctest::Approx(0.6));
}

TEST_CASE("extract_dependencies falls back to regex on malformed output") {
  Trace t = text_trace(0, {"cites Fact1", "cites Step 1"});
  CallbackBackend garbage([](const CompletionRequest&) { return "not json at all"; });
  auto deps = extract_dependencies(t, {"f1"}, garbage);
  REQUIRE(deps.size() == 2);
  CHECK(deps[0].c_llm == doctest::Approx(0.6));
  CHECK(deps[1].uses == std::vector<std::string>{"Step1"});

  CallbackBackend good([](const CompletionRequest&) {
    return R"(Here you go: {"dependencies": [{"step_id": "Step2", "uses": ["Step1", "Step2"]}]} done)";
  });
  deps = extract_dependencies(t, {"f1"}, good);
  REQUIRE(deps.size() == 1);
  CHECK(deps[0].c_llm == doctest::Approx(0.9));
  CHECK(deps[0].uses == std::vector<std::string>{"Step1"});  // self-loop dropped
}

TEST_CASE("build_rkg fuses confidence and drops dangling or weak edges") {
  const auto& lex = Lexicons::builtin();
  // fact terms {alpha, beta}; step terms {alpha, beta, gamma, delta}: J = 0.5
  Trace t = text_trace(0, {"alpha beta gamma delta"});
  std::vector<DependencyRecord> deps{{"Step1", {"Fact1", "Fact7"}, 0.9}};
  Rkg rkg = build_rkg(t, {"alpha beta"}, deps, 0.3, lex);
  REQUIRE(rkg.nodes.size() == 2);
  REQUIRE(rkg.edges.size() == 1);
  CHECK(rkg.edges[0].fused_confidence == doctest::Approx(0.78).epsilon(1e-9));
  CHECK(rkg.dropped_dangling == 1);  // Fact7 does not exist

  // theta above the fused confidence drops the edge
  Rkg strict = build_rkg(t, {"alpha beta"}, deps, 0.8, lex);
  CHECK(strict.edges.empty());
  CHECK(strict.dropped_low_confidence == 1);
}

TEST_CASE("build_rkg skips removed steps and renumbers") {
  const auto& lex = Lexicons::builtin();
  Trace t = text_trace(0, {"alpha one", "beta two", "gamma three"});
  t.steps[1].removed_by = RemovalReason::zscore;
  Rkg rkg = build_rkg(t, {}, {}, 0.3, lex);
  REQUIRE(rkg.nodes.size() == 2);
  CHECK(rkg.nodes[0].local_id == "Step1");
  CHECK(rkg.nodes[1].local_id == "Step2");
  CHECK(rkg.nodes[1].text == "gamma three");
  CHECK(rkg.nodes[1].trace_step_index == 2);
}

TEST_CASE("align_nodes joins similar steps across traces and keeps facts by index") {
  const auto& lex = Lexicons::builtin();
  Trace a = text_trace(0, {"coconut payload swallow", "unrelated zebra topic"});
  Trace b = text_trace(1, {"coconut payload swallow", "different xylophone idea"});
  std::vector<Rkg> rkgs{build_rkg(a, {"premise coconut"}, {}, 0.3, lex),
                        build_rkg(b, {"premise coconut"}, {}, 0.3, lex)};
  NodeAlignment alignment = align_nodes(rkgs, 0.5);

  CHECK(alignment.canonical.at({0, "Fact1"}) == "Fact1");
  CHECK(alignment.canonical.at({1, "Fact1"}) == "Fact1");
  // identical first steps share a canonical node
  CHECK(alignment.canonical.at({0, "Step1"}) == alignment.canonical.at({1, "Step1"}));
  // dissimilar second steps stay apart
  CHECK(alignment.canonical.at({0, "Step2"}) != alignment.canonical.at({1, "Step2"}));

  const std::string joined = alignment.canonical.at({0, "Step1"});
  for (const auto& node : alignment.nodes) {
    if (node.canonical_id != joined) continue;
    CHECK(node.members.size() == 2);
    CHECK(node.consensus_text == "coconut payload swallow");
    CHECK(node.term_hints.count("coconut") == 1);
  }
}

TEST_CASE("aggregate_consensus counts an edge once per trace and applies theta") {
  const auto& lex = Lexicons::builtin();
  std::vector<Rkg> rkgs;
  for (int t = 0; t < 10; ++t) {
    Trace trace = text_trace(
        t, {"first coconut premise", "second swallow payload", "third zebra finale"});
    std::vector<DependencyRecord> deps;
    if (t < 3) deps.push_back({"Step2", {"Step1"}, 0.9});
    if (t < 2) deps.push_back({"Step3", {"Step1"}, 0.9});
    rkgs.push_back(build_rkg(trace, {}, deps, 0.3, lex));
  }
  NodeAlignment alignment = align_nodes(rkgs, 0.5);
  ConsensusGraph g = aggregate_consensus(rkgs, alignment, 10, 0.3);

  REQUIRE(g.edges.size() == 1);  // freq 3 -> 0.3 >= theta kept; freq 2 dropped
  CHECK(g.edges[0].freq == 3);
  CHECK(g.edges[0].freq_fraction == doctest::Approx(0.3));
  CHECK(g.nodes.size() == 2);  // only endpoints survive into V*
}

TEST_CASE("structural_filter categorizes against the pre-pass graph") {
  // One trace, hand-built alignment/consensus. Steps: 1 kept, 2 isolated,
  // 3 forward-referenced by 4, 4 kept, 5 low-consensus.
  Rkg rkg;
  rkg.trace_index = 0;
  for (int i = 1; i <= 5; ++i) {
    RkgNode node;
    node.kind = NodeKind::step;
    node.ordinal = i;
    node.trace_step_index = i - 1;
    node.local_id = "Step" + std::to_string(i);
    rkg.nodes.push_back(std::move(node));
  }
  auto edge = [](int src, int dst) {
    RkgEdge e;
    e.src = src;
    e.dst = dst;
    return e;
  };
  rkg.edges = {edge(3, 2),   // Step4 -> Step3: forward reference into Step3
               edge(0, 3),   // Step1 -> Step4: supported
               edge(0, 4)};  // Step1 -> Step5: unsupported
  std::vector<Rkg> rkgs{rkg};

  NodeAlignment alignment;
  for (int i = 1; i <= 5; ++i)
    alignment.canonical[{0, "Step" + std::to_string(i)}] = "N" + std::to_string(i);

  ConsensusGraph consensus;
  consensus.k = 10;
  consensus.edges.push_back({"N1", "N4", 10, 1.0});

  Trace trace;
  trace.trace_index = 0;
  for (int i = 1; i <= 5; ++i) {
    Step s;
    s.ordinal = i;
    trace.steps.push_back(s);
  }
  std::vector<Trace> traces{trace};

  Pass1Stats pass1;
  pass1.original_steps = 5;
  pass1.removed = 0;
  pass1.per_trace = {{5, 0}};

  FilterReport report = structural_filter(rkgs, traces, alignment, consensus, 0.3, pass1);
  CHECK(report.isolated == 1);
  CHECK(report.forward_ref == 1);
  CHECK(report.low_consensus == 1);
  CHECK(report.pass23_removed == 3);
  CHECK(*traces[0].steps[1].removed_by == RemovalReason::isolated);
  CHECK(*traces[0].steps[2].removed_by == RemovalReason::forward_ref);
  CHECK(*traces[0].steps[4].removed_by == RemovalReason::low_consensus);
  CHECK(traces[0].steps[0].alive());
  CHECK(traces[0].steps[3].alive());

  // survivors pruned in the rkg as well
  CHECK(rkgs[0].nodes.size() == 2);
  CHECK(rkgs[0].edges.size() == 1);
}

TEST_CASE("consensus graph json round-trip") {
  ConsensusGraph g;
  g.k = 10;
  ConsensusNode n;
  n.canonical_id = "Node1";
  n.kind = NodeKind::step;
  n.members = {{0, 1}, {2, 3}};
  n.consensus_text = "a step";
  n.term_hints = {"alpha", "beta"};
  n.founding_index = 4;
  g.nodes.push_back(n);
  g.edges.push_back({"Fact1", "Node1", 7, 0.7});

  ConsensusGraph round = consensus_from_json_string(consensus_to_json_string(g));
  CHECK(round.k == 10);
  REQUIRE(round.nodes.size() == 1);
  CHECK(round.nodes[0].members == n.members);
  CHECK(round.nodes[0].term_hints == n.term_hints);
  REQUIRE(round.edges.size() == 1);
  CHECK(round.edges[0].freq == 7);
  CHECK(consensus_to_json_string(round) == consensus_to_json_string(g));

  std::string dot = consensus_to_dot(g);
  CHECK(dot.find("\"Fact1\" -> \"Node1\"") != std::string::npos);
  CHECK(dot.find("label=\"7\"") != std::string::npos);
}

TEST_CASE("filter report json round-trip") {
  FilterReport r;
  r.original_steps = 100;
  r.pass1_removed = 10;
  r.pass23_removed = 9;
  r.isolated = 3;
  r.forward_ref = 2;
  r.low_consensus = 4;
  r.per_trace.push_back({20, 2, 1, 0, 1});
  FilterReport round = filter_report_from_json_string(filter_report_to_json_string(r));
  CHECK(filter_report_to_json_string(round) == filter_report_to_json_string(r));
  CHECK(round.per_trace.size() == 1);
  CHECK(round.low_consensus == 4);
}
