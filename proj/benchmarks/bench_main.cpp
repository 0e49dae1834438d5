#include <benchmark/benchmark.h>

#include <random>
#include <sstream>

#include "ctrace/graph.hpp"
#include "ctrace/synth.hpp"
#include "ctrace/terms.hpp"
#include "ctrace/text.hpp"

namespace {

using namespace ctrace;

std::string synthetic_text(int words, unsigned seed) {
  static const char* vocab[] = {"mortal", "human",  "socrates", "premise",
                                "lifespan", "finite", "reptile",  "square",
                                "rectangle", "divisible", "integer", "water"};
  std::mt19937 rng(seed);
  std::uniform_int_distribution<size_t> pick(0, std::size(vocab) - 1);
  std::ostringstream out;
  for (int i = 0; i < words; ++i) {
    if (i) out << ' ';
    out << vocab[pick(rng)];
  }
  return out.str();
}

std::vector<Trace> synthetic_traces(int k, int steps, int words_per_step) {
  std::vector<Trace> traces;
  const Lexicons& lex = Lexicons::builtin();
  for (int t = 0; t < k; ++t) {
    Trace trace;
    trace.trace_index = t;
    for (int s = 0; s < steps; ++s) {
      Step step;
      step.ordinal = s + 1;
      step.text = synthetic_text(words_per_step, t * 1000 + s);
      step.terms = tokenize(step.text, lex);
      trace.steps.push_back(std::move(step));
    }
    traces.push_back(std::move(trace));
  }
  return traces;
}

void bm_tokenize(benchmark::State& state) {
  std::string text = synthetic_text(static_cast<int>(state.range(0)), 7);
  const Lexicons& lex = Lexicons::builtin();
  for (auto _ : state) benchmark::DoNotOptimize(tokenize(text, lex));
}
BENCHMARK(bm_tokenize)->Arg(64)->Arg(512)->Arg(4096);

void bm_tf_irf(benchmark::State& state) {
  auto traces = synthetic_traces(static_cast<int>(state.range(0)), 12, 30);
  for (auto _ : state) benchmark::DoNotOptimize(tf_irf_scores(traces));
}
BENCHMARK(bm_tf_irf)->Arg(5)->Arg(10)->Arg(40);

void bm_align_nodes(benchmark::State& state) {
  auto traces = synthetic_traces(static_cast<int>(state.range(0)), 12, 30);
  std::vector<Rkg> rkgs;
  const Lexicons& lex = Lexicons::builtin();
  for (const auto& trace : traces) {
    auto deps = extract_dependencies_regex(trace, {});
    rkgs.push_back(build_rkg(trace, {}, deps, 0.3, lex));
  }
  for (auto _ : state) benchmark::DoNotOptimize(align_nodes(rkgs, 0.5));
}
BENCHMARK(bm_align_nodes)->Arg(5)->Arg(10)->Arg(40);

void bm_topological_order(benchmark::State& state) {
  // Layered DAG with n nodes and ~2n edges.
  const int n = static_cast<int>(state.range(0));
  ConsensusGraph g;
  g.k = 10;
  for (int i = 0; i < n; ++i) {
    ConsensusNode node;
    node.canonical_id = "Node" + std::to_string(i);
    node.kind = NodeKind::step;
    node.members = {{0, i + 1}};
    g.nodes.push_back(std::move(node));
  }
  std::mt19937 rng(11);
  for (int i = 1; i < n; ++i) {
    std::uniform_int_distribution<int> pick(0, i - 1);
    for (int e = 0; e < 2; ++e) {
      ConsensusEdge edge;
      edge.src = "Node" + std::to_string(pick(rng));
      edge.dst = "Node" + std::to_string(i);
      edge.freq = 5;
      edge.freq_fraction = 0.5;
      g.edges.push_back(std::move(edge));
    }
  }
  for (auto _ : state) benchmark::DoNotOptimize(topological_order(g));
}
BENCHMARK(bm_topological_order)->Arg(16)->Arg(64)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
