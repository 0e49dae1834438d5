#pragma once

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ctrace/terms.hpp"
#include "ctrace/text.hpp"
#include "ctrace/trace.hpp"

namespace ctrace {

class LlmBackend;

enum class NodeKind { fact, step };

struct RkgNode {
  NodeKind kind = NodeKind::step;
  int source_trace = 0;
  std::string local_id;  // "Fact3" or "Step2"
  int ordinal = 0;       // fact index or alive-step position, 1-based
  int trace_step_index = -1;  // index into Trace::steps, steps only
  std::string text;
  std::set<std::string> terms;
};

struct RkgEdge {
  int src = 0;  // index into Rkg::nodes; src is the used node
  int dst = 0;  // dst is the dependent step
  double c_llm = 0.0;  // 0.9 (LLM) or 0.6 (regex fallback)
  double fused_confidence = 0.0;  // 0.7*c_llm + 0.3*jaccard(src.terms, dst.terms)
};

struct Rkg {
  int trace_index = 0;
  std::vector<RkgNode> nodes;
  std::vector<RkgEdge> edges;
  int dropped_dangling = 0;
  int dropped_low_confidence = 0;

  const RkgNode* find(const std::string& local_id) const;
};

struct DependencyRecord {
  std::string step_id;             // "Step2"
  std::vector<std::string> uses;   // "Fact1", "Step1", ...
  double c_llm = 0.9;
};

struct ConsensusNode {
  std::string canonical_id;  // "Fact1" or "Node3"
  NodeKind kind = NodeKind::step;
  // (trace index, step ordinal) for steps; (trace index, fact index) for facts.
  std::vector<std::pair<int, int>> members;
  std::string consensus_text;  // medoid member text
  std::set<std::string> term_hints;
  int founding_index = 0;  // order of first appearance, for tie-breaking
};

struct ConsensusEdge {
  std::string src;
  std::string dst;
  int freq = 0;
  double freq_fraction = 0.0;  // freq / K
};

struct ConsensusGraph {
  int k = 0;
  std::vector<ConsensusNode> nodes;  // V*: endpoints of E* only
  std::vector<ConsensusEdge> edges;  // E*: freq_fraction >= theta

  bool empty() const { return edges.empty(); }
  const ConsensusNode* find(const std::string& canonical_id) const;
};

struct NodeAlignment {
  // (trace index, local node id) -> canonical id
  std::map<std::pair<int, std::string>, std::string> canonical;
  // All canonical nodes, in founding order (before the V* restriction).
  std::vector<ConsensusNode> nodes;
};

struct TraceFilterCounts {
  int original = 0;
  int pass1 = 0;
  int isolated = 0;
  int forward_ref = 0;
  int low_consensus = 0;
};

struct FilterReport {
  int original_steps = 0;
  int pass1_removed = 0;
  int pass23_removed = 0;
  int isolated = 0;
  int forward_ref = 0;
  int low_consensus = 0;
  std::vector<TraceFilterCounts> per_trace;
};

struct Pass1Stats {
  int original_steps = 0;
  int removed = 0;
  std::vector<std::pair<int, int>> per_trace;  // (original, removed)
};

// Pass 1: weighted-Jaccard similarity to T_Con, z-normalized over all alive
// steps of the K traces pooled as one group; steps with z < gamma are removed.
// Empty T_Con removes nothing.
std::pair<ZScoreReport, Pass1Stats> zscore_filter(std::vector<Trace>& traces,
                                                  const ConsensusTerms& t_con,
                                                  double gamma);

// One extraction call per trace at temperature 0; falls back to the regex
// scan on malformed output or backend failure.
std::vector<DependencyRecord> extract_dependencies(const Trace& trace,
                                                   const std::vector<std::string>& facts,
                                                   LlmBackend& backend);

// Scans step text for "Fact<n>" / "Step<m>" mentions; keeps in-range facts
// and strictly earlier steps.
std::vector<DependencyRecord> extract_dependencies_regex(const Trace& trace,
                                                         const std::vector<std::string>& facts);

// Facts + alive steps as nodes; dependency edges with fused confidence,
// dropping edges below theta and dangling references.
Rkg build_rkg(const Trace& trace, const std::vector<std::string>& facts,
              const std::vector<DependencyRecord>& deps, double theta,
              const Lexicons& lexicons);

// Facts align by index; steps align greedily by term-set Jaccard against
// existing canonical nodes (threshold match_threshold, ties to the lowest
// canonical id). Consensus text is the medoid member text.
NodeAlignment align_nodes(const std::vector<Rkg>& rkgs, double match_threshold);

// Pass 2: counts edges on canonical ids (at most once per trace) and keeps
// those with freq/K >= theta; V* is the endpoint set. An empty E* is legal
// and signals the majority-vote fallback downstream.
ConsensusGraph aggregate_consensus(const std::vector<Rkg>& rkgs,
                                   const NodeAlignment& alignment, int k,
                                   double theta);

// Pass 3: one pass per trace against the pre-pass graph, categories in order
// isolated -> forward_ref -> low_consensus; removed steps are marked in both
// the Rkg and the Trace.
FilterReport structural_filter(std::vector<Rkg>& rkgs, std::vector<Trace>& traces,
                               const NodeAlignment& alignment,
                               const ConsensusGraph& consensus, double phi,
                               const Pass1Stats& pass1);

std::string consensus_to_dot(const ConsensusGraph& g);
std::string consensus_to_json_string(const ConsensusGraph& g);
ConsensusGraph consensus_from_json_string(const std::string& text);

std::string filter_report_to_json_string(const FilterReport& report);
FilterReport filter_report_from_json_string(const std::string& text);

// Aligned plain-text tables: per-pass removals and the anomaly breakdown.
std::string filter_report_table(const std::vector<std::pair<std::string, FilterReport>>& rows);

}  // namespace ctrace
