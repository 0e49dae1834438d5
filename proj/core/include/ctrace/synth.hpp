#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ctrace/backend.hpp"
#include "ctrace/graph.hpp"
#include "ctrace/trace.hpp"

namespace ctrace {

struct RemovedCycleEdge {
  std::string src;
  std::string dst;
  int freq = 0;
  std::vector<std::pair<std::string, std::string>> cycle;  // the cycle it sat on
};

struct TopoResult {
  std::vector<std::string> order;  // canonical node ids
  std::vector<RemovedCycleEdge> removed_edges;
};

struct NoLabels : std::runtime_error {
  NoLabels() : std::runtime_error("no trace has an extracted label") {}
};

// Kahn ordering with deterministic tie-breaking (facts first, then lowest
// member (trace, ordinal), then canonical id). Cycles are broken by deleting
// the lowest-frequency cycle edge, ties to the smallest (src, dst) pair.
TopoResult topological_order(const ConsensusGraph& g);

// Modal label; ties go to the earliest trace index holding a tied label.
Label majority_label(const std::vector<Trace>& traces);

struct SynthesisInput {
  const SampleRecord* sample = nullptr;
  const ConsensusGraph* graph = nullptr;
  const std::vector<Trace>* candidates = nullptr;  // for the MV hint
};

// One backend call per non-fact node in topological order; up to two repair
// calls re-request the final label line. An empty consensus graph yields a
// zero-step fallback trace carrying the majority-vote label.
Trace synthesize(const SynthesisInput& input, LlmBackend& backend,
                 const PipelineConfig& config);

}  // namespace ctrace
