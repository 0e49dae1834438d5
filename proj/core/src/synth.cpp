#include "ctrace/synth.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include "ctrace/eval.hpp"
#include "ctrace/prompts.hpp"

namespace ctrace {

namespace {

using EdgePair = std::pair<std::string, std::string>;

struct NodeOrderKey {
  bool is_step = true;
  std::pair<int, int> min_member{0, 0};
  std::string canonical_id;

  bool operator<(const NodeOrderKey& other) const {
    return std::tie(is_step, min_member, canonical_id) <
           std::tie(other.is_step, other.min_member, other.canonical_id);
  }
};

NodeOrderKey order_key(const ConsensusNode& node) {
  NodeOrderKey key;
  key.is_step = node.kind == NodeKind::step;
  key.canonical_id = node.canonical_id;
  key.min_member = node.members.empty() ? std::make_pair(0, 0) : node.members.front();
  for (const auto& m : node.members) key.min_member = std::min(key.min_member, m);
  return key;
}

// DFS for any cycle among the remaining nodes, following the live edge set.
// Returns the cycle as an edge sequence, or empty if none reachable.
std::vector<EdgePair> find_cycle(const std::vector<std::string>& nodes,
                                 const std::map<std::string, std::vector<std::string>>& adj) {
  std::map<std::string, int> state;  // 0 unseen, 1 on stack, 2 done
  std::vector<std::string> stack;

  std::function<std::vector<EdgePair>(const std::string&)> dfs =
      [&](const std::string& u) -> std::vector<EdgePair> {
    state[u] = 1;
    stack.push_back(u);
    auto it = adj.find(u);
    if (it != adj.end()) {
      for (const auto& v : it->second) {
        if (state[v] == 1) {
          std::vector<EdgePair> cycle;
          size_t start = std::find(stack.begin(), stack.end(), v) - stack.begin();
          for (size_t i = start; i + 1 < stack.size(); ++i)
            cycle.emplace_back(stack[i], stack[i + 1]);
          cycle.emplace_back(stack.back(), v);
          return cycle;
        }
        if (state[v] == 0) {
          auto cycle = dfs(v);
          if (!cycle.empty()) return cycle;
        }
      }
    }
    stack.pop_back();
    state[u] = 2;
    return {};
  };

  for (const auto& n : nodes) {
    if (state[n] == 0) {
      auto cycle = dfs(n);
      if (!cycle.empty()) return cycle;
    }
  }
  return {};
}

const std::regex kLabelLine(R"(^\s*(final\s+conclusion|answer)\s*:)", std::regex::icase);
const std::regex kStepPrefix(R"(^\s*step\s*\d+\s*:\s*)", std::regex::icase);

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

TopoResult topological_order(const ConsensusGraph& g) {
  TopoResult result;
  std::map<std::string, const ConsensusNode*> by_id;
  for (const auto& node : g.nodes) by_id[node.canonical_id] = &node;

  std::map<EdgePair, int> freq;
  for (const auto& e : g.edges) freq[{e.src, e.dst}] = e.freq;

  std::set<EdgePair> live;
  for (const auto& e : g.edges) live.insert({e.src, e.dst});

  std::set<std::string> remaining;
  for (const auto& node : g.nodes) remaining.insert(node.canonical_id);

  auto indegree = [&](const std::string& id) {
    int d = 0;
    for (const auto& e : live)
      if (e.second == id && remaining.count(e.first)) ++d;
    return d;
  };

  while (!remaining.empty()) {
    // Ready set: remaining nodes with no live incoming edge.
    const ConsensusNode* best = nullptr;
    NodeOrderKey best_key;
    for (const auto& id : remaining) {
      if (indegree(id) != 0) continue;
      NodeOrderKey key = order_key(*by_id.at(id));
      if (!best || key < best_key) {
        best = by_id.at(id);
        best_key = key;
      }
    }
    if (best) {
      result.order.push_back(best->canonical_id);
      remaining.erase(best->canonical_id);
      continue;
    }

    // Stalled: break a cycle by deleting its lowest-frequency edge.
    std::map<std::string, std::vector<std::string>> adj;
    for (const auto& e : live) {
      if (remaining.count(e.first) && remaining.count(e.second))
        adj[e.first].push_back(e.second);
    }
    for (auto& [u, vs] : adj) std::sort(vs.begin(), vs.end());
    std::vector<std::string> nodes(remaining.begin(), remaining.end());
    auto cycle = find_cycle(nodes, adj);
    if (cycle.empty()) break;  // cannot happen: a stalled subgraph has a cycle

    EdgePair victim = cycle.front();
    for (const auto& e : cycle) {
      if (freq[e] < freq[victim] || (freq[e] == freq[victim] && e < victim)) victim = e;
    }
    RemovedCycleEdge removed;
    removed.src = victim.first;
    removed.dst = victim.second;
    removed.freq = freq[victim];
    removed.cycle = cycle;
    result.removed_edges.push_back(std::move(removed));
    live.erase(victim);
  }
  return result;
}

Label majority_label(const std::vector<Trace>& traces) {
  struct Tally {
    int count = 0;
    int first_trace = 0;
  };
  std::map<Label, Tally> tallies;
  for (const auto& trace : traces) {
    if (!trace.extracted_label) continue;
    auto [it, inserted] = tallies.try_emplace(*trace.extracted_label);
    if (inserted) it->second.first_trace = trace.trace_index;
    ++it->second.count;
  }
  if (tallies.empty()) throw NoLabels();
  const Label* best = nullptr;
  Tally best_tally;
  for (const auto& [label, tally] : tallies) {
    if (!best || tally.count > best_tally.count ||
        (tally.count == best_tally.count && tally.first_trace < best_tally.first_trace)) {
      best = &label;
      best_tally = tally;
    }
  }
  return *best;
}

Trace synthesize(const SynthesisInput& input, LlmBackend& backend,
                 const PipelineConfig& config) {
  const SampleRecord& sample = *input.sample;
  const ConsensusGraph& graph = *input.graph;

  if (graph.empty()) {
    Trace fallback;
    fallback.fallback = true;
    try {
      fallback.extracted_label = majority_label(*input.candidates);
    } catch (const NoLabels&) {
      // degenerate sample: no candidate produced a label either
    }
    fallback.raw_text = serialize_trace(fallback, sample.task_kind);
    fallback.no_steps_found = true;
    return fallback;
  }

  TopoResult topo = topological_order(graph);
  std::vector<const ConsensusNode*> step_nodes;
  for (const auto& id : topo.order) {
    const ConsensusNode* node = graph.find(id);
    if (node && node->kind == NodeKind::step) step_nodes.push_back(node);
  }

  std::optional<Label> mv;
  if (config.mv_hint) {
    try {
      mv = majority_label(*input.candidates);
    } catch (const NoLabels&) {
    }
  }

  std::vector<std::string> generated;
  std::optional<Label> final_label;
  for (size_t i = 0; i < step_nodes.size(); ++i) {
    const ConsensusNode* node = step_nodes[i];
    StepGenContext ctx;
    ctx.problem = sample.problem_text;
    ctx.facts = sample.facts;
    ctx.prior_steps = generated;
    ctx.ref_text = node->consensus_text;
    ctx.term_hints = node->term_hints;
    ctx.task_kind = sample.task_kind;
    ctx.final_step = (i + 1 == step_nodes.size());
    if (ctx.final_step && mv) {
      std::string hint = mv->to_string();
      if (sample.task_kind == TaskKind::fld_folio) hint = "__" + hint + "__";
      ctx.mv_hint = hint;
    }

    CompletionRequest req;
    req.system = system_prompt();
    req.user = stepgen_prompt(ctx);
    req.temperature = config.synth_temperature;
    req.tag = CallTag::synthesis;
    std::string response = backend.complete(req);

    // Peel any label line out of the step text; remember the last one seen.
    std::ostringstream step_text;
    std::istringstream lines(response);
    std::string line;
    bool first_line = true;
    while (std::getline(lines, line)) {
      if (std::regex_search(line, kLabelLine)) {
        if (auto label = extract_label(line, sample.task_kind)) final_label = label;
        continue;
      }
      if (first_line) line = std::regex_replace(line, kStepPrefix, "");
      if (step_text.tellp() > 0) step_text << "\n";
      step_text << line;
      first_line = false;
    }
    generated.push_back(trim(step_text.str()));
  }

  auto assemble = [&]() {
    std::ostringstream out;
    for (size_t i = 0; i < generated.size(); ++i)
      out << "Step " << (i + 1) << ": " << generated[i] << "\n";
    if (final_label) {
      if (sample.task_kind == TaskKind::fld_folio) {
        out << "Final Conclusion: __" << final_label->to_string() << "__\n";
      } else {
        out << "Answer: " << final_label->to_string() << "\n";
      }
    }
    return out.str();
  };

  // Up to two repair calls re-request only the final label line.
  for (int attempt = 0; attempt < 2 && !final_label; ++attempt) {
    CompletionRequest req;
    req.system = system_prompt();
    req.user = repair_prompt(assemble(), sample.task_kind);
    req.temperature = 0.0;
    req.tag = CallTag::repair;
    std::string response = backend.complete(req);
    if (auto label = extract_label(response, sample.task_kind)) final_label = label;
  }

  Trace out = parse_trace(assemble(), sample.task_kind);
  return out;
}

}  // namespace ctrace
