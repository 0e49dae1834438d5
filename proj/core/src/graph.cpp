#include "ctrace/graph.hpp"

#include <algorithm>
#include <cstdio>
#include <regex>
#include <sstream>

#include "ctrace/backend.hpp"
#include "ctrace/prompts.hpp"
#include "json.hpp"

namespace ctrace {

using ordered_json = nlohmann::ordered_json;

const RkgNode* Rkg::find(const std::string& local_id) const {
  for (const auto& n : nodes)
    if (n.local_id == local_id) return &n;
  return nullptr;
}

const ConsensusNode* ConsensusGraph::find(const std::string& canonical_id) const {
  for (const auto& n : nodes)
    if (n.canonical_id == canonical_id) return &n;
  return nullptr;
}

std::pair<ZScoreReport, Pass1Stats> zscore_filter(std::vector<Trace>& traces,
                                                  const ConsensusTerms& t_con,
                                                  double gamma) {
  Pass1Stats stats;
  std::vector<std::pair<int, int>> pooled;  // (trace index, step index)
  std::vector<double> sims;
  for (size_t t = 0; t < traces.size(); ++t) {
    int original = 0;
    for (size_t s = 0; s < traces[t].steps.size(); ++s) {
      if (!traces[t].steps[s].alive()) continue;
      ++original;
      pooled.emplace_back(static_cast<int>(t), static_cast<int>(s));
      sims.push_back(weighted_jaccard(term_keys(traces[t].steps[s].terms), t_con.t_con));
    }
    stats.per_trace.emplace_back(original, 0);
    stats.original_steps += original;
  }

  ZScoreReport report;
  if (pooled.empty()) return {report, stats};
  report = group_zscores(sims);

  for (size_t i = 0; i < pooled.size(); ++i) {
    auto [t, s] = pooled[i];
    Step& step = traces[t].steps[s];
    report.per_step_scores[i].step_ordinal = step.ordinal;
    step.z_score = report.per_step_scores[i].z;
    // An empty consensus set offers no evidence, so nothing is removed.
    if (!t_con.t_con.empty() && report.per_step_scores[i].z < gamma) {
      step.removed_by = RemovalReason::zscore;
      ++stats.removed;
      ++stats.per_trace[t].second;
    }
  }
  return {report, stats};
}

namespace {

// Accepts the exact schema plus a JSON object embedded in surrounding prose.
std::optional<std::vector<DependencyRecord>> parse_dependency_json(const std::string& response) {
  std::string body = response;
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception&) {
    size_t open = body.find('{');
    size_t close = body.rfind('}');
    if (open == std::string::npos || close == std::string::npos || close <= open)
      return std::nullopt;
    try {
      doc = nlohmann::json::parse(body.substr(open, close - open + 1));
    } catch (const nlohmann::json::exception&) {
      return std::nullopt;
    }
  }
  if (!doc.is_object() || !doc.contains("dependencies") || !doc["dependencies"].is_array())
    return std::nullopt;
  std::vector<DependencyRecord> deps;
  for (const auto& entry : doc["dependencies"]) {
    if (!entry.is_object() || !entry.contains("step_id") || !entry.contains("uses"))
      return std::nullopt;
    if (!entry["step_id"].is_string() || !entry["uses"].is_array()) return std::nullopt;
    DependencyRecord rec;
    rec.step_id = entry["step_id"].get<std::string>();
    rec.c_llm = 0.9;
    for (const auto& use : entry["uses"]) {
      if (!use.is_string()) return std::nullopt;
      std::string u = use.get<std::string>();
      if (u == rec.step_id) continue;  // self-loops forbidden
      rec.uses.push_back(u);
    }
    deps.push_back(std::move(rec));
  }
  return deps;
}

}  // namespace

std::vector<DependencyRecord> extract_dependencies(const Trace& trace,
                                                   const std::vector<std::string>& facts,
                                                   LlmBackend& backend) {
  CompletionRequest req;
  req.system = system_prompt();
  req.user = extraction_prompt(facts, trace);
  req.temperature = 0.0;
  req.tag = CallTag::extraction;
  try {
    std::string response = backend.complete(req);
    if (auto deps = parse_dependency_json(response)) return *deps;
  } catch (const BackendError&) {
    // fall through to the regex path
  }
  return extract_dependencies_regex(trace, facts);
}

std::vector<DependencyRecord> extract_dependencies_regex(const Trace& trace,
                                                         const std::vector<std::string>& facts) {
  static const std::regex mention(R"((fact|step)\s*(\d+))", std::regex::icase);
  std::vector<DependencyRecord> deps;
  int position = 0;
  for (const auto& step : trace.steps) {
    if (!step.alive()) continue;
    ++position;
    DependencyRecord rec;
    rec.step_id = "Step" + std::to_string(position);
    rec.c_llm = 0.6;
    std::set<std::string> seen;
    for (auto it = std::sregex_iterator(step.text.begin(), step.text.end(), mention);
         it != std::sregex_iterator(); ++it) {
      std::string kind = (*it)[1].str();
      int num = std::stoi((*it)[2].str());
      std::string id;
      if (kind[0] == 'f' || kind[0] == 'F') {
        if (num < 1 || num > static_cast<int>(facts.size())) continue;
        id = "Fact" + std::to_string(num);
      } else {
        if (num < 1 || num >= position) continue;  // earlier steps only
        id = "Step" + std::to_string(num);
      }
      if (seen.insert(id).second) rec.uses.push_back(id);
    }
    deps.push_back(std::move(rec));
  }
  return deps;
}

Rkg build_rkg(const Trace& trace, const std::vector<std::string>& facts,
              const std::vector<DependencyRecord>& deps, double theta,
              const Lexicons& lexicons) {
  Rkg rkg;
  rkg.trace_index = trace.trace_index;
  for (size_t i = 0; i < facts.size(); ++i) {
    RkgNode node;
    node.kind = NodeKind::fact;
    node.source_trace = trace.trace_index;
    node.ordinal = static_cast<int>(i + 1);
    node.local_id = "Fact" + std::to_string(i + 1);
    node.text = facts[i];
    node.terms = term_keys(tokenize(facts[i], lexicons));
    rkg.nodes.push_back(std::move(node));
  }
  int position = 0;
  for (size_t s = 0; s < trace.steps.size(); ++s) {
    const Step& step = trace.steps[s];
    if (!step.alive()) continue;
    ++position;
    RkgNode node;
    node.kind = NodeKind::step;
    node.source_trace = trace.trace_index;
    node.ordinal = position;
    node.trace_step_index = static_cast<int>(s);
    node.local_id = "Step" + std::to_string(position);
    node.text = step.text;
    node.terms = term_keys(step.terms);
    rkg.nodes.push_back(std::move(node));
  }

  std::map<std::string, int> index;
  for (size_t i = 0; i < rkg.nodes.size(); ++i) index[rkg.nodes[i].local_id] = static_cast<int>(i);

  std::set<std::pair<int, int>> seen;
  for (const auto& rec : deps) {
    auto dst_it = index.find(rec.step_id);
    if (dst_it == index.end()) {
      ++rkg.dropped_dangling;
      continue;
    }
    for (const auto& use : rec.uses) {
      auto src_it = index.find(use);
      if (src_it == index.end()) {
        ++rkg.dropped_dangling;
        continue;
      }
      if (src_it->second == dst_it->second) continue;
      RkgEdge edge;
      edge.src = src_it->second;
      edge.dst = dst_it->second;
      edge.c_llm = rec.c_llm;
      edge.fused_confidence =
          0.7 * rec.c_llm + 0.3 * jaccard(rkg.nodes[edge.src].terms, rkg.nodes[edge.dst].terms);
      if (edge.fused_confidence < theta) {
        ++rkg.dropped_low_confidence;
        continue;
      }
      if (!seen.insert({edge.src, edge.dst}).second) continue;
      rkg.edges.push_back(edge);
    }
  }
  return rkg;
}

namespace {

struct CanonicalDraft {
  ConsensusNode node;
  std::vector<std::set<std::string>> member_terms;
  std::vector<std::string> member_texts;
};

std::string medoid_text(const CanonicalDraft& draft) {
  const size_t n = draft.member_terms.size();
  if (n == 1) return draft.member_texts[0];
  double best_score = -1.0;
  size_t best = 0;
  for (size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      sum += jaccard(draft.member_terms[i], draft.member_terms[j]);
    }
    double mean = sum / static_cast<double>(n - 1);
    // Ties go to the earliest member; members are appended in (trace, ordinal)
    // order, so strict improvement keeps the first.
    if (mean > best_score + 1e-12) {
      best_score = mean;
      best = i;
    }
  }
  return draft.member_texts[best];
}

}  // namespace

NodeAlignment align_nodes(const std::vector<Rkg>& rkgs, double match_threshold) {
  NodeAlignment out;
  std::vector<CanonicalDraft> drafts;
  std::map<std::string, size_t> fact_index;  // "Fact<i>" -> draft index

  int founding = 0;
  for (const auto& rkg : rkgs) {
    for (const auto& node : rkg.nodes) {
      if (node.kind != NodeKind::fact) continue;
      auto it = fact_index.find(node.local_id);
      size_t idx;
      if (it == fact_index.end()) {
        CanonicalDraft draft;
        draft.node.canonical_id = node.local_id;  // facts align by index
        draft.node.kind = NodeKind::fact;
        draft.node.founding_index = founding++;
        idx = drafts.size();
        fact_index[node.local_id] = idx;
        drafts.push_back(std::move(draft));
      } else {
        idx = it->second;
      }
      drafts[idx].node.members.emplace_back(rkg.trace_index, node.ordinal);
      drafts[idx].node.term_hints.insert(node.terms.begin(), node.terms.end());
      drafts[idx].member_terms.push_back(node.terms);
      drafts[idx].member_texts.push_back(node.text);
      out.canonical[{rkg.trace_index, node.local_id}] = drafts[idx].node.canonical_id;
    }
  }

  int step_counter = 0;
  for (const auto& rkg : rkgs) {
    for (const auto& node : rkg.nodes) {
      if (node.kind != NodeKind::step) continue;
      double best_score = -1.0;
      size_t best = drafts.size();
      for (size_t i = 0; i < drafts.size(); ++i) {
        if (drafts[i].node.kind != NodeKind::step) continue;
        double score = 0.0;
        for (const auto& member : drafts[i].member_terms)
          score = std::max(score, jaccard(node.terms, member));
        // strict > keeps the lowest canonical id on ties
        if (score >= match_threshold && score > best_score) {
          best_score = score;
          best = i;
        }
      }
      if (best == drafts.size()) {
        CanonicalDraft draft;
        draft.node.canonical_id = "Node" + std::to_string(++step_counter);
        draft.node.kind = NodeKind::step;
        draft.node.founding_index = founding++;
        best = drafts.size();
        drafts.push_back(std::move(draft));
      }
      drafts[best].node.members.emplace_back(rkg.trace_index, node.ordinal);
      drafts[best].node.term_hints.insert(node.terms.begin(), node.terms.end());
      drafts[best].member_terms.push_back(node.terms);
      drafts[best].member_texts.push_back(node.text);
      out.canonical[{rkg.trace_index, node.local_id}] = drafts[best].node.canonical_id;
    }
  }

  for (auto& draft : drafts) {
    draft.node.consensus_text = medoid_text(draft);
    out.nodes.push_back(std::move(draft.node));
  }
  return out;
}

ConsensusGraph aggregate_consensus(const std::vector<Rkg>& rkgs,
                                   const NodeAlignment& alignment, int k,
                                   double theta) {
  std::map<std::pair<std::string, std::string>, int> freq;
  for (const auto& rkg : rkgs) {
    std::set<std::pair<std::string, std::string>> in_trace;  // one count per trace
    for (const auto& edge : rkg.edges) {
      const std::string& src = alignment.canonical.at({rkg.trace_index, rkg.nodes[edge.src].local_id});
      const std::string& dst = alignment.canonical.at({rkg.trace_index, rkg.nodes[edge.dst].local_id});
      if (src == dst) continue;  // collapsed to a self-loop by alignment
      in_trace.insert({src, dst});
    }
    for (const auto& e : in_trace) ++freq[e];
  }

  ConsensusGraph g;
  g.k = k;
  std::set<std::string> endpoints;
  for (const auto& [pair, count] : freq) {
    double fraction = static_cast<double>(count) / static_cast<double>(k);
    if (fraction >= theta) {
      g.edges.push_back({pair.first, pair.second, count, fraction});
      endpoints.insert(pair.first);
      endpoints.insert(pair.second);
    }
  }
  for (const auto& node : alignment.nodes) {
    if (endpoints.count(node.canonical_id)) g.nodes.push_back(node);
  }
  std::sort(g.nodes.begin(), g.nodes.end(),
            [](const ConsensusNode& a, const ConsensusNode& b) {
              return a.founding_index < b.founding_index;
            });
  std::sort(g.edges.begin(), g.edges.end(), [](const ConsensusEdge& a, const ConsensusEdge& b) {
    return std::tie(a.src, a.dst) < std::tie(b.src, b.dst);
  });
  return g;
}

FilterReport structural_filter(std::vector<Rkg>& rkgs, std::vector<Trace>& traces,
                               const NodeAlignment& alignment,
                               const ConsensusGraph& consensus, double phi,
                               const Pass1Stats& pass1) {
  FilterReport report;
  report.original_steps = pass1.original_steps;
  report.pass1_removed = pass1.removed;
  for (const auto& [original, removed] : pass1.per_trace) {
    TraceFilterCounts counts;
    counts.original = original;
    counts.pass1 = removed;
    report.per_trace.push_back(counts);
  }

  std::map<std::pair<std::string, std::string>, double> consensus_fraction;
  for (const auto& edge : consensus.edges)
    consensus_fraction[{edge.src, edge.dst}] = edge.freq_fraction;

  for (auto& rkg : rkgs) {
    const size_t n = rkg.nodes.size();
    std::vector<int> in_deg(n, 0), out_deg(n, 0);
    for (const auto& e : rkg.edges) {
      ++out_deg[e.src];
      ++in_deg[e.dst];
    }

    // All categories are decided against the pre-pass graph; first match wins.
    std::vector<std::optional<RemovalReason>> verdict(n);
    for (size_t i = 0; i < n; ++i) {
      const RkgNode& node = rkg.nodes[i];
      if (node.kind != NodeKind::step) continue;
      if (in_deg[i] == 0 && out_deg[i] == 0) {
        verdict[i] = RemovalReason::isolated;
        continue;
      }
      bool forward = false;
      for (const auto& e : rkg.edges) {
        if (e.dst != static_cast<int>(i)) continue;
        const RkgNode& used = rkg.nodes[e.src];
        if (used.kind == NodeKind::step && used.ordinal > node.ordinal) {
          forward = true;  // this step cites a later step
          break;
        }
      }
      if (forward) {
        verdict[i] = RemovalReason::forward_ref;
        continue;
      }
      bool supported = false;
      for (const auto& e : rkg.edges) {
        if (e.src != static_cast<int>(i) && e.dst != static_cast<int>(i)) continue;
        const std::string& src = alignment.canonical.at({rkg.trace_index, rkg.nodes[e.src].local_id});
        const std::string& dst = alignment.canonical.at({rkg.trace_index, rkg.nodes[e.dst].local_id});
        auto it = consensus_fraction.find({src, dst});
        if (it != consensus_fraction.end() && it->second >= phi) {
          supported = true;
          break;
        }
      }
      if (!supported) verdict[i] = RemovalReason::low_consensus;
    }

    TraceFilterCounts* counts =
        rkg.trace_index < static_cast<int>(report.per_trace.size())
            ? &report.per_trace[rkg.trace_index]
            : nullptr;
    for (size_t i = 0; i < n; ++i) {
      if (!verdict[i]) continue;
      const RkgNode& node = rkg.nodes[i];
      switch (*verdict[i]) {
        case RemovalReason::isolated:
          ++report.isolated;
          if (counts) ++counts->isolated;
          break;
        case RemovalReason::forward_ref:
          ++report.forward_ref;
          if (counts) ++counts->forward_ref;
          break;
        case RemovalReason::low_consensus:
          ++report.low_consensus;
          if (counts) ++counts->low_consensus;
          break;
        default:
          break;
      }
      ++report.pass23_removed;
      if (node.trace_step_index >= 0 &&
          rkg.trace_index < static_cast<int>(traces.size())) {
        traces[rkg.trace_index].steps[node.trace_step_index].removed_by = *verdict[i];
      }
    }

    // Prune the marked nodes and their incident edges.
    std::vector<int> remap(n, -1);
    std::vector<RkgNode> kept;
    for (size_t i = 0; i < n; ++i) {
      if (verdict[i]) continue;
      remap[i] = static_cast<int>(kept.size());
      kept.push_back(rkg.nodes[i]);
    }
    std::vector<RkgEdge> kept_edges;
    for (const auto& e : rkg.edges) {
      if (remap[e.src] < 0 || remap[e.dst] < 0) continue;
      RkgEdge copy = e;
      copy.src = remap[e.src];
      copy.dst = remap[e.dst];
      kept_edges.push_back(copy);
    }
    rkg.nodes = std::move(kept);
    rkg.edges = std::move(kept_edges);
  }
  return report;
}

std::string consensus_to_dot(const ConsensusGraph& g) {
  std::ostringstream out;
  out << "digraph consensus {\n";
  for (const auto& node : g.nodes) {
    out << "  \"" << node.canonical_id << "\" [shape="
        << (node.kind == NodeKind::fact ? "box" : "ellipse") << "];\n";
  }
  for (const auto& edge : g.edges) {
    out << "  \"" << edge.src << "\" -> \"" << edge.dst << "\" [label=\"" << edge.freq
        << "\"];\n";
  }
  out << "}\n";
  return out.str();
}

std::string consensus_to_json_string(const ConsensusGraph& g) {
  ordered_json doc;
  doc["k"] = g.k;
  doc["nodes"] = ordered_json::array();
  for (const auto& node : g.nodes) {
    ordered_json j;
    j["canonical_id"] = node.canonical_id;
    j["kind"] = node.kind == NodeKind::fact ? "fact" : "step";
    j["members"] = node.members;
    j["consensus_text"] = node.consensus_text;
    j["term_hints"] = node.term_hints;
    j["founding_index"] = node.founding_index;
    doc["nodes"].push_back(std::move(j));
  }
  doc["edges"] = ordered_json::array();
  for (const auto& edge : g.edges) {
    ordered_json j;
    j["src"] = edge.src;
    j["dst"] = edge.dst;
    j["freq"] = edge.freq;
    j["freq_fraction"] = edge.freq_fraction;
    doc["edges"].push_back(std::move(j));
  }
  return doc.dump(2) + "\n";
}

ConsensusGraph consensus_from_json_string(const std::string& text) {
  auto doc = nlohmann::json::parse(text);
  ConsensusGraph g;
  g.k = doc.at("k").get<int>();
  for (const auto& j : doc.at("nodes")) {
    ConsensusNode node;
    node.canonical_id = j.at("canonical_id").get<std::string>();
    node.kind = j.at("kind").get<std::string>() == "fact" ? NodeKind::fact : NodeKind::step;
    node.members = j.at("members").get<std::vector<std::pair<int, int>>>();
    node.consensus_text = j.at("consensus_text").get<std::string>();
    for (const auto& t : j.at("term_hints")) node.term_hints.insert(t.get<std::string>());
    node.founding_index = j.at("founding_index").get<int>();
    g.nodes.push_back(std::move(node));
  }
  for (const auto& j : doc.at("edges")) {
    ConsensusEdge edge;
    edge.src = j.at("src").get<std::string>();
    edge.dst = j.at("dst").get<std::string>();
    edge.freq = j.at("freq").get<int>();
    edge.freq_fraction = j.at("freq_fraction").get<double>();
    g.edges.push_back(std::move(edge));
  }
  return g;
}

std::string filter_report_to_json_string(const FilterReport& report) {
  ordered_json doc;
  doc["original_steps"] = report.original_steps;
  doc["pass1_removed"] = report.pass1_removed;
  doc["pass23_removed"] = report.pass23_removed;
  doc["by_anomaly"] = {{"isolated", report.isolated},
                       {"forward_ref", report.forward_ref},
                       {"low_consensus", report.low_consensus}};
  doc["per_trace"] = ordered_json::array();
  for (const auto& t : report.per_trace) {
    ordered_json j;
    j["original"] = t.original;
    j["pass1"] = t.pass1;
    j["isolated"] = t.isolated;
    j["forward_ref"] = t.forward_ref;
    j["low_consensus"] = t.low_consensus;
    doc["per_trace"].push_back(std::move(j));
  }
  return doc.dump(2) + "\n";
}

FilterReport filter_report_from_json_string(const std::string& text) {
  auto doc = nlohmann::json::parse(text);
  FilterReport report;
  report.original_steps = doc.at("original_steps").get<int>();
  report.pass1_removed = doc.at("pass1_removed").get<int>();
  report.pass23_removed = doc.at("pass23_removed").get<int>();
  report.isolated = doc.at("by_anomaly").at("isolated").get<int>();
  report.forward_ref = doc.at("by_anomaly").at("forward_ref").get<int>();
  report.low_consensus = doc.at("by_anomaly").at("low_consensus").get<int>();
  for (const auto& j : doc.at("per_trace")) {
    TraceFilterCounts t;
    t.original = j.at("original").get<int>();
    t.pass1 = j.at("pass1").get<int>();
    t.isolated = j.at("isolated").get<int>();
    t.forward_ref = j.at("forward_ref").get<int>();
    t.low_consensus = j.at("low_consensus").get<int>();
    report.per_trace.push_back(t);
  }
  return report;
}

namespace {

std::string pct(double num, double den) {
  char buf[32];
  double value = den > 0 ? 100.0 * num / den : 0.0;
  std::snprintf(buf, sizeof(buf), "%.1f", value);
  return buf;
}

std::string whole_pct(int num, int den) {
  char buf[32];
  double value = den > 0 ? 100.0 * num / den : 0.0;
  std::snprintf(buf, sizeof(buf), "%d (%.0f%%)", num, value);
  return buf;
}

}  // namespace

std::string filter_report_table(const std::vector<std::pair<std::string, FilterReport>>& rows) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-20s %9s %9s %7s %9s %7s\n", "Sample", "Original",
                "P1 Del", "P1 %", "P2 Del", "P2 %");
  out << line;
  for (const auto& [label, r] : rows) {
    int remaining = r.original_steps - r.pass1_removed;
    std::snprintf(line, sizeof(line), "%-20s %9d %9d %7s %9d %7s\n", label.c_str(),
                  r.original_steps, r.pass1_removed,
                  pct(r.pass1_removed, r.original_steps).c_str(), r.pass23_removed,
                  pct(r.pass23_removed, remaining).c_str());
    out << line;
  }
  out << "\n";
  std::snprintf(line, sizeof(line), "%-20s %9s %12s %12s %12s\n", "Sample", "P2 Del",
                "Isolated", "Fwd Ref", "Low Cons.");
  out << line;
  for (const auto& [label, r] : rows) {
    std::snprintf(line, sizeof(line), "%-20s %9d %12s %12s %12s\n", label.c_str(),
                  r.pass23_removed, whole_pct(r.isolated, r.pass23_removed).c_str(),
                  whole_pct(r.forward_ref, r.pass23_removed).c_str(),
                  whole_pct(r.low_consensus, r.pass23_removed).c_str());
    out << line;
  }
  return out.str();
}

}  // namespace ctrace
