#include "ctrace/terms.hpp"

#include <cmath>

namespace ctrace {

std::map<std::string, double> term_frequency(const Trace& trace) {
  std::map<std::string, int> counts;
  long total = 0;
  for (const auto& step : trace.steps) {
    if (!step.alive()) continue;
    for (const auto& [term, count] : step.terms) {
      counts[term] += count;
      total += count;
    }
  }
  std::map<std::string, double> tf;
  if (total == 0) return tf;
  for (const auto& [term, count] : counts)
    tf[term] = static_cast<double>(count) / static_cast<double>(total);
  return tf;
}

std::map<std::string, TermStats> tf_irf_scores(const std::vector<Trace>& traces) {
  if (traces.size() < 2) throw TooFewTraces();
  const double k = static_cast<double>(traces.size());

  std::map<std::string, TermStats> stats;
  for (const auto& trace : traces) {
    for (const auto& [term, tf] : term_frequency(trace)) {
      auto& s = stats[term];
      s.mean_tf += tf;
      s.reasoning_freq += 1.0;
    }
  }
  for (auto& [term, s] : stats) {
    s.mean_tf /= k;
    s.reasoning_freq /= k;
    s.tf_irf = s.mean_tf * std::log(1.0 + 1.0 / (s.reasoning_freq + 1.0));
  }
  return stats;
}

ConsensusTerms extract_consensus(const std::map<std::string, TermStats>& stats,
                                 double alpha, double beta) {
  ConsensusTerms out;
  for (const auto& [term, s] : stats) {
    if (s.tf_irf > alpha) {
      out.t_step.insert(term);
      if (s.reasoning_freq >= beta) out.t_con[term] = s.mean_tf;
    }
  }
  return out;
}

}  // namespace ctrace
