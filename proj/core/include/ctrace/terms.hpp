#pragma once

#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "ctrace/trace.hpp"

namespace ctrace {

struct TermStats {
  double mean_tf = 0.0;        // average normalized frequency over the K traces
  double reasoning_freq = 0.0; // fraction of traces containing the term
  double tf_irf = 0.0;
};

struct ConsensusTerms {
  std::set<std::string> t_step;            // tf_irf > alpha
  std::map<std::string, double> t_con;     // term -> weight (mean_tf)
};

struct TooFewTraces : std::runtime_error {
  TooFewTraces() : std::runtime_error("tf-irf needs at least 2 traces") {}
};

// Normalized term counts over a trace's alive steps.
std::map<std::string, double> term_frequency(const Trace& trace);

// Per-sample scores over the K traces: mean TF, appearance fraction, and
// mean_tf * ln(1 + 1/(reasoning_freq + 1)).
std::map<std::string, TermStats> tf_irf_scores(const std::vector<Trace>& traces);

ConsensusTerms extract_consensus(const std::map<std::string, TermStats>& stats,
                                 double alpha, double beta);

}  // namespace ctrace
