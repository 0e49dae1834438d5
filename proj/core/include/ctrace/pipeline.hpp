#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ctrace/backend.hpp"
#include "ctrace/eval.hpp"
#include "ctrace/graph.hpp"
#include "ctrace/synth.hpp"
#include "ctrace/terms.hpp"
#include "ctrace/text.hpp"
#include "ctrace/trace.hpp"

namespace ctrace {

enum class BackendMode { live, record, replay };

std::string to_string(BackendMode mode);

struct RunOptions {
  PipelineConfig config;
  std::string dataset_path;
  std::string out_dir;
  BackendMode mode = BackendMode::replay;
  std::string fixture_dir;
  HttpBackendOptions http;
  Lexicons lexicons = Lexicons::builtin();
  int parallel = 1;
  bool continue_on_error = false;
};

// Everything one sample produces on the way to its synthesized trace.
struct SampleOutcome {
  SampleRecord sample;
  std::vector<Trace> candidates;
  std::map<std::string, TermStats> term_stats;
  ConsensusTerms consensus_terms;
  ZScoreReport zscore_report;
  std::vector<Rkg> rkgs;
  NodeAlignment alignment;
  ConsensusGraph consensus;
  FilterReport filter_report;
  Trace synthesized;
};

// Runs Modules I-III for one sample against the given backend.
SampleOutcome run_sample(const SampleRecord& sample, const PipelineConfig& config,
                         const Lexicons& lexicons, LlmBackend& backend);

std::shared_ptr<LlmBackend> make_backend(const RunOptions& options);

// Stage entry points; each reads earlier artifacts from out_dir and writes its
// own. cmd_run chains generate -> terms -> graph -> synthesize -> eval.
// Exit codes: 0 ok, 1 sample-level failure, 2 config/dataset error.
int cmd_run(const RunOptions& options);
int cmd_generate(const RunOptions& options);
int cmd_terms(const RunOptions& options);
int cmd_graph(const RunOptions& options);
int cmd_synthesize(const RunOptions& options);
int cmd_eval(const RunOptions& options);
int cmd_stats(const RunOptions& options);

std::string config_to_json_string(const PipelineConfig& config);

}  // namespace ctrace
