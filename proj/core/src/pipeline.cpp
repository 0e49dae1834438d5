#include "ctrace/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "ctrace/prompts.hpp"
#include "json.hpp"

namespace ctrace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

struct SampleError : std::runtime_error {
  SampleError(const std::string& id, const std::string& what)
      : std::runtime_error("sample " + id + ": " + what) {}
};

fs::path sample_dir(const RunOptions& options, const SampleRecord& sample) {
  return fs::path(options.out_dir) / sample.id;
}

std::vector<Trace> read_candidate_traces(const RunOptions& options,
                                         const SampleRecord& sample) {
  std::vector<Trace> traces;
  for (int k = 0; k < options.config.k; ++k) {
    fs::path path = sample_dir(options, sample) / "traces" /
                    ("trace_" + std::to_string(k) + ".txt");
    if (!fs::exists(path))
      throw SampleError(sample.id, "missing trace artifact " + path.string());
    Trace trace = parse_trace(read_file(path), sample.task_kind);
    trace.trace_index = k;
    for (auto& step : trace.steps) step.terms = tokenize(step.text, options.lexicons);
    traces.push_back(std::move(trace));
  }
  return traces;
}

// Module I / Pass 1-3 / Module III in memory, given already-generated traces.
SampleOutcome process_sample(const SampleRecord& sample, std::vector<Trace> traces,
                             const PipelineConfig& config, const Lexicons& lexicons,
                             LlmBackend& backend) {
  SampleOutcome outcome;
  outcome.sample = sample;
  outcome.candidates = std::move(traces);

  outcome.term_stats = tf_irf_scores(outcome.candidates);
  outcome.consensus_terms = extract_consensus(outcome.term_stats, config.alpha, config.beta);

  auto [zreport, pass1] =
      zscore_filter(outcome.candidates, outcome.consensus_terms, config.gamma);
  outcome.zscore_report = std::move(zreport);

  for (const auto& trace : outcome.candidates) {
    auto deps = extract_dependencies(trace, sample.facts, backend);
    outcome.rkgs.push_back(build_rkg(trace, sample.facts, deps, config.theta, lexicons));
  }
  outcome.alignment = align_nodes(outcome.rkgs, config.node_match_threshold);
  outcome.consensus =
      aggregate_consensus(outcome.rkgs, outcome.alignment, config.k, config.theta);
  outcome.filter_report =
      structural_filter(outcome.rkgs, outcome.candidates, outcome.alignment,
                        outcome.consensus, config.phi, pass1);

  SynthesisInput input;
  input.sample = &outcome.sample;
  input.graph = &outcome.consensus;
  input.candidates = &outcome.candidates;
  outcome.synthesized = synthesize(input, backend, config);
  return outcome;
}

std::string rkg_to_json_string(const Rkg& rkg) {
  ordered_json doc;
  doc["trace_index"] = rkg.trace_index;
  doc["nodes"] = ordered_json::array();
  for (const auto& node : rkg.nodes) {
    ordered_json j;
    j["local_id"] = node.local_id;
    j["kind"] = node.kind == NodeKind::fact ? "fact" : "step";
    j["ordinal"] = node.ordinal;
    j["text"] = node.text;
    j["terms"] = node.terms;
    doc["nodes"].push_back(std::move(j));
  }
  doc["edges"] = ordered_json::array();
  for (const auto& edge : rkg.edges) {
    ordered_json j;
    j["src"] = rkg.nodes[edge.src].local_id;
    j["dst"] = rkg.nodes[edge.dst].local_id;
    j["c_llm"] = edge.c_llm;
    j["fused_confidence"] = edge.fused_confidence;
    doc["edges"].push_back(std::move(j));
  }
  return doc.dump(2) + "\n";
}

std::string term_stats_to_json_string(const std::map<std::string, TermStats>& stats) {
  ordered_json doc = ordered_json::object();
  for (const auto& [term, s] : stats) {
    doc[term] = {{"mean_tf", s.mean_tf},
                 {"reasoning_freq", s.reasoning_freq},
                 {"tf_irf", s.tf_irf}};
  }
  return doc.dump(2) + "\n";
}

class Manifest {
 public:
  Manifest(const RunOptions& options) : path_(fs::path(options.out_dir) / "manifest.json") {
    if (fs::exists(path_)) {
      doc_ = ordered_json::parse(read_file(path_));
    } else {
      doc_ = ordered_json::object();
    }
    doc_["backend_mode"] = to_string(options.mode);
    doc_["dataset"] = options.dataset_path;
    doc_["config"] = ordered_json::parse(config_to_json_string(options.config));
    if (!doc_.contains("ledger")) doc_["ledger"] = ordered_json::object();
    if (!doc_.contains("samples")) doc_["samples"] = ordered_json::object();
    if (!doc_.contains("wall_clock_ms")) doc_["wall_clock_ms"] = 0;
  }

  void add_ledger(const std::map<std::string, int>& totals) {
    for (const auto& [tag, count] : totals) {
      int prev = doc_["ledger"].value(tag, 0);
      doc_["ledger"][tag] = prev + count;
    }
  }

  void add_artifact(const std::string& sample_id, const std::string& name,
                    const std::string& relative_path) {
    doc_["samples"][sample_id][name] = relative_path;
  }

  void set_wall_clock(std::int64_t ms) { doc_["wall_clock_ms"] = ms; }

  void save() {
    // Re-serialize with sorted sample keys for stable bytes.
    nlohmann::json sorted_samples = nlohmann::json::object();
    for (auto& [key, value] : doc_["samples"].items()) sorted_samples[key] = value;
    ordered_json out;
    out["backend_mode"] = doc_["backend_mode"];
    out["dataset"] = doc_["dataset"];
    out["config"] = doc_["config"];
    out["ledger"] = nlohmann::json(doc_["ledger"]);
    out["samples"] = sorted_samples;
    out["wall_clock_ms"] = doc_["wall_clock_ms"];
    write_file(path_, out.dump(2) + "\n");
  }

 private:
  fs::path path_;
  ordered_json doc_;
};

// Runs `work` over every sample with a bounded worker pool, surfacing the
// first failure in dataset order.
int for_each_sample(const RunOptions& options, const std::vector<SampleRecord>& samples,
                    const std::function<void(const SampleRecord&)>& work) {
  const int workers = std::max(1, std::min<int>(options.parallel, samples.size()));
  std::vector<std::exception_ptr> errors(samples.size());
  if (workers == 1) {
    for (size_t i = 0; i < samples.size(); ++i) {
      try {
        work(samples[i]);
      } catch (...) {
        errors[i] = std::current_exception();
        if (!options.continue_on_error) break;
      }
    }
  } else {
    std::atomic<size_t> next{0};
    std::atomic<bool> abort{false};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        while (true) {
          size_t i = next.fetch_add(1);
          if (i >= samples.size() || abort.load()) return;
          try {
            work(samples[i]);
          } catch (...) {
            errors[i] = std::current_exception();
            if (!options.continue_on_error) abort.store(true);
          }
        }
      });
    }
    for (auto& t : pool) t.join();
  }

  int failures = 0;
  for (size_t i = 0; i < samples.size(); ++i) {
    if (!errors[i]) continue;
    ++failures;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const std::exception& e) {
      std::cerr << "error: sample " << samples[i].id << ": " << e.what() << "\n";
    }
  }
  return failures == 0 ? 0 : 1;
}

struct StageSetup {
  std::vector<SampleRecord> samples;
  std::shared_ptr<LlmBackend> backend;
};

// Returns exit code 2 on config/dataset problems.
int prepare_stage(const RunOptions& options, bool needs_backend, StageSetup& setup) {
  try {
    options.config.validate();
    setup.samples = load_dataset(options.dataset_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  if (needs_backend) setup.backend = make_backend(options);
  return 0;
}

int finish_stage(const RunOptions& options, const StageSetup& setup, int code,
                 const std::function<void(Manifest&)>& extra = nullptr) {
  Manifest manifest(options);
  if (setup.backend) manifest.add_ledger(setup.backend->ledger().totals());
  if (extra) extra(manifest);
  manifest.save();
  return code;
}

}  // namespace

std::string to_string(BackendMode mode) {
  switch (mode) {
    case BackendMode::live: return "live";
    case BackendMode::record: return "record";
    case BackendMode::replay: return "replay";
  }
  return "replay";
}

std::string config_to_json_string(const PipelineConfig& config) {
  ordered_json doc;
  doc["k"] = config.k;
  doc["gen_temperature"] = config.gen_temperature;
  doc["alpha"] = config.alpha;
  doc["beta"] = config.beta;
  doc["gamma"] = config.gamma;
  doc["theta"] = config.theta;
  doc["phi"] = config.phi;
  doc["synth_temperature"] = config.synth_temperature;
  doc["mv_hint"] = config.mv_hint;
  doc["node_match_threshold"] = config.node_match_threshold;
  doc["seed"] = config.seed;
  return doc.dump(2) + "\n";
}

std::shared_ptr<LlmBackend> make_backend(const RunOptions& options) {
  switch (options.mode) {
    case BackendMode::replay:
      return std::make_shared<ReplayBackend>(options.fixture_dir);
    case BackendMode::record:
      return std::make_shared<RecordBackend>(std::make_shared<HttpBackend>(options.http),
                                             options.fixture_dir);
    case BackendMode::live:
      return std::make_shared<HttpBackend>(options.http);
  }
  return nullptr;
}

SampleOutcome run_sample(const SampleRecord& sample, const PipelineConfig& config,
                         const Lexicons& lexicons, LlmBackend& backend) {
  std::vector<Trace> traces;
  for (int k = 0; k < config.k; ++k) {
    CompletionRequest req;
    req.system = system_prompt();
    req.user = generation_prompt(sample);
    req.temperature = config.gen_temperature;
    req.tag = CallTag::generation;
    Trace trace = parse_trace(backend.complete(req), sample.task_kind);
    trace.trace_index = k;
    for (auto& step : trace.steps) step.terms = tokenize(step.text, lexicons);
    traces.push_back(std::move(trace));
  }
  return process_sample(sample, std::move(traces), config, lexicons, backend);
}

int cmd_generate(const RunOptions& options) {
  StageSetup setup;
  if (int rc = prepare_stage(options, true, setup)) return rc;
  int code = for_each_sample(options, setup.samples, [&](const SampleRecord& sample) {
    for (int k = 0; k < options.config.k; ++k) {
      CompletionRequest req;
      req.system = system_prompt();
      req.user = generation_prompt(sample);
      req.temperature = options.config.gen_temperature;
      req.tag = CallTag::generation;
      std::string response = setup.backend->complete(req);
      write_file(sample_dir(options, sample) / "traces" /
                     ("trace_" + std::to_string(k) + ".txt"),
                 response);
    }
  });
  return finish_stage(options, setup, code, [&](Manifest& m) {
    for (const auto& sample : setup.samples)
      m.add_artifact(sample.id, "traces", sample.id + "/traces");
  });
}

int cmd_terms(const RunOptions& options) {
  StageSetup setup;
  if (int rc = prepare_stage(options, false, setup)) return rc;
  int code = for_each_sample(options, setup.samples, [&](const SampleRecord& sample) {
    auto traces = read_candidate_traces(options, sample);
    auto stats = tf_irf_scores(traces);
    write_file(sample_dir(options, sample) / "terms.json", term_stats_to_json_string(stats));
  });
  return finish_stage(options, setup, code, [&](Manifest& m) {
    for (const auto& sample : setup.samples)
      m.add_artifact(sample.id, "terms", sample.id + "/terms.json");
  });
}

int cmd_graph(const RunOptions& options) {
  StageSetup setup;
  if (int rc = prepare_stage(options, true, setup)) return rc;
  int code = for_each_sample(options, setup.samples, [&](const SampleRecord& sample) {
    auto traces = read_candidate_traces(options, sample);
    auto stats = tf_irf_scores(traces);
    auto consensus_terms = extract_consensus(stats, options.config.alpha, options.config.beta);
    auto [zreport, pass1] = zscore_filter(traces, consensus_terms, options.config.gamma);
    (void)zreport;

    std::vector<Rkg> rkgs;
    for (const auto& trace : traces) {
      auto deps = extract_dependencies(trace, sample.facts, *setup.backend);
      rkgs.push_back(
          build_rkg(trace, sample.facts, deps, options.config.theta, options.lexicons));
    }
    auto alignment = align_nodes(rkgs, options.config.node_match_threshold);
    auto consensus =
        aggregate_consensus(rkgs, alignment, options.config.k, options.config.theta);
    auto report = structural_filter(rkgs, traces, alignment, consensus,
                                    options.config.phi, pass1);

    fs::path dir = sample_dir(options, sample);
    for (const auto& rkg : rkgs) {
      write_file(dir / "rkg" / ("rkg_" + std::to_string(rkg.trace_index) + ".json"),
                 rkg_to_json_string(rkg));
    }
    write_file(dir / "consensus.json", consensus_to_json_string(consensus));
    write_file(dir / "consensus.dot", consensus_to_dot(consensus));
    write_file(dir / "filter_report.json", filter_report_to_json_string(report));
  });
  return finish_stage(options, setup, code, [&](Manifest& m) {
    for (const auto& sample : setup.samples) {
      m.add_artifact(sample.id, "rkg", sample.id + "/rkg");
      m.add_artifact(sample.id, "consensus", sample.id + "/consensus.json");
      m.add_artifact(sample.id, "consensus_dot", sample.id + "/consensus.dot");
      m.add_artifact(sample.id, "filter_report", sample.id + "/filter_report.json");
    }
  });
}

int cmd_synthesize(const RunOptions& options) {
  StageSetup setup;
  if (int rc = prepare_stage(options, true, setup)) return rc;
  int code = for_each_sample(options, setup.samples, [&](const SampleRecord& sample) {
    fs::path dir = sample_dir(options, sample);
    if (!fs::exists(dir / "consensus.json"))
      throw SampleError(sample.id, "missing consensus.json (run the graph stage first)");
    auto candidates = read_candidate_traces(options, sample);
    auto consensus = consensus_from_json_string(read_file(dir / "consensus.json"));

    SynthesisInput input;
    input.sample = &sample;
    input.graph = &consensus;
    input.candidates = &candidates;
    Trace synthesized = synthesize(input, *setup.backend, options.config);
    write_file(dir / "synthesized.txt", synthesized.raw_text);
  });
  return finish_stage(options, setup, code, [&](Manifest& m) {
    for (const auto& sample : setup.samples)
      m.add_artifact(sample.id, "synthesized", sample.id + "/synthesized.txt");
  });
}

int cmd_eval(const RunOptions& options) {
  StageSetup setup;
  if (int rc = prepare_stage(options, true, setup)) return rc;

  std::vector<SampleResult> results(setup.samples.size());
  std::vector<const SampleRecord*> by_index;
  for (const auto& s : setup.samples) by_index.push_back(&s);

  int code = for_each_sample(options, setup.samples, [&](const SampleRecord& sample) {
    size_t index = 0;
    while (by_index[index]->id != sample.id) ++index;
    fs::path path = sample_dir(options, sample) / "synthesized.txt";
    if (!fs::exists(path))
      throw SampleError(sample.id, "missing synthesized.txt (run the synthesize stage first)");
    std::string text = read_file(path);

    SampleResult r;
    r.id = sample.id;
    r.gold = sample.gold_label;
    r.steps_in_output = parse_trace(text, sample.task_kind).alive_step_count();
    r.predicted = extract_label(text, sample.task_kind);
    if (!r.predicted) {
      r.predicted = judge_label(text, sample.task_kind, *setup.backend);
      r.judged = r.predicted.has_value();
    }
    results[index] = std::move(r);
  });
  if (code != 0) return finish_stage(options, setup, code);

  TaskKind kind = setup.samples.empty() ? TaskKind::fld_folio : setup.samples[0].task_kind;
  EvalResult eval = score(results, kind);
  std::ostringstream jsonl;
  for (const auto& r : eval.per_sample) jsonl << sample_result_to_jsonl_line(r) << "\n";
  write_file(fs::path(options.out_dir) / "eval.jsonl", jsonl.str());
  write_file(fs::path(options.out_dir) / "eval.json", eval_result_to_json_string(eval));
  write_file(fs::path(options.out_dir) / "eval_table.txt",
             eval_result_table(eval, "pipeline", kind));
  return finish_stage(options, setup, 0);
}

int cmd_stats(const RunOptions& options) {
  StageSetup setup;
  if (int rc = prepare_stage(options, false, setup)) return rc;
  std::vector<std::pair<std::string, FilterReport>> rows;
  FilterReport total;
  for (const auto& sample : setup.samples) {
    fs::path path = sample_dir(options, sample) / "filter_report.json";
    if (!fs::exists(path)) {
      std::cerr << "error: sample " << sample.id << ": missing filter_report.json\n";
      return 1;
    }
    FilterReport r = filter_report_from_json_string(read_file(path));
    total.original_steps += r.original_steps;
    total.pass1_removed += r.pass1_removed;
    total.pass23_removed += r.pass23_removed;
    total.isolated += r.isolated;
    total.forward_ref += r.forward_ref;
    total.low_consensus += r.low_consensus;
    rows.emplace_back(sample.id, std::move(r));
  }
  rows.emplace_back("TOTAL", total);
  std::string table = filter_report_table(rows);
  write_file(fs::path(options.out_dir) / "filter_stats.txt", table);
  std::cout << table;
  return finish_stage(options, setup, 0);
}

int cmd_run(const RunOptions& options) {
  auto start = std::chrono::steady_clock::now();
  for (auto stage : {cmd_generate, cmd_terms, cmd_graph, cmd_synthesize, cmd_eval}) {
    if (int rc = stage(options)) return rc;
  }
  if (options.mode != BackendMode::replay) {
    auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                  std::chrono::steady_clock::now() - start)
                  .count();
    Manifest manifest(options);
    manifest.set_wall_clock(ms);
    manifest.save();
  }
  return 0;
}

}  // namespace ctrace
