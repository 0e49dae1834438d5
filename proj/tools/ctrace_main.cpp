// Command-line front end for the trace consensus pipeline.

#include <cstdlib>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "ctrace/pipeline.hpp"
#include "json.hpp"

namespace {

using ctrace::RunOptions;

struct FlagState {
  std::string config_file;
  std::string backend = "replay";
  std::string stopwords_file, common_words_file, keywords_file, emotional_file;
  bool print_config = false;
};

void apply_config_file(ctrace::PipelineConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CLI::ValidationError("--config", "cannot open " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw CLI::ValidationError("--config", std::string("bad JSON: ") + e.what());
  }
  if (doc.contains("k")) config.k = doc["k"].get<int>();
  if (doc.contains("gen_temperature")) config.gen_temperature = doc["gen_temperature"].get<double>();
  if (doc.contains("alpha")) config.alpha = doc["alpha"].get<double>();
  if (doc.contains("beta")) config.beta = doc["beta"].get<double>();
  if (doc.contains("gamma")) config.gamma = doc["gamma"].get<double>();
  if (doc.contains("theta")) config.theta = doc["theta"].get<double>();
  if (doc.contains("phi")) config.phi = doc["phi"].get<double>();
  if (doc.contains("synth_temperature")) config.synth_temperature = doc["synth_temperature"].get<double>();
  if (doc.contains("mv_hint")) config.mv_hint = doc["mv_hint"].get<bool>();
  if (doc.contains("node_match_threshold")) config.node_match_threshold = doc["node_match_threshold"].get<double>();
  if (doc.contains("seed")) config.seed = doc["seed"].get<std::int64_t>();
}

void add_common_flags(CLI::App* cmd, RunOptions& options, FlagState& flags,
                      bool needs_dataset = true) {
  auto* dataset = cmd->add_option("--dataset", options.dataset_path, "JSONL dataset file");
  if (needs_dataset) dataset->required();
  cmd->add_option("--out", options.out_dir, "Output directory")->required();
  cmd->add_option("--config", flags.config_file, "JSON config file (flags override it)");
  cmd->add_option("--backend", flags.backend, "Backend mode: live, record, replay")
      ->check(CLI::IsMember({"live", "record", "replay"}));
  cmd->add_option("--fixtures", options.fixture_dir, "Fixture directory for record/replay");
  cmd->add_option("--base-url", options.http.base_url, "Chat-completions base URL");
  cmd->add_option("--model", options.http.model, "Model name for live calls");

  // Hyperparameter overrides; CLI11 only applies these when given, so
  // precedence is defaults < config file < flags.
  cmd->add_option("--k", options.config.k, "Candidate traces per problem");
  cmd->add_option("--temperature", options.config.gen_temperature, "Generation temperature");
  cmd->add_option("--alpha", options.config.alpha, "TF-IRF threshold");
  cmd->add_option("--beta", options.config.beta, "Consensus-term frequency threshold");
  cmd->add_option("--gamma", options.config.gamma, "Z-score removal threshold");
  cmd->add_option("--theta", options.config.theta, "Edge confidence / consensus threshold");
  cmd->add_option("--phi", options.config.phi, "Low-consensus support threshold");
  cmd->add_option("--synth-temperature", options.config.synth_temperature,
                  "Synthesis temperature");
  cmd->add_option("--match-threshold", options.config.node_match_threshold,
                  "Node alignment Jaccard threshold");
  cmd->add_flag("--mv-hint,!--no-mv-hint", options.config.mv_hint,
                "Include the majority-vote hint in the final synthesis step");
  cmd->add_option("--seed", options.config.seed, "Random seed recorded in the manifest");

  cmd->add_option("--parallel", options.parallel, "Worker threads over samples")
      ->check(CLI::PositiveNumber);
  cmd->add_flag("--continue-on-error", options.continue_on_error,
                "Keep processing remaining samples after a failure");
  cmd->add_flag("--print-config", flags.print_config,
                "Print the effective config as JSON and exit");

  cmd->add_option("--stopwords", flags.stopwords_file, "Replace the stopword list");
  cmd->add_option("--common-words", flags.common_words_file,
                  "Replace the common logical word list");
  cmd->add_option("--logical-keywords", flags.keywords_file,
                  "Replace the logical keyword list");
  cmd->add_option("--emotional-words", flags.emotional_file,
                  "Replace the emotional word list");
}

int finalize_options(CLI::App* cmd, RunOptions& options, FlagState& flags,
                     bool needs_backend) {
  if (!flags.config_file.empty()) {
    // Re-apply flag values on top of the config file.
    ctrace::PipelineConfig from_file;
    apply_config_file(from_file, flags.config_file);
    ctrace::PipelineConfig merged = from_file;
    if (cmd->count("--k")) merged.k = options.config.k;
    if (cmd->count("--temperature")) merged.gen_temperature = options.config.gen_temperature;
    if (cmd->count("--alpha")) merged.alpha = options.config.alpha;
    if (cmd->count("--beta")) merged.beta = options.config.beta;
    if (cmd->count("--gamma")) merged.gamma = options.config.gamma;
    if (cmd->count("--theta")) merged.theta = options.config.theta;
    if (cmd->count("--phi")) merged.phi = options.config.phi;
    if (cmd->count("--synth-temperature"))
      merged.synth_temperature = options.config.synth_temperature;
    if (cmd->count("--match-threshold"))
      merged.node_match_threshold = options.config.node_match_threshold;
    if (cmd->count("--mv-hint") || cmd->count("--no-mv-hint"))
      merged.mv_hint = options.config.mv_hint;
    if (cmd->count("--seed")) merged.seed = options.config.seed;
    options.config = merged;
  }

  if (flags.backend == "live") options.mode = ctrace::BackendMode::live;
  if (flags.backend == "record") options.mode = ctrace::BackendMode::record;
  if (flags.backend == "replay") options.mode = ctrace::BackendMode::replay;
  if (const char* key = std::getenv("CTRACE_API_KEY")) options.http.api_key = key;

  try {
    ctrace::Lexicons lex = options.lexicons;
    if (!flags.stopwords_file.empty())
      lex.stopwords = ctrace::load_term_list(flags.stopwords_file);
    if (!flags.common_words_file.empty())
      lex.common_logical_words = ctrace::load_term_list(flags.common_words_file);
    if (!flags.keywords_file.empty())
      lex.logical_keywords = ctrace::load_term_list(flags.keywords_file);
    if (!flags.emotional_file.empty())
      lex.emotional_words = ctrace::load_term_list(flags.emotional_file);
    options.lexicons = lex;
    options.config.validate();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  if (needs_backend) {
    if (options.mode != ctrace::BackendMode::live && options.fixture_dir.empty()) {
      std::cerr << "error: --fixtures is required for record/replay backends\n";
      return 2;
    }
    if (options.mode != ctrace::BackendMode::replay && options.http.base_url.empty()) {
      std::cerr << "error: --base-url is required for live/record backends\n";
      return 2;
    }
  }

  if (flags.print_config) {
    std::cout << ctrace::config_to_json_string(options.config);
    return -1;  // handled: exit 0 without running
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Consensus-filtered reasoning trace pipeline"};
  app.require_subcommand(1);

  struct Sub {
    CLI::App* cmd;
    RunOptions options;
    FlagState flags;
    int (*entry)(const RunOptions&);
    bool needs_backend;
  };
  std::vector<Sub> subs;
  subs.reserve(8);  // CLI11 binds by address; the vector must never reallocate
  auto add = [&](const std::string& name, const std::string& help,
                 int (*entry)(const RunOptions&), bool needs_backend = true) {
    subs.push_back({app.add_subcommand(name, help), {}, {}, entry, needs_backend});
    add_common_flags(subs.back().cmd, subs.back().options, subs.back().flags);
  };
  add("run", "Full pipeline: generate, terms, graph, synthesize, eval", ctrace::cmd_run);
  add("generate", "Generate K candidate traces per sample", ctrace::cmd_generate);
  add("terms", "Consensus term extraction from generated traces", ctrace::cmd_terms,
      false);
  add("graph", "Dependency graphs, alignment, consensus, structural filter",
      ctrace::cmd_graph);
  add("synthesize", "Synthesize the final trace from the consensus graph",
      ctrace::cmd_synthesize);
  add("eval", "Score synthesized traces against gold labels", ctrace::cmd_eval);
  add("stats", "Aggregate filter statistics into a table", ctrace::cmd_stats, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  for (auto& sub : subs) {
    if (!sub.cmd->parsed()) continue;
    int rc = finalize_options(sub.cmd, sub.options, sub.flags, sub.needs_backend);
    if (rc == -1) return 0;
    if (rc != 0) return rc;
    return sub.entry(sub.options);
  }
  return 2;
}
