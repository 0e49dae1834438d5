// Regenerates the bundled replay fixtures from a deterministic scripted model.
// The scripted model is a stand-in for a real completion endpoint: it returns
// canned candidate traces, chain-shaped dependency JSON, and step rewrites
// that echo the reference step. Running the real pipeline against it (wrapped
// in a RecordBackend) guarantees the recorded prompts match what replay will
// ask for, byte for byte.
//
// Usage: fixture_gen <dataset.jsonl> <fixture-dir>

#include <iostream>
#include <map>
#include <regex>
#include <sstream>

#include "ctrace/pipeline.hpp"
#include "ctrace/prompts.hpp"
#include "json.hpp"

namespace {

const std::map<std::string, std::string>& canned_traces() {
  static const std::map<std::string, std::string> traces = {
      {"socrates",
       "Step 1: Fact1 states that Socrates is a human, so Socrates belongs to the "
       "class of humans and the rules about humans apply to Socrates.\n"
       "Step 2: Fact2 states that every human is mortal, so the mortality rule "
       "covers every member of the class of humans.\n"
       "Step 3: From Step 1 and Step 2, Socrates is mortal, because Socrates is a "
       "human and every human is mortal.\n"
       "Step 4: Fact3 states that every mortal has a finite lifespan, so the "
       "mortality of Socrates brings a finite lifespan rule into play.\n"
       "Step 5: From Step 3 and Step 4, Socrates has a finite lifespan, because "
       "Socrates is mortal and every mortal has a finite lifespan.\n"
       "Step 6: Fact4 states that whoever has a finite lifespan will eventually "
       "die, so a finite lifespan rule leads to eventual death.\n"
       "Step 7: From Step 5 and Step 6, Socrates must perish at some future "
       "moment, since a bounded existence cannot continue forever.\n"
       "Step 8: The hypothesis states that Socrates will eventually die, and "
       "Step 7 derives that Socrates will eventually die, so the hypothesis "
       "follows from the facts about humans, mortal lifespans, and death.\n"
       "\n"
       "Chaining the facts about humans, mortality, finite lifespans, and death "
       "shows that Socrates will eventually die, which is the hypothesis.\n"
       "\n"
       "Final Conclusion: __PROVED__\n"},
      {"iguana",
       "Step 1: Fact1 states that all reptiles are cold blooded, so being a "
       "reptile implies being cold blooded.\n"
       "Step 2: Fact2 states that iguanas are reptiles, so from Step 1 iguanas "
       "are cold blooded animals.\n"
       "Step 3: Fact3 states that no cold blooded animal is warm blooded, so "
       "from Step 2 iguanas are not warm blooded.\n"
       "Step 4: The hypothesis claims that iguanas are warm blooded, but Step 3 "
       "shows that iguanas are not warm blooded, so the facts contradict the "
       "hypothesis about iguanas.\n"
       "\n"
       "The facts about reptiles and cold blooded animals contradict the "
       "hypothesis that iguanas are warm blooded.\n"
       "\n"
       "Final Conclusion: __DISPROVED__\n"},
      {"square",
       // Deliberately missing its label line: exercises the repair path.
       "Step 1: Fact1 states that every square is a rectangle, so being a "
       "square implies being a rectangle.\n"
       "Step 2: Fact2 states that every rectangle has four sides, so from "
       "Step 1 every square has four sides.\n"
       "Step 3: The hypothesis states that every square has four sides, and "
       "Step 2 derives exactly that about squares from the facts.\n"
       "\n"
       "The facts about squares and rectangles directly yield the hypothesis "
       "that every square has four sides.\n"},
      {"liquid",
       "Step 1: Fact1 states that the liquid boils at one hundred degrees "
       "Celsius at sea level, which matches the boiling point of water.\n"
       "Step 2: Fact2 states that the liquid is transparent and odorless, "
       "which matches water and rules out milk, oil, and vinegar.\n"
       "Step 3: From Step 1 and Step 2, the liquid is water, which corresponds "
       "to option B among the listed options.\n"
       "\n"
       "The boiling point and the appearance identify the liquid as water, "
       "option B.\n"
       "\n"
       "Answer: B\n"},
      {"divisible",
       "Step 1: Fact1 and Fact2 state that the integer ends in zero and that "
       "ending in zero gives divisibility by ten, so the integer is divisible "
       "by ten.\n"
       "Step 2: Fact3 states that every integer divisible by ten is divisible "
       "by five, so from Step 1 the integer is divisible by five.\n"
       "Step 3: The question asks whether the integer is divisible by five, "
       "and Step 2 shows that it is divisible by five.\n"
       "\n"
       "Divisibility by ten gives divisibility by five, so the answer is yes.\n"
       "\n"
       "Answer: yes\n"}};
  return traces;
}

std::string between(const std::string& text, const std::string& after,
                    const std::string& before) {
  size_t b = text.find(after);
  if (b == std::string::npos) return "";
  b += after.size();
  size_t e = text.find(before, b);
  return text.substr(b, e == std::string::npos ? std::string::npos : e - b);
}

std::string chain_dependencies(const std::string& prompt) {
  std::string steps = between(prompt, "Reasoning steps:\n", "\x01");
  bool has_facts = prompt.find("Available facts (given premises):\n(none)") ==
                   std::string::npos;
  static const std::regex step_re(R"(^Step(\d+): )");
  nlohmann::ordered_json deps = nlohmann::ordered_json::array();
  std::istringstream lines(steps);
  std::string line;
  while (std::getline(lines, line)) {
    std::smatch m;
    if (!std::regex_search(line, m, step_re)) continue;
    int n = std::stoi(m[1].str());
    nlohmann::ordered_json entry;
    entry["step_id"] = "Step" + std::to_string(n);
    entry["uses"] = nlohmann::ordered_json::array();
    if (n == 1) {
      if (has_facts) entry["uses"].push_back("Fact1");
    } else {
      entry["uses"].push_back("Step" + std::to_string(n - 1));
    }
    deps.push_back(std::move(entry));
  }
  nlohmann::ordered_json doc;
  doc["dependencies"] = std::move(deps);
  return doc.dump();
}

std::string scripted_model(const ctrace::CompletionRequest& req,
                           const std::vector<ctrace::SampleRecord>& samples) {
  using ctrace::CallTag;
  switch (req.tag) {
    case CallTag::generation: {
      for (const auto& sample : samples) {
        if (req.user.find(sample.problem_text) != std::string::npos)
          return canned_traces().at(sample.id);
      }
      throw std::runtime_error("scripted model: unknown generation prompt");
    }
    case CallTag::extraction:
      return chain_dependencies(req.user);
    case CallTag::synthesis: {
      std::string ref =
          between(req.user, "Reference step (shared across candidate traces):\n",
                  "\n\nPreferred vocabulary:");
      static const std::regex mv_re(
          R"(The majority of candidate traces concluded: (.*))");
      std::smatch m;
      if (std::regex_search(req.user, m, mv_re)) {
        bool fld = req.user.find("Final Conclusion:") != std::string::npos;
        std::string label_line =
            (fld ? "Final Conclusion: " : "Answer: ") + m[1].str();
        return ref + "\n" + label_line + "\n";
      }
      // Final step without a majority hint (or a non-final step): no label
      // line, so the pipeline has to issue a repair call.
      return ref + "\n";
    }
    case CallTag::repair:
    case CallTag::judge: {
      // Answer with the first option of the requested format line.
      std::string format = between(req.user, "exactly formatted as: ", "\n");
      size_t cut = format.find(" (or");
      if (cut != std::string::npos) format = format.substr(0, cut);
      return format + "\n";
    }
  }
  throw std::runtime_error("scripted model: unknown tag");
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 3) {
    std::cerr << "usage: fixture_gen <dataset.jsonl> <fixture-dir>\n";
    return 2;
  }
  try {
    auto samples = ctrace::load_dataset(argv[1]);
    auto stub = std::make_shared<ctrace::CallbackBackend>(
        [&samples](const ctrace::CompletionRequest& req) {
          return scripted_model(req, samples);
        });
    ctrace::RecordBackend recorder(stub, argv[2]);

    ctrace::PipelineConfig config;  // defaults; fixture keys ignore K
    config.k = 2;  // prompts repeat across candidates, two passes suffice
    for (const auto& sample : samples) {
      auto outcome = ctrace::run_sample(sample, config, ctrace::Lexicons::builtin(),
                                        recorder);
      std::cout << sample.id << ": " << outcome.consensus.nodes.size()
                << " consensus nodes, " << outcome.consensus.edges.size()
                << " edges, synthesized "
                << outcome.synthesized.alive_step_count() << " steps\n";
    }
    // Judge fixtures in case a downstream run needs one per task kind.
    for (const auto& sample : samples) {
      ctrace::CompletionRequest req;
      req.system = ctrace::system_prompt();
      req.user = ctrace::judge_prompt(canned_traces().at(sample.id), sample.task_kind);
      req.temperature = 0.0;
      req.tag = ctrace::CallTag::judge;
      recorder.complete(req);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
