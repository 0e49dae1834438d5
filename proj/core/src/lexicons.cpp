#include <fstream>
#include <stdexcept>

#include "ctrace/text.hpp"

namespace ctrace {

namespace {

Lexicons make_builtin() {
  Lexicons lex;
  lex.stopwords = {
      "the", "a", "an", "is", "are", "was", "were", "be", "been", "being",
      "have", "has", "had", "do", "does", "did", "will", "would", "could",
      "should", "may", "might", "must", "can", "this", "that", "these",
      "those", "it", "its", "they", "them", "their", "there", "here", "where",
      "what", "which", "who", "whom", "whose", "how", "why", "when", "to",
      "of", "in", "on", "at", "by", "for", "with", "from", "as", "into",
      "onto", "up", "down", "out", "off", "over", "under", "above", "below",
      "between", "among", "through", "during", "before", "after", "while",
      "about", "against", "within", "without", "throughout", "across",
      "around", "near", "far", "inside", "outside", "beside", "besides",
      "except", "including", "excluding", "concerning", "regarding",
      "according", "i", "you", "he", "she", "we", "us", "our", "your", "my",
      "me", "him", "her", "his", "hers", "mine", "yours", "ours", "theirs"};

  lex.common_logical_words = {
      "because", "also", "so", "and", "or", "but", "if", "then", "therefore",
      "thus", "since", "as", "when", "not", "no", "all", "any", "some",
      "each", "every", "fact", "facts", "step", "steps", "prove", "proof",
      "conclude", "conclusion", "approve", "disprove", "given", "statement",
      "claim", "implies", "however"};

  lex.logical_keywords = {
      // step-related
      "step", "steps", "step1", "step2", "step3", "step4", "step5", "first",
      "second", "third", "next", "then", "finally",
      // conditional
      "if", "else", "elif", "when", "whenever", "unless", "provided",
      // causality
      "because", "since", "as", "due", "therefore", "thus", "hence", "so",
      "consequently", "accordingly",
      // connectors
      "and", "or", "but", "however", "moreover", "furthermore",
      "additionally", "also", "besides",
      // inference
      "implies", "imply", "conclude", "conclusion", "infer", "inference",
      "deduce", "deduction",
      // proof-related
      "prove", "proof", "proven", "disprove", "disproven", "contradiction",
      "contradictory", "assume", "assumption",
      // fact-referencing
      "fact", "facts", "given", "premise", "premises", "hypothesis",
      "statement", "claim",
      // logical operations
      "all", "any", "some", "none", "every", "each", "not", "no", "never",
      "always",
      // comparison
      "equal", "equals", "equivalent", "same", "different", "greater", "less",
      "than", "from"};

  lex.emotional_words = {
      "maybe", "perhaps", "possibly", "probably", "might", "may", "could",
      "would", "should", "seems", "appears", "looks like", "sort of",
      "kind of", "a bit", "quite", "rather", "very", "really", "actually",
      "basically", "essentially", "obviously", "clearly", "surely",
      "certainly", "definitely", "absolutely", "literally", "honestly",
      "frankly", "admittedly", "supposedly", "allegedly", "hopefully",
      "unfortunately", "luckily", "sadly", "surprisingly", "interestingly",
      "amazingly", "incredibly", "extremely", "pretty", "somewhat",
      "slightly"};
  return lex;
}

}  // namespace

const Lexicons& Lexicons::builtin() {
  static const Lexicons instance = make_builtin();
  return instance;
}

std::set<std::string> load_term_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open term list: " + path);
  std::set<std::string> terms;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n' ||
                             line.back() == ' ' || line.back() == '\t'))
      line.pop_back();
    size_t b = line.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    terms.insert(line.substr(b));
  }
  return terms;
}

}  // namespace ctrace
