#pragma once

#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace ctrace {

// The four embedded term lists. Any list can be replaced from a file
// (one term per line) via the CLI.
struct Lexicons {
  std::set<std::string> stopwords;
  std::set<std::string> common_logical_words;
  std::set<std::string> logical_keywords;
  std::set<std::string> emotional_words;

  static const Lexicons& builtin();
};

std::set<std::string> load_term_list(const std::string& path);

struct ZScoreEntry {
  int step_ordinal = 0;
  double similarity = 0.0;
  double z = 0.0;
};

struct ZScoreReport {
  double group_mean = 0.0;
  double group_std = 0.0;  // population standard deviation
  std::vector<ZScoreEntry> per_step_scores;
};

struct EmptyGroup : std::runtime_error {
  EmptyGroup() : std::runtime_error("z-score group is empty") {}
};

// Lowercases, splits on non-alphanumeric characters, drops single-digit
// tokens and anything in stopwords or common_logical_words.
std::map<std::string, int> tokenize(const std::string& text, const Lexicons& lexicons);

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b);

// Consensus terms carry their own weight; step-only terms weigh 1.0.
double weighted_jaccard(const std::set<std::string>& step_terms,
                        const std::map<std::string, double>& consensus);

// Population z-scores; a zero-variance group maps every value to z = 0.
ZScoreReport group_zscores(const std::vector<double>& values);

std::set<std::string> term_keys(const std::map<std::string, int>& multiset);

}  // namespace ctrace
