#include "ctrace/text.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace ctrace {

std::map<std::string, int> tokenize(const std::string& text, const Lexicons& lexicons) {
  std::map<std::string, int> terms;
  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    bool single_digit =
        token.size() == 1 && std::isdigit(static_cast<unsigned char>(token[0]));
    if (!single_digit && !lexicons.stopwords.count(token) &&
        !lexicons.common_logical_words.count(token)) {
      ++terms[token];
    }
    token.clear();
  };
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      token.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
  }
  flush();
  return terms;
}

std::set<std::string> term_keys(const std::map<std::string, int>& multiset) {
  std::set<std::string> keys;
  for (const auto& [term, count] : multiset) keys.insert(term);
  return keys;
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 0.0;
  size_t inter = 0;
  for (const auto& t : a)
    if (b.count(t)) ++inter;
  size_t uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double weighted_jaccard(const std::set<std::string>& step_terms,
                        const std::map<std::string, double>& consensus) {
  double num = 0.0;
  double den = 0.0;
  for (const auto& [term, weight] : consensus) {
    den += weight;
    if (step_terms.count(term)) num += weight;
  }
  for (const auto& term : step_terms) {
    if (!consensus.count(term)) den += 1.0;  // unknown vocabulary carries unit mass
  }
  if (den == 0.0) return 0.0;
  return num / den;
}

ZScoreReport group_zscores(const std::vector<double>& values) {
  if (values.empty()) throw EmptyGroup();
  ZScoreReport report;
  double sum = 0.0;
  for (double v : values) sum += v;
  double mean = sum / static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());  // population variance
  double sd = std::sqrt(var);
  report.group_mean = mean;
  report.group_std = sd;
  report.per_step_scores.reserve(values.size());
  for (size_t i = 0; i < values.size(); ++i) {
    double z = sd > 0.0 ? (values[i] - mean) / sd : 0.0;
    report.per_step_scores.push_back({static_cast<int>(i + 1), values[i], z});
  }
  return report;
}

}  // namespace ctrace
