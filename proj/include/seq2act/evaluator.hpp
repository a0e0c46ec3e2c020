#pragma once

#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "seq2act/convert.hpp"
#include "seq2act/logical_form.hpp"

namespace seq2act {

// Exact-match comparison of logical forms: equal canonical prints, or
// isomorphic graphs (variable renaming and conjunct order are artifacts of
// printing, so the graph comparison is the headline criterion).
inline bool exact_match(const LogicalForm& predicted, const LogicalForm& gold) {
  try {
    std::string p = print_lf(predicted);
    std::string g = print_lf(gold);
    if (p == g) return true;
    return graphs_isomorphic(lf_to_graph(predicted), lf_to_graph(gold));
  } catch (const Error&) {
    return false;
  }
}

inline bool exact_match_text(const std::string& predicted, const std::string& gold) {
  try {
    return exact_match(parse_lf(predicted), parse_lf(gold));
  } catch (const Error&) {
    return false;
  }
}

// Token count of a linearized logical form: symbols, parens and commas each
// count once.
inline std::size_t lf_token_count(const std::string& text) {
  lf_detail::Lexer lexer(text);
  std::size_t n = 0;
  while (lexer.peek().kind != lf_detail::Token::Kind::End) {
    lexer.take();
    ++n;
  }
  return n;
}

struct LengthStats {
  double mean_lf_tokens = 0.0;
  double mean_action_tokens = 0.0;
};

// Average lengths over a converted corpus: linearized logical-form tokens vs
// action-sequence tokens (one token per action).
inline LengthStats length_stats(const std::vector<std::pair<std::string, std::size_t>>& corpus) {
  LengthStats stats;
  if (corpus.empty()) return stats;
  for (const auto& [lf_text, action_count] : corpus) {
    stats.mean_lf_tokens += static_cast<double>(lf_token_count(lf_text));
    stats.mean_action_tokens += static_cast<double>(action_count);
  }
  stats.mean_lf_tokens /= static_cast<double>(corpus.size());
  stats.mean_action_tokens /= static_cast<double>(corpus.size());
  return stats;
}

struct ExampleVerdict {
  bool semantic_match = false;
  bool string_match = false;
  std::string error;  // non-empty when the prediction failed to parse
};

struct EvalReport {
  std::size_t total = 0;
  std::size_t correct = 0;         // semantic matches (headline)
  std::size_t string_correct = 0;  // canonical-text equality
  double accuracy = 0.0;
  double string_accuracy = 0.0;
  double mean_lf_tokens = 0.0;
  double mean_action_tokens = 0.0;  // filled by callers that know the actions
  std::vector<ExampleVerdict> verdicts;
};

// Accuracy over aligned prediction/gold logical-form texts.
inline EvalReport evaluate(const std::vector<std::string>& predictions,
                           const std::vector<std::string>& golds) {
  if (predictions.size() != golds.size())
    fail(Errc::LineCountMismatch, std::to_string(predictions.size()) + " predictions vs " +
                                      std::to_string(golds.size()) + " gold entries");
  EvalReport report;
  report.total = golds.size();
  double lf_tokens = 0.0;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    ExampleVerdict v;
    try {
      LogicalForm gold = parse_lf(golds[i]);
      lf_tokens += static_cast<double>(lf_token_count(print_lf(gold)));
      LogicalForm pred = parse_lf(predictions[i]);
      v.semantic_match = exact_match(pred, gold);
      v.string_match = print_lf(pred) == print_lf(gold);
    } catch (const Error& e) {
      v.error = e.what();
    }
    report.correct += v.semantic_match ? 1 : 0;
    report.string_correct += v.string_match ? 1 : 0;
    report.verdicts.push_back(std::move(v));
  }
  if (report.total > 0) {
    report.accuracy = static_cast<double>(report.correct) / static_cast<double>(report.total);
    report.string_accuracy =
        static_cast<double>(report.string_correct) / static_cast<double>(report.total);
    report.mean_lf_tokens = lf_tokens / static_cast<double>(report.total);
  }
  return report;
}

inline std::string render_report_table(const EvalReport& report) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  out << "examples        " << report.total << "\n";
  out << "exact match     " << report.correct << " (" << report.accuracy << ")\n";
  out << "string match    " << report.string_correct << " (" << report.string_accuracy << ")\n";
  if (report.mean_lf_tokens > 0)
    out << "mean lf tokens  " << report.mean_lf_tokens << "\n";
  if (report.mean_action_tokens > 0)
    out << "mean actions    " << report.mean_action_tokens << "\n";
  return out.str();
}

}  // namespace seq2act
