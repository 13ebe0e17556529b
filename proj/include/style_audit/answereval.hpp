#pragma once

#include <algorithm>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "style_audit/corpus.hpp"
#include "style_audit/error.hpp"
#include "style_audit/rankeval.hpp"
#include "style_audit/scorers.hpp"

namespace style_audit {

struct SystemCorrectness {
  std::string system_id;
  double mean_score = 0.0;
  std::size_t n_answers = 0;
};

struct AnswerStyleReport {
  std::string scorer;
  std::vector<SystemCorrectness> systems;  // sorted by system_id
  double unfairness = 0.0;
};

/// BM25 scores are unbounded and cannot serve as a correctness score.
inline void require_bounded_scorer(const RelevanceScorer& scorer) {
  if (scorer.descriptor().kind == ScorerDescriptor::Kind::bm25) {
    throw ConfigError("correctness scoring needs a bounded similarity; bm25 is not supported");
  }
}

/// Similarity between a ground-truth answer and a system answer.
inline double correctness_score(std::string_view gt_answer, std::string_view answer, RelevanceScorer& scorer) {
  require_bounded_scorer(scorer);
  if (trim(gt_answer).empty() || trim(answer).empty()) {
    throw std::invalid_argument("correctness_score: empty text");
  }
  const std::string candidate[] = {std::string(answer)};
  return scorer.score(gt_answer, candidate).at(0);
}

/// Mean correctness per system, in system-id order. With `correct_only`
/// only human-approved answers count; systems left with no answers are
/// omitted. Each mean sums its sorted scores, so record order is irrelevant.
inline std::vector<SystemCorrectness> per_system_correctness(const std::vector<QARecord>& records,
                                                             RelevanceScorer& scorer, bool correct_only = true) {
  require_bounded_scorer(scorer);
  if (records.empty()) throw CorpusError("per_system_correctness: no records");

  std::vector<std::string> answers, gts;
  for (const auto& r : records) {
    gts.push_back(r.gt_answer);
    for (const auto& a : r.answers) {
      if (!correct_only || a.human_correct) answers.push_back(a.text);
    }
  }
  if (answers.empty()) throw CorpusError("per_system_correctness: no qualifying answers");
  scorer.prepare(answers, gts);

  std::map<std::string, std::vector<double>> by_system;
  for (const auto& r : records) {
    for (const auto& a : r.answers) {
      if (correct_only && !a.human_correct) continue;
      by_system[a.system_id].push_back(correctness_score(r.gt_answer, a.text, scorer));
    }
  }
  std::vector<SystemCorrectness> rows;
  for (auto& [system, scores] : by_system) {
    std::sort(scores.begin(), scores.end());
    double sum = 0.0;
    for (double s : scores) sum += s;
    rows.push_back({system, sum / static_cast<double>(scores.size()), scores.size()});
  }
  return rows;
}

inline double answer_style_unfairness(const std::vector<SystemCorrectness>& rows) {
  if (rows.size() < 2) throw std::invalid_argument("answer_style_unfairness: needs at least two systems");
  std::vector<double> means;
  for (const auto& r : rows) means.push_back(r.mean_score);
  std::sort(means.begin(), means.end());
  return unfairness(means);
}

}  // namespace style_audit
