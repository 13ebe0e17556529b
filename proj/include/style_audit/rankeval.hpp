#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "style_audit/corpus.hpp"
#include "style_audit/error.hpp"
#include "style_audit/scorers.hpp"
#include "style_audit/style.hpp"

namespace style_audit {

/// Fractional ranks: the highest value gets rank 1; tied values share the
/// mean of the positions they span, so the ranks always sum to n(n+1)/2.
inline std::vector<double> fractional_ranks(std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument("rank: non-finite similarity");
  }
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i + 1;
    while (j < order.size() && values[order[j]] == values[order[i]]) ++j;
    // positions i+1 .. j (1-based)
    const double rank = static_cast<double>(i + 1 + j) / 2.0;
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = rank;
    i = j;
  }
  return ranks;
}

template <std::size_t M>
struct BasicRankVector {
  std::array<double, M> ranks{};

  double operator[](std::size_t i) const { return ranks[i]; }
  double operator[](StyleId s) const requires(M == kNumStyles) { return ranks[index_of(s)]; }
};

template <std::size_t M>
struct BasicAvgRankVector {
  std::array<double, M> mean_ranks{};
  std::size_t n_groups = 0;

  double operator[](std::size_t i) const { return mean_ranks[i]; }
  double operator[](StyleId s) const requires(M == kNumStyles) { return mean_ranks[index_of(s)]; }
};

using RankVector = BasicRankVector<kNumStyles>;
using AvgRankVector = BasicAvgRankVector<kNumStyles>;

template <std::size_t M>
BasicRankVector<M> rank_by_similarity(const std::array<double, M>& similarities) {
  const auto r = fractional_ranks(similarities);
  BasicRankVector<M> out;
  std::copy(r.begin(), r.end(), out.ranks.begin());
  return out;
}

/// Entrywise mean, summed in list order.
template <std::size_t M>
BasicAvgRankVector<M> average_ranks(std::span<const BasicRankVector<M>> vectors) {
  if (vectors.empty()) throw std::invalid_argument("average_ranks: no rank vectors");
  BasicAvgRankVector<M> out;
  for (const auto& v : vectors) {
    for (std::size_t i = 0; i < M; ++i) out.mean_ranks[i] += v.ranks[i];
  }
  for (auto& m : out.mean_ranks) m /= static_cast<double>(vectors.size());
  out.n_groups = vectors.size();
  return out;
}

template <std::size_t M>
BasicAvgRankVector<M> average_ranks(const std::vector<BasicRankVector<M>>& vectors) {
  return average_ranks(std::span<const BasicRankVector<M>>(vectors));
}

inline double mean_of(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("mean of an empty sequence");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

/// Standard deviation with divisor n.
inline double population_std(std::span<const double> xs) {
  const double m = mean_of(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size()));
}

/// (max - min) * population std. Zero iff every value is equal.
inline double unfairness(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("unfairness: no values");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (*lo == *hi) return 0.0;
  return (*hi - *lo) * population_std(values);
}

template <std::size_t M>
double unfairness(const BasicAvgRankVector<M>& avg) {
  return unfairness(std::span<const double>(avg.mean_ranks));
}

struct UnfairnessReport {
  std::string scorer;
  StyleId query_style = StyleId::Original;
  AvgRankVector avg_ranks;
  double unfairness = 0.0;
  std::size_t n_groups = 0;

  /// The style with the smallest mean rank; ties resolve to canonical order.
  StyleId best_style() const {
    const auto& m = avg_ranks.mean_ranks;
    return style_at(static_cast<std::size_t>(std::min_element(m.begin(), m.end()) - m.begin()));
  }
};

struct QueryStyleMatrix {
  std::string scorer;
  std::array<UnfairnessReport, kNumStyles> rows;  // indexed by query style
  double avg = 0.0;
  double std = 0.0;
};

namespace detail {

inline void check_audit_corpus(const std::vector<AuditGroup>& groups, bool need_queries, StyleId query_style) {
  if (groups.empty()) throw CorpusError("audit: empty corpus");
  for (const auto& g : groups) {
    if (!g.document.complete()) {
      throw CorpusError("audit: group " + g.group_id + " lacks document variant " +
                        std::string(to_string(*g.document.first_missing())));
    }
    if (need_queries && !g.query.complete()) {
      throw CorpusError("audit: group " + g.group_id + " lacks query variant " +
                        std::string(to_string(*g.query.first_missing())));
    }
    if (!g.query.has(query_style)) {
      throw CorpusError("audit: group " + g.group_id + " lacks query variant " + std::string(to_string(query_style)));
    }
  }
}

inline std::vector<std::string> document_pool(const std::vector<AuditGroup>& groups) {
  std::vector<std::string> pool;
  pool.reserve(groups.size() * kNumStyles);
  for (const auto& g : groups) {
    for (auto s : kAllStyles) pool.push_back(g.document.at(s));
  }
  return pool;
}

inline UnfairnessReport audit_prepared(const std::vector<AuditGroup>& groups, RelevanceScorer& scorer,
                                       StyleId query_style) {
  std::vector<RankVector> ranks;
  ranks.reserve(groups.size());
  std::array<std::string, kNumStyles> candidates;
  for (const auto& g : groups) {
    for (auto s : kAllStyles) candidates[index_of(s)] = g.document.at(s);
    const auto scores = score_relevance(scorer, g.query.at(query_style), candidates, {query_style});
    if (scores.size() != kNumStyles) {
      throw Error("scorer " + scorer.descriptor().label() + " returned " + std::to_string(scores.size()) +
                  " scores for group " + g.group_id);
    }
    std::array<double, kNumStyles> sims;
    std::copy(scores.begin(), scores.end(), sims.begin());
    try {
      ranks.push_back(rank_by_similarity(sims));
    } catch (const std::invalid_argument& e) {
      throw Error("group " + g.group_id + ": " + e.what());
    }
  }
  UnfairnessReport report;
  report.scorer = scorer.descriptor().label();
  report.query_style = query_style;
  report.avg_ranks = average_ranks(ranks);
  report.unfairness = unfairness(report.avg_ranks);
  report.n_groups = groups.size();
  return report;
}

}  // namespace detail

/// Ranks the ten document variants of every group against the chosen query
/// variant and reports per-style mean ranks and their unfairness.
inline UnfairnessReport audit_document_styles(const std::vector<AuditGroup>& groups, RelevanceScorer& scorer,
                                              StyleId query_style = StyleId::Original) {
  detail::check_audit_corpus(groups, query_style != StyleId::Original, query_style);
  const auto pool = detail::document_pool(groups);
  std::vector<std::string> queries;
  for (const auto& g : groups) queries.push_back(g.query.at(query_style));
  scorer.prepare(pool, queries);
  return detail::audit_prepared(groups, scorer, query_style);
}

/// Repeats the document audit once per query style (original and nine
/// rewrites). `avg`/`std` are the mean and population std of the ten scores.
inline QueryStyleMatrix audit_query_styles(const std::vector<AuditGroup>& groups, RelevanceScorer& scorer) {
  detail::check_audit_corpus(groups, true, StyleId::Original);
  const auto pool = detail::document_pool(groups);
  std::vector<std::string> queries;
  for (const auto& g : groups) {
    for (auto s : kAllStyles) queries.push_back(g.query.at(s));
  }
  scorer.prepare(pool, queries);
  QueryStyleMatrix m;
  m.scorer = scorer.descriptor().label();
  std::array<double, kNumStyles> scores{};
  for (auto s : kAllStyles) {
    m.rows[index_of(s)] = detail::audit_prepared(groups, scorer, s);
    scores[index_of(s)] = m.rows[index_of(s)].unfairness;
  }
  m.avg = mean_of(scores);
  m.std = population_std(scores);
  return m;
}

}  // namespace style_audit
