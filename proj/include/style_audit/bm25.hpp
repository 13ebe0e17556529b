#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "style_audit/tokenizer.hpp"

namespace style_audit {

/// Okapi BM25 free parameters. Defaults are the common Lucene settings.
struct Bm25Params {
  double k1 = 1.5;
  double b = 0.75;

  void validate() const {
    if (!(k1 > 0.0)) throw std::invalid_argument("bm25: k1 must be > 0");
    if (!(b >= 0.0 && b <= 1.0)) throw std::invalid_argument("bm25: b must lie in [0, 1]");
  }

  friend bool operator==(const Bm25Params&, const Bm25Params&) = default;
};

/// Term statistics over a fixed pool of documents (a multiset: duplicates
/// are indexed separately). Immutable once built.
class Bm25Index {
 public:
  using TermCounts = std::unordered_map<std::string, std::uint32_t>;

  static Bm25Index build(std::span<const std::string> documents, Bm25Params params = {}) {
    std::vector<std::vector<std::string>> tokenized;
    tokenized.reserve(documents.size());
    for (const auto& d : documents) tokenized.push_back(tokenize(d));
    return build_tokens(tokenized, params);
  }

  static Bm25Index build_tokens(std::span<const std::vector<std::string>> documents,
                                Bm25Params params = {}) {
    params.validate();
    if (documents.empty()) throw std::invalid_argument("bm25: no documents to index");
    Bm25Index idx;
    idx.params_ = params;
    std::uint64_t total = 0;
    for (const auto& tokens : documents) {
      TermCounts tf;
      for (const auto& t : tokens) ++tf[t];
      for (const auto& [term, _] : tf) ++idx.df_[term];
      idx.lengths_.push_back(tokens.size());
      idx.tf_.push_back(std::move(tf));
      total += tokens.size();
    }
    if (total == 0) throw std::invalid_argument("bm25: every document is empty");
    idx.avgdl_ = static_cast<double>(total) / static_cast<double>(documents.size());
    return idx;
  }

  std::size_t size() const noexcept { return lengths_.size(); }
  double average_length() const noexcept { return avgdl_; }
  const Bm25Params& params() const noexcept { return params_; }
  std::size_t length(std::size_t doc) const { return lengths_.at(doc); }

  std::size_t document_frequency(std::string_view term) const {
    const auto it = df_.find(std::string(term));
    return it == df_.end() ? 0 : it->second;
  }

  std::uint32_t term_frequency(std::size_t doc, std::string_view term) const {
    const auto& tf = tf_.at(doc);
    const auto it = tf.find(std::string(term));
    return it == tf.end() ? 0 : it->second;
  }

  /// ln(1 + (N - df + 0.5) / (df + 0.5)); never negative.
  double idf(std::string_view term) const {
    const auto n = static_cast<double>(size());
    const auto df = static_cast<double>(document_frequency(term));
    return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
  }

  /// Sums over query tokens as given, so a repeated query term counts twice.
  double score(std::span<const std::string> query_terms, std::size_t doc) const {
    if (doc >= size()) throw std::out_of_range("bm25: invalid document id " + std::to_string(doc));
    const auto& tf = tf_[doc];
    return accumulate(query_terms, static_cast<double>(lengths_[doc]), [&](const std::string& t) {
      const auto it = tf.find(t);
      return it == tf.end() ? 0u : it->second;
    });
  }

  double score(std::string_view query, std::size_t doc) const {
    const auto terms = tokenize(query);
    return score(terms, doc);
  }

  /// Scores a document outside the pool against the pool's statistics.
  double score_external(std::span<const std::string> query_terms,
                        std::span<const std::string> doc_tokens) const {
    TermCounts tf;
    for (const auto& t : doc_tokens) ++tf[t];
    return accumulate(query_terms, static_cast<double>(doc_tokens.size()), [&](const std::string& t) {
      const auto it = tf.find(t);
      return it == tf.end() ? 0u : it->second;
    });
  }

 private:
  template <typename TfOf>
  double accumulate(std::span<const std::string> query_terms, double doc_len, TfOf&& tf_of) const {
    double sum = 0.0;
    const double norm = params_.k1 * (1.0 - params_.b + params_.b * doc_len / avgdl_);
    for (const auto& t : query_terms) {
      const auto f = static_cast<double>(tf_of(t));
      if (f == 0.0) continue;
      sum += idf(t) * f * (params_.k1 + 1.0) / (f + norm);
    }
    return sum;
  }

  Bm25Params params_;
  std::vector<TermCounts> tf_;
  std::vector<std::size_t> lengths_;
  std::unordered_map<std::string, std::size_t> df_;
  double avgdl_ = 0.0;
};

inline Bm25Index bm25_build(std::span<const std::string> documents, Bm25Params params = {}) {
  return Bm25Index::build(documents, params);
}

inline double bm25_score(std::string_view query, const Bm25Index& index, std::size_t doc_id) {
  return index.score(query, doc_id);
}

}  // namespace style_audit
