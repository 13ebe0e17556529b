#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "style_audit/corpus.hpp"
#include "style_audit/error.hpp"
#include "style_audit/parallel.hpp"
#include "style_audit/style.hpp"
#include "style_audit/tokenizer.hpp"

namespace style_audit {

using Tokens = std::vector<std::string>;
using TokenSpan = std::span<const std::string>;

inline std::size_t token_length(std::string_view text) { return tokenize(text).size(); }

// ---------------------------------------------------------------------------
// BLEU

struct BleuParams {
  static constexpr int max_order = 4;
  static constexpr double epsilon_numerator = 0.1;  // zero precisions become 0.1 / |hyp|
};

namespace detail {

inline std::map<std::string, int> ngram_counts(TokenSpan tokens, std::size_t n) {
  std::map<std::string, int> counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key;
    for (std::size_t k = 0; k < n; ++k) {
      if (k) key.push_back('\x1f');
      key += tokens[i + k];
    }
    ++counts[key];
  }
  return counts;
}

}  // namespace detail

/// Sentence BLEU up to 4-grams with clipped counts. A precision with no
/// matched n-grams (including orders longer than the hypothesis) is replaced
/// by 0.1 / |hyp|. With no unigram overlap at all the score is 0.
inline double bleu(TokenSpan reference, TokenSpan hypothesis) {
  if (hypothesis.empty() || reference.empty()) return 0.0;
  const auto hyp_len = static_cast<double>(hypothesis.size());
  const double eps = BleuParams::epsilon_numerator / hyp_len;
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= static_cast<std::size_t>(BleuParams::max_order); ++n) {
    const auto hyp = detail::ngram_counts(hypothesis, n);
    const auto ref = detail::ngram_counts(reference, n);
    int matched = 0, total = 0;
    for (const auto& [gram, c] : hyp) {
      total += c;
      if (const auto it = ref.find(gram); it != ref.end()) matched += std::min(c, it->second);
    }
    if (n == 1 && matched == 0) return 0.0;
    const double p = matched > 0 ? static_cast<double>(matched) / total : eps;
    log_sum += std::log(p);
  }
  const double ref_len = static_cast<double>(reference.size());
  const double bp = hyp_len < ref_len ? std::exp(1.0 - ref_len / hyp_len) : 1.0;
  return std::min(1.0, bp * std::exp(log_sum / BleuParams::max_order));
}

inline double bleu(std::string_view reference, std::string_view hypothesis) {
  const auto r = tokenize(reference);
  const auto h = tokenize(hypothesis);
  return bleu(r, h);
}

// ---------------------------------------------------------------------------
// ROUGE-L

inline std::size_t lcs_length(TokenSpan a, TokenSpan b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

/// ROUGE-L F1 over the longest common token subsequence.
inline double rouge_l(TokenSpan reference, TokenSpan hypothesis) {
  const auto lcs = static_cast<double>(lcs_length(reference, hypothesis));
  if (lcs == 0.0) return 0.0;
  const double p = lcs / static_cast<double>(hypothesis.size());
  const double r = lcs / static_cast<double>(reference.size());
  return 2.0 * p * r / (p + r);
}

inline double rouge_l(std::string_view reference, std::string_view hypothesis) {
  const auto r = tokenize(reference);
  const auto h = tokenize(hypothesis);
  return rouge_l(r, h);
}

// ---------------------------------------------------------------------------
// METEOR (exact + stem stages, no synonyms)

struct MeteorParams {
  static constexpr double alpha = 0.9;
  static constexpr double beta = 3.0;
  static constexpr double gamma = 0.5;
};

/// Light suffix stripper: plural and common inflection endings only.
inline std::string stem(std::string_view word) {
  std::string w(word);
  auto ends = [&w](std::string_view suf) { return w.size() >= suf.size() && std::string_view(w).ends_with(suf); };
  if (w.size() > 4 && ends("sses")) {
    w.resize(w.size() - 2);
  } else if (w.size() > 4 && ends("ies")) {
    w.resize(w.size() - 3);
    w += 'y';
  } else if (w.size() > 3 && ends("s") && !ends("ss") && !ends("us") && !ends("is")) {
    w.pop_back();
  }
  if (w.size() > 5 && ends("ing")) {
    w.resize(w.size() - 3);
  } else if (w.size() > 4 && ends("ed")) {
    w.resize(w.size() - 2);
  } else if (w.size() > 4 && ends("ly")) {
    w.resize(w.size() - 2);
  }
  return w;
}

struct Alignment {
  std::size_t matches = 0;
  std::size_t chunks = 0;
};

/// Greedy two-stage alignment: each hypothesis token, left to right, takes
/// the leftmost unmatched reference token equal to it; leftovers then match
/// the same way on stems. Chunks are maximal runs adjacent in both texts.
inline Alignment meteor_align(TokenSpan reference, TokenSpan hypothesis) {
  std::vector<std::ptrdiff_t> hyp_to_ref(hypothesis.size(), -1);
  std::vector<bool> ref_used(reference.size(), false);
  auto stage = [&](auto&& same) {
    for (std::size_t i = 0; i < hypothesis.size(); ++i) {
      if (hyp_to_ref[i] >= 0) continue;
      for (std::size_t j = 0; j < reference.size(); ++j) {
        if (!ref_used[j] && same(i, j)) {
          hyp_to_ref[i] = static_cast<std::ptrdiff_t>(j);
          ref_used[j] = true;
          break;
        }
      }
    }
  };
  stage([&](std::size_t i, std::size_t j) { return hypothesis[i] == reference[j]; });
  std::vector<std::string> ref_stems, hyp_stems;
  for (const auto& t : reference) ref_stems.push_back(stem(t));
  for (const auto& t : hypothesis) hyp_stems.push_back(stem(t));
  stage([&](std::size_t i, std::size_t j) { return hyp_stems[i] == ref_stems[j]; });

  Alignment out;
  std::ptrdiff_t prev_ref = -2;
  bool prev_matched = false;
  for (std::size_t i = 0; i < hypothesis.size(); ++i) {
    const auto j = hyp_to_ref[i];
    if (j < 0) {
      prev_matched = false;
      continue;
    }
    ++out.matches;
    if (!prev_matched || j != prev_ref + 1) ++out.chunks;
    prev_ref = j;
    prev_matched = true;
  }
  return out;
}

inline double meteor(TokenSpan reference, TokenSpan hypothesis) {
  const auto a = meteor_align(reference, hypothesis);
  if (a.matches == 0) return 0.0;
  const double m = static_cast<double>(a.matches);
  const double p = m / static_cast<double>(hypothesis.size());
  const double r = m / static_cast<double>(reference.size());
  const double fmean = p * r / (MeteorParams::alpha * p + (1.0 - MeteorParams::alpha) * r);
  const double penalty = MeteorParams::gamma * std::pow(static_cast<double>(a.chunks) / m, MeteorParams::beta);
  return fmean * (1.0 - penalty);
}

inline double meteor(std::string_view reference, std::string_view hypothesis) {
  const auto r = tokenize(reference);
  const auto h = tokenize(hypothesis);
  return meteor(r, h);
}

// ---------------------------------------------------------------------------
// Per-style descriptive statistics

enum class Side { document, query };

inline std::string_view to_string(Side s) noexcept { return s == Side::document ? "document" : "query"; }

struct StyleStatsRow {
  StyleId style = StyleId::Original;
  double mean_token_length = 0.0;
  double mean_bleu = 0.0;
  double mean_meteor = 0.0;
  double mean_rouge_l = 0.0;
  std::size_t n = 0;
};

/// One row per style; each variant is compared against its own group's
/// original. The Original row reports 1.0 for all three metrics.
inline std::vector<StyleStatsRow> style_stats(const std::vector<AuditGroup>& groups, Side side,
                                              int parallelism = 1) {
  if (groups.empty()) throw CorpusError("style_stats: no groups");
  for (const auto& g : groups) {
    const auto& v = side == Side::document ? g.document : g.query;
    if (!v.complete()) {
      throw CorpusError("style_stats: group " + g.group_id + " lacks " +
                        std::string(to_string(*v.first_missing())) + " on the " + std::string(to_string(side)) +
                        " side");
    }
  }
  struct PerGroup {
    std::array<double, kNumStyles> length{}, bleu{}, meteor{}, rouge{};
  };
  std::vector<PerGroup> per(groups.size());
  parallel_for(groups.size(), parallelism, [&](std::size_t gi) {
    const auto& v = side == Side::document ? groups[gi].document : groups[gi].query;
    const auto original = tokenize(v.at(StyleId::Original));
    for (auto s : kAllStyles) {
      const auto k = index_of(s);
      const auto tokens = s == StyleId::Original ? original : tokenize(v.at(s));
      per[gi].length[k] = static_cast<double>(tokens.size());
      if (s == StyleId::Original) {
        per[gi].bleu[k] = per[gi].meteor[k] = per[gi].rouge[k] = 1.0;
      } else {
        per[gi].bleu[k] = style_audit::bleu(original, tokens);
        per[gi].meteor[k] = style_audit::meteor(original, tokens);
        per[gi].rouge[k] = style_audit::rouge_l(original, tokens);
      }
    }
  });
  std::vector<StyleStatsRow> rows;
  const double n = static_cast<double>(groups.size());
  for (auto s : kAllStyles) {
    const auto k = index_of(s);
    StyleStatsRow row;
    row.style = s;
    row.n = groups.size();
    for (const auto& p : per) {
      row.mean_token_length += p.length[k];
      row.mean_bleu += p.bleu[k];
      row.mean_meteor += p.meteor[k];
      row.mean_rouge_l += p.rouge[k];
    }
    row.mean_token_length /= n;
    row.mean_bleu /= n;
    row.mean_meteor /= n;
    row.mean_rouge_l /= n;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace style_audit
