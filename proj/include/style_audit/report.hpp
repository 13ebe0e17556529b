#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "style_audit/answereval.hpp"
#include "style_audit/bm25.hpp"
#include "style_audit/disk_cache.hpp"
#include "style_audit/rankeval.hpp"
#include "style_audit/scorers.hpp"
#include "style_audit/style.hpp"
#include "style_audit/textstats.hpp"

namespace style_audit {

using ojson = nlohmann::ordered_json;

inline constexpr std::string_view kTieRule = "fractional";
inline constexpr std::string_view kStdConvention = "population";

/// Conventions every manifest and stats report records.
inline ojson conventions_json() {
  const Bm25Params bm25;
  return {
      {"tie_rule", kTieRule},
      {"std_convention", kStdConvention},
      {"tokenizer", "unicode-whitespace split, lowercase, strip edge punctuation, emoji as tokens"},
      {"bm25", {{"k1", bm25.k1}, {"b", bm25.b}, {"idf", "ln(1 + (N - df + 0.5) / (df + 0.5))"},
                {"pool", "all document variants in the run"}}},
      {"bleu", {{"max_order", BleuParams::max_order}, {"zero_precision", "0.1 / hypothesis_length"},
                {"no_unigram_overlap", 0.0}}},
      {"meteor", {{"alpha", MeteorParams::alpha}, {"beta", MeteorParams::beta}, {"gamma", MeteorParams::gamma},
                  {"stages", {"exact", "stem"}}}},
      {"rouge_l", {{"beta", 1.0}}},
  };
}

inline ojson to_json(const UnfairnessReport& r) {
  ojson avg = ojson::object();
  for (auto s : kAllStyles) avg[std::string(to_string(s))] = r.avg_ranks[s];
  return {{"scorer", r.scorer},
          {"query_style", to_string(r.query_style)},
          {"n_groups", r.n_groups},
          {"avg_ranks", std::move(avg)},
          {"unfairness", r.unfairness},
          {"std_convention", kStdConvention},
          {"tie_rule", kTieRule}};
}

inline ojson to_json(const QueryStyleMatrix& m) {
  ojson rows = ojson::object();
  for (auto s : kAllStyles) rows[std::string(to_string(s))] = to_json(m.rows[index_of(s)]);
  return {{"scorer", m.scorer}, {"rows", std::move(rows)}, {"avg", m.avg}, {"std", m.std}};
}

inline ojson to_json(const AnswerStyleReport& r) {
  ojson systems = ojson::array();
  for (const auto& s : r.systems) {
    systems.push_back({{"system", s.system_id}, {"mean_score", s.mean_score}, {"n", s.n_answers}});
  }
  return {{"scorer", r.scorer}, {"systems", std::move(systems)}, {"unfairness", r.unfairness},
          {"std_convention", kStdConvention}};
}

inline ojson to_json(const std::vector<StyleStatsRow>& rows, Side side) {
  ojson out_rows = ojson::array();
  for (const auto& r : rows) {
    out_rows.push_back({{"style", to_string(r.style)},
                        {"n", r.n},
                        {"mean_tokens", r.mean_token_length},
                        {"mean_bleu", r.mean_bleu},
                        {"mean_meteor", r.mean_meteor},
                        {"mean_rouge_l", r.mean_rouge_l}});
  }
  return {{"side", to_string(side)}, {"rows", std::move(out_rows)}, {"conventions", conventions_json()}};
}

// ---------------------------------------------------------------------------
// CSV

inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline std::string csv_row(std::initializer_list<std::string> fields) {
  std::string line;
  bool first = true;
  for (const auto& f : fields) {
    if (!first) line += ',';
    line += f;
    first = false;
  }
  return line + "\n";
}

inline std::string style_columns() {
  std::string s;
  for (auto st : kAllStyles) {
    s += ',';
    s += to_string(st);
  }
  return s;
}

inline std::string reports_csv(std::span<const UnfairnessReport> reports) {
  std::string out = "scorer,query_style,n_groups" + style_columns() + ",unfairness\n";
  for (const auto& r : reports) {
    out += csv_field(r.scorer) + "," + std::string(to_string(r.query_style)) + "," + std::to_string(r.n_groups);
    for (auto s : kAllStyles) out += "," + format_real(r.avg_ranks[s]);
    out += "," + format_real(r.unfairness) + "\n";
  }
  return out;
}

/// One row per scorer, one unfairness column per query style, then avg/std.
inline std::string matrices_csv(std::span<const QueryStyleMatrix> matrices) {
  std::string out = "scorer" + style_columns() + ",avg,std\n";
  for (const auto& m : matrices) {
    out += csv_field(m.scorer);
    for (const auto& row : m.rows) out += "," + format_real(row.unfairness);
    out += "," + format_real(m.avg) + "," + format_real(m.std) + "\n";
  }
  return out;
}

inline std::string answers_csv(std::span<const AnswerStyleReport> reports) {
  std::string out = "scorer,system,mean_score,n,unfairness\n";
  for (const auto& r : reports) {
    for (const auto& s : r.systems) {
      out += csv_row({csv_field(r.scorer), csv_field(s.system_id), format_real(s.mean_score),
                      std::to_string(s.n_answers), format_real(r.unfairness)});
    }
  }
  return out;
}

inline std::string stats_csv(const std::vector<StyleStatsRow>& rows) {
  std::string out = "style,n,mean_tokens,mean_bleu,mean_meteor,mean_rouge_l\n";
  for (const auto& r : rows) {
    out += csv_row({std::string(to_string(r.style)), std::to_string(r.n), format_real(r.mean_token_length),
                    format_real(r.mean_bleu), format_real(r.mean_meteor), format_real(r.mean_rouge_l)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Plot data

namespace detail {

inline std::string slug(std::string_view s) {
  std::string out;
  for (char c : s) {
    const bool keep = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' ||
                      c == '-' || c == '_';
    out += keep ? c : '_';
  }
  return out;
}

inline std::string series_csv(const UnfairnessReport& r) {
  const auto baseline = format_real(r.avg_ranks[StyleId::Original]);
  std::string out = "style,mean_rank,baseline\n";
  for (auto s : kAllStyles) {
    out += std::string(to_string(s)) + "," + format_real(r.avg_ranks[s]) + "," + baseline + "\n";
  }
  return out;
}

}  // namespace detail

/// Writes one `style,mean_rank,baseline` series per report into `dir`; the
/// baseline column repeats the original document's mean rank. Returns the
/// written paths in report order.
inline std::vector<std::filesystem::path> emit_plot_data(std::span<const UnfairnessReport> reports,
                                                         const std::filesystem::path& dir) {
  if (reports.empty()) throw std::invalid_argument("emit_plot_data: no reports");
  std::vector<std::filesystem::path> written;
  std::set<std::string> used;
  for (const auto& r : reports) {
    const auto base = detail::slug(r.scorer) + "__query_" + std::string(to_string(r.query_style));
    auto name = base;
    for (int k = 2; !used.insert(name).second; ++k) name = base + "-" + std::to_string(k);
    const auto path = dir / (name + ".csv");
    write_file_atomic(path, detail::series_csv(r));
    written.push_back(path);
  }
  return written;
}

inline std::vector<std::filesystem::path> emit_plot_data(std::span<const QueryStyleMatrix> matrices,
                                                         const std::filesystem::path& dir) {
  std::vector<UnfairnessReport> rows;
  for (const auto& m : matrices) rows.insert(rows.end(), m.rows.begin(), m.rows.end());
  return emit_plot_data(std::span<const UnfairnessReport>(rows), dir);
}

}  // namespace style_audit
