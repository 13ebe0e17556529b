#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "style_audit/error.hpp"
#include "style_audit/style.hpp"

namespace style_audit {

inline std::string_view trim(std::string_view s) noexcept {
  constexpr std::string_view ws = " \t\r\n\f\v";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

/// Texts of one item (query or document) keyed by style. Absent styles are
/// generation failures or styles never requested.
class StyleVariants {
 public:
  bool has(StyleId s) const noexcept { return texts_[index_of(s)].has_value(); }
  const std::string& at(StyleId s) const {
    const auto& t = texts_[index_of(s)];
    if (!t) throw std::out_of_range("missing variant " + std::string(to_string(s)));
    return *t;
  }
  void set(StyleId s, std::string text) { texts_[index_of(s)] = std::move(text); }
  void erase(StyleId s) { texts_[index_of(s)].reset(); }

  bool complete() const noexcept {
    for (const auto& t : texts_) {
      if (!t) return false;
    }
    return true;
  }

  std::size_t size() const noexcept {
    std::size_t n = 0;
    for (const auto& t : texts_) n += t.has_value();
    return n;
  }

  std::optional<StyleId> first_missing() const noexcept {
    for (auto s : kAllStyles) {
      if (!has(s)) return s;
    }
    return std::nullopt;
  }

  friend bool operator==(const StyleVariants&, const StyleVariants&) = default;

 private:
  std::array<std::optional<std::string>, kNumStyles> texts_;
};

/// A query and a document, each with up to nine styled rewrites.
struct AuditGroup {
  std::string group_id;
  StyleVariants query;
  StyleVariants document;

  bool complete() const noexcept { return query.complete() && document.complete(); }
  bool complete(bool need_query_styles) const noexcept {
    return document.complete() && (!need_query_styles || query.complete());
  }

  friend bool operator==(const AuditGroup&, const AuditGroup&) = default;
};

struct QAAnswer {
  std::string system_id;
  std::string text;
  bool human_correct = false;

  friend bool operator==(const QAAnswer&, const QAAnswer&) = default;
};

struct QARecord {
  std::string question;
  std::string gt_answer;
  std::vector<QAAnswer> answers;

  friend bool operator==(const QARecord&, const QARecord&) = default;
};

namespace detail {

inline StyleVariants parse_variants(const nlohmann::json& obj, std::string_view field,
                                    std::size_t line_no) {
  const auto where = "line " + std::to_string(line_no) + ": ";
  if (!obj.is_object()) throw CorpusError(where + "\"" + std::string(field) + "\" must be an object");
  StyleVariants out;
  for (const auto& [key, value] : obj.items()) {
    const auto style = parse_style(key);
    if (!style) throw CorpusError(where + "unknown style key \"" + key + "\" under " + std::string(field));
    if (!value.is_string()) {
      throw CorpusError(where + std::string(field) + "." + key + " must be a string");
    }
    const auto text = trim(value.get_ref<const std::string&>());
    if (text.empty()) throw CorpusError(where + std::string(field) + "." + key + " is empty");
    out.set(*style, std::string(text));
  }
  if (!out.has(StyleId::Original)) {
    throw CorpusError(where + "missing required key \"original\" under " + std::string(field));
  }
  return out;
}

inline nlohmann::json variants_to_json(const StyleVariants& v) {
  auto obj = nlohmann::json::object();
  for (auto s : kAllStyles) {
    if (v.has(s)) obj[std::string(to_string(s))] = v.at(s);
  }
  return obj;
}

template <typename OnLine>
void for_each_jsonl(const std::filesystem::path& path, OnLine&& on_line) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("cannot read corpus file " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw CorpusError("line " + std::to_string(line_no) + ": malformed JSON: " + e.what());
    }
    if (!j.is_object()) throw CorpusError("line " + std::to_string(line_no) + ": expected a JSON object");
    on_line(j, line_no);
  }
  if (in.bad()) throw CorpusError("I/O error reading " + path.string());
}

}  // namespace detail

inline AuditGroup group_from_json(const nlohmann::json& j, std::size_t line_no = 0) {
  const auto where = "line " + std::to_string(line_no) + ": ";
  AuditGroup g;
  const auto id = j.find("group_id");
  if (id == j.end() || !id->is_string() || id->get_ref<const std::string&>().empty()) {
    throw CorpusError(where + "\"group_id\" must be a non-empty string");
  }
  g.group_id = id->get<std::string>();
  const auto q = j.find("query");
  if (q == j.end()) throw CorpusError(where + "missing \"query\"");
  const auto d = j.find("document");
  if (d == j.end()) throw CorpusError(where + "missing \"document\"");
  g.query = detail::parse_variants(*q, "query", line_no);
  g.document = detail::parse_variants(*d, "document", line_no);
  return g;
}

inline nlohmann::json to_json(const AuditGroup& g) {
  return {{"group_id", g.group_id},
          {"query", detail::variants_to_json(g.query)},
          {"document", detail::variants_to_json(g.document)}};
}

/// Loads a group corpus (one JSON object per line). Blank lines are skipped.
inline std::vector<AuditGroup> load_groups(const std::filesystem::path& path) {
  std::vector<AuditGroup> groups;
  std::unordered_set<std::string> seen;
  detail::for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t line_no) {
    auto g = group_from_json(j, line_no);
    if (!seen.insert(g.group_id).second) {
      throw CorpusError("line " + std::to_string(line_no) + ": duplicate group_id \"" +
                        g.group_id + "\"");
    }
    groups.push_back(std::move(g));
  });
  return groups;
}

inline std::string serialize_groups(const std::vector<AuditGroup>& groups) {
  std::string out;
  for (const auto& g : groups) {
    out += to_json(g).dump();
    out += '\n';
  }
  return out;
}

inline nlohmann::json to_json(const QARecord& r) {
  auto answers = nlohmann::json::array();
  for (const auto& a : r.answers) {
    answers.push_back({{"system", a.system_id}, {"text", a.text}, {"human_correct", a.human_correct}});
  }
  return {{"question", r.question}, {"gt_answer", r.gt_answer}, {"answers", std::move(answers)}};
}

/// Loads QA records. Annotations are preserved; no filtering happens here.
inline std::vector<QARecord> load_qa(const std::filesystem::path& path) {
  std::vector<QARecord> records;
  detail::for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t line_no) {
    const auto where = "record " + std::to_string(records.size()) + " (line " +
                       std::to_string(line_no) + "): ";
    auto str_field = [&](const nlohmann::json& obj, const char* key) {
      const auto it = obj.find(key);
      if (it == obj.end() || !it->is_string()) {
        throw CorpusError(where + "\"" + key + "\" must be a string");
      }
      return std::string(trim(it->get_ref<const std::string&>()));
    };
    QARecord r;
    r.question = str_field(j, "question");
    r.gt_answer = str_field(j, "gt_answer");
    if (r.gt_answer.empty()) throw CorpusError(where + "\"gt_answer\" is empty");
    const auto answers = j.find("answers");
    if (answers == j.end() || !answers->is_array()) {
      throw CorpusError(where + "\"answers\" must be an array");
    }
    std::set<std::string> systems;
    for (const auto& a : *answers) {
      if (!a.is_object()) throw CorpusError(where + "answer entries must be objects");
      QAAnswer ans;
      ans.system_id = str_field(a, "system");
      if (ans.system_id.empty()) throw CorpusError(where + "empty \"system\"");
      ans.text = str_field(a, "text");
      if (ans.text.empty()) throw CorpusError(where + "empty answer text for system \"" + ans.system_id + "\"");
      const auto hc = a.find("human_correct");
      if (hc == a.end() || !hc->is_boolean()) {
        throw CorpusError(where + "\"human_correct\" must be a boolean");
      }
      ans.human_correct = hc->get<bool>();
      if (!systems.insert(ans.system_id).second) {
        throw CorpusError(where + "duplicate system \"" + ans.system_id + "\"");
      }
      r.answers.push_back(std::move(ans));
    }
    records.push_back(std::move(r));
  });
  return records;
}

struct CompletenessFilter {
  std::vector<AuditGroup> kept;
  std::size_t rejected = 0;
  std::optional<std::string> first_rejected;  // group_id
};

/// Keeps groups whose documents (and, when requested, queries) carry all
/// ten styles. Order is preserved.
inline CompletenessFilter require_complete(const std::vector<AuditGroup>& groups,
                                           bool need_query_styles) {
  CompletenessFilter out;
  for (const auto& g : groups) {
    if (g.complete(need_query_styles)) {
      out.kept.push_back(g);
    } else {
      ++out.rejected;
      if (!out.first_rejected) out.first_rejected = g.group_id;
    }
  }
  return out;
}

}  // namespace style_audit
