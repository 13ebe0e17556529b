#pragma once

#include <chrono>
#include <ctime>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "style_audit/answereval.hpp"
#include "style_audit/corpus.hpp"
#include "style_audit/digest.hpp"
#include "style_audit/disk_cache.hpp"
#include "style_audit/embedding.hpp"
#include "style_audit/error.hpp"
#include "style_audit/http_transport.hpp"
#include "style_audit/rankeval.hpp"
#include "style_audit/report.hpp"
#include "style_audit/scorers.hpp"
#include "style_audit/stylegen.hpp"
#include "style_audit/textstats.hpp"

namespace style_audit {

inline constexpr std::string_view kVersion = "1.0.0";

enum class Command { generate_styles, stats, audit_docs, audit_queries, audit_answers, cache_gc };
enum class OutputFormat { json, csv };

inline std::string_view to_string(Command c) noexcept {
  switch (c) {
    case Command::generate_styles: return "generate-styles";
    case Command::stats: return "stats";
    case Command::audit_docs: return "audit-docs";
    case Command::audit_queries: return "audit-queries";
    case Command::audit_answers: return "audit-answers";
    case Command::cache_gc: return "cache-gc";
  }
  return "";
}

struct RunConfig {
  Command command = Command::audit_docs;
  std::filesystem::path corpus_path;
  std::vector<std::string> scorer_specs;
  std::string endpoint;       // default embedding base URL
  std::string chat_endpoint;  // generate-styles
  std::filesystem::path cache_dir;
  std::filesystem::path out_path;
  OutputFormat format = OutputFormat::json;
  int parallelism = 8;
  StyleId query_style = StyleId::Original;
  Side side = Side::document;
  bool correct_only = true;
  bool rewrite_queries = false;
  GenerationConfig generation;
  std::filesystem::path plot_dir;
  std::optional<std::uintmax_t> cache_max_bytes;
  int max_retries = 3;
};

/// Side effects the harness needs from outside; tests swap these.
struct RunEnvironment {
  std::function<std::unique_ptr<JsonTransport>(const std::string& base_url)> transport_factory =
      [](const std::string& url) { return make_http_transport(url, api_key_from_env()); };
  std::function<std::string()> clock = [] {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
  };
  std::ostream* log = &std::cerr;
};

struct RunOutcome {
  int exit_code = 0;
  std::string message;
  std::vector<std::filesystem::path> artifacts;
};

namespace detail {

inline std::vector<ScorerDescriptor> parse_scorers(const RunConfig& c) {
  std::vector<ScorerDescriptor> out;
  for (const auto& spec_list : c.scorer_specs) {
    for (const auto& spec : split_scorer_list(spec_list)) out.push_back(ScorerDescriptor::parse(spec, c.endpoint));
  }
  std::set<std::string> labels;
  for (const auto& d : out) {
    if (!labels.insert(d.label()).second) throw ConfigError("scorer listed twice: " + d.label());
  }
  return out;
}

inline bool is_audit(Command c) {
  return c == Command::audit_docs || c == Command::audit_queries || c == Command::audit_answers;
}

inline std::vector<ScorerDescriptor> validate(const RunConfig& c) {
  if (c.corpus_path.empty() && c.command != Command::cache_gc) throw ConfigError("--corpus is required");
  if (c.out_path.empty() && c.command != Command::cache_gc) throw ConfigError("--out is required");
  if (c.parallelism < 1) throw ConfigError("--parallelism must be >= 1");
  if (c.max_retries < 0) throw ConfigError("--max-retries must be >= 0");
  auto scorers = parse_scorers(c);
  if (is_audit(c.command) && scorers.empty()) throw ConfigError("at least one --scorer is required");
  if (c.command == Command::audit_answers) {
    for (const auto& d : scorers) {
      if (d.kind == ScorerDescriptor::Kind::bm25) {
        throw ConfigError("audit-answers cannot use bm25: its scores are unbounded");
      }
    }
  }
  if (c.command == Command::generate_styles) {
    if (c.chat_endpoint.empty()) throw ConfigError("generate-styles requires --chat-endpoint");
    parse_base_url(c.chat_endpoint);
    c.generation.validate();
  }
  if (c.command == Command::cache_gc) {
    if (c.cache_dir.empty()) throw ConfigError("cache-gc requires --cache-dir");
    if (!c.cache_max_bytes) throw ConfigError("cache-gc requires --max-bytes");
  }
  if (!c.cache_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(c.cache_dir, ec);
    if (ec || !std::filesystem::is_directory(c.cache_dir)) {
      throw ConfigError("cannot create cache directory " + c.cache_dir.string());
    }
  }
  if (!c.out_path.empty() && std::filesystem::is_directory(c.out_path)) {
    throw ConfigError("--out names a directory: " + c.out_path.string());
  }
  return scorers;
}

inline std::string read_file_checked(const std::filesystem::path& p) {
  try {
    return read_file(p);
  } catch (const Error&) {
    throw CorpusError("cannot read corpus file " + p.string());
  }
}

inline void warn(const RunEnvironment& env, const std::string& msg) {
  if (env.log) *env.log << "style-audit: warning: " << msg << "\n";
}

template <typename Keep>
std::vector<AuditGroup> filter_groups(const std::vector<AuditGroup>& groups, const RunEnvironment& env,
                                      std::string_view need, Keep&& keep) {
  std::vector<AuditGroup> kept;
  std::optional<std::string> first_rejected;
  std::size_t rejected = 0;
  for (const auto& g : groups) {
    if (keep(g)) {
      kept.push_back(g);
    } else {
      ++rejected;
      if (!first_rejected) first_rejected = g.group_id;
    }
  }
  if (kept.empty()) {
    if (first_rejected) {
      throw CorpusError("no usable groups: all " + std::to_string(rejected) + " lack " + std::string(need) +
                        " (first incomplete group: " + *first_rejected + ")");
    }
    throw CorpusError("corpus is empty");
  }
  if (rejected > 0) {
    warn(env, "skipped " + std::to_string(rejected) + " group(s) lacking " + std::string(need) +
                  " (first: " + *first_rejected + ")");
  }
  return kept;
}

}  // namespace detail

/// Executes one configured command. Errors are reported through the
/// outcome's exit code and message rather than thrown.
inline RunOutcome run(const RunConfig& config, const RunEnvironment& env = {}) {
  RunOutcome outcome;
  std::string stage = "config";
  try {
    const auto descriptors = detail::validate(config);

    if (config.command == Command::cache_gc) {
      stage = "cache";
      const auto reclaimed = cache_gc(config.cache_dir, *config.cache_max_bytes);
      outcome.message = "reclaimed " + std::to_string(reclaimed) + " bytes";
      return outcome;
    }

    EmbeddingCache emb_cache(config.cache_dir);
    GenerationCache gen_cache(config.cache_dir);
    ScorerEnvironment scorer_env{&emb_cache, env.transport_factory, config.parallelism, config.max_retries};

    ojson manifest = {{"tool", "style-audit"},
                      {"version", kVersion},
                      {"command", to_string(config.command)},
                      {"corpus", config.corpus_path.string()},
                      {"corpus_sha256", nullptr},
                      {"scorers", ojson::array()},
                      {"conventions", conventions_json()}};
    for (const auto& d : descriptors) manifest["scorers"].push_back(d.label());

    stage = "corpus";
    const auto corpus_bytes = detail::read_file_checked(config.corpus_path);
    manifest["corpus_sha256"] = sha256_hex(corpus_bytes);

    std::string content;
    std::vector<UnfairnessReport> plot_reports;
    std::vector<QueryStyleMatrix> plot_matrices;

    switch (config.command) {
      case Command::generate_styles: {
        const auto groups = load_groups(config.corpus_path);
        if (groups.empty()) throw CorpusError("corpus is empty");
        std::vector<SourcePair> pairs;
        for (const auto& g : groups) {
          pairs.push_back({g.group_id, g.query.at(StyleId::Original), g.document.at(StyleId::Original)});
        }
        stage = "stylegen";
        auto cfg = config.generation;
        cfg.parallelism = config.parallelism;
        cfg.max_retries = config.max_retries;
        auto transport = env.transport_factory(config.chat_endpoint);
        const auto result = build_groups(pairs, cfg, *transport, gen_cache, config.rewrite_queries);
        for (const auto& f : result.failures) detail::warn(env, "generation failed: " + f);
        content = serialize_groups(result.groups);
        manifest["generation"] = {{"model", cfg.model_id},
                                  {"temperature", cfg.temperature},
                                  {"max_retries", cfg.max_retries},
                                  {"min_length_ratio", cfg.min_length_ratio},
                                  {"rewrite_queries", config.rewrite_queries},
                                  {"attempted", result.attempted},
                                  {"failed", result.failed}};
        manifest["n_groups"] = result.groups.size();
        break;
      }
      case Command::stats: {
        const auto all = load_groups(config.corpus_path);
        const auto groups = detail::filter_groups(all, env, std::string("a complete ") +
                                                                std::string(to_string(config.side)) + " side",
                                                  [&](const AuditGroup& g) {
                                                    return (config.side == Side::document ? g.document : g.query)
                                                        .complete();
                                                  });
        stage = "textstats";
        const auto rows = style_stats(groups, config.side, config.parallelism);
        content = config.format == OutputFormat::json ? to_json(rows, config.side).dump(2) + "\n" : stats_csv(rows);
        manifest["n_groups"] = groups.size();
        manifest["rejected_groups"] = all.size() - groups.size();
        break;
      }
      case Command::audit_docs: {
        const auto all = load_groups(config.corpus_path);
        const auto groups = detail::filter_groups(
            all, env, "all document styles and query " + std::string(to_string(config.query_style)),
            [&](const AuditGroup& g) { return g.document.complete() && g.query.has(config.query_style); });
        stage = "rankeval";
        for (const auto& d : descriptors) {
          auto scorer = make_scorer(d, scorer_env);
          plot_reports.push_back(audit_document_styles(groups, *scorer, config.query_style));
        }
        if (config.format == OutputFormat::json) {
          ojson arr = ojson::array();
          for (const auto& r : plot_reports) arr.push_back(to_json(r));
          content = arr.dump(2) + "\n";
        } else {
          content = reports_csv(plot_reports);
        }
        manifest["n_groups"] = groups.size();
        manifest["rejected_groups"] = all.size() - groups.size();
        manifest["query_style"] = to_string(config.query_style);
        break;
      }
      case Command::audit_queries: {
        const auto all = load_groups(config.corpus_path);
        const auto filtered = require_complete(all, true);
        if (filtered.kept.empty()) {
          throw CorpusError(filtered.first_rejected
                                ? "no group has all query and document styles (first incomplete group: " +
                                      *filtered.first_rejected + ")"
                                : std::string("corpus is empty"));
        }
        if (filtered.rejected > 0) {
          detail::warn(env, "skipped " + std::to_string(filtered.rejected) + " incomplete group(s) (first: " +
                                *filtered.first_rejected + ")");
        }
        stage = "rankeval";
        for (const auto& d : descriptors) {
          auto scorer = make_scorer(d, scorer_env);
          plot_matrices.push_back(audit_query_styles(filtered.kept, *scorer));
        }
        if (config.format == OutputFormat::json) {
          ojson arr = ojson::array();
          for (const auto& m : plot_matrices) arr.push_back(to_json(m));
          content = arr.dump(2) + "\n";
        } else {
          content = matrices_csv(plot_matrices);
        }
        manifest["n_groups"] = filtered.kept.size();
        manifest["rejected_groups"] = filtered.rejected;
        break;
      }
      case Command::audit_answers: {
        const auto records = load_qa(config.corpus_path);
        if (records.empty()) throw CorpusError("QA corpus is empty");
        stage = "answereval";
        std::vector<AnswerStyleReport> reports;
        for (const auto& d : descriptors) {
          auto scorer = make_scorer(d, scorer_env);
          AnswerStyleReport r;
          r.scorer = d.label();
          r.systems = per_system_correctness(records, *scorer, config.correct_only);
          if (r.systems.size() < 2) {
            throw CorpusError("answer-style unfairness needs at least two systems with qualifying answers");
          }
          r.unfairness = answer_style_unfairness(r.systems);
          reports.push_back(std::move(r));
        }
        if (config.format == OutputFormat::json) {
          ojson arr = ojson::array();
          for (const auto& r : reports) arr.push_back(to_json(r));
          content = arr.dump(2) + "\n";
        } else {
          content = answers_csv(reports);
        }
        manifest["n_records"] = records.size();
        manifest["correct_only"] = config.correct_only;
        break;
      }
      case Command::cache_gc: break;
    }

    stage = "report";
    write_file_atomic(config.out_path, content);
    outcome.artifacts.push_back(config.out_path);
    manifest["timestamp"] = env.clock();
    auto manifest_path = config.out_path;
    manifest_path += ".manifest.json";
    write_file_atomic(manifest_path, manifest.dump(2) + "\n");
    outcome.artifacts.push_back(manifest_path);

    if (!config.plot_dir.empty()) {
      std::vector<std::filesystem::path> plots;
      if (!plot_reports.empty()) plots = emit_plot_data(std::span<const UnfairnessReport>(plot_reports), config.plot_dir);
      else if (!plot_matrices.empty()) plots = emit_plot_data(std::span<const QueryStyleMatrix>(plot_matrices), config.plot_dir);
      else detail::warn(env, "--plot-dir ignored: " + std::string(to_string(config.command)) + " has no rank series");
      outcome.artifacts.insert(outcome.artifacts.end(), plots.begin(), plots.end());
    }

    if (config.cache_max_bytes && !config.cache_dir.empty()) {
      stage = "cache";
      auto keep = emb_cache.store().touched();
      const auto gen_touched = gen_cache.store().touched();
      keep.insert(gen_touched.begin(), gen_touched.end());
      cache_gc(config.cache_dir, *config.cache_max_bytes, keep);
    }
  } catch (const Error& e) {
    outcome.exit_code = e.exit_code();
    outcome.message = "[" + stage + "] " + e.what();
  } catch (const std::exception& e) {
    outcome.exit_code = 5;
    outcome.message = "[" + stage + "] internal error: " + e.what();
  }
  return outcome;
}

/// Thrown when argument parsing already printed help or a usage error.
struct CliExit {
  int code;
};

/// Builds a RunConfig from argv. Throws CliExit for help/usage outcomes and
/// ConfigError for invalid values.
inline RunConfig parse_command_line(int argc, const char* const* argv) {
  RunConfig c;
  CLI::App app{"Writing-style bias audit for retrieval and answer-correctness scorers", "style-audit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  std::string query_style = "original", side = "document", format = "json";
  std::uintmax_t max_bytes = 0;
  std::vector<CLI::Option*> max_bytes_opts;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--corpus", c.corpus_path, "Corpus JSONL file")->required();
    sub->add_option("--out", c.out_path, "Output report path")->required();
    sub->add_option("--cache-dir", c.cache_dir, "On-disk cache directory (memory-only when omitted)");
    sub->add_option("--format", format, "Output format")->check(CLI::IsMember({"json", "csv"}));
    sub->add_option("--parallelism", c.parallelism, "Concurrent endpoint requests")->check(CLI::PositiveNumber);
    sub->add_option("--max-retries", c.max_retries, "Retries per endpoint request")->check(CLI::NonNegativeNumber);
    max_bytes_opts.push_back(
        sub->add_option("--cache-max-bytes", max_bytes, "Evict least-recently-used cache entries above this size"));
  };
  auto add_scorers = [&](CLI::App* sub) {
    sub->add_option("--scorer", c.scorer_specs, "Scorer SPEC[,SPEC...]: embedding:<model>@<url> | bm25[:k1=..,b=..] | mock:<spec>")
        ->required();
    sub->add_option("--endpoint", c.endpoint, "Default embedding endpoint base URL");
  };

  auto* gen = app.add_subcommand("generate-styles", "Rewrite corpus originals into the nine writing styles");
  add_common(gen);
  gen->add_option("--chat-endpoint", c.chat_endpoint, "Chat-completion endpoint base URL")->required();
  gen->add_option("--chat-model", c.generation.model_id, "Chat model id");
  gen->add_option("--temperature", c.generation.temperature, "Sampling temperature");
  gen->add_option("--min-length-ratio", c.generation.min_length_ratio, "Reject rewrites shorter than this fraction");
  gen->add_flag("--rewrite-queries", c.rewrite_queries, "Also rewrite queries");

  auto* stats = app.add_subcommand("stats", "Length, BLEU, METEOR and ROUGE-L per style");
  add_common(stats);
  stats->add_option("--side", side, "Which texts to describe")->check(CLI::IsMember({"document", "query"}));

  auto* docs = app.add_subcommand("audit-docs", "Rank document styles against one query style");
  add_common(docs);
  add_scorers(docs);
  docs->add_option("--query-style", query_style, "Query variant to use (original, style_0..style_8)");

  docs->add_option("--plot-dir", c.plot_dir, "Write per-style mean-rank series for plotting");

  auto* queries = app.add_subcommand("audit-queries", "Document-style audit for every query style");
  add_common(queries);
  add_scorers(queries);
  queries->add_option("--plot-dir", c.plot_dir, "Write per-style mean-rank series for plotting");

  auto* answers = app.add_subcommand("audit-answers", "Correctness-score bias across answering systems");
  add_common(answers);
  add_scorers(answers);
  bool all_answers = false;
  answers->add_flag("--all-answers", all_answers, "Include answers not annotated as correct");

  auto* gc = app.add_subcommand("cache-gc", "Shrink the on-disk cache");
  gc->add_option("--cache-dir", c.cache_dir, "Cache directory")->required();
  max_bytes_opts.push_back(gc->add_option("--max-bytes", max_bytes, "Target size in bytes")->required());

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    throw CliExit{app.exit(e) == 0 ? 0 : 2};
  }

  if (*gen) c.command = Command::generate_styles;
  else if (*stats) c.command = Command::stats;
  else if (*docs) c.command = Command::audit_docs;
  else if (*queries) c.command = Command::audit_queries;
  else if (*answers) c.command = Command::audit_answers;
  else c.command = Command::cache_gc;

  const auto qs = parse_style(query_style);
  if (!qs) throw ConfigError("invalid --query-style \"" + query_style + "\"");
  c.query_style = *qs;
  c.side = side == "query" ? Side::query : Side::document;
  c.format = format == "csv" ? OutputFormat::csv : OutputFormat::json;
  c.correct_only = !all_answers;
  for (const auto* opt : max_bytes_opts) {
    if (opt->count() > 0) c.cache_max_bytes = max_bytes;
  }
  return c;
}

/// CLI entry point; returns the process exit status.
inline int main_entry(int argc, const char* const* argv, const RunEnvironment& env = {}) {
  RunConfig config;
  try {
    config = parse_command_line(argc, argv);
  } catch (const CliExit& e) {
    return e.code;
  } catch (const ConfigError& e) {
    std::cerr << "style-audit: " << e.what() << "\n";
    return 2;
  }
  const auto outcome = run(config, env);
  if (outcome.exit_code != 0) {
    std::cerr << "style-audit: error " << outcome.message << "\n";
  } else if (!outcome.message.empty()) {
    std::cout << outcome.message << "\n";
  }
  return outcome.exit_code;
}

}  // namespace style_audit
