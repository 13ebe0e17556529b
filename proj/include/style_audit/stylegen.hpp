#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cstddef>
#include <exception>
#include <filesystem>
#include <future>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "style_audit/corpus.hpp"
#include "style_audit/digest.hpp"
#include "style_audit/disk_cache.hpp"
#include "style_audit/error.hpp"
#include "style_audit/style.hpp"
#include "style_audit/parallel.hpp"
#include "style_audit/tokenizer.hpp"
#include "style_audit/transport.hpp"

namespace style_audit {

struct StylePrompt {
  StyleId style;
  std::string_view instruction;
};

inline constexpr std::string_view kRewriteInstruction = "Please rewrite the following text";

// Style0 is the model's default rewrite; Style1..Style8 are personas.
inline constexpr std::array<StylePrompt, kNumGeneratedStyles> kStyleCatalog = {{
    {StyleId::Style0, kRewriteInstruction},
    {StyleId::Style1,
     "Your writing style is formal, efficient, and concise, using professional language and "
     "focusing on facts, figures, and data."},
    {StyleId::Style2,
     "Your writing style is clear and using simple language, often avoiding idioms or complex "
     "sentences."},
    {StyleId::Style3,
     "Your writing style is informal, often includes emojis, abbreviations, and internet slang."},
    {StyleId::Style4,
     "Your writing style is polite, respectful, and somewhat formal. You use more traditional "
     "language and avoid using slang or abbreviations."},
    {StyleId::Style5,
     "Your writing style is formal, detailed, and precise manner with structured texts. You use "
     "technical language and focus on evidence-based arguments."},
    {StyleId::Style6, "Your writing style is energetic, motivational, and positive manner."},
    {StyleId::Style7,
     "Your writing style is friendly, casual, and empathetic manner with personal anecdotes"},
    {StyleId::Style8,
     "Your writing style is expressive and emotive (passionate, engaging, empathetic). You use "
     "metaphors, analogies, and storytelling to convey your points."},
}};

inline constexpr const std::array<StylePrompt, kNumGeneratedStyles>& style_catalog() noexcept {
  return kStyleCatalog;
}

struct GenerationConfig {
  std::string model_id = "gpt-4o";
  double temperature = 0.5;
  int max_retries = 3;
  int parallelism = 8;
  double min_length_ratio = 0.1;
  std::chrono::milliseconds retry_backoff{500};

  void validate() const {
    if (model_id.empty()) throw ConfigError("generation model id is empty");
    if (!(temperature >= 0.0)) throw ConfigError("temperature must be >= 0");
    if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
    if (parallelism < 1) throw ConfigError("parallelism must be >= 1");
    if (!(min_length_ratio > 0.0 && min_length_ratio < 1.0)) {
      throw ConfigError("min_length_ratio must lie in (0, 1)");
    }
  }
};

/// Chat-completion request body for one rewrite. Personas go in the system
/// message; the task is always the plain rewrite instruction plus the text.
inline nlohmann::json chat_request(std::string_view text, StyleId style,
                                   const GenerationConfig& config) {
  if (style == StyleId::Original) throw std::invalid_argument("cannot rewrite into the original style");
  auto messages = nlohmann::json::array();
  if (style != StyleId::Style0) {
    const auto& prompt = kStyleCatalog[index_of(style) - 1];
    messages.push_back({{"role", "system"}, {"content", prompt.instruction}});
  }
  std::string task(kRewriteInstruction);
  task += ":\n\n";
  task += text;
  messages.push_back({{"role", "user"}, {"content", std::move(task)}});
  return {{"model", config.model_id},
          {"temperature", config.temperature},
          {"messages", std::move(messages)}};
}

inline std::string chat_reply_content(const nlohmann::json& reply) {
  try {
    const auto& content = reply.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) throw EndpointError("chat reply content is not a string");
    return content.get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw EndpointError(std::string("unparsable chat reply: ") + e.what());
  }
}

/// Rewrites `text` in `style`. Replies that are empty or shorter than
/// `min_length_ratio` of the source (in tokens) count as refusals and are
/// retried like transport errors.
inline std::string rewrite(std::string_view text, StyleId style, const GenerationConfig& config,
                           JsonTransport& endpoint) {
  if (trim(text).empty()) throw std::invalid_argument("rewrite: source text is empty");
  const auto body = chat_request(text, style, config);
  const auto source_tokens = tokenize(text).size();
  const auto min_tokens = config.min_length_ratio * static_cast<double>(source_tokens);
  return with_retries(config.max_retries, config.retry_backoff, [&] {
    auto out = chat_reply_content(endpoint.post("/v1/chat/completions", body));
    const auto trimmed = trim(out);
    const auto n = tokenize(trimmed).size();
    if (trimmed.empty() || static_cast<double>(n) < min_tokens) {
      throw GenerationError("rewrite into " + std::string(to_string(style)) + " too short (" +
                            std::to_string(n) + " of " + std::to_string(source_tokens) +
                            " source tokens)");
    }
    return std::string(trimmed);
  });
}

/// Freezes the first accepted rewrite per (model, style, source text). Keys
/// are deduplicated in-process, so concurrent callers share one request, and
/// a failed key is not retried within the same cache lifetime.
class GenerationCache {
 public:
  GenerationCache() = default;
  explicit GenerationCache(const std::filesystem::path& cache_dir)
      : store_(cache_dir.empty() ? std::filesystem::path{} : cache_dir / "gen") {}

  static std::string key(std::string_view model_id, StyleId style, std::string_view text) {
    return sha256_hex({model_id, to_string(style), text});
  }

  template <typename Produce>
  std::string get_or_produce(std::string_view model_id, StyleId style, std::string_view text,
                             Produce&& produce) {
    const auto k = key(model_id, style, text);
    std::shared_future<std::string> fut;
    std::promise<std::string> promise;
    bool owner = false;
    {
      std::lock_guard lock(mu_);
      auto it = entries_.find(k);
      if (it != entries_.end()) {
        fut = it->second;
      } else {
        fut = promise.get_future().share();
        entries_.emplace(k, fut);
        owner = true;
      }
    }
    if (owner) {
      try {
        std::string value;
        if (auto hit = load(k, model_id, style)) {
          value = std::move(*hit);
        } else {
          value = produce();
          store_.put(k, {{"model", model_id}, {"style", to_string(style)}, {"output", value}});
        }
        promise.set_value(std::move(value));
      } catch (...) {
        promise.set_exception(std::current_exception());
      }
    }
    return fut.get();
  }

  const JsonFileStore& store() const noexcept { return store_; }

 private:
  std::optional<std::string> load(const std::string& k, std::string_view model_id, StyleId style) {
    auto j = store_.get(k);
    if (!j || !j->is_object()) return std::nullopt;
    const auto out = j->find("output");
    if (out == j->end() || !out->is_string()) return std::nullopt;
    if (j->value("model", "") != model_id || j->value("style", "") != to_string(style)) {
      return std::nullopt;
    }
    return out->get<std::string>();
  }

  JsonFileStore store_;
  std::mutex mu_;
  std::map<std::string, std::shared_future<std::string>> entries_;
};

struct SourcePair {
  std::string group_id;
  std::string query;
  std::string document;
};

struct BuildResult {
  std::vector<AuditGroup> groups;
  std::size_t attempted = 0;
  std::size_t failed = 0;
  std::vector<std::string> failures;  // "<group_id>/<side>/<style>: <reason>"
};

/// Builds styled groups from (query, document) pairs. Per-variant failures
/// leave that variant absent; only a run in which every request fails is an
/// error. Output order matches input order.
inline BuildResult build_groups(const std::vector<SourcePair>& pairs, const GenerationConfig& config,
                                JsonTransport& endpoint, GenerationCache& cache,
                                bool rewrite_queries) {
  config.validate();
  if (pairs.empty()) throw CorpusError("build_groups: no source pairs");
  std::unordered_set<std::string> ids;
  for (const auto& p : pairs) {
    if (p.group_id.empty()) throw CorpusError("build_groups: empty group_id");
    if (!ids.insert(p.group_id).second) throw CorpusError("build_groups: duplicate group_id " + p.group_id);
    if (trim(p.query).empty() || trim(p.document).empty()) {
      throw CorpusError("build_groups: empty text in group " + p.group_id);
    }
  }

  struct Task {
    std::size_t pair;
    bool query_side;
    StyleId style;
  };
  std::vector<Task> tasks;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    for (auto s : kGeneratedStyles) tasks.push_back({i, false, s});
    if (rewrite_queries) {
      for (auto s : kGeneratedStyles) tasks.push_back({i, true, s});
    }
  }

  std::vector<std::optional<std::string>> outputs(tasks.size());
  std::vector<std::string> errors(tasks.size());
  parallel_for(tasks.size(), config.parallelism, [&](std::size_t t) {
    const auto& task = tasks[t];
    const auto& pair = pairs[task.pair];
    const std::string source(trim(task.query_side ? pair.query : pair.document));
    try {
      outputs[t] = cache.get_or_produce(config.model_id, task.style, source, [&] {
        return rewrite(source, task.style, config, endpoint);
      });
    } catch (const std::exception& e) {
      errors[t] = e.what();
    }
  });

  BuildResult result;
  result.attempted = tasks.size();
  for (const auto& p : pairs) {
    AuditGroup g;
    g.group_id = p.group_id;
    g.query.set(StyleId::Original, std::string(trim(p.query)));
    g.document.set(StyleId::Original, std::string(trim(p.document)));
    result.groups.push_back(std::move(g));
  }
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const auto& task = tasks[t];
    auto& g = result.groups[task.pair];
    if (outputs[t]) {
      (task.query_side ? g.query : g.document).set(task.style, std::move(*outputs[t]));
    } else {
      ++result.failed;
      result.failures.push_back(g.group_id + "/" + (task.query_side ? "query" : "document") + "/" +
                                std::string(to_string(task.style)) + ": " + errors[t]);
    }
  }
  if (result.attempted > 0 && result.failed == result.attempted) {
    throw EndpointError("every rewrite request failed; first error: " + errors.front());
  }
  return result;
}

}  // namespace style_audit
