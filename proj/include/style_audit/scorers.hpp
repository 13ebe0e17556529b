#pragma once

#include <charconv>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "style_audit/bm25.hpp"
#include "style_audit/embedding.hpp"
#include "style_audit/error.hpp"
#include "style_audit/style.hpp"
#include "style_audit/tokenizer.hpp"
#include "style_audit/transport.hpp"

namespace style_audit {

inline std::string format_real(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline double parse_real(std::string_view s, std::string_view what) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw ConfigError("invalid number for " + std::string(what) + ": \"" + std::string(s) + "\"");
  }
  return v;
}

/// Deterministic offline scorer.
///
/// Grammar (after the "mock:" prefix): `<base>[/<option>...]`
///   base    rank   similarity 1/(1 + candidate position)
///           hash   stable pseudo-similarity in [0, 1) of (query, candidate);
///                  exactly 1 when candidate == query
///           const  0.5 for every candidate
///   option  bump=<style>   add `amount` to the candidate in that style slot
///           bump=query     add `amount` to the slot matching the query's style
///           amount=<x>     bump size (default 1)
///           noquery        hash ignores the query text
/// A programmatic `table` of (query, candidate) -> similarity overrides all
/// of the above. Bumps apply only to full ten-candidate lists, whose
/// positions follow canonical style order.
struct MockSpec {
  enum class Base { rank, hash, constant };

  Base base = Base::hash;
  std::optional<StyleId> bump_style;
  bool bump_query_style = false;
  double bump_amount = 1.0;
  bool ignore_query = false;
  std::map<std::pair<std::string, std::string>, double> table;

  static MockSpec parse(std::string_view text) {
    MockSpec m;
    std::size_t pos = 0;
    bool first = true;
    while (pos <= text.size()) {
      const auto slash = text.find('/', pos);
      const auto part = text.substr(pos, slash == std::string_view::npos ? std::string_view::npos : slash - pos);
      if (first) {
        if (part == "rank") m.base = Base::rank;
        else if (part == "hash") m.base = Base::hash;
        else if (part == "const") m.base = Base::constant;
        else throw ConfigError("unknown mock base \"" + std::string(part) + "\" (rank|hash|const)");
        first = false;
      } else if (part == "noquery") {
        m.ignore_query = true;
      } else if (part.starts_with("bump=")) {
        const auto target = part.substr(5);
        if (target == "query") {
          m.bump_query_style = true;
        } else if (auto s = parse_style(target)) {
          m.bump_style = *s;
        } else {
          throw ConfigError("invalid mock bump target \"" + std::string(target) + "\"");
        }
      } else if (part.starts_with("amount=")) {
        m.bump_amount = parse_real(part.substr(7), "mock amount");
      } else {
        throw ConfigError("unknown mock option \"" + std::string(part) + "\"");
      }
      if (slash == std::string_view::npos) break;
      pos = slash + 1;
    }
    return m;
  }

  std::string to_string() const {
    std::string s = base == Base::rank ? "rank" : base == Base::hash ? "hash" : "const";
    if (bump_query_style) s += "/bump=query";
    else if (bump_style) s += "/bump=" + std::string(style_audit::to_string(*bump_style));
    if ((bump_query_style || bump_style) && bump_amount != 1.0) s += "/amount=" + format_real(bump_amount);
    if (ignore_query) s += "/noquery";
    if (!table.empty()) s += "/table";
    return s;
  }
};

struct ScorerDescriptor {
  enum class Kind { embedding, bm25, mock };

  Kind kind = Kind::mock;
  std::string model_id;  // embedding
  std::string base_url;  // embedding
  Bm25Params bm25;       // bm25
  MockSpec mock;         // mock

  /// Stable identifier used in reports (no endpoint address).
  std::string label() const {
    switch (kind) {
      case Kind::embedding: return "embedding:" + model_id;
      case Kind::bm25: return "bm25:k1=" + format_real(bm25.k1) + ",b=" + format_real(bm25.b);
      case Kind::mock: return "mock:" + mock.to_string();
    }
    return {};
  }

  /// Parses one SPEC: `embedding:<model>[@<base_url>]`, `bm25[:k1=..,b=..]`,
  /// or `mock:<spec>`. `default_endpoint` fills in a missing base URL.
  static ScorerDescriptor parse(std::string_view spec, std::string_view default_endpoint = {}) {
    ScorerDescriptor d;
    if (spec.starts_with("embedding:")) {
      d.kind = Kind::embedding;
      const auto rest = spec.substr(10);
      const auto at = rest.find('@');
      d.model_id = std::string(rest.substr(0, at));
      d.base_url = at == std::string_view::npos ? std::string(default_endpoint) : std::string(rest.substr(at + 1));
      if (d.model_id.empty()) throw ConfigError("embedding scorer needs a model id: " + std::string(spec));
      if (d.base_url.empty()) {
        throw ConfigError("embedding scorer " + d.model_id + " has no endpoint (use @URL or --endpoint)");
      }
      parse_base_url(d.base_url);
    } else if (spec == "bm25" || spec.starts_with("bm25:")) {
      d.kind = Kind::bm25;
      auto rest = spec.size() > 4 ? spec.substr(5) : std::string_view{};
      while (!rest.empty()) {
        const auto comma = rest.find(',');
        const auto kv = rest.substr(0, comma);
        const auto eq = kv.find('=');
        if (eq == std::string_view::npos) throw ConfigError("invalid bm25 parameter \"" + std::string(kv) + "\"");
        const auto key = kv.substr(0, eq);
        const auto value = parse_real(kv.substr(eq + 1), key);
        if (key == "k1") d.bm25.k1 = value;
        else if (key == "b") d.bm25.b = value;
        else throw ConfigError("unknown bm25 parameter \"" + std::string(key) + "\"");
        rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
      }
      try {
        d.bm25.validate();
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    } else if (spec.starts_with("mock:")) {
      d.kind = Kind::mock;
      d.mock = MockSpec::parse(spec.substr(5));
    } else {
      throw ConfigError("unknown scorer spec \"" + std::string(spec) + "\"");
    }
    return d;
  }
};

/// Splits a comma-separated SPEC list. Commas inside a bm25 parameter list
/// stay with their spec: a new spec starts only at a known kind prefix.
inline std::vector<std::string> split_scorer_list(std::string_view list) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= list.size()) {
    const auto comma = list.find(',', pos);
    const auto part = list.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
    const bool starts_spec = part.starts_with("embedding:") || part.starts_with("mock:") ||
                             part == "bm25" || part.starts_with("bm25:");
    if (starts_spec || out.empty()) {
      out.emplace_back(part);
    } else {
      out.back() += ",";
      out.back() += part;
    }
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

/// Extra facts the audit knows about a scoring call. Only the mock uses them.
struct ScoreContext {
  std::optional<StyleId> query_style;
};

/// A relevance function over (query, candidate list).
class RelevanceScorer {
 public:
  virtual ~RelevanceScorer() = default;

  virtual const ScorerDescriptor& descriptor() const noexcept = 0;

  /// Announces every document and query the run will score, so scorers can
  /// build pool statistics or warm caches. Optional.
  virtual void prepare(std::span<const std::string> /*documents*/,
                       std::span<const std::string> /*queries*/) {}

  /// One score per candidate, in candidate order.
  virtual std::vector<double> score(std::string_view query, std::span<const std::string> candidates,
                                    const ScoreContext& ctx = {}) = 0;
};

namespace detail {

inline std::uint64_t fnv1a(std::string_view a, std::string_view b, bool with_a) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  };
  if (with_a) {
    mix(a);
    mix(std::string_view("\0", 1));
  }
  mix(b);
  // splitmix64 finalizer
  h ^= h >> 30;
  h *= 0xbf58476d1ce4e5b9ULL;
  h ^= h >> 27;
  h *= 0x94d049bb133111ebULL;
  h ^= h >> 31;
  return h;
}

}  // namespace detail

class MockScorer final : public RelevanceScorer {
 public:
  explicit MockScorer(ScorerDescriptor d) : desc_(std::move(d)) {}

  const ScorerDescriptor& descriptor() const noexcept override { return desc_; }

  double similarity(std::string_view query, std::string_view candidate, std::size_t position) const {
    const auto& m = desc_.mock;
    if (!m.table.empty()) {
      const auto it = m.table.find({std::string(query), std::string(candidate)});
      if (it != m.table.end()) return it->second;
    }
    switch (m.base) {
      case MockSpec::Base::rank: return 1.0 / (1.0 + static_cast<double>(position));
      case MockSpec::Base::constant: return 0.5;
      case MockSpec::Base::hash:
        if (!m.ignore_query && query == candidate) return 1.0;
        return static_cast<double>(detail::fnv1a(query, candidate, !m.ignore_query) >> 11) * 0x1.0p-53;
    }
    return 0.0;
  }

  std::vector<double> score(std::string_view query, std::span<const std::string> candidates,
                            const ScoreContext& ctx = {}) override {
    std::vector<double> out;
    out.reserve(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) out.push_back(similarity(query, candidates[i], i));
    const auto& m = desc_.mock;
    if (candidates.size() == kNumStyles) {
      std::optional<StyleId> target = m.bump_style;
      if (m.bump_query_style) target = ctx.query_style;
      if (target) out[index_of(*target)] += m.bump_amount;
    }
    return out;
  }

 private:
  ScorerDescriptor desc_;
};

class Bm25Scorer final : public RelevanceScorer {
 public:
  explicit Bm25Scorer(ScorerDescriptor d) : desc_(std::move(d)) {}

  const ScorerDescriptor& descriptor() const noexcept override { return desc_; }

  /// Statistics come from the whole run's document pool.
  void prepare(std::span<const std::string> documents, std::span<const std::string>) override {
    index_ = Bm25Index::build(documents, desc_.bm25);
    ids_.clear();
    for (std::size_t i = 0; i < documents.size(); ++i) ids_.emplace(documents[i], i);
  }

  const std::optional<Bm25Index>& index() const noexcept { return index_; }

  std::vector<double> score(std::string_view query, std::span<const std::string> candidates,
                            const ScoreContext& = {}) override {
    if (!index_) prepare(candidates, {});
    const auto terms = tokenize(query);
    std::vector<double> out;
    out.reserve(candidates.size());
    for (const auto& c : candidates) {
      if (const auto it = ids_.find(c); it != ids_.end()) {
        out.push_back(index_->score(terms, it->second));
      } else {
        const auto doc = tokenize(c);
        out.push_back(index_->score_external(terms, doc));
      }
    }
    return out;
  }

 private:
  ScorerDescriptor desc_;
  std::optional<Bm25Index> index_;
  std::unordered_map<std::string, std::size_t> ids_;
};

class EmbeddingScorer final : public RelevanceScorer {
 public:
  EmbeddingScorer(ScorerDescriptor d, std::unique_ptr<JsonTransport> transport, EmbeddingCache& cache,
                  int parallelism, int max_retries)
      : desc_(std::move(d)), transport_(std::move(transport)), cache_(cache) {
    client_.model_id = desc_.model_id;
    client_.transport = transport_.get();
    client_.parallelism = parallelism;
    client_.max_retries = max_retries;
  }

  const ScorerDescriptor& descriptor() const noexcept override { return desc_; }
  EmbeddingClient& client() noexcept { return client_; }

  void prepare(std::span<const std::string> documents, std::span<const std::string> queries) override {
    std::vector<std::string> all(documents.begin(), documents.end());
    all.insert(all.end(), queries.begin(), queries.end());
    if (!all.empty()) check_dims(embed_batch(all, client_, cache_));
  }

  std::vector<double> score(std::string_view query, std::span<const std::string> candidates,
                            const ScoreContext& = {}) override {
    std::vector<std::string> texts;
    texts.reserve(candidates.size() + 1);
    texts.emplace_back(query);
    texts.insert(texts.end(), candidates.begin(), candidates.end());
    const auto vectors = embed_batch(texts, client_, cache_);
    check_dims(vectors);
    std::vector<double> out;
    out.reserve(candidates.size());
    for (std::size_t i = 1; i < vectors.size(); ++i) out.push_back(cosine(vectors[0], vectors[i]));
    return out;
  }

 private:
  void check_dims(const std::vector<EmbeddingVector>& vs) {
    if (vs.empty()) return;
    if (dim_ == 0) dim_ = vs.front().size();
    if (vs.front().size() != dim_) {
      throw EndpointError("model " + desc_.model_id + " changed dimension from " + std::to_string(dim_) +
                          " to " + std::to_string(vs.front().size()));
    }
  }

  ScorerDescriptor desc_;
  std::unique_ptr<JsonTransport> transport_;
  EmbeddingCache& cache_;
  EmbeddingClient client_;
  std::size_t dim_ = 0;
};

/// What make_scorer needs to reach the outside world.
struct ScorerEnvironment {
  EmbeddingCache* cache = nullptr;
  std::function<std::unique_ptr<JsonTransport>(const std::string& base_url)> transport_factory;
  int parallelism = 8;
  int max_retries = 3;
};

inline std::unique_ptr<RelevanceScorer> make_scorer(const ScorerDescriptor& d, const ScorerEnvironment& env) {
  switch (d.kind) {
    case ScorerDescriptor::Kind::mock: return std::make_unique<MockScorer>(d);
    case ScorerDescriptor::Kind::bm25: return std::make_unique<Bm25Scorer>(d);
    case ScorerDescriptor::Kind::embedding:
      if (env.cache == nullptr || !env.transport_factory) {
        throw ConfigError("embedding scorer requires a cache and a transport");
      }
      return std::make_unique<EmbeddingScorer>(d, env.transport_factory(d.base_url), *env.cache,
                                               env.parallelism, env.max_retries);
  }
  throw ConfigError("unknown scorer kind");
}

/// Scores every candidate against the query.
inline std::vector<double> score_relevance(RelevanceScorer& scorer, std::string_view query,
                                           std::span<const std::string> candidates,
                                           const ScoreContext& ctx = {}) {
  if (candidates.empty()) throw std::invalid_argument("score_relevance: no candidates");
  return scorer.score(query, candidates, ctx);
}

}  // namespace style_audit
