#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "style_audit/digest.hpp"
#include "style_audit/disk_cache.hpp"
#include "style_audit/error.hpp"
#include "style_audit/parallel.hpp"
#include "style_audit/transport.hpp"

namespace style_audit {

/// Raw provider vector; not normalized.
using EmbeddingVector = std::vector<double>;

/// Cosine similarity, clamped to [-1, 1].
inline double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw std::invalid_argument("cosine: dimension mismatch (" + std::to_string(u.size()) + " vs " +
                                std::to_string(v.size()) + ")");
  }
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (!(nu > 0.0) || !(nv > 0.0)) throw std::invalid_argument("cosine: zero-norm input");
  return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

/// Vectors keyed by (model, text): in memory for the run, and on disk
/// under `{cache_dir}/emb` when a directory is given.
class EmbeddingCache {
 public:
  EmbeddingCache() = default;
  explicit EmbeddingCache(const std::filesystem::path& cache_dir)
      : store_(cache_dir.empty() ? std::filesystem::path{} : cache_dir / "emb") {}

  static std::string key(std::string_view model_id, std::string_view text) {
    return sha256_hex({model_id, text});
  }

  std::optional<EmbeddingVector> get(std::string_view model_id, const std::string& k) {
    {
      std::lock_guard lock(mu_);
      if (auto it = memory_.find(k); it != memory_.end()) return it->second;
    }
    auto j = store_.get(k);
    if (!j || !j->is_object() || j->value("model", "") != model_id) return std::nullopt;
    EmbeddingVector v;
    try {
      v = j->at("vector").get<EmbeddingVector>();
      if (j->at("dim").get<std::size_t>() != v.size() || v.empty()) return std::nullopt;
    } catch (const nlohmann::json::exception&) {
      return std::nullopt;
    }
    for (double x : v) {
      if (!std::isfinite(x)) return std::nullopt;
    }
    std::lock_guard lock(mu_);
    memory_.emplace(k, v);
    return v;
  }

  void put(std::string_view model_id, const std::string& k, const EmbeddingVector& v) {
    store_.put(k, {{"model", model_id}, {"dim", v.size()}, {"vector", v}});
    std::lock_guard lock(mu_);
    memory_.emplace(k, v);
  }

  const JsonFileStore& store() const noexcept { return store_; }

 private:
  JsonFileStore store_;
  std::mutex mu_;
  std::unordered_map<std::string, EmbeddingVector> memory_;
};

/// OpenAI-compatible `/v1/embeddings` client settings.
struct EmbeddingClient {
  std::string model_id;
  JsonTransport* transport = nullptr;
  int max_retries = 3;
  std::chrono::milliseconds retry_backoff{500};
  std::size_t batch_size = 32;
  int parallelism = 8;
};

namespace detail {

inline std::vector<EmbeddingVector> request_embeddings(const EmbeddingClient& client,
                                                       const std::vector<std::string>& texts) {
  const nlohmann::json body = {{"model", client.model_id}, {"input", texts}};
  return with_retries(client.max_retries, client.retry_backoff, [&] {
    const auto reply = client.transport->post("/v1/embeddings", body);
    const auto data = reply.find("data");
    if (data == reply.end() || !data->is_array()) throw EndpointError("embedding reply has no data array");
    if (data->size() != texts.size()) {
      throw EndpointError("embedding reply has " + std::to_string(data->size()) + " entries for " +
                          std::to_string(texts.size()) + " inputs");
    }
    std::vector<std::optional<EmbeddingVector>> slots(texts.size());
    for (std::size_t pos = 0; pos < data->size(); ++pos) {
      const auto& item = (*data)[pos];
      std::size_t idx = pos;
      if (item.contains("index")) {
        if (!item["index"].is_number_integer()) throw EndpointError("embedding index is not an integer");
        const auto raw = item["index"].get<long long>();
        if (raw < 0 || static_cast<std::size_t>(raw) >= texts.size()) {
          throw EndpointError("embedding index " + std::to_string(raw) + " out of range");
        }
        idx = static_cast<std::size_t>(raw);
      }
      if (slots[idx]) throw EndpointError("embedding index " + std::to_string(idx) + " repeated");
      const auto emb = item.find("embedding");
      if (emb == item.end() || !emb->is_array() || emb->empty()) {
        throw EndpointError("embedding at index " + std::to_string(idx) + " is missing or empty");
      }
      EmbeddingVector v;
      v.reserve(emb->size());
      for (const auto& x : *emb) {
        if (!x.is_number()) throw EndpointError("embedding at index " + std::to_string(idx) + " has a non-numeric entry");
        const double d = x.get<double>();
        if (!std::isfinite(d)) throw EndpointError("embedding at index " + std::to_string(idx) + " has a non-finite entry");
        v.push_back(d);
      }
      slots[idx] = std::move(v);
    }
    std::vector<EmbeddingVector> out;
    out.reserve(slots.size());
    const auto dim = slots[0]->size();
    for (std::size_t i = 0; i < slots.size(); ++i) {
      if (slots[i]->size() != dim) {
        throw EndpointError("embedding dimension mismatch at index " + std::to_string(i) + ": " +
                            std::to_string(slots[i]->size()) + " vs " + std::to_string(dim));
      }
      out.push_back(std::move(*slots[i]));
    }
    return out;
  });
}

}  // namespace detail

/// Embeds `texts` in order. Cached texts bypass the endpoint; the rest are
/// deduplicated and sent in batches with bounded concurrency.
inline std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts,
                                                const EmbeddingClient& client, EmbeddingCache& cache) {
  if (texts.empty()) throw std::invalid_argument("embed_batch: no texts");
  if (client.transport == nullptr) throw std::invalid_argument("embed_batch: no transport");
  std::vector<std::string> keys;
  keys.reserve(texts.size());
  std::vector<std::optional<EmbeddingVector>> result(texts.size());
  std::vector<std::string> missing;
  std::vector<std::string> missing_keys;
  std::unordered_map<std::string, std::size_t> queued;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    keys.push_back(EmbeddingCache::key(client.model_id, texts[i]));
    result[i] = cache.get(client.model_id, keys.back());
    if (!result[i] && queued.emplace(keys.back(), missing.size()).second) {
      missing.push_back(texts[i]);
      missing_keys.push_back(keys.back());
    }
  }

  if (!missing.empty()) {
    const auto batch = std::max<std::size_t>(client.batch_size, 1);
    const auto n_batches = (missing.size() + batch - 1) / batch;
    std::vector<std::vector<EmbeddingVector>> fetched(n_batches);
    std::vector<std::exception_ptr> errors(n_batches);
    parallel_for(n_batches, client.parallelism, [&](std::size_t b) {
      const auto first = b * batch;
      const auto last = std::min(first + batch, missing.size());
      std::vector<std::string> chunk(missing.begin() + first, missing.begin() + last);
      try {
        fetched[b] = detail::request_embeddings(client, chunk);
        for (std::size_t k = 0; k < fetched[b].size(); ++k) {
          cache.put(client.model_id, missing_keys[first + k], fetched[b][k]);
        }
      } catch (...) {
        errors[b] = std::current_exception();
      }
    });
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
    for (std::size_t i = 0; i < texts.size(); ++i) {
      if (!result[i]) {
        const auto m = queued.at(keys[i]);
        result[i] = fetched[m / batch][m % batch];
      }
    }
  }

  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  const auto dim = result[0]->size();
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (result[i]->size() != dim) {
      throw EndpointError("embedding dimension mismatch at index " + std::to_string(i) + ": " +
                          std::to_string(result[i]->size()) + " vs " + std::to_string(dim));
    }
    out.push_back(std::move(*result[i]));
  }
  return out;
}

}  // namespace style_audit
