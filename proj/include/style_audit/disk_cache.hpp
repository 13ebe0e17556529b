#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <system_error>
#include <unistd.h>
#include <vector>

#include <nlohmann/json.hpp>

#include "style_audit/error.hpp"

namespace style_audit {

namespace fs = std::filesystem;

/// Writes `content` to `path` through a sibling temp file and a rename, so
/// readers never observe a partially written file.
inline void write_file_atomic(const fs::path& path, std::string_view content) {
  static std::atomic<unsigned> counter{0};
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      fs::remove(tmp, ec);
      throw Error("write failed: " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error("cannot rename into " + path.string());
  }
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// A directory of `<key>.json` entries. Reads refresh the entry's mtime so
/// that cache_gc can evict least-recently-used entries; every path read or
/// written through this object is recorded as touched by the current run.
/// An empty root makes the store a no-op (memory-only caching upstream).
class JsonFileStore {
 public:
  JsonFileStore() = default;
  explicit JsonFileStore(fs::path root) : root_(std::move(root)) {
    if (!root_.empty()) {
      std::error_code ec;
      fs::create_directories(root_, ec);
      if (ec) throw ConfigError("cannot create cache directory " + root_.string());
    }
  }

  JsonFileStore(const JsonFileStore&) = delete;
  JsonFileStore& operator=(const JsonFileStore&) = delete;

  bool enabled() const noexcept { return !root_.empty(); }
  const fs::path& root() const noexcept { return root_; }

  fs::path path_for(const std::string& key) const { return root_ / (key + ".json"); }

  // Corrupt entries are treated as misses.
  std::optional<nlohmann::json> get(const std::string& key) {
    if (!enabled()) return std::nullopt;
    const auto p = path_for(key);
    std::error_code ec;
    if (!fs::exists(p, ec)) return std::nullopt;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(p));
    } catch (const std::exception&) {
      return std::nullopt;
    }
    fs::last_write_time(p, fs::file_time_type::clock::now(), ec);
    mark(p);
    return j;
  }

  void put(const std::string& key, const nlohmann::json& value) {
    if (!enabled()) return;
    const auto p = path_for(key);
    write_file_atomic(p, value.dump());
    mark(p);
  }

  std::set<fs::path> touched() const {
    std::lock_guard lock(mu_);
    return touched_;
  }

 private:
  void mark(const fs::path& p) {
    std::lock_guard lock(mu_);
    touched_.insert(fs::weakly_canonical(p));
  }

  fs::path root_;
  mutable std::mutex mu_;
  std::set<fs::path> touched_;
};

/// Evicts the least-recently-used `.json` entries under `cache_dir` until
/// the total size is at most `max_bytes`. Paths in `keep` are never evicted.
/// Returns the number of bytes reclaimed.
inline std::uintmax_t cache_gc(const fs::path& cache_dir, std::uintmax_t max_bytes,
                               const std::set<fs::path>& keep = {}) {
  std::error_code ec;
  if (!fs::is_directory(cache_dir, ec)) {
    throw Error("cache directory does not exist: " + cache_dir.string());
  }
  struct Entry {
    fs::path path;
    std::uintmax_t size;
    fs::file_time_type mtime;
  };
  std::vector<Entry> entries;
  std::uintmax_t total = 0;
  for (const auto& de : fs::recursive_directory_iterator(cache_dir)) {
    if (!de.is_regular_file() || de.path().extension() != ".json") continue;
    Entry e{de.path(), de.file_size(), de.last_write_time()};
    total += e.size;
    entries.push_back(std::move(e));
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.mtime != b.mtime) return a.mtime < b.mtime;
    return a.path < b.path;
  });
  std::uintmax_t reclaimed = 0;
  for (const auto& e : entries) {
    if (total <= max_bytes) break;
    if (keep.count(fs::weakly_canonical(e.path)) != 0) continue;
    if (!fs::remove(e.path, ec) || ec) throw Error("cannot evict " + e.path.string());
    total -= e.size;
    reclaimed += e.size;
  }
  return reclaimed;
}

}  // namespace style_audit
