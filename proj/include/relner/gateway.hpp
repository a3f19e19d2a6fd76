#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "relner/config.hpp"

namespace relner {

struct CompletionRequest {
  std::string system_text;
  std::string user_text;  // non-empty
  double temperature = 0.0;
  int max_output_chars = 2048;
  std::string model_id;
};

struct CompletionResult {
  std::string text;
  bool from_cache = false;
  std::string backend_id;
};

// Stable content hash over (model_id, temperature, max_output_chars,
// system_text, user_text). Identical requests collide; any field change
// does not.
std::string cache_key(const CompletionRequest& request);

class Backend {
 public:
  virtual ~Backend() = default;
  virtual CompletionResult complete(const CompletionRequest& request) = 0;
  virtual std::string id() const = 0;
};

// -- Scripted mock ------------------------------------------------------------

struct MockEntry {
  enum class Match { Exact, Pattern };
  Match match = Match::Exact;
  std::string key;
  std::string response;
};

// Deterministic scripted backend. Exact entries match the whole user_text
// and always return the same response. Pattern entries match when key is a
// substring of user_text; entries sharing a pattern form an ordered queue
// consumed per match, with the last entry sticky once the queue drains.
// Unmatched requests raise MockMissError.
class MockBackend : public Backend {
 public:
  MockBackend() = default;
  explicit MockBackend(std::vector<MockEntry> entries);
  static std::vector<MockEntry> load_script(const std::string& path);

  void add_exact(std::string key, std::string response);
  void add_pattern(std::string key, std::string response);

  CompletionResult complete(const CompletionRequest& request) override;
  std::string id() const override { return "mock"; }

  size_t call_count() const;

 private:
  struct PatternQueue {
    std::string key;
    std::vector<std::string> responses;
    size_t next = 0;
  };
  std::map<std::string, std::string> exact_;
  std::vector<PatternQueue> patterns_;
  mutable std::mutex mutex_;
  size_t calls_ = 0;
};

// -- HTTP chat-completion backend ----------------------------------------------

// Talks to a chat-completion endpoint (messages array in, choices array
// out). Transient transport failures and 429/5xx are retried with
// exponential backoff, honoring Retry-After; auth/model errors never are.
class HttpBackend : public Backend {
 public:
  HttpBackend(ModelParams params, RetryPolicy retry);

  CompletionResult complete(const CompletionRequest& request) override;
  std::string id() const override { return "http:" + params_.model_id; }

 private:
  ModelParams params_;
  RetryPolicy retry_;
  std::string token_;
};

// -- Persistent response cache ---------------------------------------------------

struct CacheStats {
  size_t hits = 0;
  size_t misses = 0;
};

// Append-only on-disk key/value store (cache.jsonl in the cache directory).
// Entries pin raw response text plus request metadata so every downstream
// number is replayable. Concurrent reads, serialized writes; first write
// per key wins.
class ResponseCache {
 public:
  explicit ResponseCache(std::string dir);

  std::optional<CompletionResult> get(const std::string& key) const;
  void put(const std::string& key, const CompletionRequest& request,
           const CompletionResult& result);

  size_t size() const;
  void clear();

  // Hash of the sorted (key, response) pairs; reports embed it.
  std::string state_hash() const;

  const std::string& dir() const { return dir_; }

 private:
  std::string dir_;
  std::string file_path_;
  std::map<std::string, std::pair<std::string, std::string>> entries_;  // key -> (response, backend)
  mutable std::shared_mutex mutex_;
};

// Wraps a backend with the cache; counts hits and misses.
class CachingBackend : public Backend {
 public:
  CachingBackend(std::shared_ptr<Backend> inner, std::shared_ptr<ResponseCache> cache);

  CompletionResult complete(const CompletionRequest& request) override;
  std::string id() const override { return inner_->id(); }

  CacheStats stats() const;

 private:
  std::shared_ptr<Backend> inner_;
  std::shared_ptr<ResponseCache> cache_;
  mutable std::mutex stats_mutex_;
  CacheStats stats_;
};

// Builds the backend stack described by the config: mock or http, wrapped
// in a cache when cache_dir is set.
std::shared_ptr<Backend> make_backend(const PipelineConfig& config,
                                      std::shared_ptr<ResponseCache> cache = nullptr);

}  // namespace relner
