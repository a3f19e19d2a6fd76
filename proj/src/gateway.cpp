#include "relner/gateway.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "relner/errors.hpp"
#include "relner/sha256.hpp"

namespace relner {

using json = nlohmann::json;

std::string cache_key(const CompletionRequest& request) {
  json canonical{{"model_id", request.model_id},
                 {"temperature", request.temperature},
                 {"max_output_chars", request.max_output_chars},
                 {"system_text", request.system_text},
                 {"user_text", request.user_text}};
  return sha256_hex(canonical.dump());
}

// -- MockBackend ----------------------------------------------------------------

MockBackend::MockBackend(std::vector<MockEntry> entries) {
  for (auto& e : entries) {
    if (e.match == MockEntry::Match::Exact) {
      add_exact(std::move(e.key), std::move(e.response));
    } else {
      add_pattern(std::move(e.key), std::move(e.response));
    }
  }
}

std::vector<MockEntry> MockBackend::load_script(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open mock script: " + path);
  }
  std::vector<MockEntry> entries;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    json j;
    try {
      j = json::parse(line);
      MockEntry e;
      std::string match = j.value("match", "exact");
      if (match == "exact") {
        e.match = MockEntry::Match::Exact;
      } else if (match == "pattern") {
        e.match = MockEntry::Match::Pattern;
      } else {
        throw DataFormatError("mock script line " + std::to_string(line_no) +
                              ": match must be \"exact\" or \"pattern\"");
      }
      e.key = j.at("key").get<std::string>();
      e.response = j.at("response").get<std::string>();
      entries.push_back(std::move(e));
    } catch (const json::exception& ex) {
      throw DataFormatError("mock script line " + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return entries;
}

void MockBackend::add_exact(std::string key, std::string response) {
  exact_[std::move(key)] = std::move(response);
}

void MockBackend::add_pattern(std::string key, std::string response) {
  for (auto& q : patterns_) {
    if (q.key == key) {
      q.responses.push_back(std::move(response));
      return;
    }
  }
  patterns_.push_back(PatternQueue{std::move(key), {std::move(response)}, 0});
}

CompletionResult MockBackend::complete(const CompletionRequest& request) {
  std::lock_guard lock(mutex_);
  ++calls_;
  if (auto it = exact_.find(request.user_text); it != exact_.end()) {
    return CompletionResult{it->second, false, id()};
  }
  for (auto& q : patterns_) {
    if (request.user_text.find(q.key) != std::string::npos) {
      size_t at = std::min(q.next, q.responses.size() - 1);
      ++q.next;
      return CompletionResult{q.responses[at], false, id()};
    }
  }
  std::string snippet = request.user_text.substr(0, 120);
  throw MockMissError("mock has no script entry for request: " + snippet);
}

size_t MockBackend::call_count() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

// -- HttpBackend ------------------------------------------------------------------

namespace {

// Splits "http://host:port/prefix" into origin and path prefix.
std::pair<std::string, std::string> split_base_url(const std::string& base_url) {
  size_t scheme = base_url.find("://");
  size_t path_start = scheme == std::string::npos ? base_url.find('/')
                                                  : base_url.find('/', scheme + 3);
  if (path_start == std::string::npos) {
    return {base_url, ""};
  }
  return {base_url.substr(0, path_start), base_url.substr(path_start)};
}

}  // namespace

HttpBackend::HttpBackend(ModelParams params, RetryPolicy retry)
    : params_(std::move(params)), retry_(retry) {
  if (params_.base_url.empty()) {
    throw ConfigError("http backend requires model.base_url");
  }
  if (!params_.api_key_env.empty()) {
    if (const char* v = std::getenv(params_.api_key_env.c_str())) {
      token_ = v;
    }
  }
}

CompletionResult HttpBackend::complete(const CompletionRequest& request) {
  auto [origin, prefix] = split_base_url(params_.base_url);
  const std::string path = prefix + "/chat/completions";

  json messages = json::array();
  if (!request.system_text.empty()) {
    messages.push_back({{"role", "system"}, {"content", request.system_text}});
  }
  messages.push_back({{"role", "user"}, {"content", request.user_text}});
  json body{{"model", request.model_id},
            {"temperature", request.temperature},
            {"max_tokens", request.max_output_chars},
            {"messages", messages}};
  const std::string payload = body.dump();

  httplib::Headers headers;
  if (!token_.empty()) {
    headers.emplace("Authorization", "Bearer " + token_);
  }

  std::string last_error;
  long last_retry_after_ms = 0;
  int backoff_ms = retry_.backoff_ms;
  for (int attempt = 0; attempt < retry_.max_attempts; ++attempt) {
    if (attempt > 0) {
      long delay = last_retry_after_ms > 0 ? last_retry_after_ms : backoff_ms;
      std::this_thread::sleep_for(std::chrono::milliseconds(delay));
      backoff_ms *= 2;
      last_retry_after_ms = 0;
    }

    httplib::Client client(origin);
    client.set_connection_timeout(10);
    client.set_read_timeout(60);
    auto res = client.Post(path, headers, payload, "application/json");

    if (!res) {
      last_error = "transport failure: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 200) {
      try {
        json parsed = json::parse(res->body);
        const json& choices = parsed.at("choices");
        if (!choices.is_array() || choices.empty()) {
          throw BackendRefusedError("response has no choices");
        }
        std::string text = choices.at(0).at("message").at("content").get<std::string>();
        return CompletionResult{std::move(text), false, id()};
      } catch (const json::exception& ex) {
        // Content error: never retried.
        throw BackendRefusedError(std::string("unparseable completion response: ") + ex.what());
      }
    }
    if (res->status == 429) {
      last_error = "rate limited (429)";
      if (res->has_header("Retry-After")) {
        last_retry_after_ms =
            static_cast<long>(std::atof(res->get_header_value("Retry-After").c_str()) * 1000.0);
      }
      continue;
    }
    if (res->status >= 500 || res->status == 408) {
      last_error = "server error (" + std::to_string(res->status) + ")";
      continue;
    }
    throw BackendRefusedError("backend refused request (" + std::to_string(res->status) +
                              "): " + res->body.substr(0, 200));
  }

  if (last_error.rfind("rate limited", 0) == 0) {
    throw RateLimitedError("rate limited after " + std::to_string(retry_.max_attempts) +
                               " attempts",
                           last_retry_after_ms);
  }
  throw TransportError(last_error + " after " + std::to_string(retry_.max_attempts) +
                       " attempts");
}

// -- ResponseCache -----------------------------------------------------------------

ResponseCache::ResponseCache(std::string dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
  file_path_ = (std::filesystem::path(dir_) / "cache.jsonl").string();
  std::ifstream in(file_path_);
  if (!in) {
    return;
  }
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    try {
      json j = json::parse(line);
      entries_[j.at("key").get<std::string>()] = {j.at("response").get<std::string>(),
                                                  j.value("backend", std::string("unknown"))};
    } catch (const json::exception&) {
      // Torn trailing line from an interrupted run; skip it.
      std::cerr << "warning: skipping malformed cache line " << line_no << " in " << file_path_
                << "\n";
    }
  }
}

std::optional<CompletionResult> ResponseCache::get(const std::string& key) const {
  std::shared_lock lock(mutex_);
  auto it = entries_.find(key);
  if (it == entries_.end()) {
    return std::nullopt;
  }
  return CompletionResult{it->second.first, true, it->second.second};
}

void ResponseCache::put(const std::string& key, const CompletionRequest& request,
                        const CompletionResult& result) {
  std::unique_lock lock(mutex_);
  if (entries_.count(key)) {
    return;  // first write wins; replays stay byte-stable
  }
  entries_[key] = {result.text, result.backend_id};
  json j{{"key", key},
         {"model_id", request.model_id},
         {"temperature", request.temperature},
         {"max_output_chars", request.max_output_chars},
         {"system_text", request.system_text},
         {"user_text", request.user_text},
         {"response", result.text},
         {"backend", result.backend_id}};
  std::ofstream out(file_path_, std::ios::app);
  if (!out) {
    throw ConfigError("cannot append to cache file: " + file_path_);
  }
  out << j.dump() << "\n";
}

size_t ResponseCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

void ResponseCache::clear() {
  std::unique_lock lock(mutex_);
  entries_.clear();
  std::error_code ec;
  std::filesystem::remove(file_path_, ec);
}

std::string ResponseCache::state_hash() const {
  std::shared_lock lock(mutex_);
  std::string buf;
  for (const auto& [key, value] : entries_) {
    buf += key;
    buf += '\t';
    buf += value.first;
    buf += '\n';
  }
  return sha256_hex(buf);
}

// -- CachingBackend ----------------------------------------------------------------

CachingBackend::CachingBackend(std::shared_ptr<Backend> inner,
                               std::shared_ptr<ResponseCache> cache)
    : inner_(std::move(inner)), cache_(std::move(cache)) {}

CompletionResult CachingBackend::complete(const CompletionRequest& request) {
  if (request.user_text.empty()) {
    throw ConfigError("completion request user_text must be non-empty");
  }
  const std::string key = cache_key(request);
  if (auto hit = cache_->get(key)) {
    std::lock_guard lock(stats_mutex_);
    ++stats_.hits;
    return *hit;
  }
  CompletionResult result = inner_->complete(request);
  cache_->put(key, request, result);
  {
    std::lock_guard lock(stats_mutex_);
    ++stats_.misses;
  }
  return result;
}

CacheStats CachingBackend::stats() const {
  std::lock_guard lock(stats_mutex_);
  return stats_;
}

std::shared_ptr<Backend> make_backend(const PipelineConfig& config,
                                      std::shared_ptr<ResponseCache> cache) {
  std::shared_ptr<Backend> inner;
  if (config.model.backend_id == "mock") {
    if (config.mock_script.empty()) {
      throw ConfigError("mock backend requires mock_script");
    }
    inner = std::make_shared<MockBackend>(MockBackend::load_script(config.mock_script));
  } else {
    inner = std::make_shared<HttpBackend>(config.model, config.retry);
  }
  if (cache == nullptr && !config.cache_dir.empty()) {
    cache = std::make_shared<ResponseCache>(config.cache_dir);
  }
  if (cache) {
    return std::make_shared<CachingBackend>(inner, cache);
  }
  return inner;
}

}  // namespace relner
