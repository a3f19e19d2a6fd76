#pragma once

#include <string>

#include <json.hpp>

namespace relner {

struct ModelParams {
  std::string backend_id = "mock";  // "mock" | "http"
  std::string model_id = "gpt-3.5-turbo";
  double temperature = 0.0;
  int max_output_chars = 2048;
  std::string base_url;                     // http backend only
  std::string api_key_env = "LLM_API_KEY";  // bearer token source
};

struct RetryPolicy {
  int max_attempts = 3;   // total tries per request
  int backoff_ms = 250;   // doubled per retry
};

struct SimilarityParams {
  std::string kind = "lexical";  // "lexical" | "embedding"
  std::string endpoint;
  std::string model_id;
  int dimension = 0;              // 0: accept what the endpoint returns
  bool fallback_to_lexical = false;
};

struct PipelineConfig {
  double beta = 0.85;            // damping, in (0,1)
  double lambda_weight = 1.0;    // >= 0
  int max_iters = 100;           // T
  double epsilon = 1e-6;         // convergence threshold
  double score_threshold = 0.3;  // in [0,1]
  int n_diverse = 5;
  int n_demos = 3;
  long seed = 42;
  int max_concurrency = 4;

  ModelParams model;
  RetryPolicy retry;
  SimilarityParams similarity;

  // Relation generation runs warmer than extraction; bumped by +0.3 on a
  // one-shot retry after an empty generation.
  double relation_temperature = 0.7;

  std::string cache_dir;
  std::string mock_script;
  std::string relation_template_path;
  std::string extraction_template_path;

  bool lenient_bio = false;
  std::string conll_joiner;      // "" for character-level Chinese corpora
  bool weighted_edges = false;   // opt-in co-occurrence-weighted reliability

  void validate() const;  // throws ConfigError
  nlohmann::json to_json() const;

  static PipelineConfig from_json(const nlohmann::json& j);
  static PipelineConfig load_file(const std::string& path);

  // Stable hash of the full config snapshot; reports and manifests carry it
  // so any number is replayable against the same cache.
  std::string hash() const;
};

}  // namespace relner
