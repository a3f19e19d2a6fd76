#include "relner/config.hpp"

#include <fstream>

#include "relner/errors.hpp"
#include "relner/sha256.hpp"

namespace relner {

using json = nlohmann::json;

void PipelineConfig::validate() const {
  if (!(beta > 0.0 && beta < 1.0)) {
    throw ConfigError("beta must lie in (0,1)");
  }
  if (lambda_weight < 0.0) {
    throw ConfigError("lambda_weight must be >= 0");
  }
  if (max_iters <= 0) {
    throw ConfigError("max_iters must be positive");
  }
  if (epsilon <= 0.0) {
    throw ConfigError("epsilon must be > 0");
  }
  if (score_threshold < 0.0 || score_threshold > 1.0) {
    throw ConfigError("score_threshold must lie in [0,1]");
  }
  if (n_diverse < 1) {
    throw ConfigError("n_diverse must be >= 1");
  }
  if (n_demos < 0) {
    throw ConfigError("n_demos must be >= 0");
  }
  if (max_concurrency < 1) {
    throw ConfigError("max_concurrency must be positive");
  }
  if (model.backend_id != "mock" && model.backend_id != "http") {
    throw ConfigError("model.backend must be \"mock\" or \"http\"");
  }
  if (model.temperature < 0.0) {
    throw ConfigError("model.temperature must be >= 0");
  }
  if (model.max_output_chars <= 0) {
    throw ConfigError("model.max_output_chars must be positive");
  }
  if (retry.max_attempts < 1) {
    throw ConfigError("retry.max_attempts must be >= 1");
  }
  if (similarity.kind != "lexical" && similarity.kind != "embedding") {
    throw ConfigError("similarity.kind must be \"lexical\" or \"embedding\"");
  }
}

json PipelineConfig::to_json() const {
  return json{
      {"beta", beta},
      {"lambda_weight", lambda_weight},
      {"max_iters", max_iters},
      {"epsilon", epsilon},
      {"score_threshold", score_threshold},
      {"n_diverse", n_diverse},
      {"n_demos", n_demos},
      {"seed", seed},
      {"max_concurrency", max_concurrency},
      {"relation_temperature", relation_temperature},
      {"model",
       {{"backend", model.backend_id},
        {"model_id", model.model_id},
        {"temperature", model.temperature},
        {"max_output_chars", model.max_output_chars},
        {"base_url", model.base_url},
        {"api_key_env", model.api_key_env}}},
      {"retry", {{"max_attempts", retry.max_attempts}, {"backoff_ms", retry.backoff_ms}}},
      {"similarity",
       {{"kind", similarity.kind},
        {"endpoint", similarity.endpoint},
        {"model_id", similarity.model_id},
        {"dimension", similarity.dimension},
        {"fallback_to_lexical", similarity.fallback_to_lexical}}},
      {"cache_dir", cache_dir},
      {"mock_script", mock_script},
      {"relation_template", relation_template_path},
      {"extraction_template", extraction_template_path},
      {"lenient_bio", lenient_bio},
      {"conll_joiner", conll_joiner},
      {"weighted_edges", weighted_edges},
  };
}

PipelineConfig PipelineConfig::from_json(const json& j) {
  PipelineConfig c;
  if (!j.is_object()) {
    throw ConfigError("config root must be a JSON object");
  }
  try {
    c.beta = j.value("beta", c.beta);
    c.lambda_weight = j.value("lambda_weight", c.lambda_weight);
    c.max_iters = j.value("max_iters", c.max_iters);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.score_threshold = j.value("score_threshold", c.score_threshold);
    c.n_diverse = j.value("n_diverse", c.n_diverse);
    c.n_demos = j.value("n_demos", c.n_demos);
    c.seed = j.value("seed", c.seed);
    c.max_concurrency = j.value("max_concurrency", c.max_concurrency);
    c.relation_temperature = j.value("relation_temperature", c.relation_temperature);
    if (j.contains("model")) {
      const json& m = j.at("model");
      c.model.backend_id = m.value("backend", c.model.backend_id);
      c.model.model_id = m.value("model_id", c.model.model_id);
      c.model.temperature = m.value("temperature", c.model.temperature);
      c.model.max_output_chars = m.value("max_output_chars", c.model.max_output_chars);
      c.model.base_url = m.value("base_url", c.model.base_url);
      c.model.api_key_env = m.value("api_key_env", c.model.api_key_env);
    }
    if (j.contains("retry")) {
      const json& r = j.at("retry");
      c.retry.max_attempts = r.value("max_attempts", c.retry.max_attempts);
      c.retry.backoff_ms = r.value("backoff_ms", c.retry.backoff_ms);
    }
    if (j.contains("similarity")) {
      const json& s = j.at("similarity");
      c.similarity.kind = s.value("kind", c.similarity.kind);
      c.similarity.endpoint = s.value("endpoint", c.similarity.endpoint);
      c.similarity.model_id = s.value("model_id", c.similarity.model_id);
      c.similarity.dimension = s.value("dimension", c.similarity.dimension);
      c.similarity.fallback_to_lexical =
          s.value("fallback_to_lexical", c.similarity.fallback_to_lexical);
    }
    c.cache_dir = j.value("cache_dir", c.cache_dir);
    c.mock_script = j.value("mock_script", c.mock_script);
    c.relation_template_path = j.value("relation_template", c.relation_template_path);
    c.extraction_template_path = j.value("extraction_template", c.extraction_template_path);
    c.lenient_bio = j.value("lenient_bio", c.lenient_bio);
    c.conll_joiner = j.value("conll_joiner", c.conll_joiner);
    c.weighted_edges = j.value("weighted_edges", c.weighted_edges);
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("bad config value: ") + ex.what());
  }
  c.validate();
  return c;
}

PipelineConfig PipelineConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file: " + path);
  }
  json j;
  try {
    in >> j;
  } catch (const json::exception& ex) {
    throw ConfigError("config file " + path + " is not valid JSON: " + ex.what());
  }
  return from_json(j);
}

std::string PipelineConfig::hash() const {
  // nlohmann objects serialize with sorted keys, so the dump is canonical.
  return sha256_hex(to_json().dump());
}

}  // namespace relner
