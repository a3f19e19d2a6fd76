#include "relner/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <httplib.h>
#include <json.hpp>

#include "relner/errors.hpp"
#include "relner/sha256.hpp"
#include "relner/text.hpp"

namespace relner {

using json = nlohmann::json;

double cosine(const std::vector<double>& u, const std::vector<double>& v) {
  if (u.empty() || u.size() != v.size()) {
    throw ProviderError("cosine requires equal nonzero dimensions, got " +
                        std::to_string(u.size()) + " and " + std::to_string(v.size()));
  }
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) {
    throw ProviderError("cosine is undefined for a zero vector");
  }
  return dot / (std::sqrt(nu) * std::sqrt(nv));
}

// -- LexicalSimilarity ---------------------------------------------------------

namespace {

std::set<std::u32string> char_ngrams(const std::u32string& s, size_t n) {
  std::set<std::u32string> grams;
  if (s.size() < n) {
    return grams;
  }
  for (size_t i = 0; i + n <= s.size(); ++i) {
    grams.insert(s.substr(i, n));
  }
  return grams;
}

}  // namespace

double LexicalSimilarity::similarity(const std::string& a, const std::string& b) {
  std::u32string ua = decode_utf8_lossy(a);
  std::u32string ub = decode_utf8_lossy(b);
  if (ua.empty() || ub.empty()) {
    throw ProviderError("lexical similarity requires non-empty strings");
  }
  size_t order = (ua.size() >= 2 && ub.size() >= 2) ? 2 : 1;
  std::set<std::u32string> ga = char_ngrams(ua, order);
  std::set<std::u32string> gb = char_ngrams(ub, order);
  size_t inter = 0;
  for (const auto& g : ga) {
    inter += gb.count(g);
  }
  size_t uni = ga.size() + gb.size() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

// -- EmbeddingSimilarity --------------------------------------------------------

namespace {

std::pair<std::string, std::string> split_url(const std::string& url) {
  size_t scheme = url.find("://");
  size_t path_start = scheme == std::string::npos ? url.find('/') : url.find('/', scheme + 3);
  if (path_start == std::string::npos) {
    return {url, "/"};
  }
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

EmbeddingSimilarity::EmbeddingSimilarity(SimilarityParams params,
                                         std::shared_ptr<ResponseCache> cache)
    : params_(std::move(params)), cache_(std::move(cache)) {
  if (params_.endpoint.empty()) {
    throw ConfigError("embedding similarity requires similarity.endpoint");
  }
}

std::vector<double> EmbeddingSimilarity::embed(const std::string& text) {
  const std::string key =
      sha256_hex(json{{"embedding", true}, {"model_id", params_.model_id}, {"text", text}}.dump());
  if (cache_) {
    if (auto hit = cache_->get(key)) {
      try {
        return json::parse(hit->text).get<std::vector<double>>();
      } catch (const json::exception&) {
        // fall through and refetch
      }
    }
  }

  auto [origin, path] = split_url(params_.endpoint);
  httplib::Client client(origin);
  client.set_connection_timeout(10);
  client.set_read_timeout(60);
  json body{{"model", params_.model_id}, {"input", text}};
  auto res = client.Post(path, body.dump(), "application/json");
  if (!res || res->status != 200) {
    throw ProviderError("embedding endpoint failure: " +
                        (res ? "status " + std::to_string(res->status)
                             : httplib::to_string(res.error())));
  }
  std::vector<double> vec;
  try {
    json parsed = json::parse(res->body);
    vec = parsed.at("data").at(0).at("embedding").get<std::vector<double>>();
  } catch (const json::exception& ex) {
    throw ProviderError(std::string("unparseable embedding response: ") + ex.what());
  }
  if (vec.empty()) {
    throw ProviderError("embedding endpoint returned an empty vector");
  }
  if (params_.dimension > 0 && vec.size() != static_cast<size_t>(params_.dimension)) {
    throw ProviderError("embedding dimension mismatch: expected " +
                        std::to_string(params_.dimension) + ", got " +
                        std::to_string(vec.size()));
  }
  if (cache_) {
    CompletionRequest meta;
    meta.model_id = params_.model_id;
    meta.user_text = text;
    meta.system_text = "embedding";
    cache_->put(key, meta, CompletionResult{json(vec).dump(), false, "embedding"});
  }
  return vec;
}

double EmbeddingSimilarity::similarity(const std::string& a, const std::string& b) {
  double cos = cosine(embed(a), embed(b));
  return std::clamp(cos, 0.0, 1.0);
}

// -- FallbackSimilarity ----------------------------------------------------------

FallbackSimilarity::FallbackSimilarity(std::unique_ptr<SimilarityProvider> primary)
    : primary_(std::move(primary)) {}

double FallbackSimilarity::similarity(const std::string& a, const std::string& b) {
  try {
    return primary_->similarity(a, b);
  } catch (const ProviderError&) {
    return lexical_.similarity(a, b);
  }
}

std::string FallbackSimilarity::kind() const { return primary_->kind() + "+lexical-fallback"; }

std::unique_ptr<SimilarityProvider> make_similarity_provider(
    const SimilarityParams& params, std::shared_ptr<ResponseCache> cache) {
  if (params.kind == "lexical") {
    return std::make_unique<LexicalSimilarity>();
  }
  auto embedding = std::make_unique<EmbeddingSimilarity>(params, std::move(cache));
  if (params.fallback_to_lexical) {
    return std::make_unique<FallbackSimilarity>(std::move(embedding));
  }
  return embedding;
}

}  // namespace relner
