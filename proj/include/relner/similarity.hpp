#pragma once

#include <memory>
#include <string>
#include <vector>

#include "relner/config.hpp"
#include "relner/gateway.hpp"

namespace relner {

// dot(u,v) / (|u||v|); throws ProviderError on dimension mismatch or a
// zero vector.
double cosine(const std::vector<double>& u, const std::vector<double>& v);

// Semantic similarity Sim(a,b) in [0,1]. Inputs are expected normalized
// and non-empty.
class SimilarityProvider {
 public:
  virtual ~SimilarityProvider() = default;
  virtual double similarity(const std::string& a, const std::string& b) = 0;
  virtual std::string kind() const = 0;
};

// Character-bigram Jaccard: |A∩B| / |A∪B| over bigram sets. When either
// string is a single character the comparison drops to unigram sets.
class LexicalSimilarity : public SimilarityProvider {
 public:
  double similarity(const std::string& a, const std::string& b) override;
  std::string kind() const override { return "lexical"; }
};

// Embedding-endpoint similarity: cosine of the two embedding vectors,
// clamped to [0,1] so a negative consistency can never invert the
// reliability ordering. Embeddings are cached under the same mechanism
// as completions.
class EmbeddingSimilarity : public SimilarityProvider {
 public:
  EmbeddingSimilarity(SimilarityParams params, std::shared_ptr<ResponseCache> cache = nullptr);

  double similarity(const std::string& a, const std::string& b) override;
  std::string kind() const override { return "embedding"; }

  std::vector<double> embed(const std::string& text);

 private:
  SimilarityParams params_;
  std::shared_ptr<ResponseCache> cache_;
};

// Tries the primary provider and falls back to lexical on provider errors.
class FallbackSimilarity : public SimilarityProvider {
 public:
  explicit FallbackSimilarity(std::unique_ptr<SimilarityProvider> primary);

  double similarity(const std::string& a, const std::string& b) override;
  std::string kind() const override;

 private:
  std::unique_ptr<SimilarityProvider> primary_;
  LexicalSimilarity lexical_;
};

std::unique_ptr<SimilarityProvider> make_similarity_provider(
    const SimilarityParams& params, std::shared_ptr<ResponseCache> cache = nullptr);

}  // namespace relner
