#pragma once

#include <optional>
#include <string>
#include <vector>

#include "relner/config.hpp"
#include "relner/corpus.hpp"
#include "relner/eval.hpp"
#include "relner/extractor.hpp"
#include "relner/gateway.hpp"
#include "relner/relation_gen.hpp"
#include "relner/screening.hpp"
#include "relner/similarity.hpp"

namespace relner {

enum class AblationMode { Full, NoRelationList, NoEstimate };

std::string to_string(AblationMode mode);
AblationMode parse_ablation_mode(const std::string& name);  // throws ConfigError

struct RunOptions {
  CorpusProfile profile;
  Corpus eval_corpus;
  std::optional<Corpus> train_corpus;  // demonstrations source; absent = zero-shot
  long k = 0;                          // few-shot sample size already applied (bookkeeping)
  AblationMode mode = AblationMode::Full;
  std::string out_dir;                 // empty: no artifact files
};

struct RunArtifacts {
  std::string relation_lists;
  std::string candidates;
  std::string scores;
  std::string predictions;
  std::string report;
  std::string manifest;
};

struct RunManifest {
  nlohmann::json config_snapshot;
  std::string config_hash;
  std::string profile_name;
  long k = 0;
  std::string mode;
  RunArtifacts artifacts;
  size_t cache_hits = 0;
  size_t cache_misses = 0;
  size_t hallucination_discards = 0;
  size_t provider_failures = 0;
  std::vector<std::string> failed_relations;
  std::vector<std::string> cell_failures;
  std::string cache_state_hash;
  std::string started_at;   // excluded from determinism comparisons
  std::string finished_at;

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
};

struct RunResult {
  EvalReport report;
  RunManifest manifest;
  std::vector<RelationList> relation_lists;
  std::vector<SentenceExtraction> extractions;
  std::vector<EntityMention> predictions;
};

// The whole pipeline for one mode: generate relation lists (parent-only
// under NoRelationList), build demonstrations, extract per sentence,
// screen (skipped under NoEstimate), aggregate, evaluate. Deterministic
// given the cache or mock script.
RunResult run_pipeline(const RunOptions& options, const PipelineConfig& config,
                       Backend& backend, SimilarityProvider& provider,
                       const CachingBackend* cache_view = nullptr,
                       const ResponseCache* cache = nullptr);

// Convenience wrapper that assembles backend and provider from the config.
RunResult run_ablation(const RunOptions& options, const PipelineConfig& config);

// Predictions file: one JSONL record per sentence with its mentions.
void save_predictions(const Corpus& corpus, const std::vector<EntityMention>& predictions,
                      std::ostream& out);
std::vector<EntityMention> load_predictions(std::istream& in);
std::vector<EntityMention> load_predictions_file(const std::string& path);

}  // namespace relner
