#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "relner/types.hpp"

namespace relner {

struct TypeCounts {
  size_t n_match = 0;  // correctly predicted entities
  size_t n_pred = 0;   // predicted entities
  size_t n_gold = 0;   // true entities

  auto operator<=>(const TypeCounts&) const = default;
};

struct EvalCounts {
  TypeCounts overall;
  std::map<EntityType, TypeCounts> per_type;
};

struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// A prediction counts only when sentence, type and both span boundaries
// equal a gold mention. Inputs are treated as sets over that identity.
EvalCounts exact_match_counts(const std::vector<EntityMention>& gold,
                              const std::vector<EntityMention>& pred);

// P = match/pred, R = match/gold, F1 = 2PR/(P+R), with the documented
// zero-denominator conventions (each ratio is 0 when undefined).
Metrics metrics(const TypeCounts& counts);

struct EvalReport {
  TypeCounts counts;
  Metrics overall;
  std::map<EntityType, TypeCounts> per_type_counts;
  std::map<EntityType, Metrics> per_type;

  // run metadata
  std::string mode;
  std::string profile_name;
  long k = 0;
  std::string config_hash;
  std::string cache_hash;

  nlohmann::json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);
};

EvalReport make_report(const EvalCounts& counts, std::string mode, std::string profile_name,
                       long k, std::string config_hash, std::string cache_hash);

// Aligned plain-text table: one row per type plus the overall line.
std::string render_report_table(const EvalReport& report);

}  // namespace relner
