#include "relner/eval.hpp"

#include <iomanip>
#include <set>
#include <sstream>
#include <tuple>

#include "relner/errors.hpp"

namespace relner {

using json = nlohmann::json;

namespace {

using MentionKey = std::tuple<std::string, EntityType, size_t, size_t>;

std::set<MentionKey> key_set(const std::vector<EntityMention>& mentions) {
  std::set<MentionKey> keys;
  for (const auto& m : mentions) {
    keys.insert({m.sentence_id, m.etype, m.span.start, m.span.end});
  }
  return keys;
}

}  // namespace

EvalCounts exact_match_counts(const std::vector<EntityMention>& gold,
                              const std::vector<EntityMention>& pred) {
  EvalCounts counts;
  std::set<MentionKey> gold_keys = key_set(gold);
  std::set<MentionKey> pred_keys = key_set(pred);

  counts.overall.n_gold = gold_keys.size();
  counts.overall.n_pred = pred_keys.size();
  for (const auto& key : gold_keys) {
    counts.per_type[std::get<1>(key)].n_gold += 1;
  }
  for (const auto& key : pred_keys) {
    TypeCounts& tc = counts.per_type[std::get<1>(key)];
    tc.n_pred += 1;
    if (gold_keys.count(key)) {
      tc.n_match += 1;
      counts.overall.n_match += 1;
    }
  }
  return counts;
}

Metrics metrics(const TypeCounts& counts) {
  Metrics m;
  m.precision = counts.n_pred == 0
                    ? 0.0
                    : static_cast<double>(counts.n_match) / static_cast<double>(counts.n_pred);
  m.recall = counts.n_gold == 0
                 ? 0.0
                 : static_cast<double>(counts.n_match) / static_cast<double>(counts.n_gold);
  m.f1 = (m.precision + m.recall) == 0.0
             ? 0.0
             : 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

EvalReport make_report(const EvalCounts& counts, std::string mode, std::string profile_name,
                       long k, std::string config_hash, std::string cache_hash) {
  EvalReport report;
  report.counts = counts.overall;
  report.overall = metrics(counts.overall);
  report.per_type_counts = counts.per_type;
  for (const auto& [etype, tc] : counts.per_type) {
    report.per_type[etype] = metrics(tc);
  }
  report.mode = std::move(mode);
  report.profile_name = std::move(profile_name);
  report.k = k;
  report.config_hash = std::move(config_hash);
  report.cache_hash = std::move(cache_hash);
  return report;
}

namespace {

json counts_block(const TypeCounts& counts, const Metrics& m) {
  return json{{"n_match", counts.n_match}, {"n_pred", counts.n_pred},
              {"n_gold", counts.n_gold},  {"precision", m.precision},
              {"recall", m.recall},       {"f1", m.f1}};
}

void read_counts_block(const json& j, TypeCounts& counts, Metrics& m) {
  counts.n_match = j.at("n_match").get<size_t>();
  counts.n_pred = j.at("n_pred").get<size_t>();
  counts.n_gold = j.at("n_gold").get<size_t>();
  m.precision = j.at("precision").get<double>();
  m.recall = j.at("recall").get<double>();
  m.f1 = j.at("f1").get<double>();
}

}  // namespace

json EvalReport::to_json() const {
  json per_type_json = json::object();
  for (const auto& [etype, m] : per_type) {
    per_type_json[etype] = counts_block(per_type_counts.at(etype), m);
  }
  return json{{"overall", counts_block(counts, overall)},
              {"per_type", per_type_json},
              {"metadata",
               {{"mode", mode},
                {"profile", profile_name},
                {"k", k},
                {"config_hash", config_hash},
                {"cache_hash", cache_hash}}}};
}

EvalReport EvalReport::from_json(const json& j) {
  EvalReport report;
  try {
    read_counts_block(j.at("overall"), report.counts, report.overall);
    for (const auto& [etype, block] : j.at("per_type").items()) {
      TypeCounts tc;
      Metrics m;
      read_counts_block(block, tc, m);
      report.per_type_counts[etype] = tc;
      report.per_type[etype] = m;
    }
    const json& meta = j.at("metadata");
    report.mode = meta.at("mode").get<std::string>();
    report.profile_name = meta.at("profile").get<std::string>();
    report.k = meta.at("k").get<long>();
    report.config_hash = meta.at("config_hash").get<std::string>();
    report.cache_hash = meta.at("cache_hash").get<std::string>();
  } catch (const json::exception& ex) {
    throw DataFormatError(std::string("bad report JSON: ") + ex.what());
  }
  return report;
}

std::string render_report_table(const EvalReport& report) {
  std::ostringstream out;
  auto row = [&](const std::string& label, const TypeCounts& counts, const Metrics& m) {
    out << std::left << std::setw(12) << label << std::right << std::fixed
        << std::setprecision(4) << std::setw(10) << m.precision << std::setw(10) << m.recall
        << std::setw(10) << m.f1 << std::setw(8) << counts.n_match << "/" << counts.n_pred
        << "/" << counts.n_gold << "\n";
  };
  out << std::left << std::setw(12) << "type" << std::right << std::setw(10) << "P"
      << std::setw(10) << "R" << std::setw(10) << "F1" << std::setw(8) << "m/p/g"
      << "\n";
  for (const auto& [etype, m] : report.per_type) {
    row(etype, report.per_type_counts.at(etype), m);
  }
  row("ALL", report.counts, report.overall);
  return out.str();
}

}  // namespace relner
