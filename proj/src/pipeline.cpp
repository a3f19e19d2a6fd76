#include "relner/pipeline.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <istream>
#include <sstream>

#include "relner/errors.hpp"
#include "relner/parallel.hpp"

namespace relner {

using json = nlohmann::json;

std::string to_string(AblationMode mode) {
  switch (mode) {
    case AblationMode::Full:
      return "full";
    case AblationMode::NoRelationList:
      return "no_relation_list";
    case AblationMode::NoEstimate:
      return "no_estimate";
  }
  return "full";
}

AblationMode parse_ablation_mode(const std::string& name) {
  if (name == "full") {
    return AblationMode::Full;
  }
  if (name == "no_relation_list") {
    return AblationMode::NoRelationList;
  }
  if (name == "no_estimate") {
    return AblationMode::NoEstimate;
  }
  throw ConfigError("unknown ablation mode \"" + name +
                    "\" (expected full, no_relation_list or no_estimate)");
}

json RunManifest::to_json() const {
  return json{{"config", config_snapshot},
              {"config_hash", config_hash},
              {"profile", profile_name},
              {"k", k},
              {"mode", mode},
              {"artifacts",
               {{"relation_lists", artifacts.relation_lists},
                {"candidates", artifacts.candidates},
                {"scores", artifacts.scores},
                {"predictions", artifacts.predictions},
                {"report", artifacts.report}}},
              {"cache",
               {{"hits", cache_hits},
                {"misses", cache_misses},
                {"state_hash", cache_state_hash}}},
              {"hallucination_discards", hallucination_discards},
              {"provider_failures", provider_failures},
              {"failed_relations", failed_relations},
              {"cell_failures", cell_failures},
              {"timestamps", {{"started", started_at}, {"finished", finished_at}}}};
}

RunManifest RunManifest::from_json(const json& j) {
  RunManifest m;
  try {
    m.config_snapshot = j.at("config");
    m.config_hash = j.at("config_hash").get<std::string>();
    m.profile_name = j.at("profile").get<std::string>();
    m.k = j.at("k").get<long>();
    m.mode = j.at("mode").get<std::string>();
    const json& a = j.at("artifacts");
    m.artifacts.relation_lists = a.at("relation_lists").get<std::string>();
    m.artifacts.candidates = a.at("candidates").get<std::string>();
    m.artifacts.scores = a.at("scores").get<std::string>();
    m.artifacts.predictions = a.at("predictions").get<std::string>();
    m.artifacts.report = a.at("report").get<std::string>();
    const json& c = j.at("cache");
    m.cache_hits = c.at("hits").get<size_t>();
    m.cache_misses = c.at("misses").get<size_t>();
    m.cache_state_hash = c.at("state_hash").get<std::string>();
    m.hallucination_discards = j.at("hallucination_discards").get<size_t>();
    m.provider_failures = j.at("provider_failures").get<size_t>();
    m.failed_relations = j.at("failed_relations").get<std::vector<std::string>>();
    m.cell_failures = j.at("cell_failures").get<std::vector<std::string>>();
    m.started_at = j.at("timestamps").at("started").get<std::string>();
    m.finished_at = j.at("timestamps").at("finished").get<std::string>();
  } catch (const json::exception& ex) {
    throw DataFormatError(std::string("bad manifest JSON: ") + ex.what());
  }
  return m;
}

namespace {

std::string now_iso8601() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%FT%TZ", std::gmtime(&t));
  return buf;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) {
    throw ConfigError("cannot write artifact file: " + path);
  }
  out << content;
}

PromptTemplate resolve_template(const std::string& path, PromptTemplate fallback) {
  if (path.empty()) {
    return fallback;
  }
  return PromptTemplate::load_file(path);
}

}  // namespace

void save_predictions(const Corpus& corpus, const std::vector<EntityMention>& predictions,
                      std::ostream& out) {
  std::map<std::string, json> per_sentence;
  for (const auto& s : corpus.sentences) {
    per_sentence[s.id] = json::array();
  }
  for (const auto& m : predictions) {
    per_sentence[m.sentence_id].push_back({{"surface", m.surface},
                                           {"type", m.etype},
                                           {"start", m.span.start},
                                           {"end", m.span.end}});
  }
  for (const auto& s : corpus.sentences) {
    out << json{{"id", s.id}, {"pred", per_sentence[s.id]}}.dump() << "\n";
  }
}

std::vector<EntityMention> load_predictions(std::istream& in) {
  std::vector<EntityMention> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    try {
      json j = json::parse(line);
      std::string id = j.at("id").get<std::string>();
      const json& mentions = j.contains("pred") ? j.at("pred") : j.at("gold");
      for (const auto& g : mentions) {
        out.push_back(EntityMention{g.at("surface").get<std::string>(),
                                    g.at("type").get<std::string>(),
                                    Span{g.at("start").get<size_t>(), g.at("end").get<size_t>()},
                                    id});
      }
    } catch (const json::exception& ex) {
      throw DataFormatError("prediction line " + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return out;
}

std::vector<EntityMention> load_predictions_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open predictions file: " + path);
  }
  return load_predictions(in);
}

RunResult run_pipeline(const RunOptions& options, const PipelineConfig& config,
                       Backend& backend, SimilarityProvider& provider,
                       const CachingBackend* cache_view, const ResponseCache* cache) {
  config.validate();
  if (options.eval_corpus.sentences.empty()) {
    throw ConfigError("evaluation corpus is empty");
  }

  RunResult result;
  RunManifest& manifest = result.manifest;
  manifest.started_at = now_iso8601();
  manifest.config_snapshot = config.to_json();
  manifest.config_hash = config.hash();
  manifest.profile_name = options.profile.profile_name;
  manifest.k = options.k;
  manifest.mode = to_string(options.mode);

  // Stage 1: relation lists.
  PromptTemplate relation_tmpl =
      resolve_template(config.relation_template_path, default_relation_template());
  GenerationOutcome generation =
      generate_relation_lists(backend, options.profile, config, relation_tmpl,
                              options.mode == AblationMode::NoRelationList);
  result.relation_lists = generation.lists;
  manifest.failed_relations = generation.failed_relations;
  if (result.relation_lists.empty()) {
    throw GatewayError("relation generation failed for every predefined relation");
  }

  // Stage 2: demonstrations, one set per predefined relation.
  std::map<std::string, std::vector<Demonstration>> demos_by_parent;
  if (options.train_corpus && config.n_demos > 0) {
    for (const auto& list : result.relation_lists) {
      auto demos = build_demonstrations(*options.train_corpus, list.parent, config.n_demos,
                                        static_cast<uint64_t>(config.seed));
      if (demos.empty()) {
        std::cerr << "warning: no qualifying demonstrations for relation \""
                  << list.parent.name << "\"; extracting zero-shot\n";
      }
      demos_by_parent[list.parent.name] = std::move(demos);
    }
  }

  // Stage 3: extraction, parallel across sentences, merged in corpus order.
  PromptTemplate extraction_tmpl =
      resolve_template(config.extraction_template_path, default_extraction_template());
  extraction_tmpl.require({"relation", "head_type", "tail_type", "demonstrations", "sentence"});
  result.extractions.resize(options.eval_corpus.sentences.size());
  parallel_for(options.eval_corpus.sentences.size(), config.max_concurrency, [&](size_t i) {
    result.extractions[i] =
        associate_entities(backend, options.eval_corpus.sentences[i], result.relation_lists,
                           demos_by_parent, config, extraction_tmpl);
  });

  size_t total_cells = 0;
  size_t failed_cells = 0;
  for (const auto& ext : result.extractions) {
    manifest.hallucination_discards += ext.hallucination_count;
    for (const auto& msg : ext.failures) {
      manifest.cell_failures.push_back(msg);
    }
    for (const auto& list : ext.lists) {
      for (const auto& cand : list.candidates) {
        ++total_cells;
        failed_cells += cand.parse_failed ? 1 : 0;
      }
    }
  }
  if (total_cells > 0 && failed_cells == total_cells) {
    throw GatewayError("every extraction cell failed; check backend or mock script");
  }

  // Stages 4-5: screening per sentence (parallel), aggregation merged in
  // corpus order so the output is schedule-independent.
  std::vector<ScreenOutcome> outcomes(options.eval_corpus.sentences.size());
  parallel_for(options.eval_corpus.sentences.size(), config.max_concurrency, [&](size_t i) {
    const SentenceExtraction& ext = result.extractions[i];
    outcomes[i] = options.mode == AblationMode::NoEstimate
                      ? screen_passthrough(ext.lists)
                      : screen(ext.lists, options.eval_corpus.sentences[i], provider, config);
  });
  std::vector<ScoreRecord> score_records;
  for (size_t i = 0; i < options.eval_corpus.sentences.size(); ++i) {
    manifest.provider_failures += outcomes[i].provider_failures;
    score_records.insert(score_records.end(), outcomes[i].score_log.begin(),
                         outcomes[i].score_log.end());
    std::vector<EntityMention> mentions = aggregate_entities(
        outcomes[i].screened, options.eval_corpus.sentences[i], options.profile);
    result.predictions.insert(result.predictions.end(), mentions.begin(), mentions.end());
  }

  // Stage 6: evaluation.
  std::vector<EntityMention> gold;
  for (const auto& s : options.eval_corpus.sentences) {
    gold.insert(gold.end(), s.gold.begin(), s.gold.end());
  }
  if (cache_view) {
    CacheStats stats = cache_view->stats();
    manifest.cache_hits = stats.hits;
    manifest.cache_misses = stats.misses;
  }
  manifest.cache_state_hash = cache ? cache->state_hash() : "";
  result.report = make_report(exact_match_counts(gold, result.predictions),
                              to_string(options.mode), options.profile.profile_name, options.k,
                              manifest.config_hash, manifest.cache_state_hash);

  // Artifacts.
  if (!options.out_dir.empty()) {
    std::filesystem::create_directories(options.out_dir);
    auto path = [&](const char* name) {
      return (std::filesystem::path(options.out_dir) / name).string();
    };
    manifest.artifacts.relation_lists = path("relation_lists.json");
    manifest.artifacts.candidates = path("candidates.jsonl");
    manifest.artifacts.scores = path("scores.jsonl");
    manifest.artifacts.predictions = path("predictions.jsonl");
    manifest.artifacts.report = path("report.json");
    manifest.artifacts.manifest = path("manifest.json");

    save_relation_lists(result.relation_lists, manifest.artifacts.relation_lists);
    {
      std::ostringstream buf;
      save_candidates(result.extractions, buf);
      write_text_file(manifest.artifacts.candidates, buf.str());
    }
    {
      std::ostringstream buf;
      save_scores(score_records, buf);
      write_text_file(manifest.artifacts.scores, buf.str());
    }
    {
      std::ostringstream buf;
      save_predictions(options.eval_corpus, result.predictions, buf);
      write_text_file(manifest.artifacts.predictions, buf.str());
    }
    write_text_file(manifest.artifacts.report, result.report.to_json().dump(2) + "\n");

    manifest.finished_at = now_iso8601();
    for (const std::string* artifact :
         {&manifest.artifacts.relation_lists, &manifest.artifacts.candidates,
          &manifest.artifacts.scores, &manifest.artifacts.predictions,
          &manifest.artifacts.report}) {
      if (!std::filesystem::exists(*artifact)) {
        throw Error("artifact missing at manifest-write time: " + *artifact);
      }
    }
    write_text_file(manifest.artifacts.manifest, manifest.to_json().dump(2) + "\n");
  } else {
    manifest.finished_at = now_iso8601();
  }
  return result;
}

RunResult run_ablation(const RunOptions& options, const PipelineConfig& config) {
  std::shared_ptr<ResponseCache> cache;
  if (!config.cache_dir.empty()) {
    cache = std::make_shared<ResponseCache>(config.cache_dir);
  }
  std::shared_ptr<Backend> backend = make_backend(config, cache);
  auto provider = make_similarity_provider(config.similarity, cache);
  const auto* caching = dynamic_cast<const CachingBackend*>(backend.get());
  return run_pipeline(options, config, *backend, *provider, caching, cache.get());
}

}  // namespace relner
