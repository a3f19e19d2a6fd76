#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "relner/corpus.hpp"
#include "relner/errors.hpp"
#include "relner/eval.hpp"
#include "relner/parallel.hpp"
#include "relner/pipeline.hpp"

namespace {

using namespace relner;

// Flags beat environment beats config file beats defaults.
struct ConfigOverrides {
  std::string config_path;
  std::optional<double> beta, lambda_weight, epsilon, score_threshold, temperature,
      relation_temperature;
  std::optional<int> max_iters, n_diverse, n_demos, max_concurrency, max_output_chars,
      retry_attempts, retry_backoff_ms, sim_dimension;
  std::optional<long> seed;
  std::optional<std::string> backend, model_id, base_url, api_key_env, cache_dir, mock_script,
      relation_template, extraction_template, conll_joiner, sim_kind, sim_endpoint, sim_model;
  std::optional<bool> lenient_bio, weighted_edges, sim_fallback;
};

void add_config_flags(CLI::App* cmd, ConfigOverrides& o) {
  cmd->add_option("--config", o.config_path, "JSON config file");
  cmd->add_option("--beta", o.beta, "damping factor, in (0,1)");
  cmd->add_option("--lambda", o.lambda_weight, "combined-score weight, >= 0");
  cmd->add_option("--max-iters", o.max_iters, "reliability iteration cap T");
  cmd->add_option("--epsilon", o.epsilon, "reliability convergence threshold");
  cmd->add_option("--threshold", o.score_threshold, "slot score filter threshold, in [0,1]");
  cmd->add_option("--n-diverse", o.n_diverse, "diversified relations per predefined relation");
  cmd->add_option("--n-demos", o.n_demos, "few-shot demonstrations per prompt");
  cmd->add_option("--seed", o.seed, "sampling seed");
  cmd->add_option("--max-concurrency", o.max_concurrency, "parallel backend calls");
  cmd->add_option("--backend", o.backend, "mock or http");
  cmd->add_option("--model-id", o.model_id, "backend model identifier");
  cmd->add_option("--temperature", o.temperature, "extraction temperature");
  cmd->add_option("--relation-temperature", o.relation_temperature,
                  "relation generation temperature");
  cmd->add_option("--max-output-chars", o.max_output_chars, "completion length cap");
  cmd->add_option("--base-url", o.base_url, "http backend base URL");
  cmd->add_option("--api-key-env", o.api_key_env, "env var holding the bearer token");
  cmd->add_option("--cache-dir", o.cache_dir, "response cache directory");
  cmd->add_option("--mock-script", o.mock_script, "mock backend script (JSONL)");
  cmd->add_option("--relation-template", o.relation_template, "relation prompt template file");
  cmd->add_option("--extraction-template", o.extraction_template,
                  "extraction prompt template file");
  cmd->add_option("--conll-joiner", o.conll_joiner, "token joiner for CoNLL import");
  cmd->add_flag("--lenient-bio,!--strict-bio", o.lenient_bio,
                "repair I-X tags without a preceding B-X");
  cmd->add_flag("--weighted-edges", o.weighted_edges,
                "co-occurrence-weighted reliability variant");
  cmd->add_option("--retry-attempts", o.retry_attempts, "http retry budget");
  cmd->add_option("--retry-backoff-ms", o.retry_backoff_ms, "initial http retry backoff");
  cmd->add_option("--sim-kind", o.sim_kind, "similarity provider: lexical or embedding");
  cmd->add_option("--sim-endpoint", o.sim_endpoint, "embedding endpoint URL");
  cmd->add_option("--sim-model", o.sim_model, "embedding model identifier");
  cmd->add_option("--sim-dimension", o.sim_dimension, "expected embedding dimension");
  cmd->add_flag("--sim-fallback", o.sim_fallback, "fall back to lexical on provider errors");
}

PipelineConfig build_config(const ConfigOverrides& o) {
  PipelineConfig c;
  if (!o.config_path.empty()) {
    c = PipelineConfig::load_file(o.config_path);
  }
  if (const char* env_cache = std::getenv("RELNER_CACHE_DIR")) {
    c.cache_dir = env_cache;
  }
  auto set = [](auto& field, const auto& opt) {
    if (opt) {
      field = *opt;
    }
  };
  set(c.beta, o.beta);
  set(c.lambda_weight, o.lambda_weight);
  set(c.max_iters, o.max_iters);
  set(c.epsilon, o.epsilon);
  set(c.score_threshold, o.score_threshold);
  set(c.n_diverse, o.n_diverse);
  set(c.n_demos, o.n_demos);
  set(c.seed, o.seed);
  set(c.max_concurrency, o.max_concurrency);
  set(c.relation_temperature, o.relation_temperature);
  set(c.model.backend_id, o.backend);
  set(c.model.model_id, o.model_id);
  set(c.model.temperature, o.temperature);
  set(c.model.max_output_chars, o.max_output_chars);
  set(c.model.base_url, o.base_url);
  set(c.model.api_key_env, o.api_key_env);
  set(c.retry.max_attempts, o.retry_attempts);
  set(c.retry.backoff_ms, o.retry_backoff_ms);
  set(c.similarity.kind, o.sim_kind);
  set(c.similarity.endpoint, o.sim_endpoint);
  set(c.similarity.model_id, o.sim_model);
  set(c.similarity.dimension, o.sim_dimension);
  set(c.similarity.fallback_to_lexical, o.sim_fallback);
  set(c.cache_dir, o.cache_dir);
  set(c.mock_script, o.mock_script);
  set(c.relation_template_path, o.relation_template);
  set(c.extraction_template_path, o.extraction_template);
  set(c.lenient_bio, o.lenient_bio);
  set(c.conll_joiner, o.conll_joiner);
  set(c.weighted_edges, o.weighted_edges);
  c.validate();
  return c;
}

Corpus load_corpus_any(const std::string& path, const std::vector<EntityType>& schema,
                       const PipelineConfig& config) {
  std::filesystem::path p(path);
  std::string ext = p.extension().string();
  if (ext == ".jsonl" || ext == ".json") {
    return load_jsonl_file(path, schema);
  }
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open corpus file: " + path);
  }
  if (ext == ".yedda" || ext == ".txt") {
    return import_yedda(in, schema);
  }
  ConllOptions opts;
  opts.joiner = config.conll_joiner;
  opts.lenient_bio = config.lenient_bio;
  return read_conll(in, schema, opts);
}

// Applies --k sampling to the train corpus; k=0 means "use it whole".
std::optional<Corpus> prepare_train(const std::string& train_path, long k,
                                    const CorpusProfile& profile,
                                    const PipelineConfig& config) {
  if (train_path.empty()) {
    if (k > 0) {
      throw ConfigError("--k requires --train");
    }
    return std::nullopt;
  }
  Corpus train = load_corpus_any(train_path, profile.schema, config);
  if (k > 0) {
    train = sample_few_shot(train, static_cast<size_t>(k),
                            static_cast<uint64_t>(config.seed));
  }
  return train;
}

int cmd_gen_relations(const std::string& profile_path, const std::string& out_path,
                      const std::string& mode_name, const ConfigOverrides& overrides) {
  PipelineConfig config = build_config(overrides);
  CorpusProfile profile = CorpusProfile::load_file(profile_path);
  AblationMode mode = parse_ablation_mode(mode_name);

  std::shared_ptr<ResponseCache> cache;
  if (!config.cache_dir.empty()) {
    cache = std::make_shared<ResponseCache>(config.cache_dir);
  }
  std::shared_ptr<Backend> backend = make_backend(config, cache);
  PromptTemplate tmpl = config.relation_template_path.empty()
                            ? default_relation_template()
                            : PromptTemplate::load_file(config.relation_template_path);
  GenerationOutcome outcome = generate_relation_lists(
      *backend, profile, config, tmpl, mode == AblationMode::NoRelationList);
  if (outcome.lists.empty()) {
    throw GatewayError("relation generation failed for every predefined relation");
  }
  save_relation_lists(outcome.lists, out_path);
  for (const auto& list : outcome.lists) {
    std::cout << list.parent.name << ": " << list.relations.size() << " phrases\n";
  }
  for (const auto& failure : outcome.failed_relations) {
    std::cerr << "warning: generation failed for " << failure << "\n";
  }
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

int cmd_extract(const std::string& profile_path, const std::string& corpus_path,
                const std::string& train_path, long k, const std::string& relations_path,
                const std::string& out_path, const ConfigOverrides& overrides) {
  PipelineConfig config = build_config(overrides);
  CorpusProfile profile = CorpusProfile::load_file(profile_path);
  Corpus corpus = load_corpus_any(corpus_path, profile.schema, config);
  std::optional<Corpus> train = prepare_train(train_path, k, profile, config);

  std::shared_ptr<ResponseCache> cache;
  if (!config.cache_dir.empty()) {
    cache = std::make_shared<ResponseCache>(config.cache_dir);
  }
  std::shared_ptr<Backend> backend = make_backend(config, cache);

  std::vector<RelationList> lists;
  if (!relations_path.empty()) {
    lists = load_relation_lists(relations_path, profile);
  } else {
    PromptTemplate tmpl = config.relation_template_path.empty()
                              ? default_relation_template()
                              : PromptTemplate::load_file(config.relation_template_path);
    GenerationOutcome outcome = generate_relation_lists(*backend, profile, config, tmpl, false);
    if (outcome.lists.empty()) {
      throw GatewayError("relation generation failed for every predefined relation");
    }
    lists = std::move(outcome.lists);
  }

  std::map<std::string, std::vector<Demonstration>> demos;
  if (train && config.n_demos > 0) {
    for (const auto& list : lists) {
      demos[list.parent.name] = build_demonstrations(*train, list.parent, config.n_demos,
                                                     static_cast<uint64_t>(config.seed));
    }
  }

  PromptTemplate tmpl = config.extraction_template_path.empty()
                            ? default_extraction_template()
                            : PromptTemplate::load_file(config.extraction_template_path);
  std::vector<SentenceExtraction> extractions(corpus.sentences.size());
  parallel_for(corpus.sentences.size(), config.max_concurrency, [&](size_t i) {
    extractions[i] =
        associate_entities(*backend, corpus.sentences[i], lists, demos, config, tmpl);
  });

  std::ofstream out(out_path);
  if (!out) {
    throw ConfigError("cannot write candidate file: " + out_path);
  }
  save_candidates(extractions, out);

  size_t hallucinations = 0;
  size_t failures = 0;
  for (const auto& ext : extractions) {
    hallucinations += ext.hallucination_count;
    failures += ext.failures.size();
  }
  std::cout << "wrote " << out_path << " (" << corpus.sentences.size() << " sentences, "
            << hallucinations << " hallucinated surfaces discarded, " << failures
            << " cell failures)\n";
  return 0;
}

int cmd_screen(const std::string& profile_path, const std::string& corpus_path,
               const std::string& candidates_path, const std::string& mode_name,
               const std::string& scores_path, const std::string& predictions_path,
               const ConfigOverrides& overrides) {
  PipelineConfig config = build_config(overrides);
  CorpusProfile profile = CorpusProfile::load_file(profile_path);
  Corpus corpus = load_corpus_any(corpus_path, profile.schema, config);
  AblationMode mode = parse_ablation_mode(mode_name);
  if (mode == AblationMode::NoRelationList) {
    throw ConfigError("screen supports modes full and no_estimate");
  }

  std::ifstream in(candidates_path);
  if (!in) {
    throw ConfigError("cannot open candidate file: " + candidates_path);
  }
  std::vector<SentenceExtraction> extractions = load_candidates(in, profile);
  std::map<std::string, const SentenceExtraction*> by_id;
  for (const auto& ext : extractions) {
    by_id[ext.sentence_id] = &ext;
  }

  std::shared_ptr<ResponseCache> cache;
  if (!config.cache_dir.empty()) {
    cache = std::make_shared<ResponseCache>(config.cache_dir);
  }
  auto provider = make_similarity_provider(config.similarity, cache);

  std::vector<ScoreRecord> score_records;
  std::vector<EntityMention> predictions;
  for (const auto& sentence : corpus.sentences) {
    auto it = by_id.find(sentence.id);
    if (it == by_id.end()) {
      continue;
    }
    ScreenOutcome outcome = mode == AblationMode::NoEstimate
                                ? screen_passthrough(it->second->lists)
                                : screen(it->second->lists, sentence, *provider, config);
    score_records.insert(score_records.end(), outcome.score_log.begin(),
                         outcome.score_log.end());
    auto mentions = aggregate_entities(outcome.screened, sentence, profile);
    predictions.insert(predictions.end(), mentions.begin(), mentions.end());
  }

  if (!scores_path.empty()) {
    std::ofstream scores_out(scores_path);
    if (!scores_out) {
      throw ConfigError("cannot write score file: " + scores_path);
    }
    save_scores(score_records, scores_out);
  }
  std::ofstream pred_out(predictions_path);
  if (!pred_out) {
    throw ConfigError("cannot write predictions file: " + predictions_path);
  }
  save_predictions(corpus, predictions, pred_out);
  std::cout << "wrote " << predictions_path << " (" << predictions.size() << " mentions)\n";
  return 0;
}

int cmd_pipeline(const std::string& profile_path, const std::string& corpus_path,
                 const std::string& train_path, long k, const std::string& mode_name,
                 const std::string& out_dir, bool print_table,
                 const ConfigOverrides& overrides) {
  PipelineConfig config = build_config(overrides);
  CorpusProfile profile = CorpusProfile::load_file(profile_path);

  RunOptions options;
  options.profile = profile;
  options.eval_corpus = load_corpus_any(corpus_path, profile.schema, config);
  options.train_corpus = prepare_train(train_path, k, profile, config);
  options.k = k;
  options.mode = parse_ablation_mode(mode_name);
  options.out_dir = out_dir;

  RunResult result = run_ablation(options, config);
  const Metrics& m = result.report.overall;
  std::cout << "mode=" << result.report.mode << " k=" << result.report.k
            << " P=" << m.precision << " R=" << m.recall << " F1=" << m.f1 << "\n";
  if (print_table) {
    std::cout << render_report_table(result.report);
  }
  if (!out_dir.empty()) {
    std::cout << "artifacts in " << out_dir << "\n";
  }
  return 0;
}

int cmd_eval(const std::string& gold_path, const std::string& pred_path,
             const std::string& report_path, bool print_table) {
  Corpus gold_corpus = load_jsonl_file(gold_path);
  std::vector<EntityMention> gold;
  for (const auto& s : gold_corpus.sentences) {
    gold.insert(gold.end(), s.gold.begin(), s.gold.end());
  }
  std::vector<EntityMention> pred = load_predictions_file(pred_path);
  EvalReport report = make_report(exact_match_counts(gold, pred), "eval", "", 0, "", "");
  const Metrics& m = report.overall;
  std::cout << "P=" << m.precision << " R=" << m.recall << " F1=" << m.f1 << " (match="
            << report.counts.n_match << " pred=" << report.counts.n_pred << " gold="
            << report.counts.n_gold << ")\n";
  if (print_table) {
    std::cout << render_report_table(report);
  }
  if (!report_path.empty()) {
    std::ofstream out(report_path);
    if (!out) {
      throw ConfigError("cannot write report file: " + report_path);
    }
    out << report.to_json().dump(2) << "\n";
  }
  return 0;
}

int cmd_ablate(const std::string& profile_path, const std::string& corpus_path,
               const std::string& train_path, const std::vector<long>& k_values,
               const std::vector<std::string>& mode_names, const std::string& out_dir,
               const ConfigOverrides& overrides) {
  PipelineConfig config = build_config(overrides);
  CorpusProfile profile = CorpusProfile::load_file(profile_path);
  Corpus eval_corpus = load_corpus_any(corpus_path, profile.schema, config);

  std::vector<AblationMode> modes;
  for (const auto& name : mode_names) {
    modes.push_back(parse_ablation_mode(name));
  }
  std::vector<long> ks = k_values.empty() ? std::vector<long>{0} : k_values;

  // mode -> k -> F1
  std::map<std::string, std::map<long, double>> table;
  for (AblationMode mode : modes) {
    for (long k : ks) {
      RunOptions options;
      options.profile = profile;
      options.eval_corpus = eval_corpus;
      options.train_corpus = prepare_train(train_path, k, profile, config);
      options.k = k;
      options.mode = mode;
      if (!out_dir.empty()) {
        options.out_dir = (std::filesystem::path(out_dir) /
                           (to_string(mode) + "_k" + std::to_string(k)))
                              .string();
      }
      RunResult result = run_ablation(options, config);
      table[to_string(mode)][k] = result.report.overall.f1;
    }
  }

  std::ostringstream rendered;
  rendered << std::left << std::setw(20) << "mode";
  for (long k : ks) {
    rendered << std::right << std::setw(12) << ("K=" + std::to_string(k));
  }
  rendered << "\n";
  for (AblationMode mode : modes) {
    rendered << std::left << std::setw(20) << to_string(mode);
    for (long k : ks) {
      rendered << std::right << std::fixed << std::setprecision(4) << std::setw(12)
               << table[to_string(mode)][k];
    }
    rendered << "\n";
  }
  std::cout << rendered.str();
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    nlohmann::json table_json = nlohmann::json::object();
    for (const auto& [mode_name, per_k] : table) {
      nlohmann::json row = nlohmann::json::object();
      for (const auto& [k, f1] : per_k) {
        row[std::to_string(k)] = f1;
      }
      table_json[mode_name] = row;
    }
    std::ofstream json_out((std::filesystem::path(out_dir) / "ablation.json").string());
    json_out << table_json.dump(2) << "\n";
    std::ofstream table_out((std::filesystem::path(out_dir) / "ablation_table.txt").string());
    table_out << rendered.str();
  }
  return 0;
}

int cmd_sample(const std::string& corpus_path, long k, const std::string& out_path,
               const ConfigOverrides& overrides) {
  PipelineConfig config = build_config(overrides);
  Corpus corpus = load_corpus_any(corpus_path, {}, config);
  if (k <= 0) {
    throw ConfigError("sample size K must be positive");
  }
  Corpus sampled = sample_few_shot(corpus, static_cast<size_t>(k),
                                   static_cast<uint64_t>(config.seed));
  save_jsonl_file(sampled, out_path);
  std::cout << "wrote " << out_path << " (" << sampled.sentences.size() << " sentences)\n";
  return 0;
}

int cmd_stats(const std::string& corpus_path, const ConfigOverrides& overrides) {
  PipelineConfig config = build_config(overrides);
  Corpus corpus = load_corpus_any(corpus_path, {}, config);
  CorpusStats stats = corpus_stats(corpus);
  std::cout << "sentences: " << stats.sentence_count << "\n";
  std::cout << "tokens: " << stats.token_count << " (distinct " << stats.distinct_token_count
            << ")\n";
  if (stats.ttr_defined) {
    std::cout << "ttr: " << stats.ttr << "\n";
  } else {
    std::cout << "ttr: undefined (empty corpus)\n";
  }
  size_t total = 0;
  for (const auto& [etype, count] : stats.per_type_counts) {
    std::cout << etype << ": " << count << "\n";
    total += count;
  }
  std::cout << "mentions: " << total << "\n";
  return 0;
}

int cmd_cache(const std::string& action, const ConfigOverrides& overrides) {
  PipelineConfig config = build_config(overrides);
  if (config.cache_dir.empty()) {
    throw ConfigError("no cache directory configured (--cache-dir or config)");
  }
  ResponseCache cache(config.cache_dir);
  if (action == "inspect") {
    std::cout << "dir: " << cache.dir() << "\n";
    std::cout << "entries: " << cache.size() << "\n";
    std::cout << "state_hash: " << cache.state_hash() << "\n";
    return 0;
  }
  if (action == "clear") {
    size_t n = cache.size();
    cache.clear();
    std::cout << "cleared " << n << " entries\n";
    return 0;
  }
  throw ConfigError("cache action must be inspect or clear");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"relation-driven NER pipeline"};
  app.require_subcommand(1);

  // gen-relations
  auto* gen = app.add_subcommand("gen-relations", "expand predefined relations into lists");
  ConfigOverrides gen_cfg;
  std::string gen_profile, gen_out = "relations.json", gen_mode = "full";
  gen->add_option("--profile", gen_profile, "corpus profile JSON")->required();
  gen->add_option("--out", gen_out, "output relation list file");
  gen->add_option("--mode", gen_mode, "full or no_relation_list");
  add_config_flags(gen, gen_cfg);

  // extract
  auto* extract = app.add_subcommand("extract", "extract entity pairs per relation");
  ConfigOverrides ext_cfg;
  std::string ext_profile, ext_corpus, ext_train, ext_relations, ext_out = "candidates.jsonl";
  long ext_k = 0;
  extract->add_option("--profile", ext_profile)->required();
  extract->add_option("--corpus", ext_corpus, "evaluation corpus")->required();
  extract->add_option("--train", ext_train, "training corpus for demonstrations");
  extract->add_option("--k", ext_k, "few-shot sample size applied to --train");
  extract->add_option("--relations", ext_relations, "precomputed relation list file");
  extract->add_option("--out", ext_out, "candidate dump output");
  add_config_flags(extract, ext_cfg);

  // screen
  auto* screen_cmd = app.add_subcommand("screen", "filter hallucinated slots, emit predictions");
  ConfigOverrides scr_cfg;
  std::string scr_profile, scr_corpus, scr_candidates, scr_mode = "full";
  std::string scr_scores = "scores.jsonl", scr_predictions = "predictions.jsonl";
  screen_cmd->add_option("--profile", scr_profile)->required();
  screen_cmd->add_option("--corpus", scr_corpus)->required();
  screen_cmd->add_option("--candidates", scr_candidates, "candidate dump from extract")
      ->required();
  screen_cmd->add_option("--mode", scr_mode, "full or no_estimate");
  screen_cmd->add_option("--out-scores", scr_scores, "score dump output");
  screen_cmd->add_option("--out-predictions", scr_predictions, "predictions output");
  add_config_flags(screen_cmd, scr_cfg);

  // pipeline
  auto* pipe = app.add_subcommand("pipeline", "run generate -> extract -> screen -> evaluate");
  ConfigOverrides pipe_cfg;
  std::string pipe_profile, pipe_corpus, pipe_train, pipe_mode = "full", pipe_out;
  long pipe_k = 0;
  bool pipe_table = false;
  pipe->add_option("--profile", pipe_profile)->required();
  pipe->add_option("--corpus", pipe_corpus, "evaluation corpus with gold")->required();
  pipe->add_option("--train", pipe_train, "training corpus for demonstrations");
  pipe->add_option("--k", pipe_k, "few-shot sample size applied to --train");
  pipe->add_option("--mode", pipe_mode, "full, no_relation_list or no_estimate");
  pipe->add_option("--out-dir", pipe_out, "artifact directory")->required();
  pipe->add_flag("--table", pipe_table, "print the per-type table");
  add_config_flags(pipe, pipe_cfg);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "exact-match P/R/F1 of predictions against gold");
  std::string eval_gold, eval_pred, eval_report;
  bool eval_table = false;
  eval_cmd->add_option("--gold", eval_gold, "gold corpus JSONL")->required();
  eval_cmd->add_option("--pred", eval_pred, "predictions JSONL")->required();
  eval_cmd->add_option("--report", eval_report, "write report JSON here");
  eval_cmd->add_flag("--table", eval_table, "print the per-type table");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "sweep ablation modes and sample sizes");
  ConfigOverrides abl_cfg;
  std::string abl_profile, abl_corpus, abl_train, abl_out;
  std::vector<long> abl_ks;
  std::vector<std::string> abl_modes = {"full", "no_relation_list", "no_estimate"};
  ablate->add_option("--profile", abl_profile)->required();
  ablate->add_option("--corpus", abl_corpus)->required();
  ablate->add_option("--train", abl_train, "training corpus for demonstrations");
  ablate->add_option("--k-list", abl_ks, "sample sizes, e.g. 250 500 1000 1350")
      ->delimiter(',');
  ablate->add_option("--modes", abl_modes, "modes to run")->delimiter(',');
  ablate->add_option("--out-dir", abl_out, "artifact directory");
  add_config_flags(ablate, abl_cfg);

  // sample
  auto* sample = app.add_subcommand("sample", "seeded uniform sentence sample");
  ConfigOverrides smp_cfg;
  std::string smp_corpus, smp_out = "sample.jsonl";
  long smp_k = 0;
  sample->add_option("--corpus", smp_corpus)->required();
  sample->add_option("--k", smp_k, "sample size")->required();
  sample->add_option("--out", smp_out, "output JSONL");
  add_config_flags(sample, smp_cfg);

  // stats
  auto* stats = app.add_subcommand("stats", "per-type counts and type-token ratio");
  ConfigOverrides sts_cfg;
  std::string sts_corpus;
  stats->add_option("--corpus", sts_corpus)->required();
  add_config_flags(stats, sts_cfg);

  // cache
  auto* cache_cmd = app.add_subcommand("cache", "inspect or clear the response cache");
  ConfigOverrides cch_cfg;
  std::string cch_action;
  cache_cmd->add_option("action", cch_action, "inspect or clear")->required();
  add_config_flags(cache_cmd, cch_cfg);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed()) {
      return cmd_gen_relations(gen_profile, gen_out, gen_mode, gen_cfg);
    }
    if (extract->parsed()) {
      return cmd_extract(ext_profile, ext_corpus, ext_train, ext_k, ext_relations, ext_out,
                         ext_cfg);
    }
    if (screen_cmd->parsed()) {
      return cmd_screen(scr_profile, scr_corpus, scr_candidates, scr_mode, scr_scores,
                        scr_predictions, scr_cfg);
    }
    if (pipe->parsed()) {
      return cmd_pipeline(pipe_profile, pipe_corpus, pipe_train, pipe_k, pipe_mode, pipe_out,
                          pipe_table, pipe_cfg);
    }
    if (eval_cmd->parsed()) {
      return cmd_eval(eval_gold, eval_pred, eval_report, eval_table);
    }
    if (ablate->parsed()) {
      return cmd_ablate(abl_profile, abl_corpus, abl_train, abl_ks, abl_modes, abl_out,
                        abl_cfg);
    }
    if (sample->parsed()) {
      return cmd_sample(smp_corpus, smp_k, smp_out, smp_cfg);
    }
    if (stats->parsed()) {
      return cmd_stats(sts_corpus, sts_cfg);
    }
    if (cache_cmd->parsed()) {
      return cmd_cache(cch_action, cch_cfg);
    }
  } catch (const ConfigError& ex) {
    std::cerr << "config error: " << ex.what() << "\n";
    return 2;
  } catch (const TemplateError& ex) {
    std::cerr << "template error: " << ex.what() << "\n";
    return 2;
  } catch (const GatewayError& ex) {
    std::cerr << "backend error: " << ex.what() << "\n";
    return 3;
  } catch (const GenerationEmptyError& ex) {
    std::cerr << "backend error: " << ex.what() << "\n";
    return 3;
  } catch (const ProviderError& ex) {
    std::cerr << "backend error: " << ex.what() << "\n";
    return 3;
  } catch (const DataFormatError& ex) {
    std::cerr << "data format error: " << ex.what() << "\n";
    return 4;
  } catch (const ParseFailureError& ex) {
    std::cerr << "data format error: " << ex.what() << "\n";
    return 4;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 0;
}
