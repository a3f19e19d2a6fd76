#include "support/fixtures.hpp"

#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "relner/extractor.hpp"
#include "relner/relation_gen.hpp"
#include "relner/text.hpp"

namespace fixtures {

using namespace relner;
using json = nlohmann::json;

namespace {

const std::vector<std::string> kOrgPrefixes = {
    "神华", "兖矿", "中煤", "晋能", "陕煤", "伊泰", "潞安", "平煤", "淮南", "开滦",
    "同煤", "阳泉", "枣矿", "龙煤", "冀中", "徐矿", "皖北", "川煤", "义马", "盘江"};

const std::vector<std::string> kProducts = {
    "甲醇", "乙二醇", "烯烃", "尿素", "合成氨", "甲醛", "聚丙烯", "焦炭", "电石", "兰炭",
    "石脑油", "汽油", "柴油", "甲苯", "二甲苯", "硝酸", "硫酸", "甲烷", "乙烯", "液氨"};

}  // namespace

PlantedFixture make_planted_fixture(size_t n_sentences, bool spurious) {
  if (n_sentences == 0 || n_sentences > kOrgPrefixes.size()) {
    throw std::invalid_argument("fixture supports 1..20 sentences");
  }

  PlantedFixture fixture;
  fixture.profile.profile_name = "planted";
  fixture.profile.schema = {"ORG", "PRO"};
  fixture.profile.relations = {PredefinedRelation{"生产", "ORG", "PRO"}};

  fixture.config.score_threshold = 0.08;
  fixture.config.max_concurrency = 2;
  fixture.config.model.backend_id = "mock";
  fixture.config.similarity.kind = "lexical";
  fixture.config.n_demos = 0;

  const PredefinedRelation& parent = fixture.profile.relations.front();

  // The relation-generation prompt answers with two extra phrasings, so
  // every run works with the list [生产, 制造, 出产].
  CompletionRequest gen_req = build_relation_prompt(
      parent, fixture.config.n_diverse, default_relation_template(), fixture.config.model,
      fixture.config.relation_temperature);
  fixture.script.push_back(
      MockEntry{MockEntry::Match::Exact, gen_req.user_text, "1. 制造\n2. 出产"});

  const std::vector<std::string> phrases = {"生产", "制造", "出产"};
  fixture.corpus.profile_name = fixture.profile.profile_name;
  fixture.corpus.schema = fixture.profile.schema;

  PromptTemplate extraction_tmpl = default_extraction_template();
  for (size_t i = 0; i < n_sentences; ++i) {
    const std::string org = kOrgPrefixes[i] + "集团";
    const std::string pro = kProducts[i];

    Sentence s;
    s.id = "p" + std::to_string(i + 1);
    s.text = org + "生产" + pro + "。";
    const size_t org_len = cp_length(org);
    const size_t pro_len = cp_length(pro);
    s.gold.push_back(EntityMention{org, "ORG", Span{0, org_len}, s.id});
    s.gold.push_back(
        EntityMention{pro, "PRO", Span{org_len + 2, org_len + 2 + pro_len}, s.id});

    // Every third sentence carries the spurious pair (the relation verb
    // itself misread as a subject) on the 制造 candidate only: one-off
    // co-occurrence, low lexical consistency.
    bool plant_spurious = spurious && (i % 3 == 0);
    if (plant_spurious) {
      ++fixture.spurious_count;
      fixture.spurious_mentions.push_back(
          EntityMention{"生产", "ORG", Span{org_len, org_len + 2}, s.id});
    }

    for (const auto& phrase : phrases) {
      DiversifiedRelation rel{phrase, parent.head_type, parent.tail_type, parent};
      CompletionRequest req =
          build_extraction_prompt(s, rel, {}, extraction_tmpl, fixture.config.model);
      json pairs = json::array();
      pairs.push_back({{"subject", org}, {"object", pro}});
      if (plant_spurious && phrase == "制造") {
        pairs.push_back({{"subject", "生产"}, {"object", pro}});
      }
      fixture.script.push_back(
          MockEntry{MockEntry::Match::Exact, req.user_text, pairs.dump()});
    }
    fixture.corpus.sentences.push_back(std::move(s));
  }
  return fixture;
}

std::string write_fixture_files(const PlantedFixture& fixture, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  const std::string profile_path = (fs::path(dir) / "profile.json").string();
  {
    std::ofstream out(profile_path);
    out << fixture.profile.to_json().dump(2) << "\n";
  }
  const std::string corpus_path = (fs::path(dir) / "corpus.jsonl").string();
  save_jsonl_file(fixture.corpus, corpus_path);

  const std::string script_path = (fs::path(dir) / "mock_script.jsonl").string();
  {
    std::ofstream out(script_path);
    for (const auto& e : fixture.script) {
      out << json{{"match", e.match == MockEntry::Match::Exact ? "exact" : "pattern"},
                  {"key", e.key},
                  {"response", e.response}}
                 .dump()
          << "\n";
    }
  }

  PipelineConfig config = fixture.config;
  config.mock_script = script_path;
  config.cache_dir = (fs::path(dir) / "cache").string();
  const std::string config_path = (fs::path(dir) / "config.json").string();
  {
    std::ofstream out(config_path);
    out << config.to_json().dump(2) << "\n";
  }
  return config_path;
}

std::string fresh_temp_dir(const std::string& tag) {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / ("relner_test_" + tag);
  std::error_code ec;
  fs::remove_all(dir, ec);
  fs::create_directories(dir);
  return dir.string();
}

}  // namespace fixtures
