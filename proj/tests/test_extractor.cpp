#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <sstream>

#include "relner/errors.hpp"
#include "relner/extractor.hpp"
#include "support/oracles.hpp"

using namespace relner;

namespace {

Sentence make_sentence(const std::string& id, const std::string& text,
                       std::vector<EntityMention> gold = {}) {
  Sentence s;
  s.id = id;
  s.text = text;
  for (auto& m : gold) {
    m.sentence_id = id;
  }
  s.gold = std::move(gold);
  return s;
}

EntityMention gold(const std::string& surface, const EntityType& etype, size_t start,
                   size_t end) {
  return EntityMention{surface, etype, Span{start, end}, ""};
}

const PredefinedRelation kProduction{"production", "ORG", "PRO"};

PipelineConfig test_config() {
  PipelineConfig c;
  c.max_concurrency = 1;
  return c;
}

}  // namespace

TEST_CASE("demonstrations need both end types in one sentence") {
  Corpus train;
  train.schema = {"ORG", "PRO"};
  train.sentences.push_back(
      make_sentence("t1", "甲醇价格上涨", {gold("甲醇", "PRO", 0, 2)}));  // no ORG
  CHECK(build_demonstrations(train, kProduction, 3, 42).empty());

  train.sentences.push_back(make_sentence(
      "t2", "神华集团生产甲醇", {gold("神华集团", "ORG", 0, 4), gold("甲醇", "PRO", 6, 8)}));
  auto demos = build_demonstrations(train, kProduction, 3, 42);
  REQUIRE(demos.size() == 1);
  CHECK(demos[0].sentence_text == "神华集团生产甲醇");
  REQUIRE(demos[0].pairs.size() == 1);
  CHECK(demos[0].pairs[0] == std::pair<std::string, std::string>{"神华集团", "甲醇"});
}

TEST_CASE("demonstration selection follows the seeded reference procedure") {
  Corpus train;
  train.schema = {"ORG", "PRO"};
  // qualifying sentences: indexes 0, 2, 3, 5
  train.sentences.push_back(make_sentence(
      "t1", "神华产甲醇", {gold("神华", "ORG", 0, 2), gold("甲醇", "PRO", 3, 5)}));
  train.sentences.push_back(make_sentence("t2", "无实体"));
  train.sentences.push_back(make_sentence(
      "t3", "兖矿产尿素", {gold("兖矿", "ORG", 0, 2), gold("尿素", "PRO", 3, 5)}));
  train.sentences.push_back(make_sentence(
      "t4", "中煤产烯烃", {gold("中煤", "ORG", 0, 2), gold("烯烃", "PRO", 3, 5)}));
  train.sentences.push_back(
      make_sentence("t5", "甲醇大涨", {gold("甲醇", "PRO", 0, 2)}));
  train.sentences.push_back(make_sentence(
      "t6", "晋能产焦炭", {gold("晋能", "ORG", 0, 2), gold("焦炭", "PRO", 3, 5)}));

  auto demos = build_demonstrations(train, kProduction, 3, 42);
  std::vector<size_t> qualifying = {0, 2, 3, 5};
  std::vector<size_t> expected = oracle::seeded_subset_reference(4, 3, 42);
  REQUIRE(demos.size() == 3);
  for (size_t i = 0; i < 3; ++i) {
    CHECK(demos[i].sentence_text == train.sentences[qualifying[expected[i]]].text);
  }
}

TEST_CASE("head x tail pairing excludes self-pairs for same-typed relations") {
  PredefinedRelation same{"competes", "ORG", "ORG"};
  Corpus train;
  train.schema = {"ORG"};
  train.sentences.push_back(
      make_sentence("t1", "神华对兖矿", {gold("神华", "ORG", 0, 2), gold("兖矿", "ORG", 3, 5)}));
  train.sentences.push_back(make_sentence("t2", "只有神华", {gold("神华", "ORG", 2, 4)}));
  auto demos = build_demonstrations(train, same, 5, 42);
  REQUIRE(demos.size() == 1);  // t2 yields no pair, so it does not qualify
  REQUIRE(demos[0].pairs.size() == 2);
  CHECK(demos[0].pairs[0] == std::pair<std::string, std::string>{"神华", "兖矿"});
  CHECK(demos[0].pairs[1] == std::pair<std::string, std::string>{"兖矿", "神华"});
}

TEST_CASE("extraction prompt embeds relation, types, demonstrations and sentence") {
  PipelineConfig config = test_config();
  DiversifiedRelation rel{"出产", "ORG", "PRO", kProduction};
  Sentence s = make_sentence("s1", "神华集团生产甲醇");

  CompletionRequest zero_shot =
      build_extraction_prompt(s, rel, {}, default_extraction_template(), config.model);
  CHECK(zero_shot.user_text.find("出产") != std::string::npos);
  CHECK(zero_shot.user_text.find("ORG") != std::string::npos);
  CHECK(zero_shot.user_text.find("PRO") != std::string::npos);
  CHECK(zero_shot.user_text.find("神华集团生产甲醇") != std::string::npos);

  std::vector<Demonstration> demos = {
      Demonstration{"句一", {{"甲", "乙"}}},
      Demonstration{"句二", {{"丙", "丁"}}},
      Demonstration{"句三", {{"戊", "己"}}},
  };
  CompletionRequest few_shot =
      build_extraction_prompt(s, rel, demos, default_extraction_template(), config.model);
  size_t p1 = few_shot.user_text.find("句一");
  size_t p2 = few_shot.user_text.find("句二");
  size_t p3 = few_shot.user_text.find("句三");
  REQUIRE(p1 != std::string::npos);
  REQUIRE(p2 != std::string::npos);
  REQUIRE(p3 != std::string::npos);
  CHECK(p1 < p2);
  CHECK(p2 < p3);  // serialized in selection order
  CHECK(few_shot.user_text.find("甲") != std::string::npos);

  PromptTemplate missing{"{relation} {head_type} {tail_type} {sentence}"};
  CHECK_THROWS_AS(build_extraction_prompt(s, rel, {}, missing, config.model), TemplateError);
}

TEST_CASE("parse_pairs on the pinned examples") {
  auto pairs = parse_pairs(R"([{"subject":"神华集团","object":"甲醇"}])");
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].first == "神华集团");
  CHECK(pairs[0].second == "甲醇");

  CHECK(parse_pairs("[]").empty());

  auto tolerant = parse_pairs(
      R"(the answer is: [{"subject":"A","object":"B"},{"subject":"A","object":""}])");
  REQUIRE(tolerant.size() == 1);
  CHECK(tolerant[0] == std::pair<std::string, std::string>{"A", "B"});

  CHECK_THROWS_AS(parse_pairs("no array here"), ParseFailureError);
  CHECK_THROWS_AS(parse_pairs("broken [ {\"subject\": \"A\""), ParseFailureError);
}

TEST_CASE("parse_pairs skips arrays that are not pair arrays") {
  auto pairs = parse_pairs(R"(ids [1,2,3] then [{"subject":"A","object":"B"}])");
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].first == "A");

  // an array of objects missing the keys does not qualify either
  auto pairs2 = parse_pairs(R"([{"x":1}] and [{"subject":"C","object":"D"}])");
  REQUIRE(pairs2.size() == 1);
  CHECK(pairs2[0].first == "C");
}

TEST_CASE("parse_pairs normalizes surfaces") {
  auto pairs = parse_pairs(R"([{"subject":" 神华 集团 ","object":"甲醇　"}])");
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].first == "神华 集团");
  CHECK(pairs[0].second == "甲醇");
}

TEST_CASE("parse_pairs never crashes on arbitrary text") {
  static const std::string charset = "[]{}\",:subjectobject神华甲醇 \n\\";
  std::mt19937_64 rng(47);
  for (int round = 0; round < 2000; ++round) {
    std::string text;
    size_t len = rng() % 40;
    for (size_t i = 0; i < len; ++i) {
      text += charset[rng() % charset.size()];
    }
    try {
      for (const auto& [subject, object] : parse_pairs(text)) {
        CHECK_FALSE(subject.empty());
        CHECK_FALSE(object.empty());
      }
    } catch (const ParseFailureError&) {
      // legitimate outcome for garbage
    }
  }
}

TEST_CASE("ground_span finds the leftmost exact occurrence") {
  auto span = ground_span("中国石化生产甲醇", "甲醇");
  REQUIRE(span.has_value());
  CHECK(*span == Span{6, 8});
  CHECK(*ground_span("abcabc", "abc") == Span{0, 3});
  CHECK_FALSE(ground_span("xyz", "甲醇").has_value());
}

namespace {

// Script plan for the manual-replay fixture: one raw response per
// (sentence, phrase) cell, identical across the phrases that share it.
struct CellPlan {
  std::string phrase;
  std::string response;
  std::vector<std::pair<std::string, std::string>> expect_grounded;
};

}  // namespace

TEST_CASE("associate_entities composes parse and grounding per cell") {
  PipelineConfig config = test_config();
  Sentence s = make_sentence("s1", "神华集团生产甲醇。");

  RelationList list;
  list.parent = kProduction;
  for (const auto& phrase : {"生产", "制造", "出产", "供应"}) {
    list.relations.push_back(DiversifiedRelation{phrase, "ORG", "PRO", kProduction});
  }

  MockBackend mock;
  PromptTemplate tmpl = default_extraction_template();
  const std::string good = R"([{"subject":"神华集团","object":"甲醇"}])";
  for (size_t i = 0; i < list.relations.size(); ++i) {
    CompletionRequest req =
        build_extraction_prompt(s, list.relations[i], {}, tmpl, config.model);
    mock.add_exact(req.user_text, i < 3 ? good : "[]");
  }

  SentenceExtraction ext = associate_entities(mock, s, {list}, {}, config, tmpl);
  REQUIRE(ext.lists.size() == 1);
  REQUIRE(ext.lists[0].candidates.size() == 4);
  for (size_t i = 0; i < 3; ++i) {
    REQUIRE(ext.lists[0].candidates[i].pairs.size() == 1);
    const SlotPair& pair = ext.lists[0].candidates[i].pairs[0];
    CHECK(pair.subject.surface == "神华集团");
    CHECK(pair.subject_span == Span{0, 4});
    CHECK(pair.object_span == Span{6, 8});
  }
  CHECK(ext.lists[0].candidates[3].pairs.empty());
  CHECK(ext.hallucination_count == 0);
  CHECK(ext.failures.empty());
}

TEST_CASE("ungrounded surfaces are discarded and counted") {
  PipelineConfig config = test_config();
  Sentence s = make_sentence("s1", "神华集团生产甲醇。");
  RelationList list;
  list.parent = kProduction;
  list.relations.push_back(DiversifiedRelation{"生产", "ORG", "PRO", kProduction});

  MockBackend mock;
  PromptTemplate tmpl = default_extraction_template();
  CompletionRequest req = build_extraction_prompt(s, list.relations[0], {}, tmpl, config.model);
  mock.add_exact(req.user_text,
                 R"([{"subject":"神华集团","object":"不存在"},{"subject":"神华集团","object":"甲醇"}])");

  SentenceExtraction ext = associate_entities(mock, s, {list}, {}, config, tmpl);
  REQUIRE(ext.lists[0].candidates[0].pairs.size() == 1);
  CHECK(ext.lists[0].candidates[0].pairs[0].object.surface == "甲醇");
  CHECK(ext.hallucination_count == 1);
  REQUIRE(ext.lists[0].candidates[0].dropped.size() == 1);
  CHECK(ext.lists[0].candidates[0].dropped[0].object == "不存在");
  CHECK(ext.lists[0].candidates[0].dropped[0].reason == "ungrounded_object");
}

TEST_CASE("pairs deduplicate on normalized surfaces within a cell") {
  PipelineConfig config = test_config();
  Sentence s = make_sentence("s1", "神华集团生产甲醇。");
  RelationList list;
  list.parent = kProduction;
  list.relations.push_back(DiversifiedRelation{"生产", "ORG", "PRO", kProduction});

  MockBackend mock;
  PromptTemplate tmpl = default_extraction_template();
  CompletionRequest req = build_extraction_prompt(s, list.relations[0], {}, tmpl, config.model);
  mock.add_exact(
      req.user_text,
      R"([{"subject":"神华集团","object":"甲醇"},{"subject":" 神华集团","object":"甲醇 "}])");
  SentenceExtraction ext = associate_entities(mock, s, {list}, {}, config, tmpl);
  CHECK(ext.lists[0].candidates[0].pairs.size() == 1);
}

TEST_CASE("cell failures degrade to empty candidates with a report") {
  PipelineConfig config = test_config();
  Sentence s = make_sentence("s1", "神华集团生产甲醇。");
  RelationList list;
  list.parent = kProduction;
  list.relations.push_back(DiversifiedRelation{"生产", "ORG", "PRO", kProduction});
  list.relations.push_back(DiversifiedRelation{"制造", "ORG", "PRO", kProduction});

  MockBackend mock;
  PromptTemplate tmpl = default_extraction_template();
  CompletionRequest good_req =
      build_extraction_prompt(s, list.relations[0], {}, tmpl, config.model);
  mock.add_exact(good_req.user_text, R"([{"subject":"神华集团","object":"甲醇"}])");
  CompletionRequest bad_req =
      build_extraction_prompt(s, list.relations[1], {}, tmpl, config.model);
  mock.add_exact(bad_req.user_text, "I refuse to answer with an array");

  SentenceExtraction ext = associate_entities(mock, s, {list}, {}, config, tmpl);
  CHECK(ext.lists[0].candidates[0].pairs.size() == 1);
  CHECK(ext.lists[0].candidates[1].pairs.empty());
  CHECK(ext.lists[0].candidates[1].parse_failed);
  REQUIRE(ext.failures.size() == 1);
  CHECK(ext.failures[0].find("制造") != std::string::npos);
}

TEST_CASE("full fixture: replaying the script by hand matches every cell") {
  PipelineConfig config = test_config();
  PredefinedRelation consumes{"consumes", "ORG", "MAT"};

  RelationList production_list;
  production_list.parent = kProduction;
  for (const auto& phrase : {"生产", "制造", "出产"}) {
    production_list.relations.push_back(DiversifiedRelation{phrase, "ORG", "PRO", kProduction});
  }
  RelationList consumes_list;
  consumes_list.parent = consumes;
  for (const auto& phrase : {"消耗", "使用", "采购"}) {
    consumes_list.relations.push_back(DiversifiedRelation{phrase, "ORG", "MAT", consumes});
  }
  std::vector<RelationList> lists = {production_list, consumes_list};

  std::vector<Sentence> sentences;
  for (int i = 0; i < 5; ++i) {
    sentences.push_back(make_sentence("s" + std::to_string(i + 1),
                                      "神华集团用煤炭生产甲醇第" + std::to_string(i + 1)));
  }

  // Hand-written script: production cells answer the (ORG, PRO) pair, the
  // consumes cells answer the (ORG, MAT) pair, one cell per sentence stays
  // empty and one emits a hallucination.
  MockBackend mock;
  PromptTemplate tmpl = default_extraction_template();
  const std::string pro_pair = R"([{"subject":"神华集团","object":"甲醇"}])";
  const std::string mat_pair = R"([{"subject":"神华集团","object":"煤炭"}])";
  const std::string mat_with_hallucination =
      R"([{"subject":"神华集团","object":"煤炭"},{"subject":"幽灵","object":"煤炭"}])";
  for (const auto& s : sentences) {
    for (const auto& rel : production_list.relations) {
      CompletionRequest req = build_extraction_prompt(s, rel, {}, tmpl, config.model);
      mock.add_exact(req.user_text, rel.phrase == "出产" ? "[]" : pro_pair);
    }
    for (const auto& rel : consumes_list.relations) {
      CompletionRequest req = build_extraction_prompt(s, rel, {}, tmpl, config.model);
      mock.add_exact(req.user_text,
                     rel.phrase == "采购" ? mat_with_hallucination : mat_pair);
    }
  }

  // Manual replay: expected grounded pair table per (sentence, list, phrase).
  size_t expected_hallucinations_per_sentence = 1;  // 幽灵 never grounds
  for (const auto& s : sentences) {
    SentenceExtraction ext = associate_entities(mock, s, lists, {}, config, tmpl);
    REQUIRE(ext.lists.size() == 2);
    REQUIRE(ext.lists[0].candidates.size() == 3);
    REQUIRE(ext.lists[1].candidates.size() == 3);
    for (const auto& cand : ext.lists[0].candidates) {
      if (cand.relation.phrase == "出产") {
        CHECK(cand.pairs.empty());
      } else {
        REQUIRE(cand.pairs.size() == 1);
        CHECK(cand.pairs[0].subject.surface == "神华集团");
        CHECK(cand.pairs[0].object.surface == "甲醇");
        CHECK(cand.pairs[0].subject_span == Span{0, 4});
        CHECK(cand.pairs[0].object_span == Span{9, 11});
        CHECK(cand.pairs[0].sentence_id == s.id);
      }
    }
    for (const auto& cand : ext.lists[1].candidates) {
      REQUIRE(cand.pairs.size() == 1);  // the hallucinated pair was dropped
      CHECK(cand.pairs[0].object.surface == "煤炭");
      CHECK(cand.pairs[0].object_span == Span{5, 7});
    }
    CHECK(ext.hallucination_count == expected_hallucinations_per_sentence);

    // grounded-only invariant: every surviving span slices back to its surface
    for (const auto& list : ext.lists) {
      for (const auto& cand : list.candidates) {
        for (const auto& pair : cand.pairs) {
          CHECK(cp_substr(s.text, pair.subject_span.start, pair.subject_span.end) ==
                pair.subject.surface);
          CHECK(cp_substr(s.text, pair.object_span.start, pair.object_span.end) ==
                pair.object.surface);
        }
      }
    }
  }
}

TEST_CASE("candidate dump round-trips") {
  PipelineConfig config = test_config();
  Sentence s = make_sentence("s1", "神华集团生产甲醇。");
  RelationList list;
  list.parent = kProduction;
  list.relations.push_back(DiversifiedRelation{"生产", "ORG", "PRO", kProduction});

  MockBackend mock;
  PromptTemplate tmpl = default_extraction_template();
  CompletionRequest req = build_extraction_prompt(s, list.relations[0], {}, tmpl, config.model);
  mock.add_exact(req.user_text,
                 R"([{"subject":"神华集团","object":"甲醇"},{"subject":"幽灵","object":"甲醇"}])");
  std::vector<SentenceExtraction> extractions = {
      associate_entities(mock, s, {list}, {}, config, tmpl)};

  std::ostringstream buf;
  save_candidates(extractions, buf);

  CorpusProfile profile;
  profile.profile_name = "t";
  profile.schema = {"ORG", "PRO"};
  profile.relations = {kProduction};
  std::istringstream in(buf.str());
  std::vector<SentenceExtraction> loaded = load_candidates(in, profile);
  REQUIRE(loaded.size() == 1);
  REQUIRE(loaded[0].lists.size() == 1);
  REQUIRE(loaded[0].lists[0].candidates.size() == 1);
  CHECK(loaded[0].lists[0].candidates[0].pairs == extractions[0].lists[0].candidates[0].pairs);
  CHECK(loaded[0].lists[0].candidates[0].dropped ==
        extractions[0].lists[0].candidates[0].dropped);
  CHECK(loaded[0].hallucination_count == 1);
}
