#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "relner/corpus.hpp"
#include "relner/errors.hpp"
#include "support/oracles.hpp"

using namespace relner;

namespace {

const std::vector<EntityType> kSchema = {"NAME", "ORG", "LOC"};

std::string data_path(const std::string& name) {
  const char* base = std::getenv("RELNER_TEST_DATA");
  REQUIRE(base != nullptr);
  return std::string(base) + "/" + name;
}

Corpus conll_from_string(const std::string& text, bool lenient = false) {
  std::istringstream in(text);
  ConllOptions opts;
  opts.lenient_bio = lenient;
  return read_conll(in, kSchema, opts);
}

}  // namespace

TEST_CASE("BIO decoding of a simple run") {
  Corpus c = conll_from_string("张 B-NAME\n三 I-NAME\n在 O\n");
  REQUIRE(c.sentences.size() == 1);
  const Sentence& s = c.sentences[0];
  CHECK(s.text == "张三在");
  REQUIRE(s.gold.size() == 1);
  CHECK(s.gold[0].surface == "张三");
  CHECK(s.gold[0].etype == "NAME");
  CHECK(s.gold[0].span == Span{0, 2});
}

TEST_CASE("all-O sentence has empty gold") {
  Corpus c = conll_from_string("今 O\n天 O\n");
  REQUIRE(c.sentences.size() == 1);
  CHECK(c.sentences[0].gold.empty());
}

TEST_CASE("ten-sentence fixture decodes to the hand-derived span list") {
  std::ifstream in(data_path("bio_fixture.conll"));
  REQUIRE(in.good());
  Corpus c = read_conll(in, kSchema, {});
  REQUIRE(c.sentences.size() == 10);

  using M = std::tuple<std::string, std::string, size_t, size_t>;
  auto mentions = [&](size_t i) {
    std::vector<M> out;
    for (const auto& m : c.sentences[i].gold) {
      out.push_back({m.surface, m.etype, m.span.start, m.span.end});
    }
    return out;
  };
  // Hand-decoded before implementation; offsets count characters.
  CHECK(mentions(0) == std::vector<M>{{"张三", "NAME", 0, 2}, {"北京", "LOC", 3, 5}});
  CHECK(mentions(1) == std::vector<M>{});
  CHECK(mentions(2) == std::vector<M>{{"李四", "NAME", 0, 2}, {"王五", "NAME", 2, 4}});
  CHECK(mentions(3) == std::vector<M>{{"神华", "ORG", 0, 2}, {"京", "LOC", 2, 3}});
  CHECK(mentions(4) == std::vector<M>{{"京", "LOC", 0, 1}});
  CHECK(mentions(5) == std::vector<M>{{"张", "NAME", 1, 2}});
  CHECK(mentions(6) == std::vector<M>{{"神华集团", "ORG", 0, 4}});
  CHECK(mentions(7) ==
        std::vector<M>{{"张", "NAME", 0, 1}, {"北京", "LOC", 1, 3}, {"华", "ORG", 3, 4}});
  CHECK(mentions(8) == std::vector<M>{{"京", "LOC", 2, 3}, {"王五", "NAME", 4, 6}});
  CHECK(mentions(9) == std::vector<M>{{"中煤集团", "ORG", 0, 4},
                                      {"北京", "LOC", 5, 7},
                                      {"张", "NAME", 8, 9}});
}

TEST_CASE("strict mode rejects I without a matching open entity") {
  CHECK_THROWS_AS(conll_from_string("张 O\n三 I-NAME\n"), DataFormatError);
  CHECK_THROWS_AS(conll_from_string("张 B-ORG\n三 I-NAME\n"), DataFormatError);
  try {
    conll_from_string("张 O\n三 I-NAME\n");
  } catch (const DataFormatError& ex) {
    CHECK(std::string(ex.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("lenient mode repairs I to B") {
  Corpus c = conll_from_string("张 O\n三 I-NAME\n", true);
  REQUIRE(c.sentences.size() == 1);
  REQUIRE(c.sentences[0].gold.size() == 1);
  CHECK(c.sentences[0].gold[0].surface == "三");
  CHECK(c.sentences[0].gold[0].span == Span{1, 2});
}

TEST_CASE("unknown entity type names the line") {
  try {
    conll_from_string("张 B-NAME\n三 I-NAME\n在 B-XYZ\n");
    FAIL("expected DataFormatError");
  } catch (const DataFormatError& ex) {
    std::string msg = ex.what();
    CHECK(msg.find("line 3") != std::string::npos);
    CHECK(msg.find("XYZ") != std::string::npos);
  }
}

TEST_CASE("malformed rows are rejected") {
  CHECK_THROWS_AS(conll_from_string("justonetoken\n"), DataFormatError);
  CHECK_THROWS_AS(conll_from_string("张 Q-NAME\n"), DataFormatError);
}

namespace {

// Random well-formed token/tag sequences for the round-trip property.
ConllSentence random_bio_sentence(std::mt19937_64& rng) {
  static const std::vector<std::string> chars = {"张", "三", "北", "京", "华", "团",
                                                 "煤", "醇", "a",  "b"};
  std::uniform_int_distribution<size_t> len_dist(1, 12);
  std::uniform_int_distribution<int> action(0, 5);
  std::uniform_int_distribution<size_t> type_pick(0, kSchema.size() - 1);
  std::uniform_int_distribution<size_t> char_pick(0, chars.size() - 1);
  std::uniform_int_distribution<int> tok_len(1, 2);

  ConllSentence s;
  s.first_line = 1;
  size_t len = len_dist(rng);
  std::string open_type;
  for (size_t i = 0; i < len; ++i) {
    std::string token;
    int tl = tok_len(rng);
    for (int k = 0; k < tl; ++k) {
      token += chars[char_pick(rng)];
    }
    s.tokens.push_back(token);
    int a = action(rng);
    if (a <= 1) {
      s.tags.push_back("O");
      open_type.clear();
    } else if (a <= 3 || open_type.empty()) {
      open_type = kSchema[type_pick(rng)];
      s.tags.push_back("B-" + open_type);
    } else {
      s.tags.push_back("I-" + open_type);
    }
  }
  return s;
}

}  // namespace

TEST_CASE("BIO round-trip: encode after decode reproduces the tags") {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 300; ++i) {
    ConllSentence rows = random_bio_sentence(rng);
    Sentence decoded = decode_bio(rows, kSchema, {}, "s1");
    std::vector<std::string> tags = encode_bio(rows.tokens, decoded.gold, "");
    CHECK(tags == rows.tags);
  }
}

TEST_CASE("BIO round-trip holds with a joiner") {
  ConllSentence rows;
  rows.tokens = {"John", "Smith", "visited", "Beijing"};
  rows.tags = {"B-NAME", "I-NAME", "O", "B-LOC"};
  rows.first_line = 1;
  ConllOptions opts;
  opts.joiner = " ";
  Sentence decoded = decode_bio(rows, kSchema, opts, "s1");
  CHECK(decoded.text == "John Smith visited Beijing");
  REQUIRE(decoded.gold.size() == 2);
  CHECK(decoded.gold[0].surface == "John Smith");
  CHECK(encode_bio(rows.tokens, decoded.gold, " ") == rows.tags);
}

// -- YEDDA ---------------------------------------------------------------

namespace {

const std::vector<EntityType> kYeddaSchema = {"PRO", "ORG", "POL"};

Corpus yedda_from_string(const std::string& text) {
  std::istringstream in(text);
  return import_yedda(in, kYeddaSchema);
}

}  // namespace

TEST_CASE("YEDDA markup strips into offsets") {
  Corpus c = yedda_from_string("[@乙二醇#PRO*]价格上涨");
  REQUIRE(c.sentences.size() == 1);
  CHECK(c.sentences[0].text == "乙二醇价格上涨");
  REQUIRE(c.sentences[0].gold.size() == 1);
  CHECK(c.sentences[0].gold[0].surface == "乙二醇");
  CHECK(c.sentences[0].gold[0].etype == "PRO");
  CHECK(c.sentences[0].gold[0].span == Span{0, 3});
}

TEST_CASE("YEDDA text without annotations has empty gold") {
  Corpus c = yedda_from_string("甲醇价格上涨。市场平稳");
  REQUIRE(c.sentences.size() == 2);
  CHECK(c.sentences[0].gold.empty());
  CHECK(c.sentences[1].gold.empty());
}

TEST_CASE("adjacent YEDDA annotations get adjacent offsets") {
  Corpus c = yedda_from_string("[@甲#PRO*][@乙#ORG*]");
  REQUIRE(c.sentences.size() == 1);
  REQUIRE(c.sentences[0].gold.size() == 2);
  CHECK(c.sentences[0].gold[0].span == Span{0, 1});
  CHECK(c.sentences[0].gold[1].span == Span{1, 2});
}

TEST_CASE("YEDDA sentence splitting keeps the full stop and drops newlines") {
  Corpus c = yedda_from_string("一句[@甲醇#PRO*]。二句。\n三句");
  REQUIRE(c.sentences.size() == 3);
  CHECK(c.sentences[0].text == "一句甲醇。");
  CHECK(c.sentences[1].text == "二句。");
  CHECK(c.sentences[2].text == "三句");
  REQUIRE(c.sentences[0].gold.size() == 1);
  CHECK(c.sentences[0].gold[0].span == Span{2, 4});
}

TEST_CASE("unbalanced YEDDA markup errors with an offset") {
  try {
    yedda_from_string("前缀[@甲醇price");
    FAIL("expected DataFormatError");
  } catch (const DataFormatError& ex) {
    CHECK(std::string(ex.what()).find("offset 2") != std::string::npos);
  }
  CHECK_THROWS_AS(yedda_from_string("[@甲醇#XYZ*]"), DataFormatError);
}

TEST_CASE("YEDDA round-trip: re-inserting markup reproduces the source") {
  const std::string doc = "[@神华#ORG*]生产[@甲醇#PRO*]。彼处[@政策#POL*]发布。平稳";
  Corpus c = yedda_from_string(doc);
  std::string rebuilt;
  for (const auto& s : c.sentences) {
    rebuilt += render_yedda(s);
  }
  CHECK(rebuilt == doc);
}

TEST_CASE("YEDDA round-trip property on random documents") {
  static const std::vector<std::string> plain = {"价", "格", "上", "涨", "市", "场"};
  static const std::vector<std::string> entities = {"甲醇", "神华", "政策", "乙二醇"};
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> segments(1, 8);
  std::uniform_int_distribution<int> coin(0, 2);
  std::uniform_int_distribution<size_t> plain_pick(0, plain.size() - 1);
  std::uniform_int_distribution<size_t> entity_pick(0, entities.size() - 1);
  std::uniform_int_distribution<size_t> type_pick(0, kYeddaSchema.size() - 1);
  for (int round = 0; round < 100; ++round) {
    std::string doc;
    int n = segments(rng);
    for (int i = 0; i < n; ++i) {
      if (coin(rng) == 0) {
        doc += "[@" + entities[entity_pick(rng)] + "#" + kYeddaSchema[type_pick(rng)] + "*]";
      } else {
        doc += plain[plain_pick(rng)];
      }
    }
    if (doc.empty()) {
      continue;
    }
    Corpus c = yedda_from_string(doc);
    std::string rebuilt;
    for (const auto& s : c.sentences) {
      rebuilt += render_yedda(s);
    }
    CHECK(rebuilt == doc);
  }
}

// -- sampling ---------------------------------------------------------------

namespace {

Corpus tiny_corpus(size_t n) {
  Corpus c;
  c.schema = kSchema;
  for (size_t i = 0; i < n; ++i) {
    Sentence s;
    s.id = "s" + std::to_string(i + 1);
    s.text = "句" + std::to_string(i + 1);
    c.sentences.push_back(s);
  }
  return c;
}

std::vector<std::string> ids_of(const Corpus& c) {
  std::vector<std::string> out;
  for (const auto& s : c.sentences) {
    out.push_back(s.id);
  }
  return out;
}

}  // namespace

TEST_CASE("exhaustive sample returns the corpus unchanged") {
  Corpus c = tiny_corpus(7);
  Corpus sampled = sample_few_shot(c, 7, 42);
  CHECK(ids_of(sampled) == ids_of(c));
}

TEST_CASE("sampling is deterministic for (corpus, K, seed)") {
  Corpus c = tiny_corpus(1900);
  Corpus a = sample_few_shot(c, 250, 42);
  Corpus b = sample_few_shot(c, 250, 42);
  CHECK(ids_of(a) == ids_of(b));
  CHECK(a.sentences.size() == 250);

  Corpus other_seed = sample_few_shot(c, 250, 43);
  CHECK(ids_of(other_seed) != ids_of(a));
}

TEST_CASE("K=2 of 4 with seed 42 matches the reference procedure") {
  Corpus c = tiny_corpus(4);
  Corpus sampled = sample_few_shot(c, 2, 42);
  std::vector<size_t> expected = oracle::seeded_subset_reference(4, 2, 42);
  REQUIRE(sampled.sentences.size() == 2);
  for (size_t i = 0; i < 2; ++i) {
    CHECK(sampled.sentences[i].id == c.sentences[expected[i]].id);
  }
}

TEST_CASE("sampling keeps original order and is a subset") {
  std::mt19937_64 rng(3);
  Corpus c = tiny_corpus(60);
  for (int round = 0; round < 50; ++round) {
    size_t k = 1 + rng() % 60;
    Corpus sampled = sample_few_shot(c, k, rng());
    CHECK(sampled.sentences.size() == k);
    size_t cursor = 0;
    for (const auto& s : sampled.sentences) {
      while (cursor < c.sentences.size() && c.sentences[cursor].id != s.id) {
        ++cursor;
      }
      CHECK(cursor < c.sentences.size());  // in order, no repeats
      ++cursor;
    }
  }
}

TEST_CASE("degenerate sample sizes error") {
  Corpus c = tiny_corpus(4);
  CHECK_THROWS_AS(sample_few_shot(c, 0, 42), ConfigError);
  CHECK_THROWS_AS(sample_few_shot(c, 5, 42), ConfigError);
}

// -- statistics ----------------------------------------------------------------

TEST_CASE("character-token statistics") {
  Corpus c;
  Sentence s;
  s.id = "s1";
  s.text = "aba";
  c.sentences.push_back(s);
  CorpusStats stats = corpus_stats(c);
  CHECK(stats.token_count == 3);
  CHECK(stats.distinct_token_count == 2);
  CHECK(stats.ttr == doctest::Approx(2.0 / 3.0));
  CHECK(stats.ttr_defined);
}

TEST_CASE("per-type counts reproduce a planted 489-mention corpus") {
  Corpus c;
  c.schema = {"PRO"};
  for (int i = 0; i < 489; ++i) {
    Sentence s;
    s.id = "s" + std::to_string(i + 1);
    s.text = "甲醇好";
    s.gold.push_back(EntityMention{"甲醇", "PRO", Span{0, 2}, s.id});
    c.sentences.push_back(s);
  }
  CorpusStats stats = corpus_stats(c);
  CHECK(stats.per_type_counts.at("PRO") == 489);
  CHECK(stats.sentence_count == 489);
}

TEST_CASE("stats agree with an independent recount") {
  std::mt19937_64 rng(17);
  static const std::vector<std::string> chars = {"甲", "醇", "神", "华", "价", "格"};
  Corpus c;
  c.schema = kSchema;
  for (int i = 0; i < 20; ++i) {
    Sentence s;
    s.id = "s" + std::to_string(i + 1);
    size_t len = 1 + rng() % 10;
    for (size_t k = 0; k < len; ++k) {
      s.text += chars[rng() % chars.size()];
    }
    if (rng() % 2 == 0) {
      s.gold.push_back(EntityMention{cp_substr(s.text, 0, 1), kSchema[rng() % 3], Span{0, 1},
                                     s.id});
    }
    c.sentences.push_back(s);
  }
  CorpusStats stats = corpus_stats(c);

  // brute-force recount
  std::map<char32_t, size_t> freq;
  size_t total = 0;
  size_t mentions = 0;
  std::map<EntityType, size_t> per_type;
  for (const auto& s : c.sentences) {
    for (char32_t cp : decode_utf8(s.text)) {
      ++freq[cp];
      ++total;
    }
    for (const auto& m : s.gold) {
      ++per_type[m.etype];
      ++mentions;
    }
  }
  CHECK(stats.token_count == total);
  CHECK(stats.distinct_token_count == freq.size());
  CHECK(stats.per_type_counts == per_type);
  size_t sum = 0;
  for (const auto& [etype, count] : stats.per_type_counts) {
    sum += count;
  }
  CHECK(sum == mentions);
}

TEST_CASE("empty corpus statistics carry the undefined flag") {
  CorpusStats stats = corpus_stats(Corpus{});
  CHECK(stats.token_count == 0);
  CHECK(stats.ttr == 0.0);
  CHECK_FALSE(stats.ttr_defined);
}

// -- JSONL and profile -------------------------------------------------------

TEST_CASE("JSONL round-trip") {
  std::ifstream in(data_path("bio_fixture.conll"));
  Corpus c = read_conll(in, kSchema, {});
  std::ostringstream buf;
  save_jsonl(c, buf);
  std::istringstream back(buf.str());
  Corpus reloaded = load_jsonl(back, kSchema);
  REQUIRE(reloaded.sentences.size() == c.sentences.size());
  for (size_t i = 0; i < c.sentences.size(); ++i) {
    CHECK(reloaded.sentences[i].id == c.sentences[i].id);
    CHECK(reloaded.sentences[i].text == c.sentences[i].text);
    CHECK(reloaded.sentences[i].gold == c.sentences[i].gold);
  }
}

TEST_CASE("JSONL loader validates spans and ids") {
  std::istringstream bad_span(
      R"({"id":"s1","text":"ab","gold":[{"surface":"abc","type":"NAME","start":0,"end":3}]})");
  CHECK_THROWS_AS(load_jsonl(bad_span, kSchema), DataFormatError);

  std::istringstream mismatch(
      R"({"id":"s1","text":"ab","gold":[{"surface":"b","type":"NAME","start":0,"end":1}]})");
  CHECK_THROWS_AS(load_jsonl(mismatch, kSchema), DataFormatError);

  std::istringstream dup_ids(
      "{\"id\":\"s1\",\"text\":\"ab\",\"gold\":[]}\n{\"id\":\"s1\",\"text\":\"cd\",\"gold\":[]}\n");
  CHECK_THROWS_AS(load_jsonl(dup_ids, kSchema), DataFormatError);

  std::istringstream unknown_type(
      R"({"id":"s1","text":"ab","gold":[{"surface":"a","type":"ZZZ","start":0,"end":1}]})");
  CHECK_THROWS_AS(load_jsonl(unknown_type, kSchema), DataFormatError);
}

TEST_CASE("profile parsing and validation") {
  nlohmann::json good{{"profile_name", "coal"},
                      {"schema", {"PRO", "ORG"}},
                      {"relations",
                       {{{"name", "生产"}, {"head_type", "ORG"}, {"tail_type", "PRO"}}}}};
  CorpusProfile p = CorpusProfile::from_json(good);
  CHECK(p.profile_name == "coal");
  CHECK(p.schema.size() == 2);
  REQUIRE(p.relations.size() == 1);
  CHECK(p.relations[0].head_type == "ORG");

  nlohmann::json dup = good;
  dup["schema"] = {"PRO", "PRO"};
  CHECK_THROWS_AS(CorpusProfile::from_json(dup), DataFormatError);

  nlohmann::json unknown = good;
  unknown["relations"][0]["head_type"] = "XXX";
  CHECK_THROWS_AS(CorpusProfile::from_json(unknown), DataFormatError);

  nlohmann::json empty_name = good;
  empty_name["relations"][0]["name"] = "";
  CHECK_THROWS_AS(CorpusProfile::from_json(empty_name), DataFormatError);

  nlohmann::json dup_relation = good;
  dup_relation["relations"].push_back(dup_relation["relations"][0]);
  CHECK_THROWS_AS(CorpusProfile::from_json(dup_relation), DataFormatError);
}
