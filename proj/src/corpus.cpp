#include "relner/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <unordered_set>

#include "relner/errors.hpp"

namespace relner {

using json = nlohmann::json;

namespace {

bool in_schema(const std::vector<EntityType>& schema, const EntityType& t) {
  return std::find(schema.begin(), schema.end(), t) != schema.end();
}

void dedup_gold(std::vector<EntityMention>& gold) {
  std::set<std::pair<EntityType, Span>> seen;
  std::vector<EntityMention> kept;
  kept.reserve(gold.size());
  for (auto& m : gold) {
    if (seen.insert({m.etype, m.span}).second) {
      kept.push_back(std::move(m));
    }
  }
  gold = std::move(kept);
}

std::string make_id(const std::string& prefix, size_t index) {
  return prefix + std::to_string(index + 1);
}

}  // namespace

void validate_sentence(const Sentence& sentence) {
  size_t len = cp_length(sentence.text);
  std::set<std::pair<EntityType, Span>> seen;
  for (const auto& m : sentence.gold) {
    if (!(m.span.start < m.span.end && m.span.end <= len)) {
      throw DataFormatError("mention span out of bounds in sentence " + sentence.id);
    }
    if (cp_substr(sentence.text, m.span.start, m.span.end) != m.surface) {
      throw DataFormatError("mention surface does not match text slice in sentence " +
                            sentence.id);
    }
    if (!seen.insert({m.etype, m.span}).second) {
      throw DataFormatError("duplicate gold mention in sentence " + sentence.id);
    }
  }
}

// -- Corpus profile -----------------------------------------------------------

bool CorpusProfile::has_type(const EntityType& t) const { return in_schema(schema, t); }

CorpusProfile CorpusProfile::from_json(const json& j) {
  CorpusProfile p;
  try {
    p.profile_name = j.at("profile_name").get<std::string>();
    for (const auto& t : j.at("schema")) {
      EntityType label = t.get<std::string>();
      if (label.empty()) {
        throw DataFormatError("empty entity type in profile schema");
      }
      if (in_schema(p.schema, label)) {
        throw DataFormatError("duplicate entity type in profile schema: " + label);
      }
      p.schema.push_back(std::move(label));
    }
    for (const auto& r : j.value("relations", json::array())) {
      PredefinedRelation rel{r.at("name").get<std::string>(),
                             r.at("head_type").get<std::string>(),
                             r.at("tail_type").get<std::string>()};
      if (rel.name.empty() || rel.head_type.empty() || rel.tail_type.empty()) {
        throw DataFormatError("relation fields must be non-empty in profile");
      }
      if (!p.has_type(rel.head_type) || !p.has_type(rel.tail_type)) {
        throw DataFormatError("relation \"" + rel.name + "\" uses a type outside the schema");
      }
      for (const auto& existing : p.relations) {
        if (existing.name == rel.name) {
          throw DataFormatError("duplicate relation name in profile: " + rel.name);
        }
      }
      p.relations.push_back(std::move(rel));
    }
  } catch (const json::exception& ex) {
    throw DataFormatError(std::string("bad profile JSON: ") + ex.what());
  }
  return p;
}

CorpusProfile CorpusProfile::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open profile file: " + path);
  }
  json j;
  try {
    in >> j;
  } catch (const json::exception& ex) {
    throw DataFormatError("profile file " + path + " is not valid JSON: " + ex.what());
  }
  return from_json(j);
}

json CorpusProfile::to_json() const {
  json rels = json::array();
  for (const auto& r : relations) {
    rels.push_back({{"name", r.name}, {"head_type", r.head_type}, {"tail_type", r.tail_type}});
  }
  return json{{"profile_name", profile_name}, {"schema", schema}, {"relations", rels}};
}

// -- CoNLL-BIO ----------------------------------------------------------------

std::vector<ConllSentence> read_conll_sentences(std::istream& in) {
  std::vector<ConllSentence> out;
  ConllSentence current;
  std::string line;
  size_t line_no = 0;
  auto flush = [&] {
    if (!current.tokens.empty()) {
      out.push_back(std::move(current));
      current = ConllSentence{};
    }
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty()) {
      flush();
      continue;
    }
    size_t sep = line.find_last_of(" \t");
    if (sep == std::string::npos || sep == 0 || sep + 1 == line.size()) {
      throw DataFormatError("line " + std::to_string(line_no) +
                            ": expected \"token<TAB or space>tag\"");
    }
    if (current.tokens.empty()) {
      current.first_line = line_no;
    }
    current.tokens.push_back(nfc(line.substr(0, sep)));
    current.tags.push_back(line.substr(sep + 1));
  }
  flush();
  return out;
}

Sentence decode_bio(const ConllSentence& rows, const std::vector<EntityType>& schema,
                    const ConllOptions& opts, const std::string& sentence_id) {
  Sentence s;
  s.id = sentence_id;

  const size_t joiner_len = cp_length(opts.joiner);
  std::vector<size_t> starts(rows.tokens.size());
  std::vector<size_t> lens(rows.tokens.size());
  size_t offset = 0;
  for (size_t i = 0; i < rows.tokens.size(); ++i) {
    if (i > 0) {
      s.text += opts.joiner;
      offset += joiner_len;
    }
    starts[i] = offset;
    lens[i] = cp_length(rows.tokens[i]);
    offset += lens[i];
    s.text += rows.tokens[i];
  }

  EntityType open_type;
  size_t open_start = 0;
  size_t open_end = 0;
  auto close = [&] {
    if (!open_type.empty()) {
      s.gold.push_back(EntityMention{cp_substr(s.text, open_start, open_end), open_type,
                                     Span{open_start, open_end}, s.id});
      open_type.clear();
    }
  };

  for (size_t i = 0; i < rows.tags.size(); ++i) {
    const std::string& tag = rows.tags[i];
    const size_t line_no = rows.first_line + i;
    if (tag == "O") {
      close();
      continue;
    }
    if (tag.size() < 3 || (tag[0] != 'B' && tag[0] != 'I') || tag[1] != '-') {
      throw DataFormatError("line " + std::to_string(line_no) + ": malformed tag \"" + tag + "\"");
    }
    EntityType etype = tag.substr(2);
    if (!schema.empty() && !in_schema(schema, etype)) {
      throw DataFormatError("line " + std::to_string(line_no) + ": unknown entity type \"" +
                            etype + "\"");
    }
    bool begin = tag[0] == 'B';
    if (!begin && open_type != etype) {
      // I-X without a preceding B-X/I-X of the same type.
      if (!opts.lenient_bio) {
        throw DataFormatError("line " + std::to_string(line_no) + ": tag \"" + tag +
                              "\" continues no open \"" + etype + "\" entity");
      }
      begin = true;
    }
    if (begin) {
      close();
      open_type = etype;
      open_start = starts[i];
    }
    open_end = starts[i] + lens[i];
  }
  close();
  dedup_gold(s.gold);
  return s;
}

std::vector<std::string> encode_bio(const std::vector<std::string>& tokens,
                                    const std::vector<EntityMention>& mentions,
                                    const std::string& joiner) {
  const size_t joiner_len = cp_length(joiner);
  std::vector<size_t> starts(tokens.size());
  std::vector<size_t> ends(tokens.size());
  size_t offset = 0;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) {
      offset += joiner_len;
    }
    starts[i] = offset;
    offset += cp_length(tokens[i]);
    ends[i] = offset;
  }

  std::vector<std::string> tags(tokens.size(), "O");
  for (const auto& m : mentions) {
    bool first = true;
    bool matched_start = false;
    bool matched_end = false;
    for (size_t i = 0; i < tokens.size(); ++i) {
      if (starts[i] >= m.span.end || ends[i] <= m.span.start) {
        continue;
      }
      matched_start = matched_start || starts[i] == m.span.start;
      matched_end = matched_end || ends[i] == m.span.end;
      tags[i] = (first ? "B-" : "I-") + m.etype;
      first = false;
    }
    if (first || !matched_start || !matched_end) {
      throw DataFormatError("mention span " + std::to_string(m.span.start) + ".." +
                            std::to_string(m.span.end) + " does not align with token boundaries");
    }
  }
  return tags;
}

Corpus read_conll(std::istream& in, const std::vector<EntityType>& schema,
                  const ConllOptions& opts) {
  Corpus corpus;
  corpus.schema = schema;
  auto rows = read_conll_sentences(in);
  corpus.sentences.reserve(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    corpus.sentences.push_back(decode_bio(rows[i], schema, opts, make_id(opts.id_prefix, i)));
  }
  return corpus;
}

// -- YEDDA --------------------------------------------------------------------

namespace {

struct YeddaDoc {
  std::u32string text;  // markup stripped, NFC
  std::vector<EntityMention> mentions;  // offsets into text
};

YeddaDoc parse_yedda_doc(const std::u32string& raw, const std::vector<EntityType>& schema) {
  YeddaDoc doc;
  auto append_plain = [&](std::u32string_view piece) {
    if (piece.empty()) {
      return;
    }
    doc.text += decode_utf8_lossy(nfc(encode_utf8(piece)));
  };

  size_t i = 0;
  size_t plain_from = 0;
  while (i < raw.size()) {
    if (raw[i] == U'[' && i + 1 < raw.size() && raw[i + 1] == U'@') {
      append_plain(std::u32string_view(raw).substr(plain_from, i - plain_from));
      size_t hash = raw.find(U'#', i + 2);
      size_t close = hash == std::u32string::npos ? std::u32string::npos : raw.find(U"*]", hash);
      if (hash == std::u32string::npos || close == std::u32string::npos) {
        throw DataFormatError("unbalanced YEDDA markup at character offset " + std::to_string(i));
      }
      std::string surface = nfc(encode_utf8(raw.substr(i + 2, hash - (i + 2))));
      std::string etype = encode_utf8(raw.substr(hash + 1, close - (hash + 1)));
      if (surface.empty()) {
        throw DataFormatError("empty YEDDA annotation at character offset " + std::to_string(i));
      }
      if (!schema.empty() && !in_schema(schema, etype)) {
        throw DataFormatError("unknown entity type \"" + etype + "\" at character offset " +
                              std::to_string(i));
      }
      std::u32string surface32 = decode_utf8_lossy(surface);
      size_t start = doc.text.size();
      doc.text += surface32;
      doc.mentions.push_back(
          EntityMention{surface, etype, Span{start, start + surface32.size()}, ""});
      i = close + 2;
      plain_from = i;
    } else {
      ++i;
    }
  }
  append_plain(std::u32string_view(raw).substr(plain_from));
  return doc;
}

}  // namespace

Corpus import_yedda(std::istream& in, const std::vector<EntityType>& schema,
                    const std::string& id_prefix) {
  std::ostringstream buf;
  buf << in.rdbuf();
  YeddaDoc doc = parse_yedda_doc(decode_utf8(buf.str()), schema);

  Corpus corpus;
  corpus.schema = schema;

  auto inside_mention = [&](size_t pos) {
    for (const auto& m : doc.mentions) {
      if (pos >= m.span.start && pos + 1 < m.span.end) {
        return true;
      }
    }
    return false;
  };

  // Sentences split on the Chinese full stop (kept) and newline (dropped),
  // never inside an annotated span.
  size_t seg_start = 0;
  std::vector<std::pair<size_t, size_t>> segments;
  for (size_t pos = 0; pos <= doc.text.size(); ++pos) {
    bool at_end = pos == doc.text.size();
    bool split_after = false;
    bool drop_char = false;
    if (!at_end) {
      if (doc.text[pos] == U'\n') {
        split_after = true;
        drop_char = true;
      } else if (doc.text[pos] == U'。' && !inside_mention(pos)) {
        split_after = true;
      }
    }
    if (at_end || split_after) {
      size_t seg_end = at_end ? pos : (drop_char ? pos : pos + 1);
      if (seg_end > seg_start) {
        segments.emplace_back(seg_start, seg_end);
      }
      seg_start = at_end ? pos : pos + 1;
      if (at_end) {
        break;
      }
    }
  }

  for (const auto& [from, to] : segments) {
    std::u32string seg = doc.text.substr(from, to - from);
    bool blank = std::all_of(seg.begin(), seg.end(), is_space_cp);
    if (blank) {
      continue;
    }
    Sentence s;
    s.id = make_id(id_prefix, corpus.sentences.size());
    s.text = encode_utf8(seg);
    for (const auto& m : doc.mentions) {
      if (m.span.start >= from && m.span.end <= to) {
        s.gold.push_back(
            EntityMention{m.surface, m.etype, Span{m.span.start - from, m.span.end - from}, s.id});
      } else if (m.span.start < to && m.span.end > from) {
        throw DataFormatError("YEDDA annotation crosses a sentence boundary near character " +
                              std::to_string(m.span.start));
      }
    }
    dedup_gold(s.gold);
    validate_sentence(s);
    corpus.sentences.push_back(std::move(s));
  }
  return corpus;
}

std::string render_yedda(const Sentence& sentence) {
  std::vector<EntityMention> sorted = sentence.gold;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.span < b.span; });
  std::u32string text = decode_utf8_lossy(sentence.text);
  std::u32string out;
  size_t pos = 0;
  for (const auto& m : sorted) {
    if (m.span.start < pos) {
      throw DataFormatError("overlapping mentions cannot be rendered as YEDDA markup");
    }
    out += text.substr(pos, m.span.start - pos);
    out += U"[@";
    out += text.substr(m.span.start, m.span.end - m.span.start);
    out += U'#';
    out += decode_utf8_lossy(m.etype);
    out += U"*]";
    pos = m.span.end;
  }
  out += text.substr(pos);
  return encode_utf8(out);
}

// -- Canonical JSONL ------------------------------------------------------------

Corpus load_jsonl(std::istream& in, const std::vector<EntityType>& schema) {
  Corpus corpus;
  corpus.schema = schema;
  std::string line;
  size_t line_no = 0;
  std::unordered_set<std::string> ids;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& ex) {
      throw DataFormatError("line " + std::to_string(line_no) + ": invalid JSON: " + ex.what());
    }
    Sentence s;
    try {
      s.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
      s.text = j.at("text").get<std::string>();
      for (const auto& g : j.value("gold", json::array())) {
        EntityMention m;
        m.surface = g.at("surface").get<std::string>();
        m.etype = g.at("type").get<std::string>();
        m.span.start = g.at("start").get<size_t>();
        m.span.end = g.at("end").get<size_t>();
        m.sentence_id = s.id;
        if (!schema.empty() && !in_schema(schema, m.etype)) {
          throw DataFormatError("line " + std::to_string(line_no) + ": unknown entity type \"" +
                                m.etype + "\"");
        }
        s.gold.push_back(std::move(m));
      }
    } catch (const json::exception& ex) {
      throw DataFormatError("line " + std::to_string(line_no) + ": bad sentence record: " +
                            ex.what());
    }
    if (!ids.insert(s.id).second) {
      throw DataFormatError("line " + std::to_string(line_no) + ": duplicate sentence id \"" +
                            s.id + "\"");
    }
    dedup_gold(s.gold);
    validate_sentence(s);
    corpus.sentences.push_back(std::move(s));
  }
  return corpus;
}

Corpus load_jsonl_file(const std::string& path, const std::vector<EntityType>& schema) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open corpus file: " + path);
  }
  return load_jsonl(in, schema);
}

void save_jsonl(const Corpus& corpus, std::ostream& out) {
  for (const auto& s : corpus.sentences) {
    json gold = json::array();
    for (const auto& m : s.gold) {
      gold.push_back({{"surface", m.surface},
                      {"type", m.etype},
                      {"start", m.span.start},
                      {"end", m.span.end}});
    }
    out << json{{"id", s.id}, {"text", s.text}, {"gold", gold}}.dump() << "\n";
  }
}

void save_jsonl_file(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw ConfigError("cannot write corpus file: " + path);
  }
  save_jsonl(corpus, out);
}

// -- Sampling and statistics ----------------------------------------------------

namespace {

uint64_t bounded_draw(std::mt19937_64& rng, uint64_t bound) {
  // Rejection sampling keeps the draw unbiased and, unlike
  // std::uniform_int_distribution, identical across standard libraries.
  uint64_t threshold = (0 - bound) % bound;  // 2^64 mod bound
  for (;;) {
    uint64_t r = rng();
    if (r >= threshold) {
      return r % bound;
    }
  }
}

}  // namespace

std::vector<size_t> seeded_subset(size_t n, size_t k, uint64_t seed) {
  std::vector<size_t> idx(n);
  for (size_t i = 0; i < n; ++i) {
    idx[i] = i;
  }
  std::mt19937_64 rng(seed);
  for (size_t i = n; i-- > 1;) {
    size_t j = static_cast<size_t>(bounded_draw(rng, i + 1));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

Corpus sample_few_shot(const Corpus& corpus, size_t k, uint64_t seed) {
  if (k == 0) {
    throw ConfigError("sample size K must be positive");
  }
  if (k > corpus.sentences.size()) {
    throw ConfigError("sample size K=" + std::to_string(k) + " exceeds corpus size " +
                      std::to_string(corpus.sentences.size()));
  }
  Corpus out;
  out.profile_name = corpus.profile_name;
  out.schema = corpus.schema;
  for (size_t i : seeded_subset(corpus.sentences.size(), k, seed)) {
    out.sentences.push_back(corpus.sentences[i]);
  }
  return out;
}

CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats stats;
  stats.sentence_count = corpus.sentences.size();
  std::set<char32_t> distinct;
  for (const auto& s : corpus.sentences) {
    for (char32_t cp : decode_utf8_lossy(s.text)) {
      ++stats.token_count;
      distinct.insert(cp);
    }
    for (const auto& m : s.gold) {
      ++stats.per_type_counts[m.etype];
    }
  }
  stats.distinct_token_count = distinct.size();
  if (stats.token_count > 0) {
    stats.ttr = static_cast<double>(stats.distinct_token_count) /
                static_cast<double>(stats.token_count);
    stats.ttr_defined = true;
  }
  return stats;
}

}  // namespace relner
