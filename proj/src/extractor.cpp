#include "relner/extractor.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "relner/errors.hpp"
#include "relner/text.hpp"

namespace relner {

using json = nlohmann::json;

namespace {

constexpr const char* kSystemText =
    "You are an information extraction assistant for named entities.";

constexpr const char* kDefaultExtractionTemplate =
    "Find every pair of entities in the text that stands in the relation \"{relation}\", "
    "where the subject is a \"{head_type}\" entity and the object is a \"{tail_type}\" "
    "entity.\n"
    "Answer with a JSON array of objects with string fields \"subject\" and \"object\". "
    "Answer [] if the text contains no such pair. Output only the JSON array.\n"
    "\n"
    "{demonstrations}Text: {sentence}\n"
    "Pairs:";

json pairs_to_json(const std::vector<std::pair<std::string, std::string>>& pairs) {
  json arr = json::array();
  for (const auto& [subject, object] : pairs) {
    arr.push_back({{"subject", subject}, {"object", object}});
  }
  return arr;
}

}  // namespace

std::vector<Demonstration> build_demonstrations(const Corpus& train_corpus,
                                                const PredefinedRelation& relation,
                                                int n_demos, uint64_t seed) {
  std::vector<size_t> qualifying;
  std::vector<std::vector<std::pair<std::string, std::string>>> pair_sets;
  for (size_t i = 0; i < train_corpus.sentences.size(); ++i) {
    const Sentence& s = train_corpus.sentences[i];
    std::vector<std::pair<std::string, std::string>> pairs;
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& head : s.gold) {
      if (head.etype != relation.head_type) {
        continue;
      }
      for (const auto& tail : s.gold) {
        if (tail.etype != relation.tail_type) {
          continue;
        }
        if (head.span == tail.span) {
          continue;  // a mention never demonstrates a relation with itself
        }
        auto pair = std::make_pair(head.surface, tail.surface);
        if (seen.insert(pair).second) {
          pairs.push_back(std::move(pair));
        }
      }
    }
    if (!pairs.empty()) {
      qualifying.push_back(i);
      pair_sets.push_back(std::move(pairs));
    }
  }
  if (qualifying.empty() || n_demos <= 0) {
    return {};
  }

  size_t k = std::min<size_t>(static_cast<size_t>(n_demos), qualifying.size());
  std::vector<Demonstration> demos;
  for (size_t pick : seeded_subset(qualifying.size(), k, seed)) {
    demos.push_back(
        Demonstration{train_corpus.sentences[qualifying[pick]].text, pair_sets[pick]});
  }
  return demos;
}

PromptTemplate default_extraction_template() {
  return PromptTemplate{kDefaultExtractionTemplate};
}

std::string render_demonstrations(const std::vector<Demonstration>& demos) {
  std::string block;
  for (const auto& demo : demos) {
    block += "Text: " + demo.sentence_text + "\n";
    block += "Pairs: " + pairs_to_json(demo.pairs).dump() + "\n\n";
  }
  return block;
}

CompletionRequest build_extraction_prompt(const Sentence& sentence,
                                          const DiversifiedRelation& relation,
                                          const std::vector<Demonstration>& demos,
                                          const PromptTemplate& tmpl, const ModelParams& model) {
  tmpl.require({"relation", "head_type", "tail_type", "demonstrations", "sentence"});
  CompletionRequest req;
  req.system_text = kSystemText;
  req.user_text = tmpl.render({{"relation", relation.phrase},
                               {"head_type", relation.head_type},
                               {"tail_type", relation.tail_type},
                               {"demonstrations", render_demonstrations(demos)},
                               {"sentence", sentence.text}});
  req.temperature = model.temperature;
  req.max_output_chars = model.max_output_chars;
  req.model_id = model.model_id;
  return req;
}

namespace {

// Byte offset of the matching ']' for the '[' at `open`, honoring string
// literals and escapes; npos when unbalanced.
size_t matching_bracket(const std::string& text, size_t open) {
  int depth = 0;
  bool in_string = false;
  for (size_t i = open; i < text.size(); ++i) {
    char c = text[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '[' || c == '{') {
      ++depth;
    } else if (c == ']' || c == '}') {
      --depth;
      if (depth == 0) {
        return c == ']' ? i : std::string::npos;
      }
    }
  }
  return std::string::npos;
}

// An array qualifies when it is empty or every element is an object with
// string "subject" and "object" fields.
bool qualifies(const json& arr) {
  if (!arr.is_array()) {
    return false;
  }
  for (const auto& item : arr) {
    if (!item.is_object() || !item.contains("subject") || !item.contains("object") ||
        !item.at("subject").is_string() || !item.at("object").is_string()) {
      return false;
    }
  }
  return true;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> parse_pairs(const std::string& text) {
  for (size_t pos = text.find('['); pos != std::string::npos; pos = text.find('[', pos + 1)) {
    size_t close = matching_bracket(text, pos);
    if (close == std::string::npos) {
      continue;
    }
    json arr = json::parse(text.substr(pos, close - pos + 1), nullptr, false);
    if (arr.is_discarded() || !qualifies(arr)) {
      continue;
    }
    std::vector<std::pair<std::string, std::string>> pairs;
    for (const auto& item : arr) {
      std::string subject = normalize_text(item.at("subject").get<std::string>());
      std::string object = normalize_text(item.at("object").get<std::string>());
      if (subject.empty() || object.empty()) {
        continue;
      }
      pairs.emplace_back(std::move(subject), std::move(object));
    }
    return pairs;
  }
  throw ParseFailureError("no well-formed pair array in backend output: " + text.substr(0, 120));
}

std::optional<Span> ground_span(const std::string& sentence_text, const std::string& surface) {
  return find_cp(sentence_text, surface);
}

SentenceExtraction associate_entities(Backend& backend, const Sentence& sentence,
                                      const std::vector<RelationList>& relation_lists,
                                      const std::map<std::string, std::vector<Demonstration>>&
                                          demos_by_parent,
                                      const PipelineConfig& config, const PromptTemplate& tmpl) {
  static const std::vector<Demonstration> kNoDemos;
  SentenceExtraction out;
  out.sentence_id = sentence.id;
  for (const auto& list : relation_lists) {
    ListCandidates cell_list;
    cell_list.parent = list.parent;
    auto demos_it = demos_by_parent.find(list.parent.name);
    const auto& demos = demos_it == demos_by_parent.end() ? kNoDemos : demos_it->second;
    for (const auto& relation : list.relations) {
      RelationCandidate candidate;
      candidate.relation = relation;
      try {
        CompletionRequest req =
            build_extraction_prompt(sentence, relation, demos, tmpl, config.model);
        std::string raw = backend.complete(req).text;
        std::set<std::pair<std::string, std::string>> seen;
        for (auto& [subject, object] : parse_pairs(raw)) {
          if (!seen.insert({subject, object}).second) {
            continue;
          }
          auto subj_span = ground_span(sentence.text, subject);
          auto obj_span = ground_span(sentence.text, object);
          if (!subj_span || !obj_span) {
            ++out.hallucination_count;
            const char* reason = !subj_span && !obj_span ? "ungrounded_both"
                                 : !subj_span            ? "ungrounded_subject"
                                                         : "ungrounded_object";
            candidate.dropped.push_back(DroppedPair{subject, object, reason});
            continue;
          }
          candidate.pairs.push_back(SlotPair{Slot{subject, SlotRole::Subject},
                                             Slot{object, SlotRole::Object}, *subj_span,
                                             *obj_span, sentence.id});
        }
      } catch (const Error& ex) {
        candidate.parse_failed = true;
        out.failures.push_back(sentence.id + "/" + relation.phrase + ": " + ex.what());
      }
      cell_list.candidates.push_back(std::move(candidate));
    }
    out.lists.push_back(std::move(cell_list));
  }
  return out;
}

void save_candidates(const std::vector<SentenceExtraction>& extractions, std::ostream& out) {
  for (const auto& ext : extractions) {
    for (const auto& list : ext.lists) {
      for (const auto& cand : list.candidates) {
        json pairs = json::array();
        for (const auto& p : cand.pairs) {
          pairs.push_back({{"subject", p.subject.surface},
                           {"object", p.object.surface},
                           {"subject_span", {p.subject_span.start, p.subject_span.end}},
                           {"object_span", {p.object_span.start, p.object_span.end}}});
        }
        json dropped = json::array();
        for (const auto& d : cand.dropped) {
          dropped.push_back(
              {{"subject", d.subject}, {"object", d.object}, {"reason", d.reason}});
        }
        out << json{{"sentence_id", ext.sentence_id},
                    {"parent", list.parent.name},
                    {"phrase", cand.relation.phrase},
                    {"parse_failed", cand.parse_failed},
                    {"pairs", pairs},
                    {"dropped", dropped}}
                   .dump()
            << "\n";
      }
    }
  }
}

std::vector<SentenceExtraction> load_candidates(std::istream& in, const CorpusProfile& profile) {
  std::map<std::string, const PredefinedRelation*> parents;
  for (const auto& r : profile.relations) {
    parents[r.name] = &r;
  }

  std::vector<SentenceExtraction> out;
  std::map<std::string, size_t> sentence_index;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& ex) {
      throw DataFormatError("candidate line " + std::to_string(line_no) + ": " + ex.what());
    }
    try {
      std::string sid = j.at("sentence_id").get<std::string>();
      std::string parent_name = j.at("parent").get<std::string>();
      auto parent_it = parents.find(parent_name);
      if (parent_it == parents.end()) {
        throw DataFormatError("candidate line " + std::to_string(line_no) +
                              ": unknown relation \"" + parent_name + "\"");
      }
      const PredefinedRelation& parent = *parent_it->second;

      auto [sit, inserted] = sentence_index.try_emplace(sid, out.size());
      if (inserted) {
        out.push_back(SentenceExtraction{sid, {}, 0, {}});
      }
      SentenceExtraction& ext = out[sit->second];

      ListCandidates* list = nullptr;
      for (auto& l : ext.lists) {
        if (l.parent.name == parent_name) {
          list = &l;
          break;
        }
      }
      if (list == nullptr) {
        ext.lists.push_back(ListCandidates{parent, {}});
        list = &ext.lists.back();
      }

      RelationCandidate cand;
      cand.relation = DiversifiedRelation{j.at("phrase").get<std::string>(), parent.head_type,
                                          parent.tail_type, parent};
      cand.parse_failed = j.value("parse_failed", false);
      for (const auto& p : j.value("pairs", json::array())) {
        SlotPair pair;
        pair.subject = Slot{p.at("subject").get<std::string>(), SlotRole::Subject};
        pair.object = Slot{p.at("object").get<std::string>(), SlotRole::Object};
        pair.subject_span = Span{p.at("subject_span").at(0).get<size_t>(),
                                 p.at("subject_span").at(1).get<size_t>()};
        pair.object_span = Span{p.at("object_span").at(0).get<size_t>(),
                                p.at("object_span").at(1).get<size_t>()};
        pair.sentence_id = sid;
        cand.pairs.push_back(std::move(pair));
      }
      for (const auto& d : j.value("dropped", json::array())) {
        cand.dropped.push_back(DroppedPair{d.at("subject").get<std::string>(),
                                           d.at("object").get<std::string>(),
                                           d.at("reason").get<std::string>()});
        ++ext.hallucination_count;
      }
      list->candidates.push_back(std::move(cand));
    } catch (const json::exception& ex) {
      throw DataFormatError("candidate line " + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return out;
}

}  // namespace relner
