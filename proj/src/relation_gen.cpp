#include "relner/relation_gen.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "relner/errors.hpp"
#include "relner/parallel.hpp"
#include "relner/text.hpp"

namespace relner {

using json = nlohmann::json;

namespace {

constexpr const char* kSystemText =
    "You are an information extraction assistant for named entities.";

constexpr const char* kDefaultRelationTemplate =
    "Relation: {relation}\n"
    "Head entity type: {head_type}\n"
    "Tail entity type: {tail_type}\n"
    "\n"
    "List exactly {n} short alternative phrasings of the relation \"{relation}\" that could "
    "hold between a \"{head_type}\" entity and a \"{tail_type}\" entity. Answer with a "
    "numbered list, one phrasing per line, and nothing else.\n";

}  // namespace

PromptTemplate PromptTemplate::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open template file: " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return PromptTemplate{buf.str()};
}

void PromptTemplate::require(const std::vector<std::string>& placeholders) const {
  for (const auto& name : placeholders) {
    if (text.find("{" + name + "}") == std::string::npos) {
      throw TemplateError("template is missing the {" + name + "} placeholder");
    }
  }
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& values) const {
  std::string out = text;
  for (const auto& [name, value] : values) {
    const std::string needle = "{" + name + "}";
    size_t pos = 0;
    while ((pos = out.find(needle, pos)) != std::string::npos) {
      out.replace(pos, needle.size(), value);
      pos += value.size();
    }
  }
  return out;
}

PromptTemplate default_relation_template() { return PromptTemplate{kDefaultRelationTemplate}; }

CompletionRequest build_relation_prompt(const PredefinedRelation& parent, int n_diverse,
                                        const PromptTemplate& tmpl, const ModelParams& model,
                                        double temperature) {
  tmpl.require({"relation", "head_type", "tail_type", "n"});
  CompletionRequest req;
  req.system_text = kSystemText;
  req.user_text = tmpl.render({{"relation", parent.name},
                               {"head_type", parent.head_type},
                               {"tail_type", parent.tail_type},
                               {"n", std::to_string(n_diverse)}});
  req.temperature = temperature;
  req.max_output_chars = model.max_output_chars;
  req.model_id = model.model_id;
  return req;
}

namespace {

// Strips list numbering ("1.", "2)", "3、"), bullets and surrounding quotes.
std::string strip_list_decoration(const std::string& line) {
  std::u32string cps = decode_utf8_lossy(line);
  size_t i = 0;
  while (i < cps.size() && is_space_cp(cps[i])) {
    ++i;
  }
  size_t digits = i;
  while (digits < cps.size() && cps[digits] >= U'0' && cps[digits] <= U'9') {
    ++digits;
  }
  if (digits > i && digits < cps.size() &&
      (cps[digits] == U'.' || cps[digits] == U')' || cps[digits] == U':' ||
       cps[digits] == U'、' || cps[digits] == U'．')) {
    i = digits + 1;
  } else if (i < cps.size() && (cps[i] == U'-' || cps[i] == U'*' || cps[i] == U'•')) {
    ++i;
  }
  size_t end = cps.size();
  auto is_quote = [](char32_t c) {
    return c == U'"' || c == U'\'' || c == U'“' || c == U'”' || c == U'「' || c == U'」';
  };
  while (i < end && (is_space_cp(cps[i]) || is_quote(cps[i]))) {
    ++i;
  }
  while (end > i && (is_space_cp(cps[end - 1]) || is_quote(cps[end - 1]))) {
    --end;
  }
  return encode_utf8(cps.substr(i, end - i));
}

}  // namespace

RelationList parse_relation_list(const std::string& text, const PredefinedRelation& parent,
                                 int n_diverse) {
  RelationList list;
  list.parent = parent;
  std::set<std::string> seen;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line) &&
         list.relations.size() < static_cast<size_t>(n_diverse)) {
    std::string phrase = normalize_text(strip_list_decoration(line));
    if (phrase.empty() || !seen.insert(phrase).second) {
      continue;
    }
    list.relations.push_back(
        DiversifiedRelation{phrase, parent.head_type, parent.tail_type, parent});
  }
  if (list.relations.empty()) {
    throw GenerationEmptyError("no relation phrases parsed for \"" + parent.name + "\"");
  }
  return list;
}

GenerationOutcome generate_relation_lists(Backend& backend, const CorpusProfile& profile,
                                          const PipelineConfig& config,
                                          const PromptTemplate& tmpl, bool no_relation_list) {
  if (profile.relations.empty()) {
    throw ConfigError("profile declares no predefined relations");
  }

  auto parent_only = [](const PredefinedRelation& parent) {
    RelationList list;
    list.parent = parent;
    list.relations.push_back(DiversifiedRelation{normalize_text(parent.name), parent.head_type,
                                                 parent.tail_type, parent});
    return list;
  };

  GenerationOutcome outcome;
  outcome.lists.resize(profile.relations.size());
  std::vector<std::string> failures(profile.relations.size());

  parallel_for(profile.relations.size(), config.max_concurrency, [&](size_t i) {
    const PredefinedRelation& parent = profile.relations[i];
    RelationList list = parent_only(parent);
    if (!no_relation_list) {
      try {
        RelationList generated;
        try {
          CompletionRequest req = build_relation_prompt(parent, config.n_diverse, tmpl,
                                                        config.model,
                                                        config.relation_temperature);
          generated = parse_relation_list(backend.complete(req).text, parent, config.n_diverse);
        } catch (const GenerationEmptyError&) {
          // One retry, warmer; a second empty answer fails this relation only.
          CompletionRequest req = build_relation_prompt(parent, config.n_diverse, tmpl,
                                                        config.model,
                                                        config.relation_temperature + 0.3);
          generated = parse_relation_list(backend.complete(req).text, parent, config.n_diverse);
        }
        for (auto& rel : generated.relations) {
          if (rel.phrase != list.relations.front().phrase) {
            list.relations.push_back(std::move(rel));
          }
        }
      } catch (const Error& ex) {
        failures[i] = parent.name + ": " + ex.what();
        return;
      }
    }
    outcome.lists[i] = std::move(list);
  });

  // Compact: drop failed slots, keep declaration order.
  std::vector<RelationList> kept;
  for (size_t i = 0; i < outcome.lists.size(); ++i) {
    if (!failures[i].empty()) {
      outcome.failed_relations.push_back(failures[i]);
    } else {
      kept.push_back(std::move(outcome.lists[i]));
    }
  }
  outcome.lists = std::move(kept);
  return outcome;
}

void save_relation_lists(const std::vector<RelationList>& lists, const std::string& path) {
  json j = json::object();
  for (const auto& list : lists) {
    json phrases = json::array();
    for (const auto& rel : list.relations) {
      phrases.push_back(rel.phrase);
    }
    j[list.parent.name] = phrases;
  }
  std::ofstream out(path);
  if (!out) {
    throw ConfigError("cannot write relation list file: " + path);
  }
  out << j.dump(2) << "\n";
}

std::vector<RelationList> load_relation_lists(const std::string& path,
                                              const CorpusProfile& profile) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open relation list file: " + path);
  }
  json j;
  try {
    in >> j;
  } catch (const json::exception& ex) {
    throw DataFormatError("relation list file " + path + " is not valid JSON: " + ex.what());
  }
  std::vector<RelationList> lists;
  for (const auto& parent : profile.relations) {
    if (!j.contains(parent.name)) {
      continue;
    }
    RelationList list;
    list.parent = parent;
    std::set<std::string> seen;
    for (const auto& p : j.at(parent.name)) {
      std::string phrase = normalize_text(p.get<std::string>());
      if (phrase.empty() || !seen.insert(phrase).second) {
        continue;
      }
      list.relations.push_back(
          DiversifiedRelation{phrase, parent.head_type, parent.tail_type, parent});
    }
    if (list.relations.empty()) {
      throw DataFormatError("relation list for \"" + parent.name + "\" is empty in " + path);
    }
    lists.push_back(std::move(list));
  }
  if (lists.empty()) {
    throw DataFormatError("relation list file " + path +
                          " matches no relation declared by the profile");
  }
  return lists;
}

}  // namespace relner
