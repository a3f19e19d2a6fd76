#pragma once

#include <map>
#include <string>
#include <vector>

#include "relner/config.hpp"
#include "relner/corpus.hpp"
#include "relner/gateway.hpp"
#include "relner/types.hpp"

namespace relner {

// An LLM-generated paraphrase of a predefined relation. Entity types are
// always inherited from the parent.
struct DiversifiedRelation {
  std::string phrase;  // normalized, distinct from siblings
  EntityType head_type;
  EntityType tail_type;
  PredefinedRelation parent;

  auto operator<=>(const DiversifiedRelation&) const = default;
};

struct RelationList {
  PredefinedRelation parent;
  std::vector<DiversifiedRelation> relations;
};

// UTF-8 text with {name} placeholders.
struct PromptTemplate {
  std::string text;

  static PromptTemplate load_file(const std::string& path);

  // Throws TemplateError when any placeholder is absent from the text.
  void require(const std::vector<std::string>& placeholders) const;
  std::string render(const std::map<std::string, std::string>& values) const;
};

PromptTemplate default_relation_template();

// Zero-shot prompt asking for exactly n numbered relation phrases between
// the parent's two entity types.
CompletionRequest build_relation_prompt(const PredefinedRelation& parent, int n_diverse,
                                        const PromptTemplate& tmpl, const ModelParams& model,
                                        double temperature);

// Extracts numbered or line-separated phrases from raw backend output:
// normalized, deduplicated keeping first occurrence, truncated to
// n_diverse, each typed from the parent. Throws GenerationEmptyError when
// nothing parses.
RelationList parse_relation_list(const std::string& text, const PredefinedRelation& parent,
                                 int n_diverse);

struct GenerationOutcome {
  std::vector<RelationList> lists;             // profile declaration order
  std::vector<std::string> failed_relations;   // names, with reasons
};

// One list per predefined relation, the parent itself always prepended as
// r_1 so the no-relation-list ablation degenerates to parent-only lists.
// A relation whose generation fails twice is dropped into failed_relations;
// other relations' lists still come back.
GenerationOutcome generate_relation_lists(Backend& backend, const CorpusProfile& profile,
                                          const PipelineConfig& config,
                                          const PromptTemplate& tmpl,
                                          bool no_relation_list = false);

// JSON artifact mapping parent name -> ordered phrase list.
void save_relation_lists(const std::vector<RelationList>& lists, const std::string& path);
std::vector<RelationList> load_relation_lists(const std::string& path,
                                              const CorpusProfile& profile);

}  // namespace relner
