#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "relner/config.hpp"
#include "relner/corpus.hpp"
#include "relner/gateway.hpp"
#include "relner/relation_gen.hpp"
#include "relner/types.hpp"

namespace relner {

// A grounded (subject, object) extraction for one sentence. Both surfaces
// are normalized and both spans point at their leftmost occurrence in the
// sentence; ungrounded pairs never get this far.
struct SlotPair {
  Slot subject;  // role Subject
  Slot object;   // role Object
  Span subject_span;
  Span object_span;
  std::string sentence_id;

  auto operator<=>(const SlotPair&) const = default;
};

// A pair the backend emitted whose surfaces never grounded in the sentence.
struct DroppedPair {
  std::string subject;
  std::string object;
  std::string reason;  // ungrounded_subject | ungrounded_object | ungrounded_both

  auto operator<=>(const DroppedPair&) const = default;
};

// The pairs one diversified relation extracted from one sentence.
struct RelationCandidate {
  DiversifiedRelation relation;
  std::vector<SlotPair> pairs;      // grounded, deduplicated on surfaces
  std::vector<DroppedPair> dropped;  // hallucinated surfaces, kept for the audit trail
  bool parse_failed = false;
};

// All candidates of one relation list for one sentence.
struct ListCandidates {
  PredefinedRelation parent;
  std::vector<RelationCandidate> candidates;
};

struct SentenceExtraction {
  std::string sentence_id;
  std::vector<ListCandidates> lists;
  size_t hallucination_count = 0;        // pairs dropped by grounding
  std::vector<std::string> failures;     // per-cell backend/parse failures
};

// In-context example: a training sentence with its gold-derived pairs for
// one predefined relation.
struct Demonstration {
  std::string sentence_text;
  std::vector<std::pair<std::string, std::string>> pairs;
};

// Deterministically selects up to n_demos training sentences that contain
// gold mentions of both end types, pairing every head mention with every
// tail mention (the corpora carry entity gold but no relation gold).
// Returns empty when nothing qualifies; callers fall back to zero-shot.
std::vector<Demonstration> build_demonstrations(const Corpus& train_corpus,
                                                const PredefinedRelation& relation,
                                                int n_demos, uint64_t seed);

PromptTemplate default_extraction_template();

std::string render_demonstrations(const std::vector<Demonstration>& demos);

CompletionRequest build_extraction_prompt(const Sentence& sentence,
                                          const DiversifiedRelation& relation,
                                          const std::vector<Demonstration>& demos,
                                          const PromptTemplate& tmpl, const ModelParams& model);

// Pulls the first well-formed JSON array of {"subject","object"} objects
// out of raw backend output, tolerating surrounding prose. Surfaces come
// back normalized; pairs with an empty field are dropped. Throws
// ParseFailureError when no such array exists anywhere.
std::vector<std::pair<std::string, std::string>> parse_pairs(const std::string& text);

// Leftmost exact occurrence of surface as a character span; nullopt means
// the surface is hallucinated.
std::optional<Span> ground_span(const std::string& sentence_text, const std::string& surface);

// Runs every (list, relation) cell for one sentence: prompt, parse,
// normalize, dedup, ground. Cell failures degrade to empty candidates and
// are recorded; callers escalate only when every cell of a run fails.
SentenceExtraction associate_entities(Backend& backend, const Sentence& sentence,
                                      const std::vector<RelationList>& relation_lists,
                                      const std::map<std::string, std::vector<Demonstration>>&
                                          demos_by_parent,
                                      const PipelineConfig& config, const PromptTemplate& tmpl);

// Candidate dump: one JSONL record per (sentence, relation), the input
// format of the screening stage.
void save_candidates(const std::vector<SentenceExtraction>& extractions, std::ostream& out);
std::vector<SentenceExtraction> load_candidates(std::istream& in, const CorpusProfile& profile);

}  // namespace relner
