#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "relner/config.hpp"
#include "relner/extractor.hpp"
#include "relner/similarity.hpp"
#include "relner/types.hpp"

namespace relner {

// Undirected slot co-occurrence graph over one relation list for one
// sentence. Parallel co-occurrences collapse to one edge; degree counts
// distinct neighbors. Nodes are sorted by (surface, role) so iteration
// order, and therefore floating-point accumulation, is reproducible.
struct SlotGraph {
  std::vector<Slot> nodes;
  std::vector<std::vector<size_t>> neighbors;       // sorted index lists
  std::vector<std::vector<double>> edge_weights;    // co-occurrence counts (weighted mode)

  size_t size() const { return nodes.size(); }
  size_t index_of(const Slot& slot) const;  // nodes.size() when absent
};

SlotGraph build_slot_graph(const std::vector<RelationCandidate>& candidates);

struct ReliabilityResult {
  std::map<Slot, double> scores;
  int iterations_used = 0;
};

// Damped co-occurrence PageRank: every score starts at 1/|nodes| and
// iterates r'(s) = beta * sum_{k in N(s)} r(k)/d(k) + (1-beta)/|nodes|
// synchronously until the largest per-slot change drops below epsilon or
// max_iters is hit. weighted=true replaces the neighbor fractions with
// co-occurrence-weighted ones (opt-in, non-default).
ReliabilityResult reliability(const SlotGraph& graph, double beta, int max_iters,
                              double epsilon, bool weighted = false);

// Similarity between the slot's relation context ("subject phrase object")
// and the sentence, maximized over the pairs of this candidate that contain
// the slot. Throws Error when the slot occurs in none of them.
double consistency(const Slot& slot, const RelationCandidate& candidate,
                   const std::string& sentence_text, SimilarityProvider& provider);

inline double combined_score(double reliability, double consistency, double lambda_weight) {
  return (lambda_weight * reliability) * consistency;
}

struct SlotScore {
  Slot slot;
  double reliability = 0.0;
  double consistency = 0.0;
  double combined = 0.0;
  int iterations_used = 0;
  bool kept = false;
};

struct ScreenedPair {
  SlotPair pair;
  double subject_score = 0.0;
  double object_score = 0.0;
};

// Surviving pairs of one relation list after threshold filtering.
struct ScreenedRelation {
  PredefinedRelation parent;
  std::vector<ScreenedPair> pairs;
};

struct ScoreRecord {
  std::string sentence_id;
  std::string parent;
  SlotScore score;
};

struct ScreenOutcome {
  std::vector<ScreenedRelation> screened;
  std::vector<ScoreRecord> score_log;  // audit trail, one row per slot per list
  size_t provider_failures = 0;        // slots whose consistency degraded to 0
};

// The screening pass for one sentence: per list, graph + reliability +
// per-candidate consistency (max across candidates for filtering), combined
// score, then deletion of slots under the threshold and of every pair that
// contains one.
ScreenOutcome screen(const std::vector<ListCandidates>& lists, const Sentence& sentence,
                     SimilarityProvider& provider, const PipelineConfig& config);

// The no-estimate ablation: every grounded pair passes through unscored.
ScreenOutcome screen_passthrough(const std::vector<ListCandidates>& lists);

// Subject slots become head-typed mentions, object slots tail-typed ones.
// Duplicates on (type, span) merge; same-span type conflicts resolve by
// highest combined score, then profile declaration order.
std::vector<EntityMention> aggregate_entities(const std::vector<ScreenedRelation>& screened,
                                              const Sentence& sentence,
                                              const CorpusProfile& profile);

void save_scores(const std::vector<ScoreRecord>& records, std::ostream& out);

}  // namespace relner
