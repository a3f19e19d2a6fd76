#pragma once

// Independent reference implementations used as test oracles. Everything
// here recomputes results from first principles and must stay decoupled
// from the library code paths it checks.

#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "relner/eval.hpp"
#include "relner/types.hpp"

namespace oracle {

// Dense synchronous power iteration over an undirected, unweighted graph:
// r'(i) = beta * sum_j A_ij r(j)/deg(j) + (1-beta)/n, r0 = 1/n.
std::vector<double> pagerank_dense(size_t n, const std::set<std::pair<size_t, size_t>>& edges,
                                   double beta, int max_iters, double epsilon);

// Brute-force one-to-one exact matching (quadratic scan with used-flags).
relner::EvalCounts exact_match_bruteforce(const std::vector<relner::EntityMention>& gold,
                                          const std::vector<relner::EntityMention>& pred);

// Character n-gram Jaccard recomputed with sorted vectors instead of sets;
// order drops to unigrams when either side is a single character.
double jaccard_bigram(const std::string& a, const std::string& b);

// Reference implementation of the documented seeded-subset procedure.
std::vector<size_t> seeded_subset_reference(size_t n, size_t k, uint64_t seed);

// One screening trace: the slots a single relation list keeps at the given
// threshold, with their scores, computed entirely from oracle parts.
struct TraceSlot {
  relner::Slot slot;
  double reliability = 0.0;
  double consistency = 0.0;
  double combined = 0.0;
  bool kept = false;
};

struct TracePair {
  std::string subject;
  std::string object;
};

struct TraceInput {
  // One candidate per diversified phrase: (phrase, pairs).
  std::vector<std::pair<std::string, std::vector<TracePair>>> candidates;
};

struct TraceResult {
  std::map<std::string, TraceSlot> slots;  // key: role + ":" + surface
  std::vector<TracePair> kept_pairs;
};

TraceResult trace_screen_list(const TraceInput& input, const std::string& sentence_text,
                              double beta, double lambda, double threshold, int max_iters,
                              double epsilon);

}  // namespace oracle
