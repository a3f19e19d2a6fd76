#include "relner/screening.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <set>

#include "relner/errors.hpp"
#include "relner/text.hpp"

namespace relner {

using json = nlohmann::json;

size_t SlotGraph::index_of(const Slot& slot) const {
  auto it = std::lower_bound(nodes.begin(), nodes.end(), slot);
  if (it == nodes.end() || *it != slot) {
    return nodes.size();
  }
  return static_cast<size_t>(it - nodes.begin());
}

SlotGraph build_slot_graph(const std::vector<RelationCandidate>& candidates) {
  SlotGraph graph;
  std::set<Slot> node_set;
  for (const auto& cand : candidates) {
    for (const auto& pair : cand.pairs) {
      node_set.insert(pair.subject);
      node_set.insert(pair.object);
    }
  }
  graph.nodes.assign(node_set.begin(), node_set.end());

  std::map<std::pair<size_t, size_t>, double> edges;  // co-occurrence multiplicity
  for (const auto& cand : candidates) {
    for (const auto& pair : cand.pairs) {
      size_t a = graph.index_of(pair.subject);
      size_t b = graph.index_of(pair.object);
      if (a == b) {
        continue;  // no self-loops
      }
      edges[{std::min(a, b), std::max(a, b)}] += 1.0;
    }
  }

  graph.neighbors.resize(graph.nodes.size());
  graph.edge_weights.resize(graph.nodes.size());
  for (const auto& [edge, weight] : edges) {
    graph.neighbors[edge.first].push_back(edge.second);
    graph.edge_weights[edge.first].push_back(weight);
    graph.neighbors[edge.second].push_back(edge.first);
    graph.edge_weights[edge.second].push_back(weight);
  }
  // std::map iteration already yields sorted neighbor lists for the lower
  // endpoint; the mirrored entries need one pass.
  for (size_t i = 0; i < graph.nodes.size(); ++i) {
    std::vector<size_t> order(graph.neighbors[i].size());
    for (size_t k = 0; k < order.size(); ++k) {
      order[k] = k;
    }
    std::sort(order.begin(), order.end(), [&](size_t x, size_t y) {
      return graph.neighbors[i][x] < graph.neighbors[i][y];
    });
    std::vector<size_t> sorted_neighbors(order.size());
    std::vector<double> sorted_weights(order.size());
    for (size_t k = 0; k < order.size(); ++k) {
      sorted_neighbors[k] = graph.neighbors[i][order[k]];
      sorted_weights[k] = graph.edge_weights[i][order[k]];
    }
    graph.neighbors[i] = std::move(sorted_neighbors);
    graph.edge_weights[i] = std::move(sorted_weights);
  }
  return graph;
}

ReliabilityResult reliability(const SlotGraph& graph, double beta, int max_iters,
                              double epsilon, bool weighted) {
  ReliabilityResult result;
  const size_t n = graph.size();
  if (n == 0) {
    return result;
  }

  std::vector<double> out_mass(n, 0.0);  // d(k), or total edge weight at k
  for (size_t k = 0; k < n; ++k) {
    if (weighted) {
      for (double w : graph.edge_weights[k]) {
        out_mass[k] += w;
      }
    } else {
      out_mass[k] = static_cast<double>(graph.neighbors[k].size());
    }
  }

  const double teleport = (1.0 - beta) / static_cast<double>(n);
  std::vector<double> scores(n, 1.0 / static_cast<double>(n));
  std::vector<double> next(n, 0.0);
  int iterations = 0;
  while (iterations < max_iters) {
    ++iterations;
    double max_delta = 0.0;
    for (size_t s = 0; s < n; ++s) {
      double incoming = 0.0;
      for (size_t idx = 0; idx < graph.neighbors[s].size(); ++idx) {
        size_t k = graph.neighbors[s][idx];
        double fraction = weighted ? graph.edge_weights[s][idx] / out_mass[k]
                                   : 1.0 / out_mass[k];
        incoming += scores[k] * fraction;
      }
      next[s] = beta * incoming + teleport;
      max_delta = std::max(max_delta, std::fabs(next[s] - scores[s]));
    }
    scores.swap(next);
    if (max_delta < epsilon) {
      break;
    }
  }

  result.iterations_used = iterations;
  for (size_t s = 0; s < n; ++s) {
    result.scores[graph.nodes[s]] = scores[s];
  }
  return result;
}

namespace {

std::string pair_context(const SlotPair& pair, const std::string& phrase) {
  return pair.subject.surface + " " + phrase + " " + pair.object.surface;
}

}  // namespace

double consistency(const Slot& slot, const RelationCandidate& candidate,
                   const std::string& sentence_text, SimilarityProvider& provider) {
  double best = -1.0;
  for (const auto& pair : candidate.pairs) {
    if (pair.subject != slot && pair.object != slot) {
      continue;
    }
    best = std::max(best,
                    provider.similarity(pair_context(pair, candidate.relation.phrase),
                                        sentence_text));
  }
  if (best < 0.0) {
    throw Error("slot \"" + slot.surface + "\" occurs in no pair of candidate \"" +
                candidate.relation.phrase + "\"");
  }
  return best;
}

ScreenOutcome screen(const std::vector<ListCandidates>& lists, const Sentence& sentence,
                     SimilarityProvider& provider, const PipelineConfig& config) {
  ScreenOutcome outcome;
  for (const auto& list : lists) {
    SlotGraph graph = build_slot_graph(list.candidates);
    ReliabilityResult rel = reliability(graph, config.beta, config.max_iters, config.epsilon,
                                        config.weighted_edges);

    // A slot's consistency for filtering is its maximum across the list's
    // candidates; provider failures degrade to 0 (filter-leaning).
    std::map<Slot, double> max_consistency;
    for (const auto& node : graph.nodes) {
      max_consistency[node] = 0.0;
    }
    for (const auto& cand : list.candidates) {
      std::set<Slot> cand_slots;
      for (const auto& pair : cand.pairs) {
        cand_slots.insert(pair.subject);
        cand_slots.insert(pair.object);
      }
      for (const auto& slot : cand_slots) {
        double value = 0.0;
        try {
          value = consistency(slot, cand, sentence.text, provider);
        } catch (const ProviderError&) {
          ++outcome.provider_failures;
        }
        max_consistency[slot] = std::max(max_consistency[slot], value);
      }
    }

    std::map<Slot, SlotScore> scores;
    for (const auto& node : graph.nodes) {
      SlotScore score;
      score.slot = node;
      score.reliability = rel.scores.at(node);
      score.consistency = max_consistency.at(node);
      score.combined = combined_score(score.reliability, score.consistency,
                                      config.lambda_weight);
      score.iterations_used = rel.iterations_used;
      score.kept = !(score.combined < config.score_threshold);
      scores[node] = score;
      outcome.score_log.push_back(ScoreRecord{sentence.id, list.parent.name, score});
    }

    ScreenedRelation screened;
    screened.parent = list.parent;
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& cand : list.candidates) {
      for (const auto& pair : cand.pairs) {
        const SlotScore& subj = scores.at(pair.subject);
        const SlotScore& obj = scores.at(pair.object);
        if (!subj.kept || !obj.kept) {
          continue;
        }
        if (!seen.insert({pair.subject.surface, pair.object.surface}).second) {
          continue;
        }
        screened.pairs.push_back(ScreenedPair{pair, subj.combined, obj.combined});
      }
    }
    outcome.screened.push_back(std::move(screened));
  }
  return outcome;
}

ScreenOutcome screen_passthrough(const std::vector<ListCandidates>& lists) {
  ScreenOutcome outcome;
  for (const auto& list : lists) {
    ScreenedRelation screened;
    screened.parent = list.parent;
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& cand : list.candidates) {
      for (const auto& pair : cand.pairs) {
        if (!seen.insert({pair.subject.surface, pair.object.surface}).second) {
          continue;
        }
        screened.pairs.push_back(ScreenedPair{pair, 1.0, 1.0});
      }
    }
    outcome.screened.push_back(std::move(screened));
  }
  return outcome;
}

std::vector<EntityMention> aggregate_entities(const std::vector<ScreenedRelation>& screened,
                                              const Sentence& sentence,
                                              const CorpusProfile& profile) {
  std::map<std::string, size_t> declaration_order;
  for (size_t i = 0; i < profile.relations.size(); ++i) {
    declaration_order.emplace(profile.relations[i].name, i);
  }

  struct Claim {
    EntityType etype;
    double score;
    size_t decl_index;
    std::string surface;
  };
  std::map<Span, std::vector<Claim>> claims;
  for (const auto& rel : screened) {
    auto decl_it = declaration_order.find(rel.parent.name);
    size_t decl = decl_it == declaration_order.end() ? declaration_order.size()
                                                     : decl_it->second;
    for (const auto& p : rel.pairs) {
      claims[p.pair.subject_span].push_back(
          Claim{rel.parent.head_type, p.subject_score, decl, p.pair.subject.surface});
      claims[p.pair.object_span].push_back(
          Claim{rel.parent.tail_type, p.object_score, decl, p.pair.object.surface});
    }
  }

  std::vector<EntityMention> mentions;
  for (auto& [span, span_claims] : claims) {
    // Merge duplicates on type first (keeping the best score), then let the
    // strongest claim decide the type of a contested span.
    std::map<EntityType, Claim> by_type;
    for (const auto& claim : span_claims) {
      auto [it, inserted] = by_type.try_emplace(claim.etype, claim);
      if (!inserted && (claim.score > it->second.score ||
                        (claim.score == it->second.score &&
                         claim.decl_index < it->second.decl_index))) {
        it->second = claim;
      }
    }
    const Claim* winner = nullptr;
    for (const auto& [etype, claim] : by_type) {
      if (winner == nullptr || claim.score > winner->score ||
          (claim.score == winner->score && claim.decl_index < winner->decl_index)) {
        winner = &claim;
      }
    }
    mentions.push_back(EntityMention{winner->surface, winner->etype, span, sentence.id});
  }
  std::sort(mentions.begin(), mentions.end(), [](const auto& a, const auto& b) {
    return std::tie(a.span, a.etype) < std::tie(b.span, b.etype);
  });
  return mentions;
}

void save_scores(const std::vector<ScoreRecord>& records, std::ostream& out) {
  for (const auto& r : records) {
    out << json{{"sentence_id", r.sentence_id},
                {"parent", r.parent},
                {"slot", r.score.slot.surface},
                {"role", to_string(r.score.slot.role)},
                {"reliability", r.score.reliability},
                {"consistency", r.score.consistency},
                {"combined", r.score.combined},
                {"iterations", r.score.iterations_used},
                {"kept", r.score.kept}}
               .dump()
        << "\n";
  }
}

}  // namespace relner
