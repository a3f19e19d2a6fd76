#pragma once

// Planted-entity fixtures: synthetic Chinese sentences with known gold
// mentions and a mock script that makes the backend emit exactly the
// planted pairs (plus optional spurious low-consistency pairs).

#include <string>
#include <vector>

#include "relner/config.hpp"
#include "relner/corpus.hpp"
#include "relner/gateway.hpp"
#include "relner/types.hpp"

namespace fixtures {

struct PlantedFixture {
  relner::CorpusProfile profile;
  relner::Corpus corpus;
  std::vector<relner::MockEntry> script;
  relner::PipelineConfig config;
  size_t spurious_count = 0;
  std::vector<relner::EntityMention> spurious_mentions;  // wrong, grounded, filterable
};

// n_sentences <= 20. Every sentence is "<ORG>生产<PRO>。" with two gold
// mentions. The mock emits the gold pair for every diversified relation;
// with spurious=true roughly 30% of sentences additionally get a grounded
// but wrong pair on one relation, scored low enough for the screening
// threshold in `config` to remove it.
PlantedFixture make_planted_fixture(size_t n_sentences, bool spurious);

// Writes profile.json, corpus.jsonl, mock_script.jsonl and config.json
// (with cache under dir/cache) into dir; returns the config path.
std::string write_fixture_files(const PlantedFixture& fixture, const std::string& dir);

// Unique scratch directory under the system temp dir; removed contents if
// it already exists.
std::string fresh_temp_dir(const std::string& tag);

}  // namespace fixtures
