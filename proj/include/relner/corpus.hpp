#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "relner/types.hpp"

namespace relner {

struct CorpusProfile {
  std::string profile_name;
  std::vector<EntityType> schema;  // declaration order matters for tie-breaks
  std::vector<PredefinedRelation> relations;

  bool has_type(const EntityType& t) const;

  static CorpusProfile from_json(const nlohmann::json& j);
  static CorpusProfile load_file(const std::string& path);
  nlohmann::json to_json() const;
};

struct Corpus {
  std::string profile_name;
  std::vector<EntityType> schema;
  std::vector<Sentence> sentences;
};

struct CorpusStats {
  std::map<EntityType, size_t> per_type_counts;
  size_t sentence_count = 0;
  size_t token_count = 0;           // Unicode characters across sentence texts
  size_t distinct_token_count = 0;
  double ttr = 0.0;
  bool ttr_defined = false;         // false for the empty corpus
};

struct ConllOptions {
  std::string joiner;        // "" joins single-character Chinese tokens
  bool lenient_bio = false;  // repair I-X without a preceding B-X/I-X to B-X
  std::string id_prefix = "s";
};

// Token/tag rows of one CoNLL sentence, as read from the file.
struct ConllSentence {
  std::vector<std::string> tokens;
  std::vector<std::string> tags;
  size_t first_line = 0;  // 1-based, for error messages
};

// -- CoNLL-BIO --------------------------------------------------------------

// For every reader, an empty schema means "accept any entity type"; a
// non-empty one rejects unknown types with the offending location.

std::vector<ConllSentence> read_conll_sentences(std::istream& in);

// Decodes maximal B-I runs into mention spans over the joined text.
Sentence decode_bio(const ConllSentence& rows, const std::vector<EntityType>& schema,
                    const ConllOptions& opts, const std::string& sentence_id);

// Inverse of decode_bio for well-formed input; used by the round-trip checks.
std::vector<std::string> encode_bio(const std::vector<std::string>& tokens,
                                    const std::vector<EntityMention>& mentions,
                                    const std::string& joiner);

Corpus read_conll(std::istream& in, const std::vector<EntityType>& schema,
                  const ConllOptions& opts = {});

// -- YEDDA inline markup ----------------------------------------------------

Corpus import_yedda(std::istream& in, const std::vector<EntityType>& schema,
                    const std::string& id_prefix = "s");

// Re-inserts [@surface#TYPE*] markup at mention offsets.
std::string render_yedda(const Sentence& sentence);

// -- Canonical JSONL --------------------------------------------------------

Corpus load_jsonl(std::istream& in, const std::vector<EntityType>& schema = {});
Corpus load_jsonl_file(const std::string& path, const std::vector<EntityType>& schema = {});
void save_jsonl(const Corpus& corpus, std::ostream& out);
void save_jsonl_file(const Corpus& corpus, const std::string& path);

// -- Sampling and statistics ------------------------------------------------

// Deterministic k-subset of 0..n-1: Fisher-Yates over the index vector
// driven by mt19937_64(seed) with rejection-sampled bounded draws, first k
// entries kept, returned in ascending order.
std::vector<size_t> seeded_subset(size_t n, size_t k, uint64_t seed);

Corpus sample_few_shot(const Corpus& corpus, size_t k, uint64_t seed);

CorpusStats corpus_stats(const Corpus& corpus);

// Checks span bounds, surface agreement and gold dedup; throws DataFormatError.
void validate_sentence(const Sentence& sentence);

}  // namespace relner
