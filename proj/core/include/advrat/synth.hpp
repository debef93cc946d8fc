#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include "advrat/corpus.hpp"
#include "advrat/lexres.hpp"

namespace advrat {

// Desk-scale reading-comprehension corpus. Two templates:
//   counting     "all five friends showed up and susan did send cards to each friend ."
//                query "how many cards did susan send ? || 5"
//   entity-fact  "susan felt happy at the party ."
//                query "who did feel happy ? || susan"
// False instances use a wrong count (count + 1) or the antonym adjective.
// The fact sentence is the human rationale; the other sentences are
// distractors built from the shared entity, place and object pools.
struct SynthConfig {
  std::size_t instances = 100;
  std::size_t entity_pairs = 12;     // entities come in mutual-nearest-neighbour pairs
  std::size_t adjective_pairs = 6;   // (positive, negative) antonym pairs
  std::size_t max_count = 9;         // counts range over 2..max_count
  std::size_t distractor_sentences = 4;
  double counting_fraction = 0.5;    // template mix
  std::size_t embedding_dim = 8;
  std::uint64_t seed = 0;

  // Throws ConfigError for infeasible settings.
  void validate() const;
};

struct SynthOutput {
  Dataset dataset;
  LexicalResources resources;
};

SynthOutput generate(const SynthConfig& config);

enum class SynthTemplate { Counting, EntityFact };

// Recognises the template of a generated query; nullopt for foreign queries.
std::optional<SynthTemplate> synth_template_of(const Tokens& query);

// Label implied by the fact sentence and the query alone; nullopt when the
// sentence does not state the fact the query asks about.
std::optional<bool> label_from_fact(const Tokens& fact_sentence, const Tokens& query);

}  // namespace advrat
