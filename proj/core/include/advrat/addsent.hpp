#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "advrat/corpus.hpp"
#include "advrat/lexres.hpp"
#include "advrat/rng.hpp"

namespace advrat {

enum class MutationReason { EntityNN, NumberNN, Antonym };

std::string_view to_string(MutationReason reason);

struct Mutation {
  std::size_t position = 0;
  std::string original;
  std::string replacement;
  MutationReason reason = MutationReason::Antonym;

  friend bool operator==(const Mutation&, const Mutation&) = default;
};

using MutationLog = std::vector<Mutation>;

struct MutatedQuery {
  Tokens query;
  MutationLog log;
};

// Replaces every entity and number with its nearest same-class neighbour and
// every adjective/noun that has an antonym with that antonym. Numbers without
// a number neighbour fall back to a decimal increment. Returns nullopt when
// nothing was mutated.
std::optional<MutatedQuery> mutate_query(const Tokens& query, const LexicalResources& resources);

enum class RuleId { WhSubstitution, HowManySubstitution, DeclarativeIdentity };

std::string_view to_string(RuleId rule);

// Declarative attack sentence; always ends with "." and contains no "?".
struct AttackSentence {
  Tokens tokens;
  RuleId rule = RuleId::DeclarativeIdentity;
};

// Applies the first matching conversion rule:
//   wh-substitution   "who|what|which X|when|where ... ? || ANS" -> "ANS ... ."
//   how-many          "how many X did ... ? || ANS"             -> "ANS X did ... ."
//   identity          declarative input without "?" or "||"     -> input + "."
// Returns nullopt when no rule applies.
std::optional<AttackSentence> declarativize(const Tokens& mutated_query);

// Inserts the attack at a uniformly chosen sentence boundary (start and end
// included) and shifts the human rationale accordingly.
AttackedInstance insert(const Instance& instance, const AttackSentence& attack, Rng& rng);

// mutate -> declarativize -> insert; nullopt if either of the first two fails.
std::optional<AttackedInstance> attack_instance(const Instance& instance,
                                                const LexicalResources& resources, Rng& rng);

// Id given to the k-th attacked copy of an instance.
std::string attacked_id(const std::string& base_id, std::size_t copy);

struct AugmentResult {
  Dataset dataset;
  std::size_t skipped = 0;
};

// Every clean instance followed by up to `copies` attacked variants. The rng
// for each variant is keyed by (seed, instance id, copy index). Instances that
// already carry an attack mask pass through untouched. Throws ConfigError when
// copies == 0.
AugmentResult augment_dataset(const Dataset& dataset, std::size_t copies,
                              const LexicalResources& resources, std::uint64_t seed);

// One attacked variant per clean instance; skipped instances are dropped.
AugmentResult attack_dataset(const Dataset& dataset, const LexicalResources& resources,
                             std::uint64_t seed);

// Rng used for copy `copy` of instance `id`.
Rng attack_rng(std::uint64_t seed, const std::string& id, std::size_t copy);

}  // namespace advrat
