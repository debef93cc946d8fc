#include "advrat/addsent.hpp"

#include <algorithm>
#include <array>

#include "advrat/errors.hpp"

namespace advrat {
namespace {

constexpr std::array<std::string_view, 4> kSimpleWhWords = {"who", "what", "when", "where"};

bool is_wh_word(std::string_view t) {
  return t == "which" || t == "how" ||
         std::find(kSimpleWhWords.begin(), kSimpleWhWords.end(), t) != kSimpleWhWords.end();
}

bool is_terminator(std::string_view t) { return t == "." || t == "!" || t == "?"; }

// "1,999.5" -> "2000.5". Input must satisfy is_numeric.
std::string increment_decimal(std::string_view number) {
  std::string digits;
  for (char c : number) {
    if (c != ',') digits.push_back(c);
  }
  const auto dot = digits.find('.');
  std::string integer = digits.substr(0, dot);
  const std::string fraction = dot == std::string::npos ? "" : digits.substr(dot);
  int i = static_cast<int>(integer.size()) - 1;
  for (; i >= 0; --i) {
    if (integer[i] == '9') {
      integer[i] = '0';
    } else {
      ++integer[i];
      break;
    }
  }
  if (i < 0) integer.insert(integer.begin(), '1');
  return integer + fraction;
}

Tokens strip_trailing_terminators(Tokens tokens) {
  while (!tokens.empty() && is_terminator(tokens.back())) tokens.pop_back();
  return tokens;
}

}  // namespace

std::string_view to_string(MutationReason reason) {
  switch (reason) {
    case MutationReason::EntityNN: return "entity_nn";
    case MutationReason::NumberNN: return "number_nn";
    case MutationReason::Antonym: return "antonym";
  }
  return "antonym";
}

std::string_view to_string(RuleId rule) {
  switch (rule) {
    case RuleId::WhSubstitution: return "wh_substitution";
    case RuleId::HowManySubstitution: return "how_many_substitution";
    case RuleId::DeclarativeIdentity: return "declarative_identity";
  }
  return "declarative_identity";
}

std::optional<MutatedQuery> mutate_query(const Tokens& query, const LexicalResources& resources) {
  MutatedQuery out{query, {}};
  const auto same_class = [&resources](TokenClass cls) {
    return [&resources, cls](std::string_view w) { return classify(w, resources) == cls; };
  };
  for (std::size_t i = 0; i < query.size(); ++i) {
    const auto& word = query[i];
    std::optional<std::string> replacement;
    MutationReason reason = MutationReason::Antonym;
    switch (classify(word, resources)) {
      case TokenClass::Entity:
        replacement = resources.embeddings.nearest_neighbor(word, same_class(TokenClass::Entity));
        reason = MutationReason::EntityNN;
        break;
      case TokenClass::Number:
        replacement = resources.embeddings.nearest_neighbor(word, same_class(TokenClass::Number));
        if (!replacement && is_numeric(word)) replacement = increment_decimal(word);
        reason = MutationReason::NumberNN;
        break;
      case TokenClass::Adjective:
      case TokenClass::Noun:
        replacement = resources.antonyms.antonym(word);
        reason = MutationReason::Antonym;
        break;
      case TokenClass::Other:
        break;
    }
    if (replacement && *replacement != word) {
      out.log.push_back({i, word, *replacement, reason});
      out.query[i] = std::move(*replacement);
    }
  }
  if (out.log.empty()) return std::nullopt;
  return out;
}

std::optional<AttackSentence> declarativize(const Tokens& mutated_query) {
  const auto sep = std::find(mutated_query.begin(), mutated_query.end(), "||");
  AttackSentence attack;

  if (sep != mutated_query.end()) {
    const Tokens question = strip_trailing_terminators(Tokens(mutated_query.begin(), sep));
    const Tokens answer = strip_trailing_terminators(Tokens(sep + 1, mutated_query.end()));
    if (question.empty() || answer.empty()) return std::nullopt;
    if (std::find(answer.begin(), answer.end(), "||") != answer.end()) return std::nullopt;

    std::size_t drop = 0;
    const auto& head = question[0];
    if (std::find(kSimpleWhWords.begin(), kSimpleWhWords.end(), head) != kSimpleWhWords.end()) {
      drop = 1;
      attack.rule = RuleId::WhSubstitution;
    } else if (head == "which" && question.size() >= 2) {
      drop = 2;
      attack.rule = RuleId::WhSubstitution;
    } else if (head == "how" && question.size() >= 2 && question[1] == "many") {
      drop = 2;
      attack.rule = RuleId::HowManySubstitution;
    } else {
      return std::nullopt;
    }
    if (question.size() <= drop) return std::nullopt;
    attack.tokens = answer;
    attack.tokens.insert(attack.tokens.end(), question.begin() + static_cast<long>(drop),
                         question.end());
  } else {
    if (mutated_query.empty() || is_wh_word(mutated_query.front())) return std::nullopt;
    if (std::find(mutated_query.begin(), mutated_query.end(), "?") != mutated_query.end()) {
      return std::nullopt;
    }
    attack.tokens = strip_trailing_terminators(mutated_query);
    attack.rule = RuleId::DeclarativeIdentity;
    if (attack.tokens.empty()) return std::nullopt;
  }

  attack.tokens.emplace_back(".");
  if (std::find(attack.tokens.begin(), attack.tokens.end(), "?") != attack.tokens.end()) {
    return std::nullopt;
  }
  return attack;
}

AttackedInstance insert(const Instance& instance, const AttackSentence& attack, Rng& rng) {
  const auto& doc = instance.document;
  const auto slot = static_cast<std::size_t>(rng.uniform_index(doc.sentence_count() + 1));
  const auto offset = doc.sentence_start(slot);
  const auto len = attack.tokens.size();

  Tokens tokens;
  tokens.reserve(doc.size() + len);
  tokens.insert(tokens.end(), doc.tokens.begin(), doc.tokens.begin() + static_cast<long>(offset));
  tokens.insert(tokens.end(), attack.tokens.begin(), attack.tokens.end());
  tokens.insert(tokens.end(), doc.tokens.begin() + static_cast<long>(offset), doc.tokens.end());

  AttackedInstance out;
  out.base_id = instance.id;
  out.document = make_document(std::move(tokens));
  out.query = instance.query;
  out.label = instance.label;
  out.insertion_sentence_index = slot;
  out.attack_mask.assign(doc.size() + len, 0);
  std::fill_n(out.attack_mask.begin() + static_cast<long>(offset), len, std::uint8_t{1});
  if (instance.human_rationale) {
    const auto& r = *instance.human_rationale;
    Mask shifted;
    shifted.reserve(r.size() + len);
    shifted.insert(shifted.end(), r.begin(), r.begin() + static_cast<long>(offset));
    shifted.insert(shifted.end(), len, 0);
    shifted.insert(shifted.end(), r.begin() + static_cast<long>(offset), r.end());
    out.human_rationale = std::move(shifted);
  }
  return out;
}

std::optional<AttackedInstance> attack_instance(const Instance& instance,
                                                const LexicalResources& resources, Rng& rng) {
  const auto mutated = mutate_query(instance.query, resources);
  if (!mutated) return std::nullopt;
  const auto attack = declarativize(mutated->query);
  if (!attack) return std::nullopt;
  return insert(instance, *attack, rng);
}

std::string attacked_id(const std::string& base_id, std::size_t copy) {
  return base_id + "#adv" + std::to_string(copy);
}

Rng attack_rng(std::uint64_t seed, const std::string& id, std::size_t copy) {
  return Rng(seed).stream(id, copy);
}

AugmentResult augment_dataset(const Dataset& dataset, std::size_t copies,
                              const LexicalResources& resources, std::uint64_t seed) {
  if (copies == 0) throw ConfigError("augment: K must be a positive integer");
  AugmentResult result;
  result.dataset.reserve(dataset.size() * (copies + 1));
  for (const auto& inst : dataset) {
    result.dataset.push_back(inst);
    if (inst.is_attacked()) continue;
    // Mutation and conversion are deterministic, so they run once per instance.
    const auto mutated = mutate_query(inst.query, resources);
    const auto attack = mutated ? declarativize(mutated->query) : std::nullopt;
    if (!attack) {
      ++result.skipped;
      continue;
    }
    for (std::size_t k = 0; k < copies; ++k) {
      auto rng = attack_rng(seed, inst.id, k);
      result.dataset.push_back(insert(inst, *attack, rng).to_instance(attacked_id(inst.id, k)));
    }
  }
  return result;
}

AugmentResult attack_dataset(const Dataset& dataset, const LexicalResources& resources,
                             std::uint64_t seed) {
  AugmentResult result;
  for (const auto& inst : dataset) {
    if (inst.is_attacked()) continue;
    auto rng = attack_rng(seed, inst.id, 0);
    auto attacked = attack_instance(inst, resources, rng);
    if (!attacked) {
      ++result.skipped;
      continue;
    }
    result.dataset.push_back(attacked->to_instance(attacked_id(inst.id, 0)));
  }
  return result;
}

}  // namespace advrat
