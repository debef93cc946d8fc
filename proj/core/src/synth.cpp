#include "advrat/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "advrat/errors.hpp"
#include "advrat/rng.hpp"

namespace advrat {
namespace {

constexpr std::array<std::string_view, 48> kNames = {
    "susan",   "helen",  "albert",  "charles", "maria",  "peter",   "laura",  "martin",
    "nina",    "oscar",  "rachel",  "simon",   "tessa",  "victor",  "wendy",  "xavier",
    "yvonne",  "zach",   "alice",   "bruno",   "clara",  "daniel",  "emma",   "felix",
    "grace",   "henry",  "irene",   "james",   "karen",  "lucas",   "monica", "nathan",
    "olivia",  "paul",   "quentin", "rosa",    "steven", "ursula",  "vera",   "walter",
    "beatrix", "cedric", "diana",   "edgar",   "fiona",  "gordon",  "hazel",  "ivan"};

constexpr std::array<std::pair<std::string_view, std::string_view>, 12> kAdjectives = {{
    {"happy", "sad"},      {"calm", "angry"},       {"proud", "ashamed"},
    {"brave", "afraid"},   {"polite", "rude"},      {"cheerful", "gloomy"},
    {"kind", "cruel"},     {"generous", "selfish"}, {"patient", "restless"},
    {"relaxed", "tense"},  {"hopeful", "hopeless"}, {"grateful", "ungrateful"}}};

constexpr std::array<std::string_view, 12> kPlaces = {
    "market", "garden", "library", "river", "station", "bakery",
    "museum", "park",   "school",  "harbor", "bridge", "stadium"};

constexpr std::array<std::string_view, 10> kObjects = {
    "lamp", "chair", "basket", "kettle", "blanket", "bicycle", "clock", "mirror", "violin", "vase"};

constexpr std::array<std::string_view, 9> kTemplateNouns = {
    "party", "friends", "friend", "card", "cards", "book", "day", "week", "table"};

constexpr std::array<std::string_view, 9> kVerbs = {
    "felt", "feel", "sent", "send", "went", "bought", "walked", "lives", "read"};

constexpr std::array<std::string_view, 21> kSpelled = {
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
    "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen",
    "nineteen", "twenty"};

Tokens words(std::initializer_list<std::string_view> parts) {
  Tokens out;
  for (auto p : parts) {
    const auto doc = tokenize(p);
    out.insert(out.end(), doc.tokens.begin(), doc.tokens.end());
  }
  return out;
}

std::vector<double> gaussian(Rng& rng, std::size_t dim, double scale) {
  std::vector<double> v(dim);
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

void normalize(std::vector<double>& v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  for (auto& x : v) x /= n;
}

// Entities as tight pairs around random unit centres; numbers on an arc whose
// angle grows with log(n), so the nearest number to n is n + 1 (and the
// largest number points back to its predecessor). Other words get unrelated
// random vectors.
EmbeddingTable build_embeddings(const SynthConfig& cfg, Rng& rng,
                                const std::vector<std::string>& entities,
                                std::size_t max_number) {
  const std::size_t dim = cfg.embedding_dim;
  EmbeddingTable table(dim);
  for (std::size_t p = 0; p + 1 < entities.size(); p += 2) {
    auto centre = gaussian(rng, dim, 1.0);
    normalize(centre);
    for (std::size_t m = 0; m < 2; ++m) {
      auto v = gaussian(rng, dim, 0.05);
      for (std::size_t k = 0; k < dim; ++k) v[k] += centre[k];
      table.add(entities[p + m], v);
    }
  }
  const double span = 2.5 / std::log(static_cast<double>(max_number));
  for (std::size_t n = 1; n <= max_number; ++n) {
    std::vector<double> v(dim, 0.0);
    const double angle = span * std::log(static_cast<double>(n));
    v[0] = std::cos(angle);
    v[1] = std::sin(angle);
    table.add(std::to_string(n), v);
  }
  auto add_random = [&](std::string_view w) {
    if (!table.contains(w)) table.add(std::string(w), gaussian(rng, dim, 1.0));
  };
  for (std::size_t a = 0; a < cfg.adjective_pairs; ++a) {
    add_random(kAdjectives[a].first);
    add_random(kAdjectives[a].second);
  }
  for (auto w : kPlaces) add_random(w);
  for (auto w : kObjects) add_random(w);
  for (auto w : kTemplateNouns) add_random(w);
  return table;
}

bool pairs_are_neighbours(const EmbeddingTable& table, const LexicalResources& res,
                          const std::vector<std::string>& entities) {
  const auto is_entity = [&res](std::string_view w) { return res.pos.is_entity(w); };
  for (std::size_t p = 0; p + 1 < entities.size(); p += 2) {
    if (table.nearest_neighbor(entities[p], is_entity) != entities[p + 1]) return false;
    if (table.nearest_neighbor(entities[p + 1], is_entity) != entities[p]) return false;
  }
  return true;
}

std::string pick(Rng& rng, std::span<const std::string_view> pool) {
  return std::string(pool[rng.uniform_index(pool.size())]);
}

}  // namespace

void SynthConfig::validate() const {
  if (instances < 1) throw ConfigError("synth.instances must be >= 1");
  if (entity_pairs < 2) throw ConfigError("synth.entity_pairs must be >= 2 (distractors need other entities)");
  if (2 * entity_pairs > kNames.size()) {
    throw ConfigError("synth.entity_pairs must be <= " + std::to_string(kNames.size() / 2));
  }
  if (adjective_pairs < 1 || adjective_pairs > kAdjectives.size()) {
    throw ConfigError("synth.adjective_pairs must be in [1, " + std::to_string(kAdjectives.size()) + "]");
  }
  if (max_count < 2 || max_count + 1 >= kSpelled.size()) {
    throw ConfigError("synth.max_count must be in [2, " + std::to_string(kSpelled.size() - 2) + "]");
  }
  if (!(counting_fraction >= 0.0 && counting_fraction <= 1.0)) {
    throw ConfigError("synth.counting_fraction must be in [0, 1]");
  }
  if (embedding_dim < 2) throw ConfigError("synth.embedding_dim must be >= 2");
}

SynthOutput generate(const SynthConfig& cfg) {
  cfg.validate();
  const Rng root(cfg.seed);

  std::vector<std::string> entities(kNames.begin(), kNames.begin() + 2 * cfg.entity_pairs);
  // Answers reach max_count + 1 for false instances; their mutated form needs
  // one more number above that.
  const std::size_t max_number = cfg.max_count + 2;

  SynthOutput out;
  auto& res = out.resources;
  for (const auto& e : entities) res.pos.add_entity(e);
  for (std::size_t a = 0; a < cfg.adjective_pairs; ++a) {
    const std::string pos(kAdjectives[a].first), neg(kAdjectives[a].second);
    res.pos.add_tag(pos, PosTag::Adjective);
    res.pos.add_tag(neg, PosTag::Adjective);
    res.antonyms.add(pos, neg);
    res.antonyms.add(neg, pos);
  }
  for (auto w : kPlaces) res.pos.add_tag(std::string(w), PosTag::Noun);
  for (auto w : kObjects) res.pos.add_tag(std::string(w), PosTag::Noun);
  for (auto w : kTemplateNouns) res.pos.add_tag(std::string(w), PosTag::Noun);
  for (auto w : kVerbs) res.pos.add_tag(std::string(w), PosTag::Verb);

  bool ok = false;
  for (std::uint64_t attempt = 0; attempt < 64 && !ok; ++attempt) {
    auto emb_rng = root.stream("embeddings", attempt);
    res.embeddings = build_embeddings(cfg, emb_rng, entities, max_number);
    ok = pairs_are_neighbours(res.embeddings, res, entities);
  }
  if (!ok) {
    throw ConfigError("synth: could not place " + std::to_string(cfg.entity_pairs) +
                      " entity pairs as mutual neighbours in " +
                      std::to_string(cfg.embedding_dim) + " dimensions");
  }

  // Exact template counts, labels balanced within each template.
  const auto n_counting = static_cast<std::size_t>(
      std::llround(cfg.counting_fraction * static_cast<double>(cfg.instances)));
  std::vector<std::pair<SynthTemplate, bool>> plan;
  for (std::size_t i = 0; i < cfg.instances; ++i) {
    const bool counting = i < n_counting;
    const std::size_t within = counting ? i : i - n_counting;
    plan.emplace_back(counting ? SynthTemplate::Counting : SynthTemplate::EntityFact, within % 2 == 0);
  }
  auto plan_rng = root.stream("plan");
  plan_rng.shuffle(plan.begin(), plan.end());

  std::vector<std::string_view> places(kPlaces.begin(), kPlaces.end());
  std::vector<std::string_view> objects(kObjects.begin(), kObjects.end());

  out.dataset.reserve(cfg.instances);
  for (std::size_t i = 0; i < cfg.instances; ++i) {
    auto rng = root.stream("instance", i);
    const auto [tmpl, label] = plan[i];
    const std::string entity = entities[rng.uniform_index(entities.size())];

    Tokens fact, query;
    if (tmpl == SynthTemplate::Counting) {
      const std::size_t count = 2 + rng.uniform_index(cfg.max_count - 1);
      const std::size_t answer = label ? count : count + 1;
      fact = words({"all", kSpelled[count], "friends showed up and", entity,
                    "did send cards to each friend ."});
      query = words({"how many cards did", entity, "send ? ||", std::to_string(answer)});
    } else {
      const auto& pair = kAdjectives[rng.uniform_index(cfg.adjective_pairs)];
      fact = words({entity, "felt", label ? pair.first : pair.second, "at the party ."});
      query = words({"who did feel", pair.first, "? ||", entity});
    }

    std::vector<Tokens> sentences;
    for (std::size_t s = 0; s < cfg.distractor_sentences; ++s) {
      std::string other;
      do {
        other = entities[rng.uniform_index(entities.size())];
      } while (other == entity);
      std::string other2;
      do {
        other2 = entities[rng.uniform_index(entities.size())];
      } while (other2 == entity || other2 == other);
      const auto place = pick(rng, places);
      const auto object = pick(rng, objects);
      switch (rng.uniform_index(6)) {
        case 0: sentences.push_back(words({other, "went to the", place, "."})); break;
        case 1: sentences.push_back(words({other, "bought a", object, "at the", place, "."})); break;
        case 2: sentences.push_back(words({"the", object, "was near the", place, "."})); break;
        case 3: sentences.push_back(words({other, "and", other2, "walked to the", place, "."})); break;
        case 4: sentences.push_back(words({other, "lives next to the", place, "."})); break;
        default: sentences.push_back(words({other, "read a book about the", object, "."})); break;
      }
    }
    const auto fact_slot = rng.uniform_index(sentences.size() + 1);
    sentences.insert(sentences.begin() + static_cast<long>(fact_slot), fact);

    Tokens doc_tokens;
    Mask rationale;
    for (std::size_t s = 0; s < sentences.size(); ++s) {
      doc_tokens.insert(doc_tokens.end(), sentences[s].begin(), sentences[s].end());
      rationale.insert(rationale.end(), sentences[s].size(), s == fact_slot ? 1 : 0);
    }

    Instance inst;
    char id[32];
    std::snprintf(id, sizeof(id), "synth-%06zu", i);
    inst.id = id;
    inst.document = make_document(std::move(doc_tokens));
    inst.query = std::move(query);
    inst.label = label;
    inst.human_rationale = std::move(rationale);
    validate(inst);
    out.dataset.push_back(std::move(inst));
  }
  return out;
}

std::optional<SynthTemplate> synth_template_of(const Tokens& query) {
  if (query.size() >= 2 && query[0] == "how" && query[1] == "many") return SynthTemplate::Counting;
  if (query.size() >= 3 && query[0] == "who" && query[1] == "did" && query[2] == "feel") {
    return SynthTemplate::EntityFact;
  }
  return std::nullopt;
}

std::optional<bool> label_from_fact(const Tokens& fact, const Tokens& query) {
  const auto tmpl = synth_template_of(query);
  if (!tmpl) return std::nullopt;
  const auto sep = std::find(query.begin(), query.end(), "||");
  if (sep == query.end() || sep + 1 == query.end()) return std::nullopt;
  const std::string& answer = *(sep + 1);
  auto has = [&fact](std::string_view w) { return std::find(fact.begin(), fact.end(), w) != fact.end(); };

  if (*tmpl == SynthTemplate::Counting) {
    // "how many cards did E send ? || N" against "all <count> friends ... E sent ...".
    const std::string& entity = query[4];
    if (!has(entity) || !has("send") || fact.size() < 2 || fact[0] != "all") return std::nullopt;
    const auto it = std::find(kSpelled.begin(), kSpelled.end(), fact[1]);
    if (it == kSpelled.end()) return std::nullopt;
    return std::to_string(it - kSpelled.begin()) == answer;
  }
  // "who did feel ADJ ? || E" against "E felt ADJ' ...".
  const std::string& adjective = query[3];
  if (fact.size() < 3 || fact[0] != answer || fact[1] != "felt") return std::nullopt;
  if (fact[2] == adjective) return true;
  for (const auto& [pos, neg] : kAdjectives) {
    if ((pos == adjective && neg == fact[2]) || (neg == adjective && pos == fact[2])) return false;
  }
  return std::nullopt;
}

}  // namespace advrat
