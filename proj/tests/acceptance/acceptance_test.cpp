// Runs every acceptance criterion and prints one PASS/FAIL line for each.
// Exit status is non-zero when any criterion fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "advrat/addsent.hpp"
#include "advrat/eval.hpp"
#include "advrat/synth.hpp"
#include "fixtures.hpp"

using namespace advrat;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

// ---------------------------------------------------------------------------

bool near_clamp(const oracle::GradientCase& gc) {
  const auto trace = forward(gc.params, gc.input);
  auto close = [](double p) { return p < 1e-9 || p > 1.0 - 1e-9; };
  if (close(trace.prob)) return true;
  if (gc.target) {
    for (double r : trace.document_rationale(gc.input.doc_span)) {
      if (close(r)) return true;
    }
  }
  return false;
}

Outcome gradient_oracle() {
  const auto t0 = Clock::now();
  Rng rng(20240101);
  double worst = 0.0;
  int cases = 0, skipped = 0, joint_off = 0, standard = 0;
  while (cases < 100) {
    const auto gc = oracle::random_gradient_case(rng);
    if (near_clamp(gc)) {
      ++skipped;
      continue;
    }
    worst = std::max(worst, oracle::gradient_check(gc.params, gc.input, gc.label, gc.target_ptr(),
                                                   gc.hyper, 1e-5));
    joint_off += gc.hyper.joint_optimized ? 0 : 1;
    standard += gc.params.architecture() == Architecture::Standard ? 1 : 0;
    ++cases;
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = worst <= 1e-4 && secs < 30.0;
  o.detail = std::to_string(cases) + " configs (" + std::to_string(joint_off) + " separate-objective, " +
             std::to_string(standard) + " standard, " + std::to_string(skipped) +
             " clamp-boundary skipped), max rel err " + fmt("%.2e", worst) + " (<= 1e-4), " +
             fmt("%.2f", secs) + " s (< 30 s)";
  return o;
}

// ---------------------------------------------------------------------------

std::string attack_violation(const Instance& src, const Instance& a) {
  if (!a.attack_mask) return "no attack mask";
  if (a.label != src.label) return "label changed";
  if (a.query != src.query) return "query changed";
  const auto& m = *a.attack_mask;
  if (m.size() != a.document.size()) return "mask length";
  Tokens kept;
  std::size_t runs = 0, attack_tokens = 0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i]) {
      ++attack_tokens;
      if (i == 0 || !m[i - 1]) ++runs;
    } else {
      kept.push_back(a.document.tokens[i]);
    }
  }
  if (kept != src.document.tokens) return "original tokens not preserved";
  if (runs != 1 || attack_tokens == 0) return "attack span not contiguous";
  if (!a.human_rationale || !src.human_rationale) return "rationale lost";
  Mask shifted;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i] && (*a.human_rationale)[i]) return "rationale covers attack";
    if (!m[i]) shifted.push_back((*a.human_rationale)[i]);
  }
  if (shifted != *src.human_rationale) return "rationale not shifted";
  return "";
}

Outcome attack_pipeline() {
  const auto t0 = Clock::now();
  SynthConfig cfg;
  cfg.instances = 1000;
  cfg.seed = 11;
  const auto synth = generate(cfg);
  const auto attacked = attack_dataset(synth.dataset, synth.resources, cfg.seed);
  std::size_t violations = 0;
  std::string first;
  if (attacked.dataset.size() != synth.dataset.size()) ++violations;
  for (std::size_t i = 0; i < attacked.dataset.size() && i < synth.dataset.size(); ++i) {
    auto why = attack_violation(synth.dataset[i], attacked.dataset[i]);
    if (attacked.dataset[i].id != attacked_id(synth.dataset[i].id, 0)) why = "id mismatch";
    if (why.empty()) {
      try {
        validate(attacked.dataset[i]);
      } catch (const std::exception& e) {
        why = e.what();
      }
    }
    if (!why.empty()) {
      if (first.empty()) first = attacked.dataset[i].id + ": " + why;
      ++violations;
    }
  }
  const double secs = seconds_since(t0);
  const double rate = 100.0 * static_cast<double>(attacked.dataset.size()) /
                      static_cast<double>(synth.dataset.size());
  Outcome o;
  o.pass = attacked.skipped == 0 && violations == 0 && rate == 100.0 && secs < 10.0;
  o.detail = fmt("%.1f", rate) + "% of 1000 attacked, " + std::to_string(violations) +
             " invariant violations" + (first.empty() ? "" : " (first: " + first + ")") + ", " +
             fmt("%.2f", secs) + " s (< 10 s)";
  return o;
}

// ---------------------------------------------------------------------------

Outcome declarative_fixtures() {
  const auto res = oracle::club_resources();
  struct Case {
    std::string query;
    bool mutate;
    std::string expected;
  };
  const std::vector<Case> cases = {
      {"who did n ' t stay in basel after charles and houben separated ? || a - tete", false,
       "a - tete did n ' t stay in basel after charles and houben separated ."},
      {"how many thank - you cards did helen send ? || 6", false,
       "6 thank - you cards did helen send ."},
      {"FC Bayern Munich was founded in 2000.", true,
       "dynamo leverkusen cologne was founded in 1998 ."},
  };
  int ok = 0;
  std::string first;
  for (const auto& c : cases) {
    Tokens q = tokenize(c.query).tokens;
    if (c.mutate) {
      const auto m = mutate_query(q, res);
      if (m) q = m->query;
    }
    const auto a = declarativize(q);
    const std::string got = a ? join(a->tokens) : "<none>";
    if (got == c.expected) {
      ++ok;
    } else if (first.empty()) {
      first = "got \"" + got + "\"";
    }
  }
  Outcome o;
  o.pass = ok == 3;
  o.detail = std::to_string(ok) + "/3 attack sentences byte-exact" + (first.empty() ? "" : ", " + first);
  return o;
}

// ---------------------------------------------------------------------------

struct HandCase {
  const char* document;  // sentences; attack sentence marked with [ ]
  const char* query;
  const char* human;      // 0/1 per clean token
  const char* predicted;  // 0/1 per token of the attacked document
  double prob;
  bool label;
};

Mask bits(const std::string& s) {
  Mask m;
  for (char c : s) {
    if (c == '0' || c == '1') m.push_back(c == '1');
  }
  return m;
}

// 20 attacked instances with hand-chosen predicted rationales and
// probabilities. Attack tokens are written between brackets.
const std::vector<HandCase> kHandCases = {
    {"a b . [x y .] c d .", "who ? || a", "1100 00", "111110000", 0.9, true},
    {"[x .] a b .", "q ?", "111", "00111", 0.1, false},
    {"a b . [x y z .]", "q", "110", "1110000", 0.5, true},
    {"a . [x .] b .", "what is a ? || b", "11 00", "000000", 0.49, true},
    {"a b c . [x .]", "a b", "1111", "111111", 0.51, false},
    {"[x y .] a b c d .", "c d", "00110", "11100000", 0.2, false},
    {"a . b . [x y .] c .", "b", "00 11 00", "111111111", 0.7, true},
    {"a b . c d . [x .]", "a d", "000 000", "10010011", 0.3, true},
    {"[w x y z .] a .", "a", "11", "1010111", 0.5, false},
    {"a . [x .] b . c .", "x", "11 00 00", "11000000", 0.99, true},
    {"a b c d e . [x y .]", "e ? || a", "111111", "010101010", 0.0, false},
    {"[x .] a .", "a", "00", "1111", 0.6, false},
    {"a . [x y .] b c .", "b c", "00 111", "00111111", 0.45, false},
    {"a b . [x .]", "q ? || r", "000", "00000", 0.55, true},
    {"a . b . c . [x .]", "a b c", "11 11 11", "11111100", 0.8, true},
    {"[x y z .] a b .", "z ? || a", "111", "0001111", 0.25, true},
    {"a b c . [x .] d .", "a", "1000 00", "10001100", 0.65, false},
    {"a . [x .] b .", "x ? || y", "00 00", "110011", 0.35, false},
    {"a b . c . [x y .]", "b c", "011 11", "01111000", 0.95, true},
    {"a b c d . [x .] e .", "d e", "00011 11", "111110011", 0.05, false},
};

Instance hand_instance(const HandCase& c, std::size_t index) {
  std::string text = c.document;
  const auto open = text.find('['), close = text.find(']');
  const std::string before = text.substr(0, open), attack = text.substr(open + 1, close - open - 1),
                    after = text.substr(close + 1);
  const auto tb = tokenize(before).tokens, ta = tokenize(attack).tokens, tc = tokenize(after).tokens;
  Instance inst;
  inst.id = "hand-" + std::to_string(index) + "#adv0";
  Tokens all = tb;
  all.insert(all.end(), ta.begin(), ta.end());
  all.insert(all.end(), tc.begin(), tc.end());
  inst.document = make_document(all);
  inst.query = tokenize(c.query).tokens;
  inst.label = c.label;
  Mask attack_mask(tb.size(), 0);
  attack_mask.insert(attack_mask.end(), ta.size(), 1);
  attack_mask.insert(attack_mask.end(), tc.size(), 0);
  inst.attack_mask = attack_mask;
  const Mask clean_human = bits(c.human);
  Mask human;
  std::size_t k = 0;
  for (auto a : attack_mask) human.push_back(a ? 0 : clean_human.at(k++));
  if (k != clean_human.size()) throw std::logic_error("hand case " + std::to_string(index) + ": human mask length");
  inst.human_rationale = human;
  validate(inst);
  if (bits(c.predicted).size() != inst.document.size()) {
    throw std::logic_error("hand case " + std::to_string(index) + ": predicted mask length");
  }
  return inst;
}

Outcome metric_oracles() {
  std::vector<Mask> predicted, attack, human;
  std::vector<double> probs;
  std::vector<bool> labels;
  std::vector<std::uint8_t> label_bytes;
  Dataset dataset;
  for (std::size_t i = 0; i < kHandCases.size(); ++i) {
    const auto inst = hand_instance(kHandCases[i], i);
    dataset.push_back(inst);
    predicted.push_back(bits(kHandCases[i].predicted));
    attack.push_back(*inst.attack_mask);
    human.push_back(*inst.human_rationale);
    probs.push_back(kHandCases[i].prob);
    labels.push_back(kHandCases[i].label);
    label_bytes.push_back(kHandCases[i].label ? 1 : 0);
  }
  int mismatches = 0, checks = 0;
  auto check = [&](double got, double want) {
    ++checks;
    if (got != want) ++mismatches;
  };

  check(accuracy_of(probs, label_bytes), oracle::oracle_accuracy(probs, labels));
  const auto inc = inclusion_of(predicted, attack);
  const auto want_inc = oracle::oracle_inclusion(predicted, attack);
  check(inc.attack_pct, want_inc.attack_pct);
  check(inc.nonattack_pct, want_inc.nonattack_pct);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto prf = rationale_prf(predicted[i], human[i]);
    const auto want = oracle::oracle_prf(predicted[i], human[i]);
    check(prf.precision, want.p);
    check(prf.recall, want.r);
    check(prf.f1, want.f);
    const auto& inst = dataset[i];
    std::vector<std::string> q, r;
    for (const auto& t : inst.query) {
      if (t != "?" && t != "||") q.push_back(t);
    }
    for (std::size_t k = 0; k < inst.document.size(); ++k) {
      if (predicted[i][k]) r.push_back(inst.document.tokens[k]);
    }
    check(jaccard(q, r), oracle::oracle_jaccard(q, r));
  }

  // Model-level entry points on the same instances, with a hand-set extractor
  // that drops "x", "y", "b" and "." and keeps everything else.
  auto vocab = std::make_shared<Vocabulary>();
  for (const auto& inst : dataset) {
    for (const auto& t : inst.document.tokens) vocab->add(t);
    for (const auto& t : inst.query) vocab->add(t);
  }
  ModelParams params(Architecture::Rationale, vocab, 1, 0);
  for (std::size_t id = 0; id < vocab->size(); ++id) {
    const auto& w = vocab->words()[id];
    params.extractor_embedding(id)[0] = (w == "x" || w == "y" || w == "." || w == "b") ? -1.0 : 1.0;
    params.predictor_embedding(id)[0] = static_cast<double>(id % 5) - 2.0;
  }
  params.extractor_weights()[0] = 3.0;
  params.predictor_weights()[0] = 0.7;
  params.predictor_weights()[1] = -0.4;
  params.predictor_bias() = 0.1;

  std::vector<Mask> model_masks;
  std::vector<double> model_probs;
  for (const auto& inst : dataset) {
    model_masks.push_back(predicted_rationale(params, inst));
    model_probs.push_back(forward_hard(params, encode(inst, *vocab)).prob);
  }
  check(accuracy(params, dataset), oracle::oracle_accuracy(model_probs, labels));
  const auto model_inc = inclusion(params, dataset);
  const auto model_want = oracle::oracle_inclusion(model_masks, attack);
  check(model_inc.attack_pct, model_want.attack_pct);
  check(model_inc.nonattack_pct, model_want.nonattack_pct);

  Outcome o;
  o.pass = mismatches == 0 && dataset.size() == 20;
  o.detail = std::to_string(dataset.size()) + " hand-built instances, " + std::to_string(checks) +
             " metric values, " + std::to_string(mismatches) + " differ from brute force";
  return o;
}

// ---------------------------------------------------------------------------

struct ReproRun {
  int status = -1;
  double seconds = 0.0;
  std::string json;
};

ReproRun run_repro(const fs::path& work, std::uint64_t seed, const std::string& tag) {
  const auto out = work / tag;
  fs::remove_all(out);
  fs::create_directories(out);
  const std::string cmd = std::string("\"") + ADVRAT_CLI + "\" repro --seed " + std::to_string(seed) +
                          " --out \"" + out.string() + "\" > \"" + (out / "stdout.txt").string() +
                          "\" 2>&1";
  const auto t0 = Clock::now();
  ReproRun r;
  r.status = std::system(cmd.c_str());
  r.seconds = seconds_since(t0);
  std::ifstream in(out / "report.json", std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  r.json = ss.str();
  return r;
}

std::map<std::string, nlohmann::json> rows_by_regime(const nlohmann::json& report) {
  std::map<std::string, nlohmann::json> rows;
  for (const auto& row : report.at("regimes")) rows[row.at("regime").get<std::string>()] = row;
  return rows;
}

Outcome accuracy_pattern(const ReproRun& run) {
  Outcome o;
  if (run.status != 0 || run.json.empty()) {
    o.detail = "repro failed (status " + std::to_string(run.status) + ")";
    return o;
  }
  const auto rows = rows_by_regime(nlohmann::json::parse(run.json));
  auto pct = [&](const char* regime, const char* field) {
    return 100.0 * rows.at(regime).at(field).get<double>();
  };
  const double na_clean = pct("no_adv", "clean_accuracy"), na_atk = pct("no_adv", "attacked_accuracy");
  const double adv_atk = pct("adv", "attacked_accuracy");
  const double as_clean = pct("adv_atk_sup", "clean_accuracy"),
               as_atk = pct("adv_atk_sup", "attacked_accuracy");
  const bool a = na_atk <= na_clean - 10.0;
  const bool b = as_atk >= na_atk + 10.0 && std::abs(as_atk - as_clean) <= 3.0;
  const bool c = as_atk >= adv_atk;
  o.pass = a && b && c && run.seconds < 300.0;
  o.detail = std::string("(a) ") + (a ? "ok" : "FAIL") + " no_adv clean " + fmt("%.1f", na_clean) +
             " attacked " + fmt("%.1f", na_atk) + "; (b) " + (b ? "ok" : "FAIL") + " adv_atk_sup clean " +
             fmt("%.1f", as_clean) + " attacked " + fmt("%.1f", as_atk) + "; (c) " + (c ? "ok" : "FAIL") +
             " adv attacked " + fmt("%.1f", adv_atk) + "; " + fmt("%.1f", run.seconds) + " s (< 300 s)";
  return o;
}

Outcome inclusion_pattern(const ReproRun& run) {
  Outcome o;
  if (run.status != 0 || run.json.empty()) {
    o.detail = "repro failed (status " + std::to_string(run.status) + ")";
    return o;
  }
  const auto rows = rows_by_regime(nlohmann::json::parse(run.json));
  auto inc = [&](const char* regime, const char* field) { return rows.at(regime).at(field).get<double>(); };
  const double as_atk = inc("adv_atk_sup", "attack_inclusion_pct"),
               as_non = inc("adv_atk_sup", "nonattack_inclusion_pct");
  const double hs_atk = inc("human_sup", "attack_inclusion_pct");
  o.pass = as_atk <= 10.0 && as_non >= 90.0 && hs_atk >= 50.0;
  o.detail = "adv_atk_sup attack " + fmt("%.1f", as_atk) + "% (<= 10), non-attack " + fmt("%.1f", as_non) +
             "% (>= 90); human_sup attack " + fmt("%.1f", hs_atk) + "% (>= 50)";
  return o;
}

// Same structure with every number zeroed.
nlohmann::json skeleton(nlohmann::json j) {
  if (j.is_number()) return 0;
  if (j.is_object() || j.is_array()) {
    for (auto& v : j) v = skeleton(v);
  }
  return j;
}

Outcome determinism(const ReproRun& first, const ReproRun& second, const ReproRun& other_seed) {
  Outcome o;
  if (first.status != 0 || second.status != 0 || other_seed.status != 0) {
    o.detail = "repro failed";
    return o;
  }
  const bool identical = !first.json.empty() && first.json == second.json;
  const auto a = nlohmann::json::parse(first.json), b = nlohmann::json::parse(other_seed.json);
  const bool same_schema = skeleton(a) == skeleton(b);
  const bool numbers_differ = a != b;
  o.pass = identical && same_schema;
  o.detail = std::string("same seed ") + (identical ? "byte-identical" : "DIFFERS") + " (" +
             std::to_string(first.json.size()) + " bytes); other seed " +
             (same_schema ? "same schema" : "SCHEMA DIFFERS") +
             (numbers_differ ? ", numeric fields differ" : ", identical");
  return o;
}

}  // namespace

int main() {
  const fs::path work = fs::path(ADVRAT_ACCEPTANCE_WORK);
  fs::create_directories(work);

  std::vector<std::pair<std::string, std::function<Outcome()>>> criteria;
  ReproRun run_a, run_b, run_c;
  bool repro_done = false;
  auto ensure_repro = [&] {
    if (repro_done) return;
    run_a = run_repro(work, 0, "seed0_a");
    run_b = run_repro(work, 0, "seed0_b");
    run_c = run_repro(work, 1, "seed1");
    repro_done = true;
  };

  criteria.emplace_back("gradient oracle", gradient_oracle);
  criteria.emplace_back("attack pipeline properties", attack_pipeline);
  criteria.emplace_back("declarative attack fixtures", declarative_fixtures);
  criteria.emplace_back("accuracy pattern", [&] {
    ensure_repro();
    return accuracy_pattern(run_a);
  });
  criteria.emplace_back("inclusion pattern", [&] {
    ensure_repro();
    return inclusion_pattern(run_a);
  });
  criteria.emplace_back("metric oracles", metric_oracles);
  criteria.emplace_back("determinism", [&] {
    ensure_repro();
    return determinism(run_a, run_b, run_c);
  });

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failures += o.pass ? 0 : 1;
    std::cout << "criterion " << (i + 1) << " " << (o.pass ? "PASS" : "FAIL") << "  "
              << criteria[i].first << ": " << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
