#pragma once

// Hand-built fixtures and brute-force oracles shared by the unit and
// acceptance tests. The oracles deliberately avoid the library code paths
// they check.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "advrat/corpus.hpp"
#include "advrat/lexres.hpp"
#include "advrat/model.hpp"
#include "advrat/rng.hpp"

namespace advrat::oracle {

// Football-club fixture: fc/dynamo, bayern/leverkusen and munich/cologne are
// mutual nearest entity neighbours, 1998 is the nearest number to 2000, and
// small/large, good/bad are antonyms.
inline LexicalResources club_resources() {
  LexicalResources r;
  r.embeddings = EmbeddingTable(4);
  const std::vector<std::pair<std::string, std::vector<double>>> rows = {
      {"fc", {1.0, 0.0, 0.0, 0.0}},        {"dynamo", {0.9, 0.1, 0.0, 0.0}},
      {"bayern", {0.0, 1.0, 0.0, 0.0}},    {"leverkusen", {0.1, 0.9, 0.0, 0.0}},
      {"munich", {0.0, 0.0, 1.0, 0.0}},    {"cologne", {0.0, 0.0, 0.9, 0.1}},
      {"2000", {0.0, 0.0, 0.0, 1.0}},      {"1998", {0.0, 0.1, 0.0, 0.9}},
      {"1850", {1.0, 1.0, 1.0, -1.0}},     {"founded", {0.5, 0.5, 0.5, 0.5}},
  };
  for (const auto& [w, v] : rows) r.embeddings.add(w, v);
  for (const auto* e : {"fc", "dynamo", "bayern", "leverkusen", "munich", "cologne"}) {
    r.pos.add_entity(e);
  }
  r.pos.add_tag("founded", PosTag::Verb);
  r.pos.add_tag("large", PosTag::Adjective);
  r.pos.add_tag("small", PosTag::Adjective);
  r.pos.add_tag("dog", PosTag::Noun);
  r.antonyms.add("large", "small");
  r.antonyms.add("small", "large");
  return r;
}

// Cosine nearest neighbour by a straight scan over the raw vectors.
inline std::optional<std::string> brute_force_neighbor(
    const EmbeddingTable& table, const std::string& word,
    const std::function<bool(std::string_view)>& filter = {}) {
  if (!table.contains(word)) return std::nullopt;
  const auto a = table.vector(word);
  auto norm = [](std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
  };
  std::vector<std::pair<std::string, double>> sims;
  for (const auto& cand : table.words()) {
    if (cand == word || (filter && !filter(cand))) continue;
    const auto b = table.vector(cand);
    double dot = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) dot += a[k] * b[k];
    sims.emplace_back(cand, dot / (norm(a) * norm(b)));
  }
  if (sims.empty()) return std::nullopt;
  double top = sims[0].second;
  for (const auto& s : sims) top = std::max(top, s.second);
  std::optional<std::string> best;
  for (const auto& [cand, sim] : sims) {
    if (sim >= top - 1e-12 && (!best || cand < *best)) best = cand;
  }
  return best;
}

inline double oracle_accuracy(const std::vector<double>& probs, const std::vector<bool>& labels) {
  double right = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const bool pred = !(probs[i] < 0.5);
    if (pred == labels[i]) right += 1;
  }
  return right / static_cast<double>(probs.size());
}

struct OracleInclusion {
  double attack_pct;
  double nonattack_pct;
};

inline OracleInclusion oracle_inclusion(const std::vector<Mask>& predicted,
                                        const std::vector<Mask>& attack) {
  std::vector<double> atk, non;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    double a_tot = 0, a_in = 0, n_tot = 0, n_in = 0;
    for (std::size_t k = 0; k < predicted[i].size(); ++k) {
      const bool is_attack = attack[i][k] == 1;
      const bool kept = predicted[i][k] == 1;
      (is_attack ? a_tot : n_tot) += 1;
      if (kept) (is_attack ? a_in : n_in) += 1;
    }
    if (a_tot > 0) atk.push_back(100.0 * a_in / a_tot);
    if (n_tot > 0) non.push_back(100.0 * n_in / n_tot);
  }
  auto mean = [](const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
  };
  return {mean(atk), mean(non)};
}

struct OraclePrf {
  double p, r, f;
};

inline OraclePrf oracle_prf(const Mask& pred, const Mask& gold) {
  int tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] && gold[i]) ++tp;
    if (pred[i] && !gold[i]) ++fp;
    if (!pred[i] && gold[i]) ++fn;
  }
  if (tp + fp == 0 && tp + fn == 0) return {1.0, 1.0, 1.0};
  const double p = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / (tp + fp);
  const double r = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / (tp + fn);
  const double f = p + r == 0.0 ? 0.0 : 2 * p * r / (p + r);
  return {p, r, f};
}

inline double oracle_jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  const std::set<std::string> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  if (sa.empty() && sb.empty()) return 1.0;
  std::vector<std::string> inter, uni;
  std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(inter));
  std::set_union(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(uni));
  return static_cast<double>(inter.size()) / static_cast<double>(uni.size());
}

// Central-difference check of the analytic gradient. With joint_optimized
// off, the extractor block is compared against the derivative of the
// non-label terms only. Returns the largest relative error,
// |a - n| / max(|a|, |n|, 1e-8).
inline double gradient_check(const ModelParams& params, const EncodedInput& input, bool label,
                             const RationaleTarget* target, const Hyper& hyper,
                             double step = 1e-5) {
  const auto analytic = grad(params, input, label, target, hyper);
  const std::size_t ext_size = params.extractor_block().size();
  auto objective = [&](const ModelParams& p, bool extractor_coord) {
    const auto t = loss_terms(p, input, label, target, hyper);
    if (extractor_coord && !hyper.joint_optimized) {
      return hyper.lambda1 * t.rationale + hyper.lambda2 * t.sparsity;
    }
    return t.total;
  };
  ModelParams probe = params;
  double worst = 0.0;
  for (std::size_t i = 0; i < params.values().size(); ++i) {
    const bool ext = i < ext_size;
    const double orig = probe.values()[i];
    probe.values()[i] = orig + step;
    const double up = objective(probe, ext);
    probe.values()[i] = orig - step;
    const double down = objective(probe, ext);
    probe.values()[i] = orig;
    const double numeric = (up - down) / (2 * step);
    const double a = analytic.values()[i];
    const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
    worst = std::max(worst, err);
  }
  return worst;
}

// One random small model/input/objective for gradient checking.
struct GradientCase {
  ModelParams params;
  EncodedInput input;
  bool label = false;
  std::optional<RationaleTarget> target;
  Hyper hyper;

  const RationaleTarget* target_ptr() const { return target ? &*target : nullptr; }
};

inline GradientCase random_gradient_case(Rng& rng) {
  auto vocab = std::make_shared<Vocabulary>();
  const std::size_t words = 3 + rng.uniform_index(8);
  for (std::size_t w = 0; w < words; ++w) vocab->add("w" + std::to_string(w));

  Hyper h;
  h.embed_dim = 2 + rng.uniform_index(4);
  h.window_radius = rng.uniform_index(4);
  h.lambda1 = 2.0 * rng.uniform();
  h.lambda2 = rng.uniform();
  h.joint_optimized = rng.uniform_index(2) == 1;
  h.init_scale = 0.3 + 0.5 * rng.uniform();
  h.extractor_bias_init = rng.normal();
  const auto arch = rng.uniform_index(5) == 0 ? Architecture::Standard : Architecture::Rationale;
  auto params = ModelParams::initialized(arch, vocab, h, rng);

  const std::size_t doc_len = rng.uniform_index(9);
  const std::size_t query_len = 1 + rng.uniform_index(4);
  EncodedInput in;
  in.ids.push_back(Vocabulary::kCls);
  in.doc_span.begin = 1;
  for (std::size_t i = 0; i < doc_len; ++i) in.ids.push_back(3 + rng.uniform_index(words));
  in.doc_span.end = in.ids.size();
  in.ids.push_back(Vocabulary::kSep);
  in.query_span.begin = in.ids.size();
  for (std::size_t i = 0; i < query_len; ++i) in.ids.push_back(rng.uniform_index(words + 3));
  in.query_span.end = in.ids.size();
  in.ids.push_back(Vocabulary::kSep);

  std::optional<RationaleTarget> target;
  if (arch == Architecture::Rationale && rng.uniform_index(3) != 0) {
    RationaleTarget t;
    t.origin = rng.uniform_index(2) == 0 ? TargetOrigin::Human : TargetOrigin::NonAttack;
    for (std::size_t i = 0; i < doc_len; ++i) t.values.push_back(rng.uniform_index(2) ? 1 : 0);
    target = std::move(t);
  }
  return GradientCase{std::move(params), std::move(in), rng.uniform_index(2) == 1, std::move(target), h};
}

}  // namespace advrat::oracle
