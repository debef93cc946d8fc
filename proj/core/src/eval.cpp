#include "advrat/eval.hpp"

#include <algorithm>
#include <iomanip>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "advrat/errors.hpp"

namespace advrat {
namespace {

std::string base_id_of(const std::string& id) {
  const auto pos = id.rfind("#adv");
  return pos == std::string::npos ? id : id.substr(0, pos);
}

std::vector<std::string> compound_query_tokens(const Tokens& query) {
  std::vector<std::string> out;
  for (const auto& t : query) {
    if (t != "?" && t != "||") out.push_back(t);
  }
  return out;
}

}  // namespace

double accuracy_of(std::span<const double> probs, std::span<const std::uint8_t> labels) {
  if (probs.empty()) throw ValidationError("accuracy of an empty dataset");
  if (probs.size() != labels.size()) throw ValidationError("accuracy: size mismatch");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if ((probs[i] >= 0.5) == (labels[i] != 0)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(probs.size());
}

double accuracy(const ModelParams& params, const Dataset& dataset) {
  if (dataset.empty()) throw ValidationError("accuracy of an empty dataset");
  std::vector<double> probs;
  std::vector<std::uint8_t> labels;
  probs.reserve(dataset.size());
  labels.reserve(dataset.size());
  for (const auto& inst : dataset) {
    probs.push_back(forward_hard(params, encode(inst, params.vocabulary())).prob);
    labels.push_back(inst.label ? 1 : 0);
  }
  return accuracy_of(probs, labels);
}

InclusionStats inclusion_of(std::span<const Mask> predicted, std::span<const Mask> attack) {
  if (predicted.size() != attack.size()) throw ValidationError("inclusion: size mismatch");
  InclusionStats s;
  double attack_sum = 0.0, nonattack_sum = 0.0;
  std::size_t nonattack_instances = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const auto& p = predicted[i];
    const auto& a = attack[i];
    if (p.size() != a.size()) throw ValidationError("inclusion: mask length mismatch");
    std::size_t n_atk = 0, kept_atk = 0, n_non = 0, kept_non = 0;
    for (std::size_t k = 0; k < p.size(); ++k) {
      if (a[k]) {
        ++n_atk;
        kept_atk += p[k] ? 1 : 0;
      } else {
        ++n_non;
        kept_non += p[k] ? 1 : 0;
      }
    }
    if (n_atk > 0) {
      attack_sum += 100.0 * static_cast<double>(kept_atk) / static_cast<double>(n_atk);
      ++s.attack_instances;
    }
    if (n_non > 0) {
      nonattack_sum += 100.0 * static_cast<double>(kept_non) / static_cast<double>(n_non);
      ++nonattack_instances;
    }
  }
  s.instances = predicted.size();
  if (s.attack_instances > 0) s.attack_pct = attack_sum / static_cast<double>(s.attack_instances);
  if (nonattack_instances > 0) s.nonattack_pct = nonattack_sum / static_cast<double>(nonattack_instances);
  return s;
}

Mask predicted_rationale(const ModelParams& params, const Instance& instance) {
  const auto in = encode(instance, params.vocabulary());
  const auto trace = forward_hard(params, in);
  Mask out;
  out.reserve(in.doc_span.size());
  for (double r : trace.document_rationale(in.doc_span)) out.push_back(r >= 0.5 ? 1 : 0);
  return out;
}

InclusionStats inclusion(const ModelParams& params, const Dataset& dataset) {
  std::vector<Mask> predicted, attack;
  for (const auto& inst : dataset) {
    if (!inst.attack_mask) continue;
    predicted.push_back(predicted_rationale(params, inst));
    attack.push_back(*inst.attack_mask);
  }
  if (attack.empty()) throw ValidationError("inclusion: dataset has no attacked instances");
  return inclusion_of(predicted, attack);
}

Prf rationale_prf(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> human) {
  if (predicted.size() != human.size()) throw ValidationError("rationale_prf: length mismatch");
  std::size_t tp = 0, n_pred = 0, n_human = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    n_pred += predicted[i] ? 1 : 0;
    n_human += human[i] ? 1 : 0;
    tp += (predicted[i] && human[i]) ? 1 : 0;
  }
  if (n_pred == 0 && n_human == 0) return {1.0, 1.0, 1.0};
  Prf out;
  out.precision = n_pred ? static_cast<double>(tp) / static_cast<double>(n_pred) : 0.0;
  out.recall = n_human ? static_cast<double>(tp) / static_cast<double>(n_human) : 0.0;
  const double denom = out.precision + out.recall;
  out.f1 = denom > 0.0 ? 2.0 * out.precision * out.recall / denom : 0.0;
  return out;
}

double jaccard(std::span<const std::string> a, std::span<const std::string> b) {
  const std::set<std::string> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  if (sa.empty() && sb.empty()) return 1.0;
  std::size_t inter = 0;
  for (const auto& t : sa) inter += sb.count(t);
  const std::size_t uni = sa.size() + sb.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

RationaleDiagnostics rationale_diagnostics(const Dataset& dataset) {
  RationaleDiagnostics d;
  double density = 0.0, jac = 0.0;
  for (const auto& inst : dataset) {
    if (inst.is_attacked() || !inst.human_rationale || inst.document.size() == 0) continue;
    std::vector<std::string> kept;
    std::size_t count = 0;
    for (std::size_t i = 0; i < inst.document.size(); ++i) {
      if ((*inst.human_rationale)[i]) {
        kept.push_back(inst.document.tokens[i]);
        ++count;
      }
    }
    density += static_cast<double>(count) / static_cast<double>(inst.document.size());
    jac += jaccard(compound_query_tokens(inst.query), kept);
    ++d.instances;
  }
  if (d.instances > 0) {
    d.mean_density = density / static_cast<double>(d.instances);
    d.mean_jaccard = jac / static_cast<double>(d.instances);
  }
  return d;
}

RegimeEvaluation evaluate(const std::string& regime, const ModelParams& params,
                          const Dataset& clean, const Dataset& attacked) {
  RegimeEvaluation e;
  e.regime = regime;
  e.architecture = std::string(to_string(params.architecture()));
  e.clean_accuracy = accuracy(params, clean);
  e.attacked_accuracy = accuracy(params, attacked);
  e.inclusion = inclusion(params, attacked);
  double p = 0.0, r = 0.0, f = 0.0;
  std::size_t n = 0;
  for (const auto& inst : clean) {
    if (!inst.human_rationale) continue;
    const auto prf = rationale_prf(predicted_rationale(params, inst), *inst.human_rationale);
    p += prf.precision;
    r += prf.recall;
    f += prf.f1;
    ++n;
  }
  if (n > 0) {
    const double dn = static_cast<double>(n);
    e.rationale = Prf{p / dn, r / dn, f / dn};
  }
  return e;
}

Report report(const std::vector<std::pair<std::string, const ModelParams*>>& models,
              const Dataset& clean, const Dataset& attacked) {
  std::set<std::string> clean_ids;
  for (const auto& inst : clean) {
    if (inst.is_attacked()) throw ValidationError("report: clean split contains attacked instances");
    clean_ids.insert(inst.id);
  }
  std::set<std::string> covered;
  for (const auto& inst : attacked) {
    if (!inst.is_attacked()) throw ValidationError("report: attacked split contains clean instance '" + inst.id + "'");
    const auto base = base_id_of(inst.id);
    if (!clean_ids.contains(base)) {
      throw ValidationError("report: attacked instance '" + inst.id + "' has no clean counterpart");
    }
    covered.insert(base);
  }
  if (attacked.empty()) throw ValidationError("report: attacked split is empty");
  Report out;
  out.diagnostics = rationale_diagnostics(clean);
  out.notes["inclusion_averaging"] = "macro (mean of per-instance percentages)";
  out.notes["attack_pct_denominator"] = "instances with at least one attack token";
  out.notes["rationale_prf"] = "hard rationale vs human rationale, clean split, macro-averaged";
  out.notes["attack_coverage"] =
      std::to_string(covered.size()) + "/" + std::to_string(clean_ids.size()) + " clean instances attacked";
  for (const auto& [name, params] : models) out.rows.push_back(evaluate(name, *params, clean, attacked));
  return out;
}

std::string to_json(const Report& r) {
  nlohmann::ordered_json j;
  j["schema"] = "advrat-report/1";
  j["seed"] = r.seed;
  j["config_hash"] = r.config_hash;
  j["config"] = r.config_json.empty() ? nlohmann::ordered_json::object()
                                      : nlohmann::ordered_json::parse(r.config_json);
  j["notes"] = r.notes;
  j["diagnostics"] = {{"instances", r.diagnostics.instances},
                      {"mean_human_rationale_density", r.diagnostics.mean_density},
                      {"mean_query_answer_jaccard", r.diagnostics.mean_jaccard}};
  auto rows = nlohmann::ordered_json::array();
  for (const auto& e : r.rows) {
    nlohmann::ordered_json row;
    row["regime"] = e.regime;
    row["architecture"] = e.architecture;
    row["clean_accuracy"] = e.clean_accuracy;
    row["attacked_accuracy"] = e.attacked_accuracy;
    row["attack_inclusion_pct"] = e.inclusion.attack_pct;
    row["nonattack_inclusion_pct"] = e.inclusion.nonattack_pct;
    row["attacked_instances"] = e.inclusion.attack_instances;
    if (e.rationale) {
      row["rationale"] = {{"precision", e.rationale->precision},
                          {"recall", e.rationale->recall},
                          {"f1", e.rationale->f1}};
    } else {
      row["rationale"] = nullptr;
    }
    if (e.training) {
      const auto& t = *e.training;
      row["training"] = {{"validation_accuracy", t.validation_accuracy},
                         {"stopping_epoch", t.stopping_epoch},
                         {"lambda1", t.lambda1},
                         {"lambda2", t.lambda2},
                         {"joint_optimized", t.joint_optimized},
                         {"train_size", t.train_size},
                         {"skipped", t.skipped}};
    } else {
      row["training"] = nullptr;
    }
    rows.push_back(std::move(row));
  }
  j["regimes"] = std::move(rows);
  return j.dump(2) + "\n";
}

std::string render_table(const Report& r) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(1);
  os << std::left << std::setw(16) << "regime" << std::setw(11) << "arch" << std::right
     << std::setw(8) << "clean" << std::setw(10) << "attacked" << std::setw(8) << "atk%"
     << std::setw(8) << "non-a%" << std::setw(8) << "rat-f1" << '\n';
  os << std::string(69, '-') << '\n';
  for (const auto& e : r.rows) {
    os << std::left << std::setw(16) << e.regime << std::setw(11) << e.architecture << std::right
       << std::setw(8) << 100.0 * e.clean_accuracy << std::setw(10) << 100.0 * e.attacked_accuracy
       << std::setw(8) << e.inclusion.attack_pct << std::setw(8) << e.inclusion.nonattack_pct;
    if (e.rationale) {
      os << std::setw(8) << 100.0 * e.rationale->f1;
    } else {
      os << std::setw(8) << "-";
    }
    os << '\n';
  }
  os << std::setprecision(3) << "human rationale density " << r.diagnostics.mean_density
     << ", query+answer jaccard " << r.diagnostics.mean_jaccard << " (" << r.diagnostics.instances
     << " instances)\n";
  return os.str();
}

}  // namespace advrat
