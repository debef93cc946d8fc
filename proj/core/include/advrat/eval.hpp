#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "advrat/corpus.hpp"
#include "advrat/model.hpp"

namespace advrat {

// Fraction of predictions ([prob >= 0.5]) that equal the labels.
double accuracy_of(std::span<const double> probs, std::span<const std::uint8_t> labels);
// Hard-rationale accuracy of `params` on `dataset`. Throws on an empty set.
double accuracy(const ModelParams& params, const Dataset& dataset);

// Mean per-instance percentage of attack / non-attack document tokens kept by
// the hard rationale. Instances without attack tokens do not count towards
// attack_pct.
struct InclusionStats {
  double attack_pct = 0.0;
  double nonattack_pct = 0.0;
  std::size_t attack_instances = 0;
  std::size_t instances = 0;
};

// `predicted` and `attack` hold document-level masks per instance.
InclusionStats inclusion_of(std::span<const Mask> predicted, std::span<const Mask> attack);
// Throws when `dataset` holds no attacked instance.
InclusionStats inclusion(const ModelParams& params, const Dataset& dataset);

// Hard rationale restricted to document tokens.
Mask predicted_rationale(const ModelParams& params, const Instance& instance);

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Token-level precision/recall/F1 of `predicted` against `human`. Two empty
// masks agree perfectly; otherwise a zero denominator yields 0.
Prf rationale_prf(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> human);

// |A & B| / |A | B| over token types; 1.0 when both are empty.
double jaccard(std::span<const std::string> a, std::span<const std::string> b);

// Dataset-level properties of the human rationales (clean instances with a
// rationale only).
struct RationaleDiagnostics {
  std::size_t instances = 0;
  double mean_density = 0.0;   // rationale tokens / document tokens
  double mean_jaccard = 0.0;   // Jaccard(query + answer, rationale tokens)
};

RationaleDiagnostics rationale_diagnostics(const Dataset& dataset);

// How a model was selected; filled in by the pipeline, absent for ad-hoc
// evaluations.
struct TrainingSummary {
  double validation_accuracy = 0.0;
  double stopping_epoch = 0.0;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  bool joint_optimized = true;
  std::size_t train_size = 0;
  std::size_t skipped = 0;
};

struct RegimeEvaluation {
  std::string regime;
  std::string architecture;
  double clean_accuracy = 0.0;
  double attacked_accuracy = 0.0;
  InclusionStats inclusion;
  std::optional<Prf> rationale;  // against human rationales on the clean set
  std::optional<TrainingSummary> training;
};

RegimeEvaluation evaluate(const std::string& regime, const ModelParams& params,
                          const Dataset& clean, const Dataset& attacked);

struct Report {
  std::uint64_t seed = 0;
  std::string config_hash;  // hash of the effective config without its seed
  std::string config_json;  // effective config, embedded verbatim
  std::map<std::string, std::string> notes;
  std::vector<RegimeEvaluation> rows;
  RationaleDiagnostics diagnostics;
};

// Evaluates every (regime, params) pair on the same clean/attacked split.
// Throws ValidationError when the attacked set was not derived from the
// clean set.
Report report(const std::vector<std::pair<std::string, const ModelParams*>>& models,
              const Dataset& clean, const Dataset& attacked);

// Deterministic JSON rendering (schemas/report.schema.json).
std::string to_json(const Report& report);
// Aligned text table.
std::string render_table(const Report& report);

}  // namespace advrat
