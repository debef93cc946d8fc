#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "advrat/corpus.hpp"
#include "advrat/lexres.hpp"
#include "advrat/model.hpp"

namespace advrat {

// Training conditions:
//   NoAdv        clean data only
//   Adv          clean + one attacked copy per instance
//   AdvKx        clean + K attacked copies per instance
//   HumanSup     clean data, extractor supervised by human rationales
//   AdvAtkSup    clean + one attacked copy, extractor supervised by the
//                non-attack indicator
//   AdvHumanSup  clean + one attacked copy, extractor supervised by human
//                rationales (which exclude attack tokens)
enum class RegimeKind { NoAdv, Adv, AdvKx, HumanSup, AdvAtkSup, AdvHumanSup };

std::string_view to_string(RegimeKind kind);
RegimeKind regime_kind_from_string(std::string_view name);

struct Regime {
  RegimeKind kind = RegimeKind::NoAdv;
  std::size_t copies = 10;  // K, used by AdvKx only
  Architecture architecture = Architecture::Standard;

  // Standard architecture for the data-augmentation baselines, Rationale for
  // the rationale-supervised conditions.
  static Regime make(RegimeKind kind, std::size_t copies = 10);

  // Attacked copies added per training instance.
  std::size_t augmentation_copies() const;
  bool uses_human_rationales() const;
  std::string name() const;
};

// The six conditions compared by the reproduction run, in report order.
std::vector<Regime> all_regimes(std::size_t copies = 10);

// Per-instance extractor supervision (aligned with `dataset`). Throws
// ConfigError naming the regime when required masks are missing.
std::vector<RationaleTarget> build_targets(const Dataset& dataset, const Regime& regime);

// Adam with bias correction.
class Adam {
 public:
  explicit Adam(std::size_t size, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                double epsilon = 1e-8);

  // Updates params[begin, end) from the matching gradient slice.
  void step(std::span<double> params, std::span<const double> gradient, std::size_t begin,
            std::size_t end);

 private:
  double lr_, beta1_, beta2_, eps_;
  std::vector<double> m_, v_;
  std::size_t t_ = 0;
};

// Stops after `patience` consecutive validations without a strict
// improvement, but never before `min_epochs`.
class EarlyStopping {
 public:
  EarlyStopping(std::size_t patience, double min_epochs);

  // Returns true when training should stop after this validation.
  bool observe(double score, double epoch);

  bool last_improved() const { return last_improved_; }
  std::size_t best_index() const { return best_index_; }
  double best_score() const { return best_; }
  std::size_t observations() const { return count_; }

 private:
  std::size_t patience_;
  double min_epochs_;
  double best_ = 0.0;
  std::size_t best_index_ = 0;
  std::size_t count_ = 0;
  std::size_t stale_ = 0;
  bool last_improved_ = false;
};

struct ValidationPoint {
  std::size_t step = 0;
  double epoch = 0.0;
  double accuracy = 0.0;
  double train_loss = 0.0;  // mean over steps since the previous validation
};

struct TrainReport {
  std::string regime;
  std::vector<ValidationPoint> history;
  std::size_t best_index = 0;
  double stopping_epoch = 0.0;
  std::uint64_t seed = 0;
  std::size_t clean_size = 0;
  std::size_t train_size = 0;  // after augmentation
  std::size_t skipped = 0;     // instances the attack could not be applied to

  double best_accuracy() const { return history.empty() ? 0.0 : history[best_index].accuracy; }
};

struct TrainResult {
  ModelParams params;
  TrainReport report;
};

// Trains the predictor on the full input (rationale fixed at 1) for
// hyper.pretrain_epochs epochs. The extractor block is left untouched.
ModelParams pretrain_predictor(ModelParams params, const Dataset& dataset, const Hyper& hyper);

// Seeded hold-out split; returns (train, validation).
std::pair<Dataset, Dataset> split_validation(const Dataset& dataset, double fraction,
                                             std::uint64_t seed);

// Augments per regime, builds targets, pretrains the predictor (Rationale
// architecture), and optimises the joint loss with Adam, validating every
// hyper.eval_interval epochs on `validation` and keeping the best checkpoint.
// `resources` is required for regimes that add attacked copies.
TrainResult train(const Dataset& train_set, const Dataset& validation, const Regime& regime,
                  const Hyper& hyper, const LexicalResources* resources);

// Same, holding out 10% of `dataset` for validation.
TrainResult train(const Dataset& dataset, const Regime& regime, const Hyper& hyper,
                  const LexicalResources* resources);

struct GridTrial {
  Hyper hyper;
  double validation_accuracy = 0.0;
};

struct GridResult {
  TrainResult best;
  Hyper best_hyper;
  std::vector<GridTrial> trials;
};

// Trains every (lambda2, joint) combination and keeps the one with the best
// clean validation accuracy (first wins ties).
GridResult grid_search(const Dataset& train_set, const Dataset& validation, const Regime& regime,
                       const Hyper& base, const std::vector<double>& lambda2_grid,
                       const std::vector<bool>& joint_grid, const LexicalResources* resources);

}  // namespace advrat
