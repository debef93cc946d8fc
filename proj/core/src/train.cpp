#include "advrat/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "advrat/addsent.hpp"
#include "advrat/errors.hpp"
#include "advrat/eval.hpp"

namespace advrat {
namespace {

std::vector<EncodedInput> encode_all(const Dataset& dataset, const Vocabulary& vocab) {
  std::vector<EncodedInput> out;
  out.reserve(dataset.size());
  for (const auto& inst : dataset) out.push_back(encode(inst, vocab));
  return out;
}

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

}  // namespace

std::string_view to_string(RegimeKind kind) {
  switch (kind) {
    case RegimeKind::NoAdv: return "no_adv";
    case RegimeKind::Adv: return "adv";
    case RegimeKind::AdvKx: return "adv_kx";
    case RegimeKind::HumanSup: return "human_sup";
    case RegimeKind::AdvAtkSup: return "adv_atk_sup";
    case RegimeKind::AdvHumanSup: return "adv_human_sup";
  }
  return "no_adv";
}

RegimeKind regime_kind_from_string(std::string_view name) {
  for (auto kind : {RegimeKind::NoAdv, RegimeKind::Adv, RegimeKind::AdvKx, RegimeKind::HumanSup,
                    RegimeKind::AdvAtkSup, RegimeKind::AdvHumanSup}) {
    if (to_string(kind) == name) return kind;
  }
  throw ConfigError("unknown regime '" + std::string(name) + "'");
}

Regime Regime::make(RegimeKind kind, std::size_t copies) {
  Regime r;
  r.kind = kind;
  r.copies = copies;
  const bool baseline =
      kind == RegimeKind::NoAdv || kind == RegimeKind::Adv || kind == RegimeKind::AdvKx;
  r.architecture = baseline ? Architecture::Standard : Architecture::Rationale;
  return r;
}

std::size_t Regime::augmentation_copies() const {
  switch (kind) {
    case RegimeKind::NoAdv:
    case RegimeKind::HumanSup: return 0;
    case RegimeKind::AdvKx: return copies;
    case RegimeKind::Adv:
    case RegimeKind::AdvAtkSup:
    case RegimeKind::AdvHumanSup: return 1;
  }
  return 0;
}

bool Regime::uses_human_rationales() const {
  return kind == RegimeKind::HumanSup || kind == RegimeKind::AdvHumanSup;
}

std::string Regime::name() const {
  if (kind == RegimeKind::AdvKx) return "adv_" + std::to_string(copies) + "x";
  return std::string(to_string(kind));
}

std::vector<Regime> all_regimes(std::size_t copies) {
  std::vector<Regime> out;
  for (auto kind : {RegimeKind::NoAdv, RegimeKind::Adv, RegimeKind::AdvKx, RegimeKind::HumanSup,
                    RegimeKind::AdvAtkSup, RegimeKind::AdvHumanSup}) {
    out.push_back(Regime::make(kind, copies));
  }
  return out;
}

std::vector<RationaleTarget> build_targets(const Dataset& dataset, const Regime& regime) {
  std::vector<RationaleTarget> targets(dataset.size());
  if (regime.architecture == Architecture::Standard) return targets;
  const bool attack_sup = regime.kind == RegimeKind::AdvAtkSup;
  const bool human_sup = regime.uses_human_rationales();
  if (attack_sup && std::none_of(dataset.begin(), dataset.end(),
                                 [](const Instance& i) { return i.is_attacked(); })) {
    throw ConfigError("regime " + regime.name() + " requires attacked instances with attack masks");
  }
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& inst = dataset[i];
    auto& t = targets[i];
    if (attack_sup) {
      t.origin = TargetOrigin::NonAttack;
      t.values.assign(inst.document.size(), 1);
      if (inst.attack_mask) {
        for (std::size_t k = 0; k < t.values.size(); ++k) t.values[k] = (*inst.attack_mask)[k] ? 0 : 1;
      }
    } else if (human_sup) {
      if (!inst.human_rationale) {
        throw ConfigError("regime " + regime.name() + " requires human rationales; instance '" +
                          inst.id + "' has none");
      }
      t.origin = TargetOrigin::Human;
      t.values = *inst.human_rationale;
    }
  }
  return targets;
}

Adam::Adam(std::size_t size, double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon), m_(size, 0.0), v_(size, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> gradient, std::size_t begin,
                std::size_t end) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = begin; i < end; ++i) {
    const double g = gradient[i];
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g * g;
    params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

EarlyStopping::EarlyStopping(std::size_t patience, double min_epochs)
    : patience_(patience), min_epochs_(min_epochs) {}

bool EarlyStopping::observe(double score, double epoch) {
  last_improved_ = count_ == 0 || score > best_;
  if (last_improved_) {
    best_ = score;
    best_index_ = count_;
    stale_ = 0;
  } else {
    ++stale_;
  }
  ++count_;
  return stale_ >= patience_ && epoch >= min_epochs_;
}

ModelParams pretrain_predictor(ModelParams params, const Dataset& dataset, const Hyper& hyper) {
  hyper.validate();
  if (hyper.pretrain_epochs == 0 || dataset.empty()) return params;
  const auto inputs = encode_all(dataset, params.vocabulary());
  const std::size_t offset = params.extractor_block().size();
  Adam adam(params.values().size(), hyper.learning_rate);
  auto gradient = params.zeros_like();
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  const Rng base(hyper.seed);
  for (std::size_t epoch = 0; epoch < hyper.pretrain_epochs; ++epoch) {
    auto shuffle_rng = base.stream("pretrain-shuffle", epoch);
    shuffle_rng.shuffle(order.begin(), order.end());
    for (std::size_t b = 0; b < order.size(); b += hyper.batch_size) {
      std::fill(gradient.values().begin(), gradient.values().end(), 0.0);
      const std::size_t e = std::min(order.size(), b + hyper.batch_size);
      for (std::size_t k = b; k < e; ++k) {
        const auto& inst = dataset[order[k]];
        const double l = accumulate_gradient(params, inputs[order[k]], inst.label, nullptr, hyper,
                                             gradient, /*full_input=*/true);
        if (!std::isfinite(l)) throw DivergenceError("non-finite loss during predictor pretraining");
      }
      adam.step(params.values(), gradient.values(), offset, params.values().size());
    }
  }
  if (!params.all_finite()) throw DivergenceError("non-finite parameters after pretraining");
  return params;
}

std::pair<Dataset, Dataset> split_validation(const Dataset& dataset, double fraction,
                                             std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("validation fraction must be in (0, 1)");
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  auto rng = Rng(seed).stream("validation-split");
  rng.shuffle(order.begin(), order.end());
  const auto n_val = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(dataset.size()))));
  if (dataset.size() < 2) throw ConfigError("need at least two instances to hold out validation data");
  std::vector<bool> is_val(dataset.size(), false);
  for (std::size_t i = 0; i < n_val; ++i) is_val[order[i]] = true;
  Dataset train, val;
  for (std::size_t i = 0; i < dataset.size(); ++i) (is_val[i] ? val : train).push_back(dataset[i]);
  return {std::move(train), std::move(val)};
}

TrainResult train(const Dataset& train_set, const Dataset& validation, const Regime& regime,
                  const Hyper& hyper, const LexicalResources* resources) {
  hyper.validate();
  if (train_set.empty()) throw ConfigError("training split is empty");
  if (validation.empty()) throw ConfigError("validation split is empty");

  TrainReport report;
  report.regime = regime.name();
  report.seed = hyper.seed;
  report.clean_size = static_cast<std::size_t>(std::count_if(
      train_set.begin(), train_set.end(), [](const Instance& i) { return !i.is_attacked(); }));

  Dataset data;
  if (const auto copies = regime.augmentation_copies(); copies > 0) {
    if (!resources) throw ConfigError("regime " + regime.name() + " needs lexical resources");
    auto augmented = augment_dataset(train_set, copies, *resources, hyper.seed);
    data = std::move(augmented.dataset);
    report.skipped = augmented.skipped;
  } else {
    data = train_set;
  }
  report.train_size = data.size();
  const auto targets = build_targets(data, regime);

  auto vocab = std::make_shared<const Vocabulary>(build_vocabulary(data, resources));
  const Rng base(hyper.seed);
  auto init_rng = base.stream("init");
  auto params = ModelParams::initialized(regime.architecture, vocab, hyper, init_rng);
  if (regime.architecture == Architecture::Rationale) params = pretrain_predictor(params, data, hyper);

  const auto inputs = encode_all(data, *vocab);
  const std::size_t n = data.size();
  const std::size_t steps_per_epoch = ceil_div(n, hyper.batch_size);
  const std::size_t eval_every = std::max<std::size_t>(
      1, static_cast<std::size_t>(
             std::llround(hyper.eval_interval * static_cast<double>(steps_per_epoch))));
  const std::size_t update_begin =
      regime.architecture == Architecture::Standard ? params.extractor_block().size() : 0;

  Adam adam(params.values().size(), hyper.learning_rate);
  EarlyStopping stopper(hyper.patience, static_cast<double>(hyper.min_epochs));
  auto gradient = params.zeros_like();
  auto best = params;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  std::size_t step = 0, pending = 0, since_eval = 0;
  double loss_since_eval = 0.0;
  bool stop = false;
  auto validate_now = [&] {
    const double epoch = static_cast<double>(step) / static_cast<double>(steps_per_epoch);
    ValidationPoint point{step, epoch, accuracy(params, validation),
                          since_eval ? loss_since_eval / static_cast<double>(since_eval) : 0.0};
    report.history.push_back(point);
    loss_since_eval = 0.0;
    since_eval = 0;
    stop = stopper.observe(point.accuracy, epoch);
    if (stopper.last_improved()) best = params;
    report.stopping_epoch = epoch;
  };

  for (std::size_t epoch = 0; epoch < hyper.max_epochs && !stop; ++epoch) {
    auto shuffle_rng = base.stream("shuffle", epoch);
    shuffle_rng.shuffle(order.begin(), order.end());
    for (std::size_t b = 0; b < n && !stop; b += hyper.batch_size) {
      const std::size_t e = std::min(n, b + hyper.batch_size);
      double batch_loss = 0.0;
      for (std::size_t k = b; k < e; ++k) {
        const auto idx = order[k];
        batch_loss += accumulate_gradient(params, inputs[idx], data[idx].label, &targets[idx],
                                          hyper, gradient);
      }
      if (!std::isfinite(batch_loss)) {
        throw DivergenceError("non-finite loss at step " + std::to_string(step) + " (regime " +
                              regime.name() + ")");
      }
      if (++pending == hyper.grad_accumulation || e == n) {
        adam.step(params.values(), gradient.values(), update_begin, params.values().size());
        std::fill(gradient.values().begin(), gradient.values().end(), 0.0);
        pending = 0;
        if (!params.all_finite()) {
          throw DivergenceError("non-finite parameters at step " + std::to_string(step));
        }
      }
      loss_since_eval += batch_loss / static_cast<double>(e - b);
      ++since_eval;
      ++step;
      if (step % eval_every == 0) validate_now();
    }
  }
  if (since_eval > 0 && !stop) validate_now();

  report.best_index = stopper.best_index();
  return {std::move(best), std::move(report)};
}

TrainResult train(const Dataset& dataset, const Regime& regime, const Hyper& hyper,
                  const LexicalResources* resources) {
  auto [train_set, validation] = split_validation(dataset, 0.1, hyper.seed);
  return train(train_set, validation, regime, hyper, resources);
}

GridResult grid_search(const Dataset& train_set, const Dataset& validation, const Regime& regime,
                       const Hyper& base, const std::vector<double>& lambda2_grid,
                       const std::vector<bool>& joint_grid, const LexicalResources* resources) {
  std::vector<Hyper> candidates;
  if (regime.architecture == Architecture::Standard || lambda2_grid.empty()) {
    candidates.push_back(base);
  } else {
    for (double l2 : lambda2_grid) {
      const std::vector<bool> joints = joint_grid.empty() ? std::vector<bool>{base.joint_optimized}
                                                          : joint_grid;
      for (bool joint : joints) {
        Hyper h = base;
        h.lambda2 = l2;
        h.joint_optimized = joint;
        candidates.push_back(h);
      }
    }
  }
  std::optional<GridResult> result;
  std::vector<GridTrial> trials;
  for (const auto& h : candidates) {
    auto trained = train(train_set, validation, regime, h, resources);
    const double acc = trained.report.best_accuracy();
    trials.push_back({h, acc});
    if (!result || acc > result->best.report.best_accuracy()) {
      result = GridResult{std::move(trained), h, {}};
    }
  }
  result->trials = std::move(trials);
  return std::move(*result);
}

}  // namespace advrat
