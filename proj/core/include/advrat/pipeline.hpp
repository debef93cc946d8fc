#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "advrat/corpus.hpp"
#include "advrat/eval.hpp"
#include "advrat/lexres.hpp"
#include "advrat/model.hpp"
#include "advrat/synth.hpp"
#include "advrat/train.hpp"

namespace advrat {

// Effective run configuration. JSON layout:
//   {
//     "seed": 0,
//     "resources": {"directory": "", "train_instances": 2000, "test_instances": 500,
//                   "synth": {...SynthConfig fields except instances/seed...}},
//     "attack":    {"copies": 10},
//     "regime":    {"name": "no_adv", "lambda2_grid": [0.0], "joint_grid": [true],
//                   "validation_fraction": 0.1},
//     "hyper":     {...Hyper fields except seed...},
//     "paths":     {"train": "", "test": "", "checkpoint": "", "output": ""}
//   }
// Every section and key is optional; unknown keys are rejected.
struct RunConfig {
  std::uint64_t seed = 0;

  struct Resources {
    std::string directory;
    std::size_t train_instances = 2000;
    std::size_t test_instances = 500;
    SynthConfig synth;
  } resources;

  struct Attack {
    std::size_t copies = 10;
  } attack;

  struct RegimeSection {
    std::string name = "no_adv";
    std::vector<double> lambda2_grid{0.0};
    std::vector<bool> joint_grid{true};
    double validation_fraction = 0.1;
  } regime;

  Hyper hyper;

  struct Paths {
    std::string train;
    std::string test;
    std::string checkpoint;
    std::string output;
  } paths;

  // Defaults used by the reproduction run.
  static RunConfig repro_defaults();

  // Throws ConfigError with the offending field path ("hyper.lambda2: ...").
  // Keys present in the document override `defaults`.
  static RunConfig from_json(const std::string& text, const RunConfig& defaults);
  static RunConfig from_json(const std::string& text);
  static RunConfig load(const std::filesystem::path& path, const RunConfig& defaults);
  static RunConfig load(const std::filesystem::path& path);

  // Throws ConfigError for out-of-range values.
  void validate() const;

  // Canonical JSON (fixed key order, 2-space indent).
  std::string to_json() const;
  // 16 hex digits of FNV-1a over the canonical JSON with the seed removed.
  std::string hash() const;

  // Hyper with the run seed applied.
  Hyper effective_hyper() const;
};

// Writes "<artifact>.meta.json" next to `artifact` with the seed and config hash.
void write_sidecar(const std::filesystem::path& artifact, const RunConfig& config,
                   const std::string& kind);

std::string to_json(const TrainReport& report);

struct ReproOutput {
  Report report;
  std::string json;
  std::string table;
};

// Full pipeline on one synthetic corpus: generate train/test, attack the test
// split, train every regime (grid search for the rationale regimes), and
// evaluate all of them on the same clean/attacked split.
ReproOutput repro(const RunConfig& config);

// Trains one regime per the config, with grid search when the regime uses
// the rationale architecture and a grid is configured.
struct RegimeRun {
  TrainResult result;
  TrainingSummary summary;
};

RegimeRun train_regime(const Dataset& train_set, const Dataset& validation, const Regime& regime,
                       const RunConfig& config, const LexicalResources* resources);

}  // namespace advrat
