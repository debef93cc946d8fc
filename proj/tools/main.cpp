// advrat: gen-synth -> attack/augment -> train -> eval/report, or repro for all
// of it at once.
//
// Exit codes: 0 ok, 1 runtime failure, 2 bad configuration or flags,
// 3 invalid input data, 4 training diverged.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "advrat/addsent.hpp"
#include "advrat/corpus.hpp"
#include "advrat/errors.hpp"
#include "advrat/eval.hpp"
#include "advrat/lexres.hpp"
#include "advrat/model.hpp"
#include "advrat/pipeline.hpp"
#include "advrat/synth.hpp"
#include "advrat/train.hpp"

namespace fs = std::filesystem;
using namespace advrat;

namespace {

constexpr const char* kResourceEnv = "ADVRAT_RESOURCE_DIR";

struct Common {
  std::string config_path;
  std::string resources;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
};

void add_common(CLI::App* cmd, Common& c, bool needs_resources) {
  cmd->add_option("--config", c.config_path, "JSON run config (flags override it)")
      ->check(CLI::ExistingFile);
  c.seed_opt = cmd->add_option("--seed", c.seed, "Random seed");
  if (needs_resources) {
    cmd->add_option("--resources", c.resources,
                    std::string("Resource directory (default: config, then $") + kResourceEnv + ")");
  }
}

RunConfig load_config(const Common& c, const RunConfig& defaults = {}) {
  RunConfig cfg = c.config_path.empty() ? defaults : RunConfig::load(c.config_path, defaults);
  if (c.seed_opt && c.seed_opt->count()) cfg.seed = c.seed;
  if (!c.resources.empty()) cfg.resources.directory = c.resources;
  return cfg;
}

LexicalResources resources_for(RunConfig& cfg) {
  if (cfg.resources.directory.empty()) {
    if (const char* env = std::getenv(kResourceEnv)) cfg.resources.directory = env;
  }
  if (cfg.resources.directory.empty()) {
    throw ConfigError(std::string("resources.directory: not set (use --resources or $") +
                      kResourceEnv + ")");
  }
  if (!fs::is_directory(cfg.resources.directory)) {
    throw ConfigError("resources.directory: no such directory '" + cfg.resources.directory + "'");
  }
  return load_resources(ResourcePaths::in_directory(cfg.resources.directory));
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (text.empty() || text.back() != '\n') out << '\n';
}

void write_dataset(const Dataset& d, const fs::path& path, const RunConfig& cfg,
                   const std::string& kind) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  save_jsonl(d, path);
  write_sidecar(path, cfg, kind);
}

int run_gen_synth(const Common& common, std::size_t n, const std::string& out_dir) {
  RunConfig cfg = load_config(common);
  SynthConfig sc = cfg.resources.synth;
  sc.instances = n;
  sc.seed = cfg.seed;
  const auto out = generate(sc);
  const fs::path dir(out_dir);
  fs::create_directories(dir);
  write_dataset(out.dataset, dir / "corpus.jsonl", cfg, "corpus");
  const auto paths = ResourcePaths::in_directory(dir);
  save_resources(out.resources, paths);
  for (const auto& p : {paths.embeddings, paths.antonyms, paths.pos}) write_sidecar(p, cfg, "resource");
  std::cout << "wrote " << out.dataset.size() << " instances to " << (dir / "corpus.jsonl").string()
            << "\n";
  return 0;
}

int run_attack(const Common& common, const std::string& input, const std::string& output,
               bool augment, std::optional<std::size_t> k) {
  RunConfig cfg = load_config(common);
  if (k) cfg.attack.copies = *k;
  cfg.validate();
  const auto res = resources_for(cfg);
  const auto data = load_jsonl(input);
  const auto result = augment ? augment_dataset(data, cfg.attack.copies, res, cfg.seed)
                              : attack_dataset(data, res, cfg.seed);
  write_dataset(result.dataset, output, cfg, augment ? "augmented" : "attacked");
  std::cout << "wrote " << result.dataset.size() << " instances (" << result.skipped
            << " skipped) to " << output << "\n";
  return 0;
}

int run_train(const Common& common, const std::string& regime_name, const std::string& train_path,
              const std::string& validation_path, const std::string& checkpoint,
              std::optional<std::size_t> k) {
  RunConfig cfg = load_config(common);
  if (!regime_name.empty()) cfg.regime.name = regime_name;
  if (!train_path.empty()) cfg.paths.train = train_path;
  if (!checkpoint.empty()) cfg.paths.checkpoint = checkpoint;
  if (k) cfg.attack.copies = *k;
  cfg.validate();
  if (cfg.paths.train.empty()) throw ConfigError("paths.train: not set (use --train)");
  if (cfg.paths.checkpoint.empty()) throw ConfigError("paths.checkpoint: not set (use --checkpoint)");

  const auto regime = Regime::make(regime_kind_from_string(cfg.regime.name), cfg.attack.copies);
  std::optional<LexicalResources> res;
  if (regime.augmentation_copies() > 0) res = resources_for(cfg);

  const auto data = load_jsonl(cfg.paths.train);
  Dataset train_set, validation;
  if (validation_path.empty()) {
    std::tie(train_set, validation) =
        split_validation(data, cfg.regime.validation_fraction, cfg.seed);
  } else {
    train_set = data;
    validation = load_jsonl(validation_path);
  }
  const auto run = train_regime(train_set, validation, regime, cfg, res ? &*res : nullptr);

  const fs::path ckpt(cfg.paths.checkpoint);
  if (ckpt.has_parent_path()) fs::create_directories(ckpt.parent_path());
  save_checkpoint(run.result.params, ckpt,
                  {{"regime", regime.name()},
                   {"seed", std::to_string(cfg.seed)},
                   {"config_hash", cfg.hash()},
                   {"lambda2", std::to_string(run.summary.lambda2)},
                   {"joint_optimized", run.summary.joint_optimized ? "true" : "false"}});
  write_sidecar(ckpt, cfg, "checkpoint");
  const fs::path report_path = ckpt.string() + ".train.json";
  write_text(report_path, to_json(run.result.report));
  std::cout << regime.name() << ": best validation accuracy "
            << run.result.report.best_accuracy() << " at epoch "
            << run.result.report.history[run.result.report.best_index].epoch << "\n";
  return 0;
}

// "name=path" or a bare path (name taken from the file stem).
std::pair<std::string, std::string> named_checkpoint(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos) return {fs::path(spec).stem().string(), spec};
  return {spec.substr(0, eq), spec.substr(eq + 1)};
}

int run_report(const Common& common, const std::vector<std::string>& checkpoints,
               const std::string& clean_path, const std::string& attacked_path,
               const std::string& out_path) {
  RunConfig cfg = load_config(common);
  std::vector<std::pair<std::string, ModelParams>> loaded;
  for (const auto& spec : checkpoints) {
    auto [name, path] = named_checkpoint(spec);
    loaded.emplace_back(name, load_checkpoint(path));
  }
  std::vector<std::pair<std::string, const ModelParams*>> models;
  for (const auto& [name, params] : loaded) models.emplace_back(name, &params);
  auto rep = report(models, load_jsonl(clean_path), load_jsonl(attacked_path));
  rep.seed = cfg.seed;
  rep.config_hash = cfg.hash();
  rep.config_json = cfg.to_json();
  if (!out_path.empty()) {
    write_text(out_path, to_json(rep));
    write_sidecar(out_path, cfg, "report");
  }
  std::cout << render_table(rep);
  return 0;
}

int run_repro(const Common& common, const std::string& out_dir) {
  RunConfig cfg = load_config(common, RunConfig::repro_defaults());
  const auto out = repro(cfg);
  if (!out_dir.empty()) {
    const fs::path dir(out_dir);
    write_text(dir / "report.json", out.json);
    write_text(dir / "report.txt", out.table);
    write_sidecar(dir / "report.json", cfg, "report");
  }
  std::cout << out.table;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial attacks and attack-aware rationale models on a synthetic corpus",
               "advrat"};
  app.require_subcommand(1);

  Common gen_c, attack_c, augment_c, train_c, eval_c, report_c, repro_c;
  std::size_t n = 100;
  std::string out_dir = ".", input, output, regime, train_path, validation_path, checkpoint,
              clean_path, attacked_path, report_out, repro_out;
  std::size_t k = 10;
  std::vector<std::string> checkpoints;

  auto* gen = app.add_subcommand("gen-synth", "Generate a synthetic corpus and its resources");
  add_common(gen, gen_c, false);
  gen->add_option("--n", n, "Number of instances")->capture_default_str();
  gen->add_option("--out", out_dir, "Output directory")->capture_default_str();

  auto* attack = app.add_subcommand("attack", "Attack every instance once");
  add_common(attack, attack_c, true);
  attack->add_option("--input", input, "Clean corpus JSONL")->required();
  attack->add_option("--output", output, "Attacked corpus JSONL")->required();

  auto* augment = app.add_subcommand("augment", "Append K attacked copies per instance");
  add_common(augment, augment_c, true);
  augment->add_option("--input", input, "Clean corpus JSONL")->required();
  augment->add_option("--output", output, "Augmented corpus JSONL")->required();
  auto* k_aug = augment->add_option("--k", k, "Attacked copies per instance");

  auto* train_cmd = app.add_subcommand("train", "Train one regime");
  add_common(train_cmd, train_c, true);
  train_cmd->add_option("--regime", regime,
                        "no_adv, adv, adv_kx, human_sup, adv_atk_sup or adv_human_sup");
  train_cmd->add_option("--train", train_path, "Training corpus JSONL");
  train_cmd->add_option("--validation", validation_path,
                        "Validation corpus JSONL (default: seeded hold-out)");
  train_cmd->add_option("--checkpoint", checkpoint, "Checkpoint output path");
  auto* k_train = train_cmd->add_option("--k", k, "Attacked copies for adv_kx");

  auto* eval = app.add_subcommand("eval", "Evaluate one checkpoint");
  add_common(eval, eval_c, false);
  eval->add_option("--checkpoint", checkpoint, "Checkpoint, optionally name=path")->required();
  eval->add_option("--clean", clean_path, "Clean test corpus")->required();
  eval->add_option("--attacked", attacked_path, "Attacked test corpus")->required();
  eval->add_option("--out", report_out, "Write the JSON report here");

  auto* rep = app.add_subcommand("report", "Compare several checkpoints");
  add_common(rep, report_c, false);
  rep->add_option("--checkpoint", checkpoints, "name=path (repeatable)")->required();
  rep->add_option("--clean", clean_path, "Clean test corpus")->required();
  rep->add_option("--attacked", attacked_path, "Attacked test corpus")->required();
  rep->add_option("--out", report_out, "Write the JSON report here");

  auto* repro_cmd = app.add_subcommand("repro", "Run all six regimes on one synthetic corpus");
  add_common(repro_cmd, repro_c, false);
  repro_cmd->add_option("--out", repro_out, "Directory for report.json and report.txt");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const auto k_flag = [&k](const CLI::Option* o) {
      return o->count() ? std::optional(k) : std::nullopt;
    };
    if (gen->parsed()) return run_gen_synth(gen_c, n, out_dir);
    if (attack->parsed()) return run_attack(attack_c, input, output, false, std::nullopt);
    if (augment->parsed()) return run_attack(augment_c, input, output, true, k_flag(k_aug));
    if (train_cmd->parsed()) {
      return run_train(train_c, regime, train_path, validation_path, checkpoint, k_flag(k_train));
    }
    if (eval->parsed()) {
      return run_report(eval_c, {checkpoint}, clean_path, attacked_path, report_out);
    }
    if (rep->parsed()) return run_report(report_c, checkpoints, clean_path, attacked_path, report_out);
    if (repro_cmd->parsed()) return run_repro(repro_c, repro_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 3;
  } catch (const ValidationError& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return 3;
  } catch (const DivergenceError& e) {
    std::cerr << "training diverged: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
