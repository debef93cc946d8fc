#include "advrat/pipeline.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "advrat/addsent.hpp"
#include "advrat/errors.hpp"
#include "advrat/rng.hpp"

namespace advrat {
namespace {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

// Reads fields from one JSON object, recording which keys were consumed so
// leftovers can be reported as unknown.
class Section {
 public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  bool has(const std::string& key) const { return node_.contains(key); }

  const json& child(const std::string& key) {
    seen_.insert(key);
    return node_.at(key);
  }

  std::string path_of(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void read(const std::string& key, double& out) {
    if (!has(key)) return;
    const auto& v = child(key);
    if (!v.is_number()) throw ConfigError(path_of(key) + ": expected a number");
    out = v.get<double>();
  }

  void read(const std::string& key, std::size_t& out) {
    if (!has(key)) return;
    const auto& v = child(key);
    if (!v.is_number_unsigned()) throw ConfigError(path_of(key) + ": expected a non-negative integer");
    out = v.get<std::size_t>();
  }

  void read(const std::string& key, std::uint64_t& out, int) {
    if (!has(key)) return;
    const auto& v = child(key);
    if (!v.is_number_unsigned()) throw ConfigError(path_of(key) + ": expected a non-negative integer");
    out = v.get<std::uint64_t>();
  }

  void read(const std::string& key, bool& out) {
    if (!has(key)) return;
    const auto& v = child(key);
    if (!v.is_boolean()) throw ConfigError(path_of(key) + ": expected a boolean");
    out = v.get<bool>();
  }

  void read(const std::string& key, std::string& out) {
    if (!has(key)) return;
    const auto& v = child(key);
    if (!v.is_string()) throw ConfigError(path_of(key) + ": expected a string");
    out = v.get<std::string>();
  }

  void read(const std::string& key, std::vector<double>& out) {
    if (!has(key)) return;
    const auto& v = child(key);
    if (!v.is_array()) throw ConfigError(path_of(key) + ": expected an array of numbers");
    out.clear();
    for (const auto& e : v) {
      if (!e.is_number()) throw ConfigError(path_of(key) + ": expected an array of numbers");
      out.push_back(e.get<double>());
    }
  }

  void read(const std::string& key, std::vector<bool>& out) {
    if (!has(key)) return;
    const auto& v = child(key);
    if (!v.is_array()) throw ConfigError(path_of(key) + ": expected an array of booleans");
    out.clear();
    for (const auto& e : v) {
      if (!e.is_boolean()) throw ConfigError(path_of(key) + ": expected an array of booleans");
      out.push_back(e.get<bool>());
    }
  }

  void finish() const {
    for (const auto& [key, value] : node_.items()) {
      if (!seen_.count(key)) throw ConfigError(path_of(key) + ": unknown key");
    }
  }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }

  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_synth(Section s, SynthConfig& c) {
  s.read("entity_pairs", c.entity_pairs);
  s.read("adjective_pairs", c.adjective_pairs);
  s.read("max_count", c.max_count);
  s.read("distractor_sentences", c.distractor_sentences);
  s.read("counting_fraction", c.counting_fraction);
  s.read("embedding_dim", c.embedding_dim);
  s.finish();
}

void read_hyper(Section s, Hyper& h) {
  s.read("lambda1", h.lambda1);
  s.read("lambda2", h.lambda2);
  s.read("learning_rate", h.learning_rate);
  s.read("window_radius", h.window_radius);
  s.read("embed_dim", h.embed_dim);
  s.read("joint_optimized", h.joint_optimized);
  s.read("min_epochs", h.min_epochs);
  s.read("max_epochs", h.max_epochs);
  s.read("patience", h.patience);
  s.read("eval_interval", h.eval_interval);
  s.read("pretrain_epochs", h.pretrain_epochs);
  s.read("batch_size", h.batch_size);
  s.read("grad_accumulation", h.grad_accumulation);
  s.read("init_scale", h.init_scale);
  s.read("extractor_bias_init", h.extractor_bias_init);
  s.finish();
}

ojson synth_json(const SynthConfig& c) {
  ojson j;
  j["entity_pairs"] = c.entity_pairs;
  j["adjective_pairs"] = c.adjective_pairs;
  j["max_count"] = c.max_count;
  j["distractor_sentences"] = c.distractor_sentences;
  j["counting_fraction"] = c.counting_fraction;
  j["embedding_dim"] = c.embedding_dim;
  return j;
}

ojson hyper_json(const Hyper& h) {
  ojson j;
  j["lambda1"] = h.lambda1;
  j["lambda2"] = h.lambda2;
  j["learning_rate"] = h.learning_rate;
  j["window_radius"] = h.window_radius;
  j["embed_dim"] = h.embed_dim;
  j["joint_optimized"] = h.joint_optimized;
  j["min_epochs"] = h.min_epochs;
  j["max_epochs"] = h.max_epochs;
  j["patience"] = h.patience;
  j["eval_interval"] = h.eval_interval;
  j["pretrain_epochs"] = h.pretrain_epochs;
  j["batch_size"] = h.batch_size;
  j["grad_accumulation"] = h.grad_accumulation;
  j["init_scale"] = h.init_scale;
  j["extractor_bias_init"] = h.extractor_bias_init;
  return j;
}

ojson config_object(const RunConfig& c, bool with_seed) {
  ojson j;
  if (with_seed) j["seed"] = c.seed;
  ojson res;
  res["directory"] = c.resources.directory;
  res["train_instances"] = c.resources.train_instances;
  res["test_instances"] = c.resources.test_instances;
  res["synth"] = synth_json(c.resources.synth);
  j["resources"] = res;
  j["attack"] = ojson{{"copies", c.attack.copies}};
  ojson reg;
  reg["name"] = c.regime.name;
  reg["lambda2_grid"] = c.regime.lambda2_grid;
  reg["joint_grid"] = c.regime.joint_grid;
  reg["validation_fraction"] = c.regime.validation_fraction;
  j["regime"] = reg;
  j["hyper"] = hyper_json(c.hyper);
  ojson paths;
  paths["train"] = c.paths.train;
  paths["test"] = c.paths.test;
  paths["checkpoint"] = c.paths.checkpoint;
  paths["output"] = c.paths.output;
  j["paths"] = paths;
  return j;
}

std::string hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

RunConfig RunConfig::repro_defaults() {
  RunConfig c;
  c.resources.train_instances = 2000;
  c.resources.test_instances = 500;
  c.regime.lambda2_grid = {0.0, 0.1, 0.2, 0.3};
  c.regime.joint_grid = {true, false};
  return c;
}

RunConfig RunConfig::from_json(const std::string& text, const RunConfig& defaults) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  RunConfig c = defaults;
  Section top(root, "");
  top.read("seed", c.seed, 0);
  if (top.has("resources")) {
    Section s(top.child("resources"), "resources");
    s.read("directory", c.resources.directory);
    s.read("train_instances", c.resources.train_instances);
    s.read("test_instances", c.resources.test_instances);
    if (s.has("synth")) read_synth(Section(s.child("synth"), "resources.synth"), c.resources.synth);
    s.finish();
  }
  if (top.has("attack")) {
    Section s(top.child("attack"), "attack");
    s.read("copies", c.attack.copies);
    s.finish();
  }
  if (top.has("regime")) {
    Section s(top.child("regime"), "regime");
    s.read("name", c.regime.name);
    s.read("lambda2_grid", c.regime.lambda2_grid);
    s.read("joint_grid", c.regime.joint_grid);
    s.read("validation_fraction", c.regime.validation_fraction);
    s.finish();
  }
  if (top.has("hyper")) read_hyper(Section(top.child("hyper"), "hyper"), c.hyper);
  if (top.has("paths")) {
    Section s(top.child("paths"), "paths");
    s.read("train", c.paths.train);
    s.read("test", c.paths.test);
    s.read("checkpoint", c.paths.checkpoint);
    s.read("output", c.paths.output);
    s.finish();
  }
  top.finish();
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path, const RunConfig& defaults) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str(), defaults);
}

RunConfig RunConfig::from_json(const std::string& text) { return from_json(text, RunConfig{}); }

RunConfig RunConfig::load(const std::filesystem::path& path) { return load(path, RunConfig{}); }

void RunConfig::validate() const {
  try {
    regime_kind_from_string(regime.name);
  } catch (const Error&) {
    throw ConfigError("regime.name: unknown regime '" + regime.name + "'");
  }
  if (attack.copies < 1) throw ConfigError("attack.copies: must be >= 1");
  if (regime.lambda2_grid.empty()) throw ConfigError("regime.lambda2_grid: must not be empty");
  for (double v : regime.lambda2_grid) {
    if (!(v >= 0.0)) throw ConfigError("regime.lambda2_grid: values must be >= 0");
  }
  if (regime.joint_grid.empty()) throw ConfigError("regime.joint_grid: must not be empty");
  if (!(regime.validation_fraction > 0.0 && regime.validation_fraction < 1.0)) {
    throw ConfigError("regime.validation_fraction: must be in (0, 1)");
  }
  if (resources.train_instances < 1) throw ConfigError("resources.train_instances: must be >= 1");
  if (resources.test_instances < 1) throw ConfigError("resources.test_instances: must be >= 1");
  try {
    resources.synth.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("resources.") + e.what());
  }
  hyper.validate();
}

std::string RunConfig::to_json() const { return config_object(*this, true).dump(2); }

std::string RunConfig::hash() const {
  return hex16(fnv1a(config_object(*this, false).dump()));
}

Hyper RunConfig::effective_hyper() const {
  Hyper h = hyper;
  h.seed = seed;
  return h;
}

void write_sidecar(const std::filesystem::path& artifact, const RunConfig& config,
                   const std::string& kind) {
  ojson j;
  j["artifact"] = artifact.filename().string();
  j["kind"] = kind;
  j["seed"] = config.seed;
  j["config_hash"] = config.hash();
  j["config"] = config_object(config, true);
  const auto path = artifact.string() + ".meta.json";
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << j.dump(2) << '\n';
}

std::string to_json(const TrainReport& r) {
  ojson j;
  j["regime"] = r.regime;
  j["seed"] = r.seed;
  j["clean_size"] = r.clean_size;
  j["train_size"] = r.train_size;
  j["skipped"] = r.skipped;
  j["best_index"] = r.best_index;
  j["best_accuracy"] = r.best_accuracy();
  j["stopping_epoch"] = r.stopping_epoch;
  ojson hist = ojson::array();
  for (const auto& p : r.history) {
    hist.push_back(ojson{{"step", p.step},
                         {"epoch", p.epoch},
                         {"accuracy", p.accuracy},
                         {"train_loss", p.train_loss}});
  }
  j["history"] = hist;
  return j.dump(2);
}

RegimeRun train_regime(const Dataset& train_set, const Dataset& validation, const Regime& regime,
                       const RunConfig& config, const LexicalResources* resources) {
  const Hyper base = config.effective_hyper();
  Hyper chosen = base;
  const bool grid = regime.architecture == Architecture::Rationale &&
                    (config.regime.lambda2_grid.size() > 1 || config.regime.joint_grid.size() > 1);
  auto result = [&]() -> TrainResult {
    if (grid) {
      auto g = grid_search(train_set, validation, regime, base, config.regime.lambda2_grid,
                           config.regime.joint_grid, resources);
      chosen = g.best_hyper;
      return std::move(g.best);
    }
    if (regime.architecture == Architecture::Rationale) {
      chosen.lambda2 = config.regime.lambda2_grid.front();
      chosen.joint_optimized = config.regime.joint_grid.front();
    }
    return train(train_set, validation, regime, chosen, resources);
  }();
  RegimeRun run{std::move(result), {}};
  const auto& rep = run.result.report;
  run.summary.validation_accuracy = rep.best_accuracy();
  run.summary.stopping_epoch = rep.stopping_epoch;
  run.summary.lambda1 = chosen.lambda1;
  run.summary.lambda2 = chosen.lambda2;
  run.summary.joint_optimized = chosen.joint_optimized;
  run.summary.train_size = rep.train_size;
  run.summary.skipped = rep.skipped;
  return run;
}

ReproOutput repro(const RunConfig& config) {
  config.validate();
  SynthConfig sc = config.resources.synth;
  sc.instances = config.resources.train_instances + config.resources.test_instances;
  sc.seed = config.seed;
  auto synth = generate(sc);
  const auto split = static_cast<long>(config.resources.train_instances);
  Dataset train_all(synth.dataset.begin(), synth.dataset.begin() + split);
  Dataset test(synth.dataset.begin() + split, synth.dataset.end());

  const auto attacked = attack_dataset(test, synth.resources, config.seed);
  if (attacked.skipped != 0) {
    throw ValidationError("repro: " + std::to_string(attacked.skipped) +
                          " test instances could not be attacked");
  }
  auto [train_set, validation] =
      split_validation(train_all, config.regime.validation_fraction, config.seed);

  std::vector<Regime> regimes = all_regimes(config.attack.copies);
  std::vector<RegimeRun> runs;
  runs.reserve(regimes.size());
  for (const auto& regime : regimes) {
    runs.push_back(train_regime(train_set, validation, regime, config, &synth.resources));
  }

  std::vector<std::pair<std::string, const ModelParams*>> models;
  for (std::size_t i = 0; i < regimes.size(); ++i) {
    models.emplace_back(regimes[i].name(), &runs[i].result.params);
  }
  ReproOutput out;
  out.report = report(models, test, attacked.dataset);
  for (std::size_t i = 0; i < regimes.size(); ++i) out.report.rows[i].training = runs[i].summary;
  out.report.seed = config.seed;
  out.report.config_hash = config.hash();
  out.report.config_json = config.to_json();
  out.report.diagnostics = rationale_diagnostics(test);
  out.json = to_json(out.report);
  out.table = render_table(out.report);
  return out;
}

}  // namespace advrat
