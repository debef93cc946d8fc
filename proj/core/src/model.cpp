#include "advrat/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "advrat/errors.hpp"

namespace advrat {
namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t k = 0; k < x.size(); ++k) y[k] += alpha * x[k];
}

// Binary cross-entropy on a clamped probability. `dlogit` receives
// d(CE)/d(logit), which is zero whenever the clamp is active.
double clamped_ce(double p, double target, double* dlogit) {
  const bool clamped = p < kProbClamp || p > 1.0 - kProbClamp;
  const double c = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
  if (dlogit) *dlogit = clamped ? 0.0 : p - target;
  return -(target * std::log(c) + (1.0 - target) * std::log(1.0 - c));
}

// Intermediate values of one forward pass, kept for the backward pass.
struct Pass {
  std::size_t n = 0, m = 0, d = 0;
  std::vector<double> qbar;        // extractor query mean [d]
  std::vector<double> windows;     // window means [n x d]
  std::vector<std::size_t> lo, hi; // window bounds (inclusive), document-relative
  std::vector<double> phi;         // rationale logits [n]
  std::vector<double> r;           // rationale used by the predictor [n]
  std::vector<double> z;           // masked bag [d]
  std::vector<double> qp;          // predictor query mean [d]
  double mass = 0.0;               // sum of r
  double logit = 0.0;
  double prob = 0.5;
};

void run_extractor(const ModelParams& params, const EncodedInput& in, Pass& pass) {
  const std::size_t n = pass.n, d = pass.d, m = pass.m;
  const std::size_t w = params.window_radius();
  pass.qbar.assign(d, 0.0);
  for (std::size_t j = in.query_span.begin; j < in.query_span.end; ++j) {
    axpy(1.0 / static_cast<double>(m), params.extractor_embedding(in.ids[j]), pass.qbar);
  }
  // Prefix sums over document embeddings give each window mean in O(d).
  std::vector<double> prefix((n + 1) * d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto e = params.extractor_embedding(in.ids[in.doc_span.begin + i]);
    for (std::size_t k = 0; k < d; ++k) prefix[(i + 1) * d + k] = prefix[i * d + k] + e[k];
  }
  pass.windows.assign(n * d, 0.0);
  pass.lo.resize(n);
  pass.hi.resize(n);
  pass.phi.resize(n);
  const auto wts = params.extractor_weights();
  const auto w_tok = wts.subspan(0, d), w_win = wts.subspan(d, d), w_int = wts.subspan(2 * d, d),
             w_q = wts.subspan(3 * d, d);
  const double q_term = dot(w_q, pass.qbar) + params.extractor_bias();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= w ? i - w : 0;
    const std::size_t hi = std::min(n - 1, i + w);
    pass.lo[i] = lo;
    pass.hi[i] = hi;
    const double inv = 1.0 / static_cast<double>(hi - lo + 1);
    std::span<double> win(pass.windows.data() + i * d, d);
    for (std::size_t k = 0; k < d; ++k) win[k] = (prefix[(hi + 1) * d + k] - prefix[lo * d + k]) * inv;
    const auto e = params.extractor_embedding(in.ids[in.doc_span.begin + i]);
    double phi = q_term + dot(w_tok, e) + dot(w_win, win);
    for (std::size_t k = 0; k < d; ++k) phi += w_int[k] * e[k] * pass.qbar[k];
    pass.phi[i] = phi;
  }
}

void run_predictor(const ModelParams& params, const EncodedInput& in, Pass& pass) {
  const std::size_t n = pass.n, d = pass.d, m = pass.m;
  pass.z.assign(d, 0.0);
  pass.mass = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    pass.mass += pass.r[i];
    axpy(pass.r[i], params.predictor_embedding(in.ids[in.doc_span.begin + i]), pass.z);
  }
  const double denom = std::max(pass.mass, kMaskFloor);
  for (auto& v : pass.z) v /= denom;
  pass.qp.assign(d, 0.0);
  for (std::size_t j = in.query_span.begin; j < in.query_span.end; ++j) {
    axpy(1.0 / static_cast<double>(m), params.predictor_embedding(in.ids[j]), pass.qp);
  }
  const auto u = params.predictor_weights();
  pass.logit = dot(u.subspan(0, d), pass.z) + dot(u.subspan(d, d), pass.qp) + params.predictor_bias();
  pass.prob = sigmoid(pass.logit);
}

enum class RationaleMode { Soft, Hard, Full };

Pass run(const ModelParams& params, const EncodedInput& in, RationaleMode mode) {
  if (in.query_span.empty()) throw ValidationError("model input has an empty query");
  Pass pass;
  pass.n = in.doc_span.size();
  pass.m = in.query_span.size();
  pass.d = params.embed_dim();
  if (params.architecture() == Architecture::Standard) mode = RationaleMode::Full;
  if (mode == RationaleMode::Full) {
    pass.r.assign(pass.n, 1.0);
  } else {
    run_extractor(params, in, pass);
    pass.r.resize(pass.n);
    for (std::size_t i = 0; i < pass.n; ++i) {
      const double s = sigmoid(pass.phi[i]);
      pass.r[i] = mode == RationaleMode::Hard ? (s >= 0.5 ? 1.0 : 0.0) : s;
    }
  }
  run_predictor(params, in, pass);
  return pass;
}

ForwardTrace trace_of(const EncodedInput& in, const Pass& pass) {
  ForwardTrace t;
  t.rationale.assign(in.ids.size(), 1.0);
  std::copy(pass.r.begin(), pass.r.end(), t.rationale.begin() + static_cast<long>(in.doc_span.begin));
  t.prob = pass.prob;
  return t;
}

void check_target(const RationaleTarget* target, std::size_t n) {
  if (target && target->origin != TargetOrigin::None && target->values.size() != n) {
    throw ValidationError("rationale target length " + std::to_string(target->values.size()) +
                          " != document length " + std::to_string(n));
  }
}

bool supervised(const RationaleTarget* target) {
  return target && target->origin != TargetOrigin::None;
}

}  // namespace

std::string_view to_string(Architecture arch) {
  return arch == Architecture::Standard ? "standard" : "rationale";
}

Architecture architecture_from_string(std::string_view name) {
  if (name == "standard") return Architecture::Standard;
  if (name == "rationale") return Architecture::Rationale;
  throw ConfigError("unknown architecture '" + std::string(name) + "'");
}

std::string_view to_string(TargetOrigin origin) {
  switch (origin) {
    case TargetOrigin::Human: return "human";
    case TargetOrigin::NonAttack: return "non_attack";
    case TargetOrigin::None: return "none";
  }
  return "none";
}

Vocabulary::Vocabulary() {
  add(kUnkToken);
  add(kClsToken);
  add(kSepToken);
}

std::size_t Vocabulary::add(std::string_view word) {
  const auto [it, inserted] = ids_.try_emplace(std::string(word), words_.size());
  if (inserted) words_.emplace_back(word);
  return it->second;
}

std::size_t Vocabulary::id(std::string_view word) const {
  const auto it = ids_.find(std::string(word));
  return it == ids_.end() ? kUnk : it->second;
}

Vocabulary build_vocabulary(const Dataset& dataset, const LexicalResources* resources) {
  Vocabulary vocab;
  for (const auto& inst : dataset) {
    for (const auto& t : inst.document.tokens) vocab.add(t);
    for (const auto& t : inst.query) vocab.add(t);
  }
  if (resources) {
    for (const auto& w : resources->embeddings.words()) vocab.add(w);
    for (const auto& [w, list] : resources->antonyms.entries()) {
      vocab.add(w);
      for (const auto& a : list) vocab.add(a);
    }
    for (const auto& [w, _] : resources->pos.tags()) vocab.add(w);
    for (const auto& w : resources->pos.entities()) vocab.add(w);
  }
  return vocab;
}

void Hyper::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw ConfigError("hyper." + field + ": " + why);
  };
  if (!(lambda1 >= 0) || !std::isfinite(lambda1)) fail("lambda1", "must be finite and >= 0");
  if (!(lambda2 >= 0) || !std::isfinite(lambda2)) fail("lambda2", "must be finite and >= 0");
  if (!(learning_rate > 0) || !std::isfinite(learning_rate)) fail("learning_rate", "must be > 0");
  if (embed_dim < 1) fail("embed_dim", "must be >= 1");
  if (batch_size < 1) fail("batch_size", "must be >= 1");
  if (grad_accumulation < 1) fail("grad_accumulation", "must be >= 1");
  if (!(eval_interval > 0) || eval_interval > 1) fail("eval_interval", "must be in (0, 1]");
  if (max_epochs < 1) fail("max_epochs", "must be >= 1");
  if (min_epochs > max_epochs) fail("min_epochs", "must not exceed max_epochs");
  if (patience < 1) fail("patience", "must be >= 1");
  if (!(init_scale >= 0) || !std::isfinite(init_scale)) fail("init_scale", "must be finite and >= 0");
  if (!std::isfinite(extractor_bias_init)) fail("extractor_bias_init", "must be finite");
}

ModelParams::ModelParams(Architecture arch, std::shared_ptr<const Vocabulary> vocab,
                         std::size_t embed_dim, std::size_t window_radius)
    : arch_(arch), vocab_(std::move(vocab)), dim_(embed_dim), window_(window_radius) {
  if (!vocab_) throw ValidationError("model parameters need a vocabulary");
  if (dim_ == 0) throw ValidationError("embedding dimension must be >= 1");
  const std::size_t v = vocab_->size();
  ext_emb_ = 0;
  ext_w_ = ext_emb_ + v * dim_;
  ext_b_ = ext_w_ + 4 * dim_;
  pred_emb_ = ext_b_ + 1;
  pred_u_ = pred_emb_ + v * dim_;
  pred_c_ = pred_u_ + 2 * dim_;
  values_.assign(pred_c_ + 1, 0.0);
}

ModelParams ModelParams::initialized(Architecture arch, std::shared_ptr<const Vocabulary> vocab,
                                     const Hyper& hyper, Rng& rng) {
  ModelParams p(arch, std::move(vocab), hyper.embed_dim, hyper.window_radius);
  for (auto& v : p.values_) v = hyper.init_scale * rng.normal();
  p.extractor_bias() = hyper.extractor_bias_init;
  p.predictor_bias() = 0.0;
  return p;
}

ModelParams ModelParams::zeros_like() const {
  ModelParams g = *this;
  std::fill(g.values_.begin(), g.values_.end(), 0.0);
  return g;
}

bool ModelParams::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

EncodedInput encode(const ModelInput& input, const Vocabulary& vocab) {
  EncodedInput out;
  out.ids.reserve(input.tokens.size());
  for (const auto& t : input.tokens) out.ids.push_back(vocab.id(t));
  out.doc_span = input.doc_span;
  out.query_span = input.query_span;
  return out;
}

EncodedInput encode(const Instance& instance, const Vocabulary& vocab) {
  return encode(build_input(instance), vocab);
}

std::vector<double> extract(const ModelParams& params, const EncodedInput& input) {
  std::vector<double> r(input.ids.size(), 1.0);
  if (params.architecture() == Architecture::Standard) return r;
  Pass pass;
  pass.n = input.doc_span.size();
  pass.m = input.query_span.size();
  pass.d = params.embed_dim();
  if (pass.m == 0) throw ValidationError("model input has an empty query");
  run_extractor(params, input, pass);
  for (std::size_t i = 0; i < pass.n; ++i) r[input.doc_span.begin + i] = sigmoid(pass.phi[i]);
  return r;
}

std::vector<double> extractor_logits(const ModelParams& params, const EncodedInput& input) {
  Pass pass;
  pass.n = input.doc_span.size();
  pass.m = input.query_span.size();
  pass.d = params.embed_dim();
  if (pass.m == 0) throw ValidationError("model input has an empty query");
  run_extractor(params, input, pass);
  return pass.phi;
}

double mask_and_predict(const ModelParams& params, const EncodedInput& input,
                        std::span<const double> rationale) {
  if (rationale.size() != input.ids.size()) {
    throw ValidationError("rationale length does not match the model input");
  }
  if (input.query_span.empty()) throw ValidationError("model input has an empty query");
  Pass pass;
  pass.n = input.doc_span.size();
  pass.m = input.query_span.size();
  pass.d = params.embed_dim();
  pass.r.assign(rationale.begin() + static_cast<long>(input.doc_span.begin),
                rationale.begin() + static_cast<long>(input.doc_span.end));
  run_predictor(params, input, pass);
  return pass.prob;
}

ForwardTrace forward(const ModelParams& params, const EncodedInput& input) {
  return trace_of(input, run(params, input, RationaleMode::Soft));
}

ForwardTrace forward_hard(const ModelParams& params, const EncodedInput& input) {
  return trace_of(input, run(params, input, RationaleMode::Hard));
}

LossTerms loss_terms(const ModelParams& params, const EncodedInput& input, bool label,
                     const RationaleTarget* target, const Hyper& hyper) {
  const Pass pass = run(params, input, RationaleMode::Soft);
  check_target(target, pass.n);
  LossTerms t;
  t.label = clamped_ce(pass.prob, label ? 1.0 : 0.0, nullptr);
  if (pass.n > 0) {
    const double inv_n = 1.0 / static_cast<double>(pass.n);
    for (std::size_t i = 0; i < pass.n; ++i) {
      t.sparsity += pass.r[i] * inv_n;
      if (supervised(target)) t.rationale += clamped_ce(pass.r[i], target->values[i], nullptr) * inv_n;
    }
  }
  t.total = t.label + hyper.lambda1 * t.rationale + hyper.lambda2 * t.sparsity;
  return t;
}

double loss(const ModelParams& params, const EncodedInput& input, bool label,
            const RationaleTarget* target, const Hyper& hyper) {
  return loss_terms(params, input, label, target, hyper).total;
}

double accumulate_gradient(const ModelParams& params, const EncodedInput& in, bool label,
                           const RationaleTarget* target, const Hyper& hyper,
                           ModelParams& gradient, bool full_input) {
  const Pass pass = run(params, in, full_input ? RationaleMode::Full : RationaleMode::Soft);
  check_target(target, pass.n);
  const std::size_t n = pass.n, d = pass.d, m = pass.m;
  const bool has_extractor =
      !full_input && params.architecture() == Architecture::Rationale;

  // Label term.
  double g_logit = 0.0;
  const double label_loss = clamped_ce(pass.prob, label ? 1.0 : 0.0, &g_logit);
  const auto u = params.predictor_weights();
  const auto u_bag = u.subspan(0, d), u_query = u.subspan(d, d);
  {
    auto du = gradient.predictor_weights();
    for (std::size_t k = 0; k < d; ++k) {
      du[k] += g_logit * pass.z[k];
      du[d + k] += g_logit * pass.qp[k];
    }
    gradient.predictor_bias() += g_logit;
  }
  const double denom = std::max(pass.mass, kMaskFloor);
  for (std::size_t i = 0; i < n; ++i) {
    axpy(g_logit * pass.r[i] / denom, u_bag, gradient.predictor_embedding(in.ids[in.doc_span.begin + i]));
  }
  for (std::size_t j = in.query_span.begin; j < in.query_span.end; ++j) {
    axpy(g_logit / static_cast<double>(m), u_query, gradient.predictor_embedding(in.ids[j]));
  }

  double rationale_loss = 0.0, sparsity = 0.0;
  if (n > 0) {
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      sparsity += pass.r[i] * inv_n;
      if (supervised(target)) rationale_loss += clamped_ce(pass.r[i], target->values[i], nullptr) * inv_n;
    }
  }
  const double total = label_loss + hyper.lambda1 * rationale_loss + hyper.lambda2 * sparsity;
  if (!has_extractor || n == 0) return total;

  // d(loss)/d(phi_i).
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> dphi(n, 0.0);
  const bool label_reaches_extractor = hyper.joint_optimized && g_logit != 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = pass.r[i];
    double dr = hyper.lambda2 * inv_n;
    if (label_reaches_extractor) {
      const auto e = params.predictor_embedding(in.ids[in.doc_span.begin + i]);
      double s = 0.0;
      if (pass.mass >= kMaskFloor) {
        for (std::size_t k = 0; k < d; ++k) s += u_bag[k] * (e[k] - pass.z[k]);
        s /= pass.mass;
      } else {
        s = dot(u_bag, e) / kMaskFloor;
      }
      dr += g_logit * s;
    }
    dphi[i] = dr * r * (1.0 - r);
    if (supervised(target)) {
      double g = 0.0;
      clamped_ce(r, target->values[i], &g);
      dphi[i] += hyper.lambda1 * inv_n * g;
    }
  }

  const auto wts = params.extractor_weights();
  const auto w_tok = wts.subspan(0, d), w_win = wts.subspan(d, d), w_int = wts.subspan(2 * d, d),
             w_q = wts.subspan(3 * d, d);
  auto dw = gradient.extractor_weights();
  std::vector<double> dqbar(d, 0.0);
  // coef[k]: total weight of document token k across all windows containing it.
  std::vector<double> coef(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double g = dphi[i];
    if (g == 0.0) continue;
    const auto e = params.extractor_embedding(in.ids[in.doc_span.begin + i]);
    const std::span<const double> win(pass.windows.data() + i * d, d);
    for (std::size_t k = 0; k < d; ++k) {
      dw[k] += g * e[k];
      dw[d + k] += g * win[k];
      dw[2 * d + k] += g * e[k] * pass.qbar[k];
      dw[3 * d + k] += g * pass.qbar[k];
      dqbar[k] += g * (w_int[k] * e[k] + w_q[k]);
    }
    gradient.extractor_bias() += g;
    auto de = gradient.extractor_embedding(in.ids[in.doc_span.begin + i]);
    for (std::size_t k = 0; k < d; ++k) de[k] += g * (w_tok[k] + w_int[k] * pass.qbar[k]);
    const double share = g / static_cast<double>(pass.hi[i] - pass.lo[i] + 1);
    coef[pass.lo[i]] += share;
    coef[pass.hi[i] + 1] -= share;
  }
  double running = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    running += coef[k];
    if (running != 0.0) axpy(running, w_win, gradient.extractor_embedding(in.ids[in.doc_span.begin + k]));
  }
  for (std::size_t j = in.query_span.begin; j < in.query_span.end; ++j) {
    axpy(1.0 / static_cast<double>(m), dqbar, gradient.extractor_embedding(in.ids[j]));
  }
  return total;
}

ModelParams grad(const ModelParams& params, const EncodedInput& input, bool label,
                 const RationaleTarget* target, const Hyper& hyper) {
  auto g = params.zeros_like();
  accumulate_gradient(params, input, label, target, hyper, g);
  return g;
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path,
                     const std::map<std::string, std::string>& metadata) {
  const std::size_t v = params.vocabulary().size(), d = params.embed_dim();
  auto tensor = [](std::vector<std::size_t> shape, std::span<const double> data) {
    nlohmann::ordered_json t;
    t["shape"] = shape;
    t["data"] = std::vector<double>(data.begin(), data.end());
    return t;
  };
  auto flat = [&](std::size_t begin, std::size_t count) {
    return params.values().subspan(begin, count);
  };
  nlohmann::ordered_json j;
  j["format"] = "advrat-checkpoint";
  j["version"] = 1;
  j["architecture"] = to_string(params.architecture());
  j["embed_dim"] = d;
  j["window_radius"] = params.window_radius();
  j["vocabulary"] = params.vocabulary().words();
  nlohmann::ordered_json tensors;
  std::size_t off = 0;
  tensors["extractor.embedding"] = tensor({v, d}, flat(off, v * d));
  off += v * d;
  tensors["extractor.weights"] = tensor({4, d}, flat(off, 4 * d));
  off += 4 * d;
  tensors["extractor.bias"] = tensor({1}, flat(off, 1));
  off += 1;
  tensors["predictor.embedding"] = tensor({v, d}, flat(off, v * d));
  off += v * d;
  tensors["predictor.weights"] = tensor({2, d}, flat(off, 2 * d));
  off += 2 * d;
  tensors["predictor.bias"] = tensor({1}, flat(off, 1));
  j["tensors"] = std::move(tensors);
  j["metadata"] = metadata;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << j.dump() << '\n';
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "' for reading");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("checkpoint '" + path.string() + "': " + e.what());
  }
  try {
    if (j.at("format") != "advrat-checkpoint" || j.at("version") != 1) {
      throw ValidationError("checkpoint '" + path.string() + "': unsupported format or version");
    }
    auto vocab = std::make_shared<Vocabulary>();
    const auto words = j.at("vocabulary").get<std::vector<std::string>>();
    for (std::size_t i = 0; i < words.size(); ++i) {
      if (vocab->add(words[i]) != i) {
        throw ValidationError("checkpoint '" + path.string() + "': vocabulary out of order");
      }
    }
    ModelParams p(architecture_from_string(j.at("architecture").get<std::string>()), vocab,
                  j.at("embed_dim").get<std::size_t>(), j.at("window_radius").get<std::size_t>());
    const std::size_t v = vocab->size(), d = p.embed_dim();
    const std::vector<std::pair<std::string, std::vector<std::size_t>>> layout = {
        {"extractor.embedding", {v, d}}, {"extractor.weights", {4, d}}, {"extractor.bias", {1}},
        {"predictor.embedding", {v, d}}, {"predictor.weights", {2, d}}, {"predictor.bias", {1}}};
    std::size_t off = 0;
    auto values = p.values();
    for (const auto& [name, shape] : layout) {
      const auto& t = j.at("tensors").at(name);
      if (t.at("shape").get<std::vector<std::size_t>>() != shape) {
        throw ValidationError("checkpoint '" + path.string() + "': tensor " + name + " has wrong shape");
      }
      const auto data = t.at("data").get<std::vector<double>>();
      std::size_t count = 1;
      for (auto s : shape) count *= s;
      if (data.size() != count) {
        throw ValidationError("checkpoint '" + path.string() + "': tensor " + name + " has wrong size");
      }
      std::copy(data.begin(), data.end(), values.begin() + static_cast<long>(off));
      off += count;
    }
    if (!p.all_finite()) throw ValidationError("checkpoint '" + path.string() + "': non-finite values");
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("checkpoint '" + path.string() + "': " + e.what());
  }
}

}  // namespace advrat
