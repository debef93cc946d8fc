#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "advrat/corpus.hpp"
#include "advrat/lexres.hpp"
#include "advrat/rng.hpp"

namespace advrat {

// Standard: the predictor alone on the full input (rationale fixed at 1).
// Rationale: extractor followed by the masked predictor.
enum class Architecture { Standard, Rationale };

std::string_view to_string(Architecture arch);
Architecture architecture_from_string(std::string_view name);

// Token -> id map shared by both model components. Ids 0..2 are reserved for
// the unknown token and the two sentinels.
class Vocabulary {
 public:
  static constexpr std::size_t kUnk = 0;
  static constexpr std::size_t kCls = 1;
  static constexpr std::size_t kSep = 2;
  static constexpr std::string_view kUnkToken = "[UNK]";

  Vocabulary();

  std::size_t add(std::string_view word);
  // Unknown words map to kUnk.
  std::size_t id(std::string_view word) const;
  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> ids_;
};

// Every token of the dataset (documents and queries) plus, when given, every
// word the resources know about, in first-seen order.
Vocabulary build_vocabulary(const Dataset& dataset, const LexicalResources* resources = nullptr);

struct Hyper {
  double lambda1 = 1.0;  // rationale supervision weight
  double lambda2 = 0.0;  // sparsity weight
  double learning_rate = 1e-2;
  std::size_t window_radius = 2;
  std::size_t embed_dim = 16;
  bool joint_optimized = true;
  std::size_t min_epochs = 3;
  std::size_t max_epochs = 8;
  std::size_t patience = 5;
  double eval_interval = 0.2;  // fraction of an epoch between validations
  std::size_t pretrain_epochs = 1;
  std::size_t batch_size = 8;
  std::size_t grad_accumulation = 1;
  double init_scale = 0.1;
  double extractor_bias_init = 0.0;
  std::uint64_t seed = 0;

  // Throws ConfigError naming the offending field.
  void validate() const;
};

// All trainable values in one flat buffer:
//   extractor: embeddings [V x d], scoring weights [4d], bias [1]
//   predictor: embeddings [V x d], readout weights [2d], bias [1]
// The extractor block precedes the predictor block, so gradient buffers and
// optimiser state can be sliced per component.
class ModelParams {
 public:
  ModelParams(Architecture arch, std::shared_ptr<const Vocabulary> vocab, std::size_t embed_dim,
              std::size_t window_radius);

  // Gaussian init with standard deviation `scale`; extractor bias set to
  // `extractor_bias`.
  static ModelParams initialized(Architecture arch, std::shared_ptr<const Vocabulary> vocab,
                                 const Hyper& hyper, Rng& rng);

  // Zero-valued buffer with the same layout.
  ModelParams zeros_like() const;

  Architecture architecture() const { return arch_; }
  const Vocabulary& vocabulary() const { return *vocab_; }
  const std::shared_ptr<const Vocabulary>& vocabulary_ptr() const { return vocab_; }
  std::size_t embed_dim() const { return dim_; }
  std::size_t window_radius() const { return window_; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::span<double> extractor_block() { return {values_.data(), predictor_offset()}; }
  std::span<const double> extractor_block() const { return {values_.data(), predictor_offset()}; }
  std::span<double> predictor_block() {
    return {values_.data() + predictor_offset(), values_.size() - predictor_offset()};
  }
  std::span<const double> predictor_block() const {
    return {values_.data() + predictor_offset(), values_.size() - predictor_offset()};
  }

  std::span<double> extractor_embedding(std::size_t id) { return {ptr(ext_emb_ + id * dim_), dim_}; }
  std::span<const double> extractor_embedding(std::size_t id) const {
    return {ptr(ext_emb_ + id * dim_), dim_};
  }
  // [token | window mean | token * query mean | query mean], each of size d.
  std::span<double> extractor_weights() { return {ptr(ext_w_), 4 * dim_}; }
  std::span<const double> extractor_weights() const { return {ptr(ext_w_), 4 * dim_}; }
  double& extractor_bias() { return values_[ext_b_]; }
  double extractor_bias() const { return values_[ext_b_]; }

  std::span<double> predictor_embedding(std::size_t id) { return {ptr(pred_emb_ + id * dim_), dim_}; }
  std::span<const double> predictor_embedding(std::size_t id) const {
    return {ptr(pred_emb_ + id * dim_), dim_};
  }
  // [masked bag | query mean], each of size d.
  std::span<double> predictor_weights() { return {ptr(pred_u_), 2 * dim_}; }
  std::span<const double> predictor_weights() const { return {ptr(pred_u_), 2 * dim_}; }
  double& predictor_bias() { return values_[pred_c_]; }
  double predictor_bias() const { return values_[pred_c_]; }

  bool all_finite() const;

 private:
  double* ptr(std::size_t offset) { return values_.data() + offset; }
  const double* ptr(std::size_t offset) const { return values_.data() + offset; }
  std::size_t predictor_offset() const { return pred_emb_; }

  Architecture arch_;
  std::shared_ptr<const Vocabulary> vocab_;
  std::size_t dim_;
  std::size_t window_;
  std::size_t ext_emb_ = 0, ext_w_ = 0, ext_b_ = 0, pred_emb_ = 0, pred_u_ = 0, pred_c_ = 0;
  std::vector<double> values_;
};

// ModelInput mapped to vocabulary ids.
struct EncodedInput {
  std::vector<std::size_t> ids;
  Span doc_span;
  Span query_span;
};

EncodedInput encode(const ModelInput& input, const Vocabulary& vocab);
EncodedInput encode(const Instance& instance, const Vocabulary& vocab);

enum class TargetOrigin { Human, NonAttack, None };

std::string_view to_string(TargetOrigin origin);

// Supervision for the extractor over document tokens.
struct RationaleTarget {
  Mask values;
  TargetOrigin origin = TargetOrigin::None;
};

inline constexpr double kMaskFloor = 1e-8;
inline constexpr double kProbClamp = 1e-12;

struct ForwardTrace {
  // One value per input position; query and sentinel positions are exactly 1.
  std::vector<double> rationale;
  double prob = 0.5;  // P(label = true)

  std::span<const double> document_rationale(const Span& doc) const {
    return {rationale.data() + doc.begin, doc.size()};
  }
};

// Soft rationale over all input positions (1 outside the document, and 1
// everywhere for the Standard architecture).
std::vector<double> extract(const ModelParams& params, const EncodedInput& input);
// Rationale logits for document positions only.
std::vector<double> extractor_logits(const ModelParams& params, const EncodedInput& input);

// P(label = true) given a rationale over all input positions.
double mask_and_predict(const ModelParams& params, const EncodedInput& input,
                        std::span<const double> rationale);

ForwardTrace forward(const ModelParams& params, const EncodedInput& input);
// Rationale thresholded at 0.5 (inclusive) before prediction.
ForwardTrace forward_hard(const ModelParams& params, const EncodedInput& input);

struct LossTerms {
  double label = 0.0;
  double rationale = 0.0;  // mean CE over document tokens (0 without a target)
  double sparsity = 0.0;   // mean soft rationale over document tokens
  double total = 0.0;
};

LossTerms loss_terms(const ModelParams& params, const EncodedInput& input, bool label,
                     const RationaleTarget* target, const Hyper& hyper);

double loss(const ModelParams& params, const EncodedInput& input, bool label,
            const RationaleTarget* target, const Hyper& hyper);

// Adds d(total loss)/d(params) into `gradient` (same layout as `params`) and
// returns the loss. With joint_optimized == false the label term is blocked
// from reaching the extractor. `full_input` forces the rationale to 1, which
// is how the predictor is pretrained.
double accumulate_gradient(const ModelParams& params, const EncodedInput& input, bool label,
                           const RationaleTarget* target, const Hyper& hyper,
                           ModelParams& gradient, bool full_input = false);

ModelParams grad(const ModelParams& params, const EncodedInput& input, bool label,
                 const RationaleTarget* target, const Hyper& hyper);

// JSON tensor dump; see docs/checkpoint.md.
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path,
                     const std::map<std::string, std::string>& metadata = {});
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace advrat
