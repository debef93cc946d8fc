#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace advrat {

using Tokens = std::vector<std::string>;
using Mask = std::vector<std::uint8_t>;

// True when `token` is non-empty, has no whitespace, and is already lowercase.
bool is_valid_token(std::string_view token);

// Token sequence plus the exclusive end offset of every sentence. The ends are
// strictly increasing and the last one equals tokens.size() (when non-empty),
// so they partition the document.
struct Document {
  Tokens tokens;
  std::vector<std::size_t> sentence_ends;

  std::size_t size() const { return tokens.size(); }
  std::size_t sentence_count() const { return sentence_ends.size(); }
  // Token offset at which sentence `k` starts; k == sentence_count() yields size().
  std::size_t sentence_start(std::size_t k) const;

  friend bool operator==(const Document&, const Document&) = default;
};

// Lowercases, splits punctuation into separate tokens, and records a sentence
// boundary after every run of `.`, `!` or `?`. Digit groups such as "3.5" or
// "1,000" stay whole, and "||" (the question/answer separator) is one token.
Document tokenize(std::string_view text);

// Sentence boundaries recomputed from an existing token sequence.
Document make_document(Tokens tokens);

// Tokens joined by single spaces. tokenize(join(t)) reproduces t.
std::string join(std::span<const std::string> tokens);

// A reading-comprehension record. Records produced by the attack pipeline also
// carry `attack_mask`; clean records leave it empty.
struct Instance {
  std::string id;
  Document document;
  Tokens query;
  bool label = false;
  std::optional<Mask> human_rationale;
  std::optional<Mask> attack_mask;

  bool is_attacked() const { return attack_mask.has_value(); }

  friend bool operator==(const Instance&, const Instance&) = default;
};

using Dataset = std::vector<Instance>;

// Throws ValidationError naming the instance id on any broken invariant.
void validate(const Instance& instance);

// Result of inserting an attack sentence into an instance's document.
struct AttackedInstance {
  std::string base_id;
  Document document;
  Tokens query;
  bool label = false;
  Mask attack_mask;
  std::size_t insertion_sentence_index = 0;
  std::optional<Mask> human_rationale;

  // Flattens into a dataset record with the given id.
  Instance to_instance(std::string id) const;

  friend bool operator==(const AttackedInstance&, const AttackedInstance&) = default;
};

// Tokens of `document` whose mask entry is 0, in order.
Tokens unmasked_tokens(const Tokens& document, const Mask& mask);

Dataset load_jsonl(const std::filesystem::path& path);
void save_jsonl(const Dataset& dataset, const std::filesystem::path& path);

// Serialization of a single record, exposed for tests and streaming callers.
std::string to_json_line(const Instance& instance);
Instance from_json_line(std::string_view line, std::size_t line_number = 1,
                        std::string_view source = "<string>");

inline constexpr std::string_view kClsToken = "[CLS]";
inline constexpr std::string_view kSepToken = "[SEP]";

// Half-open index range into ModelInput::tokens.
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool empty() const { return begin == end; }
  bool contains(std::size_t i) const { return i >= begin && i < end; }

  friend bool operator==(const Span&, const Span&) = default;
};

// [CLS] document [SEP] query [SEP].
struct ModelInput {
  Tokens tokens;
  Span doc_span;
  Span query_span;
};

// Throws ValidationError when the query is empty.
ModelInput build_input(const Document& document, const Tokens& query);
ModelInput build_input(const Instance& instance);
ModelInput build_input(const AttackedInstance& instance);

}  // namespace advrat
