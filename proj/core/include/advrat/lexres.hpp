#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace advrat {

// Word vectors with a fixed dimension. Vectors are stored row-major alongside
// their unit-normalised copies so cosine similarity is one dot product.
class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dim = 1);

  // Throws ValidationError on dimension mismatch, zero norm, non-finite
  // components, or a duplicate word.
  void add(std::string word, std::span<const double> vector);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return words_.size(); }
  bool contains(std::string_view word) const;
  const std::vector<std::string>& words() const { return words_; }
  std::span<const double> vector(std::string_view word) const;

  // Cosine similarity of two vocabulary words.
  double cosine(std::string_view a, std::string_view b) const;

  // Highest-cosine vocabulary word other than `word` that passes `filter`.
  // Ties (cosines within 1e-12) go to the lexicographically smallest candidate. Returns nullopt when
  // `word` is not in the vocabulary or no candidate passes.
  std::optional<std::string> nearest_neighbor(
      std::string_view word,
      const std::function<bool(std::string_view)>& filter = {}) const;

 private:
  std::size_t dim_;
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<double> raw_;
  std::vector<double> unit_;
};

// word -> ordered antonyms; the first entry is the preferred antonym.
class AntonymLexicon {
 public:
  // Appends `antonym` to the list for `word` (ignored when already present).
  // Throws ValidationError when word == antonym.
  void add(const std::string& word, const std::string& antonym);

  std::optional<std::string> antonym(std::string_view word) const;
  std::size_t size() const { return map_.size(); }
  const std::map<std::string, std::vector<std::string>, std::less<>>& entries() const {
    return map_;
  }

 private:
  std::map<std::string, std::vector<std::string>, std::less<>> map_;
};

enum class PosTag { Adjective, Noun, Verb, Other };

// Part-of-speech tags per word plus the set of words known to be parts of
// named entities.
class PosLexicon {
 public:
  void add_tag(const std::string& word, PosTag tag);
  void add_entity(const std::string& word);

  bool has_tag(std::string_view word, PosTag tag) const;
  bool is_entity(std::string_view word) const;
  const std::map<std::string, std::set<PosTag>, std::less<>>& tags() const { return tags_; }
  const std::set<std::string, std::less<>>& entities() const { return entities_; }

 private:
  std::map<std::string, std::set<PosTag>, std::less<>> tags_;
  std::set<std::string, std::less<>> entities_;
};

enum class TokenClass { Entity, Number, Adjective, Noun, Other };

std::string_view to_string(TokenClass c);

struct LexicalResources {
  EmbeddingTable embeddings;
  AntonymLexicon antonyms;
  PosLexicon pos;
};

// Integer/decimal digit pattern ("2000", "3.5", "1,000").
bool is_numeric(std::string_view word);
// "one" ... "twenty", tens, "hundred", "thousand", "million", "billion".
bool is_spelled_number(std::string_view word);

// Number, then Entity, then Adjective (wins over Noun), then Noun, else Other.
TokenClass classify(std::string_view word, const LexicalResources& resources);

std::optional<std::string> antonym(std::string_view word, const LexicalResources& resources);

// GloVe text format: "word v1 ... vd" per line, single spaces.
EmbeddingTable load_embeddings(const std::filesystem::path& path);
// TSV: "word<TAB>antonym[<TAB>antonym...]"; repeated words append in order.
AntonymLexicon load_antonyms(const std::filesystem::path& path);
// TSV: "word<TAB>TAG[,TAG...]" with tags ADJ, NOUN, VERB, OTHER, ENTITY.
PosLexicon load_pos(const std::filesystem::path& path);

LexicalResources load_resources(const std::filesystem::path& embedding_path,
                                const std::filesystem::path& antonym_path,
                                const std::filesystem::path& pos_path);

// Writers producing the formats read above.
void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path);
void save_antonyms(const AntonymLexicon& lexicon, const std::filesystem::path& path);
void save_pos(const PosLexicon& lexicon, const std::filesystem::path& path);

// Conventional file names inside a resource directory.
struct ResourcePaths {
  std::filesystem::path embeddings;
  std::filesystem::path antonyms;
  std::filesystem::path pos;

  static ResourcePaths in_directory(const std::filesystem::path& dir);
};

LexicalResources load_resources(const ResourcePaths& paths);
void save_resources(const LexicalResources& resources, const ResourcePaths& paths);

}  // namespace advrat
