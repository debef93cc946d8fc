#include "advrat/lexres.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cctype>
#include <limits>
#include <cmath>
#include <fstream>
#include <sstream>

#include "advrat/errors.hpp"

namespace advrat {
namespace {

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.emplace_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  return out;
}

std::string format_double(double v) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

constexpr std::array<std::string_view, 32> kSpelledNumbers = {
    "zero",     "one",     "two",     "three",   "four",    "five",     "six",
    "seven",    "eight",   "nine",    "ten",     "eleven",  "twelve",   "thirteen",
    "fourteen", "fifteen", "sixteen", "seventeen", "eighteen", "nineteen", "twenty",
    "thirty",   "forty",   "fifty",   "sixty",   "seventy", "eighty",   "ninety",
    "hundred",  "thousand", "million", "billion"};

}  // namespace

EmbeddingTable::EmbeddingTable(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw ValidationError("embedding dimension must be at least 1");
}

void EmbeddingTable::add(std::string word, std::span<const double> vector) {
  if (vector.size() != dim_) {
    throw ValidationError("embedding for '" + word + "' has dimension " +
                          std::to_string(vector.size()) + ", expected " + std::to_string(dim_));
  }
  if (index_.contains(word)) throw ValidationError("duplicate embedding for '" + word + "'");
  double norm2 = 0.0;
  for (double v : vector) {
    if (!std::isfinite(v)) throw ValidationError("non-finite embedding for '" + word + "'");
    norm2 += v * v;
  }
  if (norm2 == 0.0) throw ValidationError("zero-norm embedding for '" + word + "'");
  const double inv = 1.0 / std::sqrt(norm2);
  index_.emplace(word, words_.size());
  words_.push_back(std::move(word));
  raw_.insert(raw_.end(), vector.begin(), vector.end());
  for (double v : vector) unit_.push_back(v * inv);
}

bool EmbeddingTable::contains(std::string_view word) const {
  return index_.contains(std::string(word));
}

std::span<const double> EmbeddingTable::vector(std::string_view word) const {
  const auto it = index_.find(std::string(word));
  if (it == index_.end()) throw Error("word '" + std::string(word) + "' not in embedding table");
  return {raw_.data() + it->second * dim_, dim_};
}

double EmbeddingTable::cosine(std::string_view a, std::string_view b) const {
  const auto ia = index_.at(std::string(a));
  const auto ib = index_.at(std::string(b));
  double dot = 0.0;
  for (std::size_t k = 0; k < dim_; ++k) dot += unit_[ia * dim_ + k] * unit_[ib * dim_ + k];
  return dot;
}

// Cosines this close are ties; rounding in the normalised rows must not decide
// between mathematically equal candidates.
constexpr double kTieTolerance = 1e-12;

std::optional<std::string> EmbeddingTable::nearest_neighbor(
    std::string_view word, const std::function<bool(std::string_view)>& filter) const {
  const auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  const double* query = unit_.data() + it->second * dim_;
  std::vector<std::pair<std::size_t, double>> scored;
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (i == it->second) continue;
    if (filter && !filter(words_[i])) continue;
    double dot = 0.0;
    const double* row = unit_.data() + i * dim_;
    for (std::size_t k = 0; k < dim_; ++k) dot += query[k] * row[k];
    scored.emplace_back(i, dot);
    top = std::max(top, dot);
  }
  std::optional<std::size_t> best;
  for (const auto& [i, dot] : scored) {
    if (dot >= top - kTieTolerance && (!best || words_[i] < words_[*best])) best = i;
  }
  if (!best) return std::nullopt;
  return words_[*best];
}

void AntonymLexicon::add(const std::string& word, const std::string& antonym) {
  if (word == antonym) throw ValidationError("word '" + word + "' listed as its own antonym");
  auto& list = map_[word];
  if (std::find(list.begin(), list.end(), antonym) == list.end()) list.push_back(antonym);
}

std::optional<std::string> AntonymLexicon::antonym(std::string_view word) const {
  const auto it = map_.find(word);
  if (it == map_.end() || it->second.empty()) return std::nullopt;
  return it->second.front();
}

void PosLexicon::add_tag(const std::string& word, PosTag tag) { tags_[word].insert(tag); }

void PosLexicon::add_entity(const std::string& word) { entities_.insert(word); }

bool PosLexicon::has_tag(std::string_view word, PosTag tag) const {
  const auto it = tags_.find(word);
  return it != tags_.end() && it->second.contains(tag);
}

bool PosLexicon::is_entity(std::string_view word) const { return entities_.contains(word); }

std::string_view to_string(TokenClass c) {
  switch (c) {
    case TokenClass::Entity: return "entity";
    case TokenClass::Number: return "number";
    case TokenClass::Adjective: return "adjective";
    case TokenClass::Noun: return "noun";
    case TokenClass::Other: return "other";
  }
  return "other";
}

bool is_numeric(std::string_view word) {
  if (word.empty() || !std::isdigit(static_cast<unsigned char>(word.front())) ||
      !std::isdigit(static_cast<unsigned char>(word.back()))) {
    return false;
  }
  bool prev_sep = false;
  for (unsigned char c : word) {
    if (std::isdigit(c)) {
      prev_sep = false;
    } else if ((c == '.' || c == ',') && !prev_sep) {
      prev_sep = true;
    } else {
      return false;
    }
  }
  return true;
}

bool is_spelled_number(std::string_view word) {
  return std::find(kSpelledNumbers.begin(), kSpelledNumbers.end(), word) != kSpelledNumbers.end();
}

TokenClass classify(std::string_view word, const LexicalResources& resources) {
  if (is_numeric(word) || is_spelled_number(word)) return TokenClass::Number;
  if (resources.pos.is_entity(word)) return TokenClass::Entity;
  if (resources.pos.has_tag(word, PosTag::Adjective)) return TokenClass::Adjective;
  if (resources.pos.has_tag(word, PosTag::Noun)) return TokenClass::Noun;
  return TokenClass::Other;
}

std::optional<std::string> antonym(std::string_view word, const LexicalResources& resources) {
  return resources.antonyms.antonym(word);
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::optional<EmbeddingTable> table;
  std::string raw;
  std::size_t line_number = 0;
  std::vector<double> values;
  while (std::getline(in, raw)) {
    ++line_number;
    const auto line = strip_cr(raw);
    if (line.empty()) continue;
    auto fields = split(line, ' ');
    std::erase_if(fields, [](const std::string& f) { return f.empty(); });
    if (fields.size() < 2) throw ParseError(path.string(), line_number, "expected word and vector");
    values.clear();
    for (std::size_t i = 1; i < fields.size(); ++i) {
      double v = 0.0;
      const auto& f = fields[i];
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size()) {
        throw ParseError(path.string(), line_number, "bad number '" + f + "'");
      }
      values.push_back(v);
    }
    if (!table) table.emplace(values.size());
    if (values.size() != table->dim()) {
      throw ParseError(path.string(), line_number,
                       "expected " + std::to_string(table->dim()) + " components, got " +
                           std::to_string(values.size()));
    }
    try {
      table->add(fields[0], values);
    } catch (const ValidationError& e) {
      throw ParseError(path.string(), line_number, e.what());
    }
  }
  if (!table) throw ValidationError("embedding file '" + path.string() + "' is empty");
  return std::move(*table);
}

AntonymLexicon load_antonyms(const std::filesystem::path& path) {
  auto in = open_in(path);
  AntonymLexicon lexicon;
  std::string raw;
  std::size_t line_number = 0;
  while (std::getline(in, raw)) {
    ++line_number;
    const auto line = strip_cr(raw);
    if (line.empty()) continue;
    const auto fields = split(line, '\t');
    if (fields.size() < 2 || fields[0].empty()) {
      throw ParseError(path.string(), line_number, "expected word<TAB>antonym");
    }
    for (std::size_t i = 1; i < fields.size(); ++i) {
      if (fields[i].empty()) throw ParseError(path.string(), line_number, "empty antonym");
      try {
        lexicon.add(fields[0], fields[i]);
      } catch (const ValidationError& e) {
        throw ParseError(path.string(), line_number, e.what());
      }
    }
  }
  return lexicon;
}

PosLexicon load_pos(const std::filesystem::path& path) {
  auto in = open_in(path);
  PosLexicon lexicon;
  std::string raw;
  std::size_t line_number = 0;
  while (std::getline(in, raw)) {
    ++line_number;
    const auto line = strip_cr(raw);
    if (line.empty()) continue;
    const auto fields = split(line, '\t');
    if (fields.size() != 2 || fields[0].empty() || fields[1].empty()) {
      throw ParseError(path.string(), line_number, "expected word<TAB>TAG[,TAG...]");
    }
    for (const auto& tag : split(fields[1], ',')) {
      if (tag == "ADJ") {
        lexicon.add_tag(fields[0], PosTag::Adjective);
      } else if (tag == "NOUN") {
        lexicon.add_tag(fields[0], PosTag::Noun);
      } else if (tag == "VERB") {
        lexicon.add_tag(fields[0], PosTag::Verb);
      } else if (tag == "OTHER") {
        lexicon.add_tag(fields[0], PosTag::Other);
      } else if (tag == "ENTITY") {
        lexicon.add_entity(fields[0]);
      } else {
        throw ParseError(path.string(), line_number, "unknown tag '" + tag + "'");
      }
    }
  }
  return lexicon;
}

LexicalResources load_resources(const std::filesystem::path& embedding_path,
                                const std::filesystem::path& antonym_path,
                                const std::filesystem::path& pos_path) {
  return LexicalResources{load_embeddings(embedding_path), load_antonyms(antonym_path),
                          load_pos(pos_path)};
}

void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path) {
  auto out = open_out(path);
  for (const auto& word : table.words()) {
    out << word;
    for (double v : table.vector(word)) out << ' ' << format_double(v);
    out << '\n';
  }
}

void save_antonyms(const AntonymLexicon& lexicon, const std::filesystem::path& path) {
  auto out = open_out(path);
  for (const auto& [word, list] : lexicon.entries()) {
    out << word;
    for (const auto& a : list) out << '\t' << a;
    out << '\n';
  }
}

void save_pos(const PosLexicon& lexicon, const std::filesystem::path& path) {
  auto out = open_out(path);
  std::map<std::string, std::vector<std::string>> lines;
  for (const auto& [word, tags] : lexicon.tags()) {
    for (auto tag : tags) {
      switch (tag) {
        case PosTag::Adjective: lines[word].push_back("ADJ"); break;
        case PosTag::Noun: lines[word].push_back("NOUN"); break;
        case PosTag::Verb: lines[word].push_back("VERB"); break;
        case PosTag::Other: lines[word].push_back("OTHER"); break;
      }
    }
  }
  for (const auto& word : lexicon.entities()) lines[word].push_back("ENTITY");
  for (const auto& [word, tags] : lines) {
    out << word << '\t';
    for (std::size_t i = 0; i < tags.size(); ++i) out << (i ? "," : "") << tags[i];
    out << '\n';
  }
}

ResourcePaths ResourcePaths::in_directory(const std::filesystem::path& dir) {
  return {dir / "embeddings.txt", dir / "antonyms.tsv", dir / "pos.tsv"};
}

LexicalResources load_resources(const ResourcePaths& paths) {
  return load_resources(paths.embeddings, paths.antonyms, paths.pos);
}

void save_resources(const LexicalResources& resources, const ResourcePaths& paths) {
  save_embeddings(resources.embeddings, paths.embeddings);
  save_antonyms(resources.antonyms, paths.antonyms);
  save_pos(resources.pos, paths.pos);
}

}  // namespace advrat
