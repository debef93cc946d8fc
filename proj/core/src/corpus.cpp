#include "advrat/corpus.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "advrat/errors.hpp"

namespace advrat {
namespace {

bool is_space(unsigned char c) { return c == ' ' || (c >= '\t' && c <= '\r'); }
bool is_digit(unsigned char c) { return c >= '0' && c <= '9'; }
bool is_alnum(unsigned char c) {
  return is_digit(c) || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}
bool is_terminator(std::string_view t) { return t == "." || t == "!" || t == "?"; }

char lower(unsigned char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c);
}

bool all_digits_or_separators(const std::string& word) {
  for (unsigned char c : word) {
    if (!is_digit(c) && c != '.' && c != ',') return false;
  }
  return !word.empty();
}

std::vector<std::size_t> sentence_ends_of(const Tokens& tokens) {
  std::vector<std::size_t> ends;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const bool next_is_terminator = i + 1 < tokens.size() && is_terminator(tokens[i + 1]);
    if (is_terminator(tokens[i]) && !next_is_terminator) ends.push_back(i + 1);
  }
  if (!tokens.empty() && (ends.empty() || ends.back() != tokens.size())) {
    ends.push_back(tokens.size());
  }
  return ends;
}

Mask mask_from_json(const nlohmann::json& value, std::string_view field, const std::string& id) {
  if (!value.is_array()) {
    throw ValidationError("instance '" + id + "': field '" + std::string(field) +
                          "' must be an array of 0/1");
  }
  Mask mask;
  mask.reserve(value.size());
  for (const auto& bit : value) {
    if (!bit.is_number_integer() || (bit.get<int>() != 0 && bit.get<int>() != 1)) {
      throw ValidationError("instance '" + id + "': field '" + std::string(field) +
                            "' must contain only 0 and 1");
    }
    mask.push_back(static_cast<std::uint8_t>(bit.get<int>()));
  }
  return mask;
}

}  // namespace

bool is_valid_token(std::string_view token) {
  if (token.empty()) return false;
  for (unsigned char c : token) {
    if (is_space(c) || (c >= 'A' && c <= 'Z')) return false;
  }
  return true;
}

std::size_t Document::sentence_start(std::size_t k) const {
  if (k == 0) return 0;
  return sentence_ends.at(k - 1);
}

Document tokenize(std::string_view text) {
  Tokens tokens;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) tokens.push_back(std::move(word));
    word.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (is_space(c)) {
      flush();
    } else if (is_alnum(c)) {
      word.push_back(lower(c));
    } else if ((c == '.' || c == ',') && all_digits_or_separators(word) && is_digit(word.back()) &&
               i + 1 < text.size() && is_digit(static_cast<unsigned char>(text[i + 1]))) {
      word.push_back(static_cast<char>(c));
    } else if (c == '|' && i + 1 < text.size() && text[i + 1] == '|') {
      flush();
      tokens.emplace_back("||");
      ++i;
    } else {
      flush();
      tokens.emplace_back(1, static_cast<char>(c));
    }
  }
  flush();
  return make_document(std::move(tokens));
}

Document make_document(Tokens tokens) {
  Document doc;
  doc.sentence_ends = sentence_ends_of(tokens);
  doc.tokens = std::move(tokens);
  return doc;
}

std::string join(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

void validate(const Instance& instance) {
  const auto& id = instance.id;
  if (id.empty()) throw ValidationError("instance with empty id");
  auto check_tokens = [&](const Tokens& tokens, std::string_view what) {
    for (const auto& t : tokens) {
      if (!is_valid_token(t)) {
        throw ValidationError("instance '" + id + "': invalid " + std::string(what) +
                              " token '" + t + "'");
      }
    }
  };
  check_tokens(instance.document.tokens, "document");
  check_tokens(instance.query, "query");

  const auto& ends = instance.document.sentence_ends;
  for (std::size_t k = 0; k < ends.size(); ++k) {
    if ((k == 0 && ends[k] == 0) || (k > 0 && ends[k] <= ends[k - 1])) {
      throw ValidationError("instance '" + id + "': sentence boundaries not strictly increasing");
    }
  }
  if (instance.document.size() > 0 && (ends.empty() || ends.back() != instance.document.size())) {
    throw ValidationError("instance '" + id + "': sentence boundaries do not cover the document");
  }
  if (instance.document.size() == 0 && !ends.empty()) {
    throw ValidationError("instance '" + id + "': empty document with sentence boundaries");
  }

  const auto n = instance.document.size();
  if (instance.human_rationale && instance.human_rationale->size() != n) {
    throw ValidationError("instance '" + id + "': rationale length " +
                          std::to_string(instance.human_rationale->size()) +
                          " != document length " + std::to_string(n));
  }
  if (instance.attack_mask) {
    const auto& mask = *instance.attack_mask;
    if (mask.size() != n) {
      throw ValidationError("instance '" + id + "': attack_mask length " +
                            std::to_string(mask.size()) + " != document length " +
                            std::to_string(n));
    }
    // Attack tokens form one contiguous span.
    std::size_t runs = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask[i] && (i == 0 || !mask[i - 1])) ++runs;
    }
    if (runs > 1) throw ValidationError("instance '" + id + "': attack_mask is not contiguous");
    if (instance.human_rationale) {
      for (std::size_t i = 0; i < n; ++i) {
        if (mask[i] && (*instance.human_rationale)[i]) {
          throw ValidationError("instance '" + id + "': human rationale covers an attack token");
        }
      }
    }
  }
}

Instance AttackedInstance::to_instance(std::string id) const {
  Instance out;
  out.id = std::move(id);
  out.document = document;
  out.query = query;
  out.label = label;
  out.human_rationale = human_rationale;
  out.attack_mask = attack_mask;
  return out;
}

Tokens unmasked_tokens(const Tokens& document, const Mask& mask) {
  Tokens out;
  for (std::size_t i = 0; i < document.size(); ++i) {
    if (!mask.at(i)) out.push_back(document[i]);
  }
  return out;
}

std::string to_json_line(const Instance& instance) {
  // ordered_json keeps the field order stable in the output file.
  nlohmann::ordered_json j;
  j["id"] = instance.id;
  j["document"] = join(instance.document.tokens);
  j["query"] = join(instance.query);
  j["label"] = instance.label;
  if (instance.human_rationale) j["rationale"] = *instance.human_rationale;
  if (instance.attack_mask) j["attack_mask"] = *instance.attack_mask;
  return j.dump();
}

Instance from_json_line(std::string_view line, std::size_t line_number, std::string_view source) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string(source), line_number, std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError(std::string(source), line_number, "record is not an object");
  for (const char* field : {"id", "document", "query", "label"}) {
    if (!j.contains(field)) {
      throw ParseError(std::string(source), line_number,
                       std::string("missing field '") + field + "'");
    }
  }
  if (!j["id"].is_string() || !j["document"].is_string() || !j["query"].is_string() ||
      !j["label"].is_boolean()) {
    throw ParseError(std::string(source), line_number, "field has the wrong type");
  }
  for (const auto& [key, _] : j.items()) {
    if (key != "id" && key != "document" && key != "query" && key != "label" &&
        key != "rationale" && key != "attack_mask") {
      throw ParseError(std::string(source), line_number, "unknown field '" + key + "'");
    }
  }
  Instance inst;
  inst.id = j["id"].get<std::string>();
  inst.document = tokenize(j["document"].get<std::string>());
  inst.query = tokenize(j["query"].get<std::string>()).tokens;
  inst.label = j["label"].get<bool>();
  if (j.contains("rationale") && !j["rationale"].is_null()) {
    inst.human_rationale = mask_from_json(j["rationale"], "rationale", inst.id);
  }
  if (j.contains("attack_mask") && !j["attack_mask"].is_null()) {
    inst.attack_mask = mask_from_json(j["attack_mask"], "attack_mask", inst.id);
  }
  validate(inst);
  return inst;
}

Dataset load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "' for reading");
  Dataset out;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(from_json_line(line, line_number, path.string()));
  }
  return out;
}

void save_jsonl(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  for (const auto& inst : dataset) out << to_json_line(inst) << '\n';
  if (!out) throw Error("write to '" + path.string() + "' failed");
}

ModelInput build_input(const Document& document, const Tokens& query) {
  if (query.empty()) throw ValidationError("build_input: empty query");
  ModelInput in;
  in.tokens.reserve(document.size() + query.size() + 3);
  in.tokens.emplace_back(kClsToken);
  in.tokens.insert(in.tokens.end(), document.tokens.begin(), document.tokens.end());
  in.doc_span = {1, 1 + document.size()};
  in.tokens.emplace_back(kSepToken);
  const auto q0 = in.tokens.size();
  in.tokens.insert(in.tokens.end(), query.begin(), query.end());
  in.query_span = {q0, q0 + query.size()};
  in.tokens.emplace_back(kSepToken);
  return in;
}

ModelInput build_input(const Instance& instance) {
  return build_input(instance.document, instance.query);
}

ModelInput build_input(const AttackedInstance& instance) {
  return build_input(instance.document, instance.query);
}

}  // namespace advrat
