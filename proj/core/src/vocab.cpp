#include "slt/vocab.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "slt/error.hpp"

namespace slt {

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i].empty()) throw VocabularyError("vocabulary: empty token at id " + std::to_string(i));
    if (!ids_.emplace(tokens_[i], i).second) throw VocabularyError("vocabulary: duplicate token '" + tokens_[i] + "'");
  }
}

std::size_t Vocabulary::id(const std::string& token) const {
  auto it = ids_.find(token);
  if (it == ids_.end()) throw VocabularyError("vocabulary: unknown token '" + token + "'");
  return it->second;
}

std::size_t Vocabulary::id_or(const std::string& token, std::size_t fallback) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? fallback : it->second;
}

const std::string& Vocabulary::token(std::size_t id) const {
  if (id >= tokens_.size()) {
    throw VocabularyError("vocabulary: id " + std::to_string(id) + " out of range " + std::to_string(tokens_.size()));
  }
  return tokens_[id];
}

std::vector<std::size_t> Vocabulary::encode(std::span<const std::string> tokens) const {
  std::vector<std::size_t> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

std::vector<std::string> Vocabulary::decode(std::span<const std::size_t> ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (auto i : ids) out.push_back(token(i));
  return out;
}

std::string Vocabulary::to_json() const {
  // Written in id order so the file diffs cleanly.
  std::ostringstream os;
  os << "{\n";
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    os << "  " << nlohmann::json(tokens_[i]).dump() << ": " << i << (i + 1 < tokens_.size() ? ",\n" : "\n");
  }
  os << "}\n";
  return os.str();
}

Vocabulary Vocabulary::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("vocabulary: ") + e.what(), e.byte);
  }
  if (!j.is_object()) throw VocabularyError("vocabulary: expected a JSON object");
  std::vector<std::string> tokens(j.size());
  std::vector<bool> seen(j.size(), false);
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!it.value().is_number_unsigned()) throw VocabularyError("vocabulary: id of '" + it.key() + "' is not an unsigned integer");
    const auto id = it.value().get<std::size_t>();
    if (id >= tokens.size() || seen[id]) {
      throw VocabularyError("vocabulary: ids must cover 0.." + std::to_string(tokens.size() - 1) + " exactly once");
    }
    seen[id] = true;
    tokens[id] = it.key();
  }
  return Vocabulary(std::move(tokens));
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << to_json();
  if (!out) throw IoError("write failed: " + path);
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::vector<std::string> split_words(const std::string& text) {
  std::istringstream is(text);
  std::vector<std::string> out;
  for (std::string w; is >> w;) out.push_back(w);
  return out;
}

std::string join_words(std::span<const std::string> words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += ' ';
    out += words[i];
  }
  return out;
}

}  // namespace slt
