#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace slt {

// Bijective token <-> id map. Ids are dense in [0, size()).
class Vocabulary {
 public:
  Vocabulary() = default;
  // `tokens[i]` gets id i. Throws VocabularyError on duplicates or empty tokens.
  explicit Vocabulary(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  bool contains(const std::string& token) const { return ids_.count(token) != 0; }
  // Throws VocabularyError for unknown tokens unless `fallback` is given.
  std::size_t id(const std::string& token) const;
  std::size_t id_or(const std::string& token, std::size_t fallback) const;
  const std::string& token(std::size_t id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<std::size_t> encode(std::span<const std::string> tokens) const;
  std::vector<std::string> decode(std::span<const std::size_t> ids) const;

  // JSON object {"token": id, ...}; ids must cover [0, n) exactly once.
  std::string to_json() const;
  static Vocabulary from_json(const std::string& text);
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, std::size_t> ids_;
};

// Splits on ASCII whitespace.
std::vector<std::string> split_words(const std::string& text);
std::string join_words(std::span<const std::string> words);

}  // namespace slt
