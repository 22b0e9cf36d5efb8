#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace anchor::text {

// Lowercased word with surrounding punctuation removed. Never empty, never
// contains whitespace.
class Token {
 public:
  explicit Token(std::string surface);
  const std::string& surface() const { return surface_; }
  bool operator==(const Token&) const = default;

 private:
  std::string surface_;
};

// Whitespace split, strip leading/trailing .,!?;:"'() and lowercase.
// Throws EmptyInputError if nothing survives.
std::vector<Token> tokenize(std::string_view text);

std::string join(std::span<const Token> tokens);

// Word vectors of a fixed dimension. Words missing from the table get a
// deterministic unit vector derived from (fallback_seed, word).
class EmbeddingTable {
 public:
  explicit EmbeddingTable(int dim = 200, std::uint64_t fallback_seed = 17);

  int dim() const { return dim_; }
  std::uint64_t fallback_seed() const { return fallback_seed_; }
  std::size_t size() const { return words_.size(); }

  void insert(const std::string& word, std::vector<float> vector);
  bool contains(const std::string& word) const { return index_.count(word) != 0; }
  const std::vector<float>* find(const std::string& word) const;
  // Stored vector, or the fallback for out-of-vocabulary words.
  std::vector<float> lookup(const std::string& word) const;
  std::vector<float> fallback(const std::string& word) const;

  // Words in insertion order.
  const std::vector<std::string>& words() const { return words_; }

 private:
  int dim_;
  std::uint64_t fallback_seed_;
  std::vector<std::string> words_;
  std::vector<std::vector<float>> vectors_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Plain-text word2vec: header "V D", then V lines "word v1 ... vD".
EmbeddingTable load_word2vec_text(const std::filesystem::path& path,
                                  std::uint64_t fallback_seed = 17);
EmbeddingTable parse_word2vec_text(std::string_view contents, std::uint64_t fallback_seed = 17);
// Values printed with 9 significant digits, which round-trips float32 exactly.
void save_word2vec_text(const EmbeddingTable& table, const std::filesystem::path& path);

struct EmbeddedSentence {
  std::vector<Token> tokens;
  std::vector<std::vector<float>> vectors;  // aligned 1:1 with tokens
};

EmbeddedSentence embed(std::span<const Token> tokens, const EmbeddingTable& table);

}  // namespace anchor::text
