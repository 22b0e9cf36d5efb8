#include "anchor/text/frontend.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "anchor/core/errors.hpp"
#include "anchor/core/random.hpp"

namespace anchor::text {
namespace {

constexpr std::string_view kStripChars = ".,!?;:\"'()";

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    const std::size_t start = i;
    while (i < s.size() && !is_space(s[i])) ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

float parse_float(std::string_view field, std::size_t line) {
  float v = 0.0f;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw FormatError("not a decimal number: '" + std::string(field) + "'", line);
  }
  return v;
}

long parse_count(std::string_view field, std::size_t line) {
  long v = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || v < 0) {
    throw FormatError("bad header count '" + std::string(field) + "'", line);
  }
  return v;
}

}  // namespace

Token::Token(std::string surface) : surface_(std::move(surface)) {
  if (surface_.empty()) throw EmptyInputError("empty token");
  for (char c : surface_) {
    if (is_space(c)) throw InvalidInputError("token contains whitespace: '" + surface_ + "'");
  }
}

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  for (std::string_view word : split_ws(text)) {
    const std::size_t first = word.find_first_not_of(kStripChars);
    if (first == std::string_view::npos) continue;
    const std::size_t last = word.find_last_not_of(kStripChars);
    std::string s(word.substr(first, last - first + 1));
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    tokens.emplace_back(std::move(s));
  }
  if (tokens.empty()) throw EmptyInputError("sentence has no tokens: '" + std::string(text) + "'");
  return tokens;
}

std::string join(std::span<const Token> tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t.surface();
  }
  return out;
}

EmbeddingTable::EmbeddingTable(int dim, std::uint64_t fallback_seed)
    : dim_(dim), fallback_seed_(fallback_seed) {
  if (dim < 1) throw ConfigError("embedding dimension must be >= 1");
}

void EmbeddingTable::insert(const std::string& word, std::vector<float> vector) {
  if (static_cast<int>(vector.size()) != dim_) {
    throw ShapeError("vector for '" + word + "' has " + std::to_string(vector.size()) +
                     " values, table dim is " + std::to_string(dim_));
  }
  auto it = index_.find(word);
  if (it != index_.end()) {
    vectors_[it->second] = std::move(vector);
    return;
  }
  index_.emplace(word, words_.size());
  words_.push_back(word);
  vectors_.push_back(std::move(vector));
}

const std::vector<float>* EmbeddingTable::find(const std::string& word) const {
  auto it = index_.find(word);
  return it == index_.end() ? nullptr : &vectors_[it->second];
}

std::vector<float> EmbeddingTable::lookup(const std::string& word) const {
  if (const auto* v = find(word)) return *v;
  return fallback(word);
}

std::vector<float> EmbeddingTable::fallback(const std::string& word) const {
  core::Rng rng(core::mix_seed(fallback_seed_, core::fnv1a(word)));
  std::vector<double> g(static_cast<std::size_t>(dim_));
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (auto& v : g) {
      v = rng.normal();
      norm2 += v * v;
    }
  } while (norm2 == 0.0);
  const double inv = 1.0 / std::sqrt(norm2);
  std::vector<float> out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = static_cast<float>(g[i] * inv);
  return out;
}

EmbeddingTable parse_word2vec_text(std::string_view contents, std::uint64_t fallback_seed) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  auto next_line = [&](std::string_view& line) {
    if (pos >= contents.size()) return false;
    std::size_t end = contents.find('\n', pos);
    if (end == std::string_view::npos) end = contents.size();
    line = contents.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = end + 1;
    ++line_no;
    return true;
  };

  std::string_view line;
  if (!next_line(line)) throw FormatError("empty embedding file", 1);
  const auto header = split_ws(line);
  if (header.size() != 2) throw FormatError("header must be 'V D'", line_no);
  const long vocab = parse_count(header[0], line_no);
  const long dim = parse_count(header[1], line_no);
  if (dim < 1) throw FormatError("dimension must be >= 1", line_no);

  EmbeddingTable table(static_cast<int>(dim), fallback_seed);
  long rows = 0;
  while (next_line(line)) {
    const auto fields = split_ws(line);
    if (fields.empty()) continue;
    if (rows == vocab) {
      throw FormatError("more rows than the declared vocabulary of " + std::to_string(vocab),
                        line_no);
    }
    if (static_cast<long>(fields.size()) - 1 != dim) {
      throw FormatError("row for '" + std::string(fields[0]) + "' has " +
                            std::to_string(fields.size() - 1) + " values, expected " +
                            std::to_string(dim),
                        line_no);
    }
    std::vector<float> v(static_cast<std::size_t>(dim));
    for (long k = 0; k < dim; ++k) v[k] = parse_float(fields[k + 1], line_no);
    const std::string word(fields[0]);
    if (table.contains(word)) throw FormatError("duplicate word '" + word + "'", line_no);
    table.insert(word, std::move(v));
    ++rows;
  }
  if (rows != vocab) {
    throw FormatError("header declares " + std::to_string(vocab) + " words but body has " +
                          std::to_string(rows),
                      line_no);
  }
  return table;
}

EmbeddingTable load_word2vec_text(const std::filesystem::path& path, std::uint64_t fallback_seed) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open embedding file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_word2vec_text(ss.str(), fallback_seed);
}

void save_word2vec_text(const EmbeddingTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write embedding file " + path.string());
  out << table.size() << ' ' << table.dim() << '\n';
  char buf[32];
  for (const auto& word : table.words()) {
    out << word;
    for (float v : *table.find(word)) {
      std::snprintf(buf, sizeof buf, " %.9g", static_cast<double>(v));
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

EmbeddedSentence embed(std::span<const Token> tokens, const EmbeddingTable& table) {
  if (tokens.empty()) throw EmptyInputError("cannot embed an empty token list");
  EmbeddedSentence out;
  out.tokens.assign(tokens.begin(), tokens.end());
  out.vectors.reserve(tokens.size());
  for (const auto& t : tokens) out.vectors.push_back(table.lookup(t.surface()));
  return out;
}

}  // namespace anchor::text
