#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "anchor/core/types.hpp"
#include "anchor/text/frontend.hpp"

namespace anchor::oracle {

inline constexpr int kNumMouthPatterns = 8;

// Word -> AU+PS keyframes (normalized units). Words without an explicit entry
// are assigned one of the canonical mouth patterns by a seeded hash.
class VisemeTable {
 public:
  explicit VisemeTable(std::uint64_t seed = 7, int frames_per_word = 4);

  std::uint64_t seed() const { return seed_; }
  int frames_per_word() const { return frames_per_word_; }

  void set_entry(const std::string& word, std::vector<core::AUPSVector> keyframes);
  int pattern_of(const std::string& word) const;
  std::vector<core::AUPSVector> keyframes(const std::string& word) const;

  // Onset, peak, release keyframes for each canonical pattern.
  static const std::array<std::vector<core::AUPSVector>, kNumMouthPatterns>& canonical_patterns();

 private:
  std::uint64_t seed_;
  int frames_per_word_;
  std::map<std::string, std::vector<core::AUPSVector>> entries_;
};

// Keyframes linearly interpolated to frames_per_word frames. Frame i samples
// keyframe position i * (K - 1) / (F - 1).
std::vector<core::AUPSVector> word_to_aups(const std::string& word, const VisemeTable& table);

// Concatenation of word_to_aups over the tokens.
std::vector<core::AUPSVector> sentence_to_aups(std::span<const text::Token> tokens,
                                               const VisemeTable& table);

}  // namespace anchor::oracle
