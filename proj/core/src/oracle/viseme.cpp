#include "anchor/oracle/viseme.hpp"

#include <utility>

#include "anchor/core/errors.hpp"
#include "anchor/core/random.hpp"

namespace anchor::oracle {
namespace {

using core::AUPSVector;

struct PatternPeak {
  std::vector<std::pair<std::size_t, double>> au;  // (AU index, normalized intensity)
  std::array<double, 3> pose;                      // normalized pitch, yaw, roll
};

// Onset / peak / release scaling of the peak configuration.
constexpr std::array<double, 3> kAUEnvelope = {0.3, 1.0, 0.5};
constexpr std::array<double, 3> kPoseEnvelope = {0.5, 1.0, 0.75};

std::array<std::vector<AUPSVector>, kNumMouthPatterns> build_patterns() {
  // Indices follow core::kAUNames.
  const std::array<PatternPeak, kNumMouthPatterns> peaks = {{
      {{{13, 0.6}, {11, 0.5}, {9, 0.3}}, {0.05, 0.0, 0.0}},              // lips pressed
      {{{14, 0.9}, {15, 0.9}, {3, 0.3}}, {-0.08, 0.06, 0.0}},            // wide open
      {{{8, 0.7}, {12, 0.6}, {14, 0.5}, {15, 0.2}, {4, 0.3}}, {0.0, -0.1, 0.0}},  // spread
      {{{14, 0.45}, {15, 0.35}, {13, 0.6}, {11, 0.2}}, {0.0, 0.0, 0.1}},  // rounded
      {{{7, 0.6}, {14, 0.3}, {15, 0.1}, {6, 0.2}}, {0.06, 0.0, -0.08}},  // lip to teeth
      {{{8, 0.9}, {14, 0.7}, {15, 0.6}, {4, 0.6}}, {0.0, 0.12, 0.0}},    // open smile
      {{{14, 0.6}, {15, 0.5}, {0, 0.6}, {1, 0.5}}, {-0.05, 0.0, 0.06}},  // open, brows up
      {{{16, 0.9}, {2, 0.4}, {10, 0.3}, {14, 0.2}, {15, 0.15}}, {0.0, -0.06, -0.1}},  // blink
  }};
  std::array<std::vector<AUPSVector>, kNumMouthPatterns> out;
  for (int p = 0; p < kNumMouthPatterns; ++p) {
    for (std::size_t k = 0; k < kAUEnvelope.size(); ++k) {
      AUPSVector v = AUPSVector::zeros(true);
      for (const auto& [idx, value] : peaks[p].au) v.au[idx] = kAUEnvelope[k] * value;
      for (std::size_t j = 0; j < 3; ++j) v.pose[j] = kPoseEnvelope[k] * peaks[p].pose[j];
      out[p].push_back(v);
    }
  }
  return out;
}

AUPSVector lerp(const AUPSVector& a, const AUPSVector& b, double t) {
  AUPSVector v = AUPSVector::zeros(true);
  for (std::size_t i = 0; i < core::kNumAU; ++i) v.au[i] = a.au[i] + t * (b.au[i] - a.au[i]);
  for (std::size_t i = 0; i < core::kNumPose; ++i) {
    v.pose[i] = a.pose[i] + t * (b.pose[i] - a.pose[i]);
  }
  return v;
}

}  // namespace

VisemeTable::VisemeTable(std::uint64_t seed, int frames_per_word)
    : seed_(seed), frames_per_word_(frames_per_word) {
  if (frames_per_word < 1) throw ConfigError("frames_per_word must be >= 1");
}

const std::array<std::vector<AUPSVector>, kNumMouthPatterns>& VisemeTable::canonical_patterns() {
  static const auto patterns = build_patterns();
  return patterns;
}

void VisemeTable::set_entry(const std::string& word, std::vector<AUPSVector> keyframes) {
  if (keyframes.empty()) throw EmptyInputError("viseme entry for '" + word + "' has no keyframes");
  for (const auto& k : keyframes) {
    if (!k.normalized) throw ContractError("viseme keyframes must be normalized");
    k.validate();
  }
  entries_[word] = std::move(keyframes);
}

int VisemeTable::pattern_of(const std::string& word) const {
  return static_cast<int>(core::mix_seed(seed_, core::fnv1a(word)) % kNumMouthPatterns);
}

std::vector<AUPSVector> VisemeTable::keyframes(const std::string& word) const {
  auto it = entries_.find(word);
  if (it != entries_.end()) return it->second;
  return canonical_patterns()[static_cast<std::size_t>(pattern_of(word))];
}

std::vector<AUPSVector> word_to_aups(const std::string& word, const VisemeTable& table) {
  if (word.empty()) throw EmptyInputError("word_to_aups needs a nonempty word");
  const auto keys = table.keyframes(word);
  const int frames = table.frames_per_word();
  const double last = static_cast<double>(keys.size() - 1);
  std::vector<AUPSVector> out;
  out.reserve(static_cast<std::size_t>(frames));
  for (int i = 0; i < frames; ++i) {
    const double pos = frames == 1 ? 0.0 : last * i / (frames - 1);
    const auto lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= keys.size()) {
      out.push_back(keys.back());
    } else {
      out.push_back(lerp(keys[lo], keys[lo + 1], pos - static_cast<double>(lo)));
    }
  }
  return out;
}

std::vector<AUPSVector> sentence_to_aups(std::span<const text::Token> tokens,
                                         const VisemeTable& table) {
  std::vector<AUPSVector> out;
  for (const auto& t : tokens) {
    auto frames = word_to_aups(t.surface(), table);
    out.insert(out.end(), frames.begin(), frames.end());
  }
  return out;
}

}  // namespace anchor::oracle
