#pragma once

#include <cstdint>
#include <vector>

#include "anchor/cond/stack.hpp"
#include "anchor/core/config.hpp"
#include "anchor/core/types.hpp"
#include "anchor/nn/tape.hpp"

namespace anchor::gan {

template <typename T>
using Bound = std::vector<nn::Var<T>>;  // parameter Vars in ParamStore order

// Binds every parameter to the tape: trainable params collect gradients,
// frozen ones act as constants that still pass gradients to their inputs.
template <typename T>
Bound<T> bind(nn::Tape<T>& tape, nn::ParamStore<T>& params, bool trainable);

struct ConvSpec {
  nn::ParamId w, b;
  int stride = 1, pad = 1;
};

// conv3x3 stem, n_down stride-2 convs, n_res residual blocks, n_down
// (nearest 2x upsample + conv3x3) stages, conv3x3 -> 3 with tanh. Leaky ReLU
// after every hidden conv; optional instance norm before it.
template <typename T>
class Generator {
 public:
  Generator(const core::GanConfig& config, int in_channels, std::uint64_t seed);

  int in_channels() const { return in_channels_; }
  nn::ParamStore<T>& params() { return params_; }
  const nn::ParamStore<T>& params() const { return params_; }

  // stack: (N, C, H, W) -> (N, 3, H, W) in [-1, 1].
  nn::Var<T> forward(nn::Tape<T>& tape, const Bound<T>& b, const nn::Var<T>& stack) const;

  // Convenience single-frame pass on frozen parameters.
  core::FrameImage generate(const cond::ConditioningStack& stack) const;

 private:
  nn::Var<T> conv(const Bound<T>& b, const ConvSpec& c, const nn::Var<T>& x) const;
  nn::Var<T> act(const nn::Var<T>& x) const;

  core::GanConfig config_;
  int in_channels_;
  nn::ParamStore<T> params_;
  ConvSpec stem_, head_;
  std::vector<ConvSpec> down_, up_;
  std::vector<std::pair<ConvSpec, ConvSpec>> res_;
};

// Score maps and intermediate activations of one discriminator scale.
template <typename T>
struct ScaleOutput {
  nn::Var<T> logits;               // (N, 1, h, w)
  std::vector<nn::Var<T>> features;  // feature pyramid
};

// Multi-scale patch discriminator over [stack ; prior frames ; current frame].
// Scale s sees the input average-pooled s times.
template <typename T>
class Discriminator {
 public:
  Discriminator(const core::GanConfig& config, int stack_channels, int n_prior,
                std::uint64_t seed);

  int in_channels() const { return in_channels_; }
  int n_prior() const { return n_prior_; }
  int num_scales() const { return static_cast<int>(scales_.size()); }
  nn::ParamStore<T>& params() { return params_; }
  const nn::ParamStore<T>& params() const { return params_; }

  // Channel concatenation of the stack with the (n_prior + 1)-frame window.
  nn::Var<T> window_input(const nn::Var<T>& stack, const std::vector<nn::Var<T>>& window) const;
  // Window taken from the stack's own prior-frame channels plus `current`.
  nn::Var<T> window_input(const nn::Var<T>& stack, const nn::Var<T>& current) const;

  std::vector<ScaleOutput<T>> forward(nn::Tape<T>& tape, const Bound<T>& b,
                                      const nn::Var<T>& input) const;

 private:
  core::GanConfig config_;
  int stack_channels_, n_prior_, in_channels_;
  nn::ParamStore<T> params_;
  std::vector<std::vector<ConvSpec>> scales_;
};

}  // namespace anchor::gan
