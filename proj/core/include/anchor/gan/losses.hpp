#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "anchor/gan/networks.hpp"

namespace anchor::gan {

template <typename T>
struct AdversarialLosses {
  nn::Var<T> d_loss;  // summed over scales
  nn::Var<T> g_loss;  // non-saturating, summed over scales
};

// Log-loss GAN on logits: d = -mean log s(real) - mean log(1 - s(fake)),
// g = -mean log s(fake). With lsgan: d = mean (real-1)^2 + mean fake^2,
// g = mean (fake-1)^2. Non-finite logits raise InvalidInputError.
template <typename T>
AdversarialLosses<T> gan_loss(const std::vector<nn::Var<T>>& real_logits,
                              const std::vector<nn::Var<T>>& fake_logits, bool lsgan = false);

// Mean |real - fake| per layer, averaged over layers and then scales. Real
// features are detached.
template <typename T>
nn::Var<T> fm_loss(const std::vector<std::vector<nn::Var<T>>>& real_feats,
                   const std::vector<std::vector<nn::Var<T>>>& fake_feats);

// Frozen image feature map used by the perceptual term.
template <typename T>
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual std::vector<nn::Var<T>> features(nn::Tape<T>& tape, const nn::Var<T>& image) const = 0;
  virtual std::vector<double> layer_weights() const = 0;
};

// Fixed seeded conv pyramid: 3 conv3x3 + leaky ReLU layers (stride 1, 2, 2).
template <typename T>
class RandomConvExtractor final : public FeatureExtractor<T> {
 public:
  explicit RandomConvExtractor(std::uint64_t seed = 99, int width = 8);
  std::vector<nn::Var<T>> features(nn::Tape<T>& tape, const nn::Var<T>& image) const override;
  std::vector<double> layer_weights() const override { return {1.0 / 3, 1.0 / 3, 1.0 / 3}; }

 private:
  nn::ParamStore<T> params_;
};

// The image itself as the only feature layer.
template <typename T>
class IdentityExtractor final : public FeatureExtractor<T> {
 public:
  std::vector<nn::Var<T>> features(nn::Tape<T>&, const nn::Var<T>& image) const override {
    return {image};
  }
  std::vector<double> layer_weights() const override { return {1.0}; }
};

// sum_l w_l * mean |E_l(fake) - E_l(real)|.
template <typename T>
nn::Var<T> perceptual_loss(nn::Tape<T>& tape, const nn::Var<T>& fake, const nn::Var<T>& real,
                           const FeatureExtractor<T>& extractor);

// (N, C, H, W) stacks and (N, 3, H, W) ground-truth current frames.
template <typename T>
struct WindowBatch {
  nn::Tensor<T> stacks;
  nn::Tensor<T> real;
};

template <typename T>
struct LossTerms {
  nn::Var<T> fake;    // generator output
  nn::Var<T> d_total;  // invalid unless requested
  nn::Var<T> g_total;  // invalid unless requested
  nn::Var<T> g_adv, g_fm, g_perc;
};

struct LossWeights {
  double lambda_fm = 10.0;
  double lambda_perc = 10.0;
  bool lsgan = false;
};

// d_total uses a detached fake frame; g_total = g_adv + lambda_fm * fm +
// lambda_perc * perceptual. Negative weights raise ConfigError.
template <typename T>
LossTerms<T> combined_losses(nn::Tape<T>& tape, const WindowBatch<T>& batch,
                             const Generator<T>& g, const Bound<T>& gb,
                             const Discriminator<T>& d, const Bound<T>& db,
                             const FeatureExtractor<T>& extractor, const LossWeights& weights,
                             bool want_d = true, bool want_g = true);

}  // namespace anchor::gan
