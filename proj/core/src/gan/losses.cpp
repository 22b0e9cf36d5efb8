#include "anchor/gan/losses.hpp"

#include <cmath>

#include "anchor/core/errors.hpp"
#include "anchor/core/random.hpp"
#include "anchor/nn/ops.hpp"

namespace anchor::gan {
namespace {

template <typename T>
void check_finite(const std::vector<nn::Var<T>>& logits, const char* what) {
  for (const auto& l : logits) {
    for (T v : l.value().values()) {
      if (!std::isfinite(static_cast<double>(v))) {
        throw InvalidInputError(std::string("non-finite ") + what + " logit");
      }
    }
  }
}

template <typename T>
nn::Var<T> filled_like(const nn::Var<T>& v, T value) {
  return v.tape()->constant(nn::Tensor<T>(v.shape(), value));
}

template <typename T>
nn::Var<T> accumulate(const nn::Var<T>& acc, const nn::Var<T>& term) {
  return acc.valid() ? nn::add(acc, term) : term;
}

}  // namespace

template <typename T>
AdversarialLosses<T> gan_loss(const std::vector<nn::Var<T>>& real_logits,
                              const std::vector<nn::Var<T>>& fake_logits, bool lsgan) {
  if (real_logits.empty() || real_logits.size() != fake_logits.size()) {
    throw ShapeError("gan_loss needs matching, nonempty per-scale logits");
  }
  check_finite(real_logits, "real");
  check_finite(fake_logits, "fake");
  AdversarialLosses<T> out;
  for (std::size_t s = 0; s < real_logits.size(); ++s) {
    const auto& r = real_logits[s];
    const auto& f = fake_logits[s];
    nn::Var<T> d, g;
    if (lsgan) {
      d = nn::add(nn::mse_mean(r, filled_like(r, T(1))), nn::mse_mean(f, filled_like(f, T(0))));
      g = nn::mse_mean(f, filled_like(f, T(1)));
    } else {
      // -log s(x) = softplus(-x); -log(1 - s(x)) = softplus(x).
      d = nn::add(nn::mean(nn::softplus(nn::scale(r, T(-1)))), nn::mean(nn::softplus(f)));
      g = nn::mean(nn::softplus(nn::scale(f, T(-1))));
    }
    out.d_loss = accumulate(out.d_loss, d);
    out.g_loss = accumulate(out.g_loss, g);
  }
  return out;
}

template <typename T>
nn::Var<T> fm_loss(const std::vector<std::vector<nn::Var<T>>>& real_feats,
                   const std::vector<std::vector<nn::Var<T>>>& fake_feats) {
  if (real_feats.empty() || real_feats.size() != fake_feats.size()) {
    throw ShapeError("fm_loss needs the same number of scales on both sides");
  }
  nn::Var<T> total;
  for (std::size_t s = 0; s < real_feats.size(); ++s) {
    const auto& rs = real_feats[s];
    const auto& fs = fake_feats[s];
    if (rs.empty() || rs.size() != fs.size()) {
      throw ShapeError("fm_loss pyramids differ in depth at scale " + std::to_string(s));
    }
    nn::Var<T> scale_sum;
    for (std::size_t l = 0; l < rs.size(); ++l) {
      if (rs[l].shape() != fs[l].shape()) {
        throw ShapeError("fm_loss layer " + std::to_string(l) + ": " +
                         nn::shape_string(rs[l].shape()) + " vs " + nn::shape_string(fs[l].shape()));
      }
      scale_sum = accumulate(scale_sum, nn::l1_mean(fs[l], fs[l].tape()->detach(rs[l])));
    }
    total = accumulate(total, nn::scale(scale_sum, static_cast<T>(1.0 / rs.size())));
  }
  return nn::scale(total, static_cast<T>(1.0 / real_feats.size()));
}

template <typename T>
RandomConvExtractor<T>::RandomConvExtractor(std::uint64_t seed, int width) {
  core::Rng rng(seed);
  int in = 3;
  for (int l = 0; l < 3; ++l) {
    const int out = width << l;
    const double bound = std::sqrt(6.0 / (in * 9.0));
    params_.add_uniform("perc.l" + std::to_string(l) + ".w", {out, in, 3, 3}, bound, rng);
    params_.add_uniform("perc.l" + std::to_string(l) + ".b", {out}, 0.1, rng);
    in = out;
  }
}

template <typename T>
std::vector<nn::Var<T>> RandomConvExtractor<T>::features(nn::Tape<T>& tape,
                                                         const nn::Var<T>& image) const {
  std::vector<nn::Var<T>> out;
  nn::Var<T> x = image;
  std::size_t i = 0;
  for (int l = 0; l < 3; ++l) {
    const auto& w = *std::next(params_.begin(), static_cast<std::ptrdiff_t>(i++));
    const auto& b = *std::next(params_.begin(), static_cast<std::ptrdiff_t>(i++));
    x = nn::leaky_relu(nn::conv2d(x, tape.frozen(w), tape.frozen(b), l == 0 ? 1 : 2, 1),
                       static_cast<T>(0.2));
    out.push_back(x);
  }
  return out;
}

template <typename T>
nn::Var<T> perceptual_loss(nn::Tape<T>& tape, const nn::Var<T>& fake, const nn::Var<T>& real,
                           const FeatureExtractor<T>& extractor) {
  if (fake.shape() != real.shape()) {
    throw ShapeError("perceptual_loss: " + nn::shape_string(fake.shape()) + " vs " +
                     nn::shape_string(real.shape()));
  }
  const auto ff = extractor.features(tape, fake);
  const auto fr = extractor.features(tape, real);
  const auto w = extractor.layer_weights();
  if (ff.size() != w.size() || fr.size() != w.size()) {
    throw ContractError("extractor layer weights do not match its feature count");
  }
  nn::Var<T> total;
  for (std::size_t l = 0; l < w.size(); ++l) {
    total = accumulate(total, nn::scale(nn::l1_mean(ff[l], fr[l]), static_cast<T>(w[l])));
  }
  return total;
}

template <typename T>
LossTerms<T> combined_losses(nn::Tape<T>& tape, const WindowBatch<T>& batch,
                             const Generator<T>& g, const Bound<T>& gb,
                             const Discriminator<T>& d, const Bound<T>& db,
                             const FeatureExtractor<T>& extractor, const LossWeights& weights,
                             bool want_d, bool want_g) {
  if (!(weights.lambda_fm >= 0) || !(weights.lambda_perc >= 0)) {
    throw ConfigError("loss weights must be nonnegative");
  }
  LossTerms<T> out;
  const nn::Var<T> stack = tape.constant(batch.stacks);
  const nn::Var<T> real = tape.constant(batch.real);
  out.fake = g.forward(tape, gb, stack);

  const auto real_out = d.forward(tape, db, d.window_input(stack, real));
  std::vector<nn::Var<T>> real_logits;
  std::vector<std::vector<nn::Var<T>>> real_feats;
  for (const auto& s : real_out) {
    real_logits.push_back(s.logits);
    real_feats.push_back(s.features);
  }

  if (want_d) {
    const auto fake_out = d.forward(tape, db, d.window_input(stack, tape.detach(out.fake)));
    std::vector<nn::Var<T>> fake_logits;
    for (const auto& s : fake_out) fake_logits.push_back(s.logits);
    out.d_total = gan_loss(real_logits, fake_logits, weights.lsgan).d_loss;
  }
  if (want_g) {
    const auto fake_out = d.forward(tape, db, d.window_input(stack, out.fake));
    std::vector<nn::Var<T>> fake_logits;
    std::vector<std::vector<nn::Var<T>>> fake_feats;
    for (const auto& s : fake_out) {
      fake_logits.push_back(s.logits);
      fake_feats.push_back(s.features);
    }
    out.g_adv = gan_loss(real_logits, fake_logits, weights.lsgan).g_loss;
    out.g_fm = fm_loss(real_feats, fake_feats);
    out.g_perc = perceptual_loss(tape, out.fake, real, extractor);
    out.g_total = nn::add(out.g_adv,
                          nn::add(nn::scale(out.g_fm, static_cast<T>(weights.lambda_fm)),
                                  nn::scale(out.g_perc, static_cast<T>(weights.lambda_perc))));
  }
  return out;
}

#define ANCHOR_INSTANTIATE(T)                                                                  \
  template AdversarialLosses<T> gan_loss(const std::vector<nn::Var<T>>&,                      \
                                         const std::vector<nn::Var<T>>&, bool);               \
  template nn::Var<T> fm_loss(const std::vector<std::vector<nn::Var<T>>>&,                     \
                              const std::vector<std::vector<nn::Var<T>>>&);                    \
  template class RandomConvExtractor<T>;                                                       \
  template nn::Var<T> perceptual_loss(nn::Tape<T>&, const nn::Var<T>&, const nn::Var<T>&,      \
                                      const FeatureExtractor<T>&);                             \
  template LossTerms<T> combined_losses(nn::Tape<T>&, const WindowBatch<T>&,                   \
                                        const Generator<T>&, const Bound<T>&,                  \
                                        const Discriminator<T>&, const Bound<T>&,              \
                                        const FeatureExtractor<T>&, const LossWeights&, bool,  \
                                        bool);

ANCHOR_INSTANTIATE(float)
ANCHOR_INSTANTIATE(double)
#undef ANCHOR_INSTANTIATE

}  // namespace anchor::gan
