#include "anchor/gan/networks.hpp"

#include <cmath>

#include "anchor/core/errors.hpp"
#include "anchor/core/random.hpp"
#include "anchor/nn/ops.hpp"

namespace anchor::gan {
namespace {

constexpr double kSlope = 0.2;

// He-uniform for leaky ReLU fan-in.
template <typename T>
ConvSpec add_conv(nn::ParamStore<T>& ps, const std::string& name, int in, int out, int k,
                  int stride, int pad, core::Rng& rng, double gain = 1.0, bool bias = true) {
  const double fan_in = static_cast<double>(in) * k * k;
  const double bound = gain * std::sqrt(6.0 / ((1.0 + kSlope * kSlope) * fan_in));
  ConvSpec c;
  c.w = ps.add_uniform(name + ".w", {out, in, k, k}, bound, rng);
  if (bias) c.b = ps.add(name + ".b", {out});
  c.stride = stride;
  c.pad = pad;
  return c;
}

template <typename T>
nn::Var<T> apply(const Bound<T>& b, const ConvSpec& c, const nn::Var<T>& x) {
  const bool has_bias = c.b.index != nn::ParamId{}.index;
  return nn::conv2d(x, b[c.w.index], has_bias ? b[c.b.index] : nn::Var<T>{}, c.stride, c.pad);
}

}  // namespace

template <typename T>
Bound<T> bind(nn::Tape<T>& tape, nn::ParamStore<T>& params, bool trainable) {
  Bound<T> out;
  out.reserve(params.size());
  for (auto& p : params) out.push_back(trainable ? tape.param(p) : tape.frozen(p));
  return out;
}

template <typename T>
Generator<T>::Generator(const core::GanConfig& config, int in_channels, std::uint64_t seed)
    : config_(config), in_channels_(in_channels) {
  if (in_channels < 1 || config.ngf < 1 || config.n_down < 0 || config.n_res < 0) {
    throw ConfigError("invalid generator size");
  }
  if (config.norm != "none" && config.norm != "instance") {
    throw ConfigError("gan norm must be 'none' or 'instance', got '" + config.norm + "'");
  }
  core::Rng rng(seed);
  // A bias right before instance norm is cancelled by it; leave it out.
  const bool bias = config.norm != "instance";
  int ch = config.ngf;
  stem_ = add_conv(params_, "g.stem", in_channels, ch, 3, 1, 1, rng);
  for (int i = 0; i < config.n_down; ++i) {
    down_.push_back(add_conv(params_, "g.down" + std::to_string(i), ch, 2 * ch, 3, 2, 1, rng, 1.0, bias));
    ch *= 2;
  }
  for (int i = 0; i < config.n_res; ++i) {
    const std::string n = "g.res" + std::to_string(i);
    // Second conv of each block starts small so blocks begin near identity.
    res_.emplace_back(add_conv(params_, n + ".a", ch, ch, 3, 1, 1, rng, 1.0, bias),
                      add_conv(params_, n + ".b", ch, ch, 3, 1, 1, rng, 0.1));
  }
  for (int i = 0; i < config.n_down; ++i) {
    up_.push_back(add_conv(params_, "g.up" + std::to_string(i), ch, ch / 2, 3, 1, 1, rng, 1.0, bias));
    ch /= 2;
  }
  head_ = add_conv(params_, "g.head", ch, 3, 3, 1, 1, rng, 0.5);
}

template <typename T>
nn::Var<T> Generator<T>::conv(const Bound<T>& b, const ConvSpec& c, const nn::Var<T>& x) const {
  return apply(b, c, x);
}

template <typename T>
nn::Var<T> Generator<T>::act(const nn::Var<T>& x) const {
  nn::Var<T> y = config_.norm == "instance" ? nn::instance_norm(x, static_cast<T>(1e-5)) : x;
  return nn::leaky_relu(y, static_cast<T>(kSlope));
}

template <typename T>
nn::Var<T> Generator<T>::forward(nn::Tape<T>&, const Bound<T>& b, const nn::Var<T>& stack) const {
  if (stack.shape().size() != 4 || stack.dim(1) != in_channels_) {
    throw ShapeError("generator expects (N, " + std::to_string(in_channels_) +
                     ", H, W) input, got " + nn::shape_string(stack.shape()));
  }
  const int mult = 1 << config_.n_down;
  if (stack.dim(2) % mult != 0 || stack.dim(3) % mult != 0) {
    throw ShapeError("image size must be divisible by " + std::to_string(mult));
  }
  nn::Var<T> x = nn::leaky_relu(conv(b, stem_, stack), static_cast<T>(kSlope));
  for (const auto& c : down_) x = act(conv(b, c, x));
  for (const auto& [ca, cb] : res_) {
    nn::Var<T> r = conv(b, cb, act(conv(b, ca, x)));
    x = nn::add(x, r);
  }
  for (const auto& c : up_) x = act(conv(b, c, nn::upsample_nearest2x(x)));
  return nn::tanh(conv(b, head_, x));
}

template <typename T>
core::FrameImage Generator<T>::generate(const cond::ConditioningStack& stack) const {
  nn::Tape<T> tape;
  Bound<T> b;
  for (const auto& p : params_) b.push_back(tape.frozen(p));
  nn::Tensor<T> in = stack.channels.template cast<T>();
  in.reshape({1, stack.num_channels(), stack.height(), stack.width()});
  const auto out = forward(tape, b, tape.constant(std::move(in))).value();
  core::FrameImage frame(stack.height(), stack.width());
  auto px = frame.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<float>(out[i]);
  return frame;
}

template <typename T>
Discriminator<T>::Discriminator(const core::GanConfig& config, int stack_channels, int n_prior,
                                std::uint64_t seed)
    : config_(config),
      stack_channels_(stack_channels),
      n_prior_(n_prior),
      in_channels_(stack_channels + 3 * (n_prior + 1)) {
  if (config.n_scales < 1 || config.d_layers < 2 || config.ndf < 1) {
    throw ConfigError("invalid discriminator size");
  }
  core::Rng rng(seed);
  for (int s = 0; s < config.n_scales; ++s) {
    std::vector<ConvSpec> layers;
    int ch = in_channels_;
    for (int l = 0; l < config.d_layers; ++l) {
      const std::string name = "d.s" + std::to_string(s) + ".l" + std::to_string(l);
      const bool last = l + 1 == config.d_layers;
      const int out = last ? 1 : config.ndf << l;
      // First two layers halve the resolution (4x4, stride 2); the rest keep it.
      const bool down = l < 2 && !last;
      layers.push_back(add_conv(params_, name, ch, out, down ? 4 : 3, down ? 2 : 1, 1, rng));
      ch = out;
    }
    scales_.push_back(std::move(layers));
  }
}

template <typename T>
nn::Var<T> Discriminator<T>::window_input(const nn::Var<T>& stack,
                                          const std::vector<nn::Var<T>>& window) const {
  if (static_cast<int>(window.size()) != n_prior_ + 1) {
    throw ShapeError("discriminator window needs " + std::to_string(n_prior_ + 1) +
                     " frames, got " + std::to_string(window.size()));
  }
  if (stack.shape().size() != 4 || stack.dim(1) != stack_channels_) {
    throw ShapeError("discriminator stack has shape " + nn::shape_string(stack.shape()));
  }
  std::vector<nn::Var<T>> parts = {stack};
  parts.insert(parts.end(), window.begin(), window.end());
  return nn::concat(parts, 1);
}

template <typename T>
nn::Var<T> Discriminator<T>::window_input(const nn::Var<T>& stack,
                                          const nn::Var<T>& current) const {
  std::vector<nn::Var<T>> window;
  for (int i = 0; i < n_prior_; ++i) {
    window.push_back(nn::slice(stack, 1, stack_channels_ - 3 * (n_prior_ - i), 3));
  }
  window.push_back(current);
  return window_input(stack, window);
}

template <typename T>
std::vector<ScaleOutput<T>> Discriminator<T>::forward(nn::Tape<T>&, const Bound<T>& b,
                                                      const nn::Var<T>& input) const {
  if (input.shape().size() != 4 || input.dim(1) != in_channels_) {
    throw ShapeError("discriminator expects " + std::to_string(in_channels_) +
                     " input channels, got " + nn::shape_string(input.shape()));
  }
  std::vector<ScaleOutput<T>> out;
  nn::Var<T> x_scale = input;
  for (std::size_t s = 0; s < scales_.size(); ++s) {
    if (s > 0) x_scale = nn::avg_pool2x2(x_scale);
    ScaleOutput<T> so;
    nn::Var<T> x = x_scale;
    for (std::size_t l = 0; l < scales_[s].size(); ++l) {
      x = apply(b, scales_[s][l], x);
      if (l + 1 < scales_[s].size()) {
        x = nn::leaky_relu(x, static_cast<T>(kSlope));
        so.features.push_back(x);
      }
    }
    so.logits = x;
    out.push_back(std::move(so));
  }
  return out;
}

template Bound<float> bind(nn::Tape<float>&, nn::ParamStore<float>&, bool);
template Bound<double> bind(nn::Tape<double>&, nn::ParamStore<double>&, bool);
template class Generator<float>;
template class Generator<double>;
template class Discriminator<float>;
template class Discriminator<double>;

}  // namespace anchor::gan
