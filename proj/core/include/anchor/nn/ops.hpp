#pragma once

#include <span>
#include <vector>

#include "anchor/nn/tape.hpp"

// Differentiable ops over Tape-recorded values. Shapes follow NCHW for images
// and (batch, features) for dense layers. All ops are instantiated for float
// and double.
namespace anchor::nn {

template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> scale(const Var<T>& a, T s);

template <typename T> Var<T> sigmoid(const Var<T>& a);
template <typename T> Var<T> tanh(const Var<T>& a);
template <typename T> Var<T> relu(const Var<T>& a);
template <typename T> Var<T> leaky_relu(const Var<T>& a, T slope);
// log(1 + exp(a)), stable for large |a|.
template <typename T> Var<T> softplus(const Var<T>& a);

template <typename T> Var<T> sum(const Var<T>& a);
template <typename T> Var<T> mean(const Var<T>& a);

// x: (B, in), weight: (out, in), bias: (out) or invalid Var. Returns (B, out).
template <typename T> Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias);

// Concatenation / slicing along `axis`; all other dimensions must agree.
template <typename T> Var<T> concat(const std::vector<Var<T>>& parts, int axis);
template <typename T> Var<T> slice(const Var<T>& a, int axis, int start, int length);

// x: (N, C, H, W), weight: (O, C, k, k), bias: (O) or invalid Var. Zero padding.
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int stride, int pad);
template <typename T> Var<T> upsample_nearest2x(const Var<T>& x);
// 2x2 mean with stride 2; odd trailing rows/cols are dropped.
template <typename T> Var<T> avg_pool2x2(const Var<T>& x);
// Per-(sample, channel) normalization over H and W, no affine.
template <typename T> Var<T> instance_norm(const Var<T>& x, T eps);

// mean(|a - b|) and mean((a - b)^2) over all elements.
template <typename T> Var<T> l1_mean(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> mse_mean(const Var<T>& a, const Var<T>& b);

// sum_b w_b * sum_d (pred[b,d] - target[b,d])^2 for pred of shape (B, D).
template <typename T>
Var<T> weighted_sse(const Var<T>& pred, const Tensor<T>& target, std::span<const T> row_weights);

// sum_b w_b * BCE(logit_b, target_b); logits of shape (B, 1) or (B).
// Exact 0/1 targets with infinite logits of the right sign give 0, not NaN.
template <typename T>
Var<T> weighted_bce_logits(const Var<T>& logits, std::span<const T> targets,
                           std::span<const T> row_weights);

// Scalar helpers shared by ops and losses.
template <typename T> T stable_softplus(T x);
template <typename T> T stable_sigmoid(T x);

}  // namespace anchor::nn
