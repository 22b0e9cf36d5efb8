#pragma once

// Central finite-difference oracle. Independent of the analytic backward path:
// it only ever calls the forward closure.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "anchor/core/random.hpp"
#include "anchor/nn/parameter.hpp"
#include "anchor/nn/tape.hpp"

namespace anchor::testing {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;  // "param[index]: analytic vs numeric"
  std::size_t checked = 0;
};

// |a - n| / max(|a|, |n|, floor). The floor keeps entries whose true gradient
// is ~0 from dominating through round-off.
inline double rel_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) /
         std::max({std::abs(analytic), std::abs(numeric), floor});
}

using LossFn = std::function<nn::Var<double>(nn::Tape<double>&)>;

inline double forward_value(const LossFn& loss) {
  nn::Tape<double> tape;
  return loss(tape).value().item();
}

// Checks every parameter in `params` (or up to `max_per_param` sampled entries
// of each). `loss` must register the parameters with tape.param().
// `only`, when set, restricts the check to parameters whose name it accepts.
inline GradCheckResult check_gradients(nn::ParamStore<double>& params, const LossFn& loss,
                                       double eps = 1e-5, std::size_t max_per_param = 0,
                                       std::uint64_t seed = 1,
                                       const std::function<bool(const std::string&)>& only = {}) {
  params.zero_grad();
  {
    nn::Tape<double> tape;
    auto out = loss(tape);
    tape.backward(out);
  }
  GradCheckResult result;
  core::Rng rng(seed);
  for (auto& p : params) {
    if (only && !only(p.name)) continue;
    const std::size_t n = p.value.numel();
    std::vector<std::size_t> idx;
    if (max_per_param == 0 || n <= max_per_param) {
      for (std::size_t i = 0; i < n; ++i) idx.push_back(i);
    } else {
      for (std::size_t k = 0; k < max_per_param; ++k) idx.push_back(rng.below(n));
    }
    for (std::size_t i : idx) {
      const double saved = p.value[i];
      p.value[i] = saved + eps;
      const double up = forward_value(loss);
      p.value[i] = saved - eps;
      const double down = forward_value(loss);
      p.value[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double analytic = p.grad[i];
      const double err = rel_error(analytic, numeric);
      ++result.checked;
      if (err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst = p.name + "[" + std::to_string(i) + "]: " + std::to_string(analytic) +
                       " vs " + std::to_string(numeric);
      }
    }
  }
  return result;
}

// Same check for a free input tensor (a tape.variable leaf rebuilt per call).
inline GradCheckResult check_input_gradient(
    nn::Tensor<double>& input,
    const std::function<nn::Var<double>(nn::Tape<double>&, const nn::Var<double>&)>& loss,
    double eps = 1e-5) {
  nn::Tensor<double> analytic;
  {
    nn::Tape<double> tape;
    auto x = tape.variable(input);
    auto out = loss(tape, x);
    tape.backward(out);
    analytic = x.grad();
  }
  auto eval = [&] {
    nn::Tape<double> tape;
    auto x = tape.constant(input);
    return loss(tape, x).value().item();
  };
  GradCheckResult result;
  for (std::size_t i = 0; i < input.numel(); ++i) {
    const double saved = input[i];
    input[i] = saved + eps;
    const double up = eval();
    input[i] = saved - eps;
    const double down = eval();
    input[i] = saved;
    const double numeric = (up - down) / (2.0 * eps);
    const double err = rel_error(analytic[i], numeric);
    ++result.checked;
    if (err > result.max_rel_error) {
      result.max_rel_error = err;
      result.worst = "input[" + std::to_string(i) + "]: " + std::to_string(analytic[i]) + " vs " +
                     std::to_string(numeric);
    }
  }
  return result;
}

}  // namespace anchor::testing
