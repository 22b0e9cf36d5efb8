#pragma once

#include <cstdint>
#include <vector>

#include "anchor/nn/parameter.hpp"

namespace anchor::nn {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Moment buffers are laid out in ParamStore order.
template <typename T>
class Adam {
 public:
  Adam() = default;
  Adam(const ParamStore<T>& params, AdamOptions options);

  // Applies one update from the accumulated gradients, then zeroes them.
  void step(ParamStore<T>& params);

  const AdamOptions& options() const { return options_; }
  void set_lr(double lr) { options_.lr = lr; }
  std::int64_t steps() const { return steps_; }
  void set_steps(std::int64_t s) { steps_ = s; }

  std::vector<Tensor<T>>& first_moments() { return m_; }
  std::vector<Tensor<T>>& second_moments() { return v_; }
  const std::vector<Tensor<T>>& first_moments() const { return m_; }
  const std::vector<Tensor<T>>& second_moments() const { return v_; }

 private:
  AdamOptions options_;
  std::int64_t steps_ = 0;
  std::vector<Tensor<T>> m_;
  std::vector<Tensor<T>> v_;
};

}  // namespace anchor::nn
