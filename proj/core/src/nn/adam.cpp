#include "anchor/nn/adam.hpp"

#include <cmath>

namespace anchor::nn {

template <typename T>
Adam<T>::Adam(const ParamStore<T>& params, AdamOptions options) : options_(options) {
  for (const auto& p : params) {
    m_.emplace_back(p.value.shape());
    v_.emplace_back(p.value.shape());
  }
}

template <typename T>
void Adam<T>::step(ParamStore<T>& params) {
  if (params.size() != m_.size()) {
    throw ShapeError("optimizer built for " + std::to_string(m_.size()) + " parameters, got " +
                     std::to_string(params.size()));
  }
  ++steps_;
  const T b1 = static_cast<T>(options_.beta1);
  const T b2 = static_cast<T>(options_.beta2);
  const T lr = static_cast<T>(options_.lr);
  const T eps = static_cast<T>(options_.eps);
  const T c1 = T(1) - static_cast<T>(std::pow(options_.beta1, static_cast<double>(steps_)));
  const T c2 = T(1) - static_cast<T>(std::pow(options_.beta2, static_cast<double>(steps_)));
  std::size_t k = 0;
  for (auto& p : params) {
    T* w = p.value.data();
    T* g = p.grad.data();
    T* m = m_[k].data();
    T* v = v_[k].data();
    for (std::size_t i = 0; i < p.value.numel(); ++i) {
      m[i] = b1 * m[i] + (T(1) - b1) * g[i];
      v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
      const T mhat = m[i] / c1;
      const T vhat = v[i] / c2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
      g[i] = T(0);
    }
    ++k;
  }
}

template class Adam<float>;
template class Adam<double>;

}  // namespace anchor::nn
