#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "anchor/core/random.hpp"
#include "anchor/nn/tensor.hpp"

namespace anchor::nn {

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
};

// Handle into a ParamStore. Plain index so models stay copyable.
struct ParamId {
  std::size_t index = static_cast<std::size_t>(-1);
};

// Ordered, named parameter collection. Insertion order is the canonical order
// for optimizers and checkpoints.
template <typename T>
class ParamStore {
 public:
  ParamId add(std::string name, Shape shape) {
    if (by_name_.count(name)) throw ConfigError("duplicate parameter name '" + name + "'");
    by_name_.emplace(name, params_.size());
    Tensor<T> value(shape);
    Tensor<T> grad(std::move(shape));
    params_.push_back({std::move(name), std::move(value), std::move(grad)});
    return ParamId{params_.size() - 1};
  }

  // Seeded uniform(-bound, bound) fill.
  ParamId add_uniform(std::string name, Shape shape, double bound, core::Rng& rng) {
    ParamId id = add(std::move(name), std::move(shape));
    for (auto& v : params_[id.index].value.values()) v = static_cast<T>(rng.uniform(-bound, bound));
    return id;
  }

  Parameter<T>& operator[](ParamId id) { return params_.at(id.index); }
  const Parameter<T>& operator[](ParamId id) const { return params_.at(id.index); }

  Parameter<T>* find(const std::string& name) {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? nullptr : &params_[it->second];
  }
  const Parameter<T>* find(const std::string& name) const {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? nullptr : &params_[it->second];
  }

  std::size_t size() const { return params_.size(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  std::size_t numel() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.numel();
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) p.grad.zero();
  }

  bool all_finite() const {
    for (const auto& p : params_) {
      for (T v : p.value.values()) {
        if (!std::isfinite(static_cast<double>(v))) return false;
      }
    }
    return true;
  }

  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& p : params_) {
      ParamId id = out.add(p.name, p.value.shape());
      out[id].value = p.value.template cast<U>();
    }
    return out;
  }

 private:
  std::vector<Parameter<T>> params_;
  std::unordered_map<std::string, std::size_t> by_name_;
};

}  // namespace anchor::nn
