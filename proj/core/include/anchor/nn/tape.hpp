#pragma once

#include <deque>
#include <functional>
#include <initializer_list>
#include <unordered_map>
#include <vector>

#include "anchor/nn/parameter.hpp"
#include "anchor/nn/tensor.hpp"

namespace anchor::nn {

template <typename T>
class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
template <typename T>
class Var {
 public:
  Var() = default;

  Tape<T>* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Tensor<T>& value() const { return tape_->value(id_); }
  const Shape& shape() const { return value().shape(); }
  int dim(int i) const { return value().dim(i); }
  bool requires_grad() const { return tape_->requires_grad(id_); }
  // Gradient after Tape::backward; zeros if nothing flowed here.
  const Tensor<T>& grad() const { return tape_->grad(id_); }

 private:
  friend class Tape<T>;
  Var(Tape<T>* tape, int id) : tape_(tape), id_(id) {}

  Tape<T>* tape_ = nullptr;
  int id_ = -1;
};

// Reverse-mode recording of one forward pass. Nodes are appended in creation
// order, so reverse creation order is a valid topological order for backward.
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> constant(Tensor<T> value) { return push(std::move(value), false, nullptr); }

  // Leaf whose gradient is kept on the tape (read it with Var::grad()).
  Var<T> variable(Tensor<T> value) { return push(std::move(value), true, nullptr); }

  // Trainable leaf; backward() accumulates into p.grad. Repeated calls with the
  // same parameter return the same node.
  Var<T> param(Parameter<T>& p) {
    auto it = param_nodes_.find(&p);
    if (it != param_nodes_.end()) return Var<T>(this, it->second);
    Var<T> v = push(p.value, true, nullptr);
    nodes_[v.id_].param = &p;
    param_nodes_.emplace(&p, v.id_);
    return v;
  }

  // Parameter value as a constant: gradients flow through it to inputs but are
  // not collected for the parameter itself.
  Var<T> frozen(const Parameter<T>& p) { return constant(p.value); }

  Var<T> detach(const Var<T>& v) { return constant(v.value()); }

  // Appends the result of an op. If no parent requires a gradient the backward
  // function is dropped and the node is a constant.
  Var<T> record(Tensor<T> value, std::initializer_list<Var<T>> parents, BackwardFn fn) {
    return record(std::move(value), std::vector<Var<T>>(parents), std::move(fn));
  }
  Var<T> record(Tensor<T> value, const std::vector<Var<T>>& parents, BackwardFn fn) {
    bool needs = false;
    for (const auto& p : parents) {
      if (p.tape_ != this) throw ContractError("op mixes vars from different tapes");
      needs = needs || nodes_[p.id_].requires_grad;
    }
    return push(std::move(value), needs, needs ? std::move(fn) : nullptr);
  }

  // Seeds d(root)/d(root) = 1 and propagates. `root` must hold one element.
  void backward(const Var<T>& root) {
    if (root.value().numel() != 1) {
      throw ShapeError("backward() needs a scalar root, got " + shape_string(root.shape()));
    }
    if (!nodes_[root.id_].requires_grad) return;
    grad(root.id_)[0] += T(1);
    for (int id = root.id_; id >= 0; --id) {
      Node& n = nodes_[id];
      if (!n.requires_grad || n.grad.empty()) continue;
      if (n.backward) n.backward(*this, id);
      if (n.param) n.param->grad += n.grad;
    }
  }

  const Tensor<T>& value(int id) const { return nodes_.at(id).value; }
  bool requires_grad(int id) const { return nodes_.at(id).requires_grad; }

  // Lazily allocated gradient buffer for node `id`.
  Tensor<T>& grad(int id) {
    Node& n = nodes_.at(id);
    if (n.grad.empty() && !n.value.empty()) n.grad = Tensor<T>(n.value.shape());
    return n.grad;
  }
  const Tensor<T>& grad(int id) const { return const_cast<Tape*>(this)->grad(id); }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    BackwardFn backward;
    Parameter<T>* param = nullptr;
    bool requires_grad = false;
  };

  Var<T> push(Tensor<T> value, bool requires_grad, BackwardFn fn) {
    nodes_.push_back(Node{std::move(value), {}, std::move(fn), nullptr, requires_grad});
    return Var<T>(this, static_cast<int>(nodes_.size()) - 1);
  }

  std::deque<Node> nodes_;
  std::unordered_map<const Parameter<T>*, int> param_nodes_;
};

}  // namespace anchor::nn
