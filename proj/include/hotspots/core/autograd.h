#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "hotspots/core/tensor.h"

// Minimal tape-free reverse-mode differentiation. Every op result keeps
// pointers to its inputs and a closure that pushes its gradient back to them;
// Backward() walks the resulting DAG in reverse topological order.
namespace hotspots::ag {

struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  bool is_leaf() const { return !backward; }
  // Allocates a zero gradient of the value's shape if none exists yet.
  Tensor& EnsureGrad();
};

class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  bool defined() const { return static_cast<bool>(node_); }
  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  Tensor& mutable_grad() { return node_->EnsureGrad(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  const Shape& shape() const { return node_->value.shape(); }
  int dim(int i) const { return node_->value.dim(i); }

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& shared() const { return node_; }

  void ZeroGrad();

 private:
  std::shared_ptr<Node> node_;
};

// Builds an op result. When gradient recording is off, or no input requires a
// gradient, the result is a constant and `backward` is dropped.
Var MakeResult(Tensor value, std::vector<Var> inputs,
               std::function<void(Node&)> backward);

// Propagates d(root)/d(.) into every reachable node that requires a gradient.
// Interior gradients are reset on each call; leaf gradients accumulate.
// `seed` defaults to ones of root's shape.
void Backward(const Var& root, const Tensor* seed = nullptr);

bool GradEnabled();

// Disables graph construction for its lifetime (inference).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace hotspots::ag
