#include "hotspots/core/autograd.h"

#include <unordered_set>

namespace hotspots::ag {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

Tensor& Node::EnsureGrad() {
  if (grad.shape() != value.shape()) grad = Tensor::Zeros(value.shape());
  return grad;
}

Var::Var(Tensor value, bool requires_grad)
    : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

void Var::ZeroGrad() {
  if (node_ && !node_->grad.empty()) node_->grad.Fill(0.0);
}

Var MakeResult(Tensor value, std::vector<Var> inputs,
               std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (!g_grad_enabled) return Var(node);
  bool any = false;
  for (const Var& in : inputs) any = any || in.requires_grad();
  if (!any) return Var(node);
  node->requires_grad = true;
  node->inputs.reserve(inputs.size());
  for (Var& in : inputs) node->inputs.push_back(in.shared());
  node->backward = std::move(backward);
  return Var(node);
}

void Backward(const Var& root, const Tensor* seed) {
  if (!root.requires_grad()) return;

  // Iterative post-order DFS yields a topological order (inputs first).
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node(), 0);
  visited.insert(root.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second)
        stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order)
    if (!n->is_leaf()) n->grad = Tensor::Zeros(n->value.shape());

  Tensor& root_grad = root.node()->EnsureGrad();
  if (seed) {
    root_grad.Add(*seed);
  } else {
    Tensor ones = Tensor::Ones(root.shape());
    root_grad.Add(ones);
  }

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->is_leaf()) continue;
    for (auto& in : n->inputs)
      if (in->requires_grad) in->EnsureGrad();
    n->backward(*n);
  }
}

bool GradEnabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) {
  g_grad_enabled = false;
}

NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

}  // namespace hotspots::ag
