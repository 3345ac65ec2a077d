#include "imloc/autograd.hpp"

#include <unordered_set>

namespace imloc::ag {

namespace {
thread_local bool g_grad_enabled = true;
}

void Node::accumulate(const Tensor& g) {
  if (grad.empty()) {
    require_shape(g.shape(), value.shape(), "gradient accumulation");
    grad = g;
    return;
  }
  require_shape(g.shape(), grad.shape(), "gradient accumulation");
  float* dst = grad.data();
  const float* src = g.data();
  for (std::int64_t i = 0; i < grad.numel(); ++i) dst[i] += src[i];
}

Tensor& Node::grad_buffer() {
  if (grad.empty()) grad = Tensor::zeros(value.shape());
  return grad;
}

Var constant(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return Var(std::move(n));
}

Var parameter(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  return Var(std::move(n));
}

bool grad_enabled() noexcept { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

Var make_result(Tensor value, std::vector<Var> inputs,
                std::function<void(const Tensor& grad_out)> backward) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  bool any = false;
  for (const auto& v : inputs) any = any || v.requires_grad();
  if (g_grad_enabled && any) {
    n->requires_grad = true;
    n->inputs.reserve(inputs.size());
    for (const auto& v : inputs) n->inputs.push_back(v.node());
    n->backward = std::move(backward);
  }
  return Var(std::move(n));
}

void backward(const Var& root) {
  if (root.value().numel() != 1) {
    throw ShapeError("backward() without a seed requires a scalar root, got " +
                     shape_str(root.shape()));
  }
  backward(root, Tensor::full(root.shape(), 1.0f));
}

void backward(const Var& root, const Tensor& seed) {
  if (!root.requires_grad()) return;
  // Iterative post-order DFS for a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.node().get(), 0}};
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && child->backward && seen.insert(child).second) {
        stack.emplace_back(child, 0);
      }
      continue;
    }
    order.push_back(node);
    stack.pop_back();
  }
  root.node()->accumulate(seed);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(n->grad);
  }
  // Interior gradients are not needed after the sweep.
  for (Node* n : order) {
    if (n->backward) n->grad = Tensor();
  }
}

}  // namespace imloc::ag
