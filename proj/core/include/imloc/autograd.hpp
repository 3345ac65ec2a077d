#pragma once

// Minimal reverse-mode differentiation over float32 tensors. A Var is a
// shared handle to a graph node; backward() walks the graph recorded since
// the leaves were created and accumulates into every node that requires
// gradients. Parameters keep their gradients across calls until zeroed,
// which is what gradient accumulation relies on.

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "imloc/tensor.hpp"

namespace imloc::ag {

struct Node {
  Tensor value;
  Tensor grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(const Tensor& grad_out)> backward;

  void accumulate(const Tensor& g);
  /// Grad buffer, zero-initialized on first use.
  Tensor& grad_buffer();
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  bool defined() const noexcept { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  /// Direct access for optimizers and weight loading; bypasses the graph.
  Tensor& mutable_value() { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  Tensor& mutable_grad() { return node_->grad_buffer(); }
  bool has_grad() const { return !node_->grad.empty(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  const Shape& shape() const { return node_->value.shape(); }
  std::int64_t dim(std::size_t i) const { return node_->value.dim(i); }
  void zero_grad() { node_->grad = Tensor(); }

  const std::shared_ptr<Node>& node() const noexcept { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

Var constant(Tensor value);
Var parameter(Tensor value);

bool grad_enabled() noexcept;

/// Disables graph recording in its scope (inference).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

/// Builds an op output. `backward` receives d(loss)/d(output) and must
/// accumulate into whichever inputs require gradients. When recording is
/// off or no input needs gradients the result is a constant.
Var make_result(Tensor value, std::vector<Var> inputs,
                std::function<void(const Tensor& grad_out)> backward);

/// Seeds d(root)/d(root) = 1 (root must be a scalar) and propagates.
void backward(const Var& root);
/// Propagates an explicit seed gradient of the same shape as root.
void backward(const Var& root, const Tensor& seed);

}  // namespace imloc::ag
