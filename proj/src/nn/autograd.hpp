// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "nn/tensor.hpp"

namespace unic::nn {

struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  /// Zero-initialized gradient buffer, allocated on first use.
  Tensor& grad_buffer() {
    if (grad.empty() && !value.empty()) grad = Tensor(value.shape, 0.0f);
    return grad;
  }
  bool has_grad() const { return !grad.empty(); }
};

/// Handle to a graph node. Copies share the node.
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> n) : node_(std::move(n)) {}

  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  Tensor& grad_buffer() { return node_->grad_buffer(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  int rows() const { return node_->value.rows(); }
  int cols() const { return node_->value.cols(); }
  const std::vector<int>& shape() const { return node_->value.shape; }
  void zero_grad() { node_->grad = Tensor(); }
  bool defined() const { return static_cast<bool>(node_); }

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Trainable leaf.
Var parameter(Tensor init);
/// Non-trainable leaf.
Var constant(Tensor value);

/// Graph recording is on by default; NoGradGuard disables it for the current thread.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Creates an op result. Parents and the backward closure are dropped when no
/// parent requires a gradient or recording is disabled.
Var make_result(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward_fn);

/// Reverse-mode sweep from a scalar root (seed 1).
void backward(const Var& root);

}  // namespace unic::nn
