// SPDX-License-Identifier: Apache-2.0
#include "nn/autograd.hpp"

#include <stdexcept>
#include <unordered_set>

namespace unic::nn {

namespace {
thread_local bool t_grad_enabled = true;
}

Var parameter(Tensor init) {
  auto n = std::make_shared<Node>();
  n->value = std::move(init);
  n->requires_grad = true;
  return Var(std::move(n));
}

Var constant(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return Var(std::move(n));
}

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

Var make_result(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward_fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  bool needs = false;
  if (t_grad_enabled) {
    for (const Var& p : parents) needs = needs || p.requires_grad();
  }
  if (needs) {
    n->requires_grad = true;
    n->parents.reserve(parents.size());
    for (const Var& p : parents) n->parents.push_back(p.node());
    n->backward_fn = std::move(backward_fn);
  }
  return Var(std::move(n));
}

void backward(const Var& root) {
  if (!root.defined()) throw std::invalid_argument("backward on undefined variable");
  if (root.value().numel() != 1) throw std::invalid_argument("backward root must be scalar");
  if (!root.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->grad_buffer().data[0] += 1.0f;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->has_grad()) n->backward_fn(*n);
  }
  // Interior nodes keep their gradients until the graph is released.
}

}  // namespace unic::nn
