// SPDX-License-Identifier: Apache-2.0
#include "nn/optim.hpp"

#include <cmath>

namespace unic::nn {

AdamW::AdamW(std::vector<ParamGroup> groups, Options opts) : opts_(opts) {
  for (auto& g : groups) {
    for (auto& p : g.params) {
      const size_t n = p.value().numel();
      slots_.push_back({p, std::vector<float>(n, 0.0f), std::vector<float>(n, 0.0f), g.lr,
                        p.shape().size() >= 2});
    }
  }
}

void AdamW::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
  const float b1 = static_cast<float>(opts_.beta1);
  const float b2 = static_cast<float>(opts_.beta2);
  for (Slot& s : slots_) {
    const Tensor& g = s.param.grad();
    if (g.empty()) continue;
    const double lr = s.lr * lr_scale_;
    const float step = static_cast<float>(lr / bc1);
    const float inv_bc2 = static_cast<float>(1.0 / bc2);
    const float decay = s.decay ? static_cast<float>(1.0 - lr * opts_.weight_decay) : 1.0f;
    const float eps = static_cast<float>(opts_.eps);
    auto& w = s.param.mutable_value().data;
    for (size_t i = 0; i < w.size(); ++i) {
      const float gi = g.data[i];
      s.m[i] = b1 * s.m[i] + (1.0f - b1) * gi;
      s.v[i] = b2 * s.v[i] + (1.0f - b2) * gi * gi;
      w[i] = w[i] * decay - step * s.m[i] / (std::sqrt(s.v[i] * inv_bc2) + eps);
    }
  }
}

double clip_grad_norm(const std::vector<Var>& params, double max_norm) {
  double sq = 0.0;
  for (const Var& p : params) {
    for (float g : p.grad().data) sq += static_cast<double>(g) * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const float s = static_cast<float>(max_norm / (norm + 1e-12));
    for (const Var& p : params) {
      Var q = p;
      if (q.grad().empty()) continue;
      for (float& g : q.grad_buffer().data) g *= s;
    }
  }
  return norm;
}

}  // namespace unic::nn
