// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "nn/autograd.hpp"

namespace unic::nn {

struct ParamGroup {
  std::vector<Var> params;
  double lr = 1e-4;
};

/// Adam with decoupled weight decay. Decay applies to tensors of rank >= 2.
class AdamW {
 public:
  struct Options {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-4;
  };

  AdamW(std::vector<ParamGroup> groups, Options opts);

  /// Applies one update from the accumulated gradients; parameters without a
  /// gradient are skipped.
  void step();
  /// Multiplies every group's base learning rate (schedules).
  void set_lr_scale(double s) { lr_scale_ = s; }
  double lr_scale() const { return lr_scale_; }
  long steps() const { return t_; }

 private:
  struct Slot {
    Var param;
    std::vector<float> m, v;
    double lr;
    bool decay;
  };
  std::vector<Slot> slots_;
  Options opts_;
  double lr_scale_ = 1.0;
  long t_ = 0;
};

/// Scales all gradients so their global L2 norm is at most max_norm; returns the norm before clipping.
double clip_grad_norm(const std::vector<Var>& params, double max_norm);

}  // namespace unic::nn
