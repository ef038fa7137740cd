// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "nn/autograd.hpp"

namespace unic::nn {

// Matrix products. a:[n,k] b:[k,m] -> [n,m]; matmul_nt multiplies by b transposed.
Var matmul(const Var& a, const Var& b);
Var matmul_nt(const Var& a, const Var& b);

/// x:[n,in] W:[out,in] b:[out] -> x W^T + b
Var linear(const Var& x, const Var& weight, const Var& bias);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, float s);
/// Adds a row vector v (numel == a.cols()) to every row of a.
Var add_rowvec(const Var& a, const Var& v);
/// Repeats a single-row tensor `n` times.
Var repeat_rows(const Var& row, int n);

Var relu(const Var& a);
Var sigmoid(const Var& a);

/// Row-wise layer normalization with affine gamma/beta (numel == cols).
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, float eps = 1e-5f);

/// Multi-head scaled dot-product attention on already projected inputs.
/// q:[nq,d] k:[nk,d] v:[nk,d] -> [nq,d]
Var attention(const Var& q, const Var& k, const Var& v, int heads);

/// 2-D convolution. x:[Ci,H,W] weight:[Co,Ci*ksize*ksize] bias:[Co] -> [Co,Ho,Wo]
Var conv2d(const Var& x, const Var& weight, const Var& bias, int ksize, int stride, int pad);

Var transpose(const Var& a);
Var reshape(const Var& a, std::vector<int> shape);
Var concat_rows(const std::vector<Var>& parts);
Var slice_rows(const Var& a, int begin, int end);
Var slice_cols(const Var& a, int begin, int end);
Var concat_cols(const Var& a, const Var& b);
Var gather_rows(const Var& a, const std::vector<int>& index);

/// Sinusoidal embedding of 2-D points [n,2] into [n,dim]; differentiable in the points.
Var sine_embed(const Var& points, int dim);
/// Constant version used for fixed token coordinates.
Tensor sine_embedding(const Tensor& points, int dim);

Var sum_all(const Var& a);
Var mean_all(const Var& a);
/// Scalar sum(a * g) with g held constant; injects an external gradient g into a.
Var dot_const(const Var& a, const Tensor& g);

}  // namespace unic::nn
