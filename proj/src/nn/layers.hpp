// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <random>
#include <string>
#include <vector>

#include "nn/ops.hpp"

namespace unic::nn {

/// Ordered collection of named trainable tensors.
class ParamStore {
 public:
  Var add(const std::string& name, Tensor init);

  const std::vector<std::pair<std::string, Var>>& items() const { return items_; }
  std::vector<std::pair<std::string, Var>>& items() { return items_; }
  Var get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  size_t size() const { return items_.size(); }
  size_t scalar_count() const;
  void zero_grad();

 private:
  std::vector<std::pair<std::string, Var>> items_;
  std::map<std::string, size_t> index_;
};

Tensor xavier_uniform(int out, int in, std::mt19937_64& rng);

struct Linear {
  Var weight;
  Var bias;
  Linear() = default;
  Linear(ParamStore& ps, const std::string& name, int in, int out, std::mt19937_64& rng);
  Var operator()(const Var& x) const { return linear(x, weight, bias); }
};

struct LayerNorm {
  Var gamma;
  Var beta;
  LayerNorm() = default;
  LayerNorm(ParamStore& ps, const std::string& name, int dim);
  Var operator()(const Var& x) const { return layer_norm(x, gamma, beta); }
};

struct Conv2d {
  Var weight;
  Var bias;
  int ksize = 3;
  int stride = 1;
  int pad = 1;
  Conv2d() = default;
  Conv2d(ParamStore& ps, const std::string& name, int in, int out, int ksize, int stride, int pad,
         std::mt19937_64& rng);
  Var operator()(const Var& x) const { return conv2d(x, weight, bias, ksize, stride, pad); }
};

struct MultiHeadAttention {
  Linear q, k, v, o;
  int heads = 1;
  MultiHeadAttention() = default;
  MultiHeadAttention(ParamStore& ps, const std::string& name, int dim, int heads, std::mt19937_64& rng);
  Var operator()(const Var& query, const Var& key, const Var& value) const;
};

struct FeedForward {
  Linear in, out;
  FeedForward() = default;
  FeedForward(ParamStore& ps, const std::string& name, int dim, int hidden, std::mt19937_64& rng);
  Var operator()(const Var& x) const { return out(relu(in(x))); }
};

}  // namespace unic::nn
