// SPDX-License-Identifier: Apache-2.0
#include "nn/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace unic::nn {

Var ParamStore::add(const std::string& name, Tensor init) {
  if (index_.count(name)) throw std::invalid_argument("duplicate parameter: " + name);
  Var v = parameter(std::move(init));
  index_[name] = items_.size();
  items_.emplace_back(name, v);
  return v;
}

Var ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
  return items_[it->second].second;
}

size_t ParamStore::scalar_count() const {
  size_t n = 0;
  for (const auto& [_, v] : items_) n += v.value().numel();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& [_, v] : items_) v.zero_grad();
}

Tensor xavier_uniform(int out, int in, std::mt19937_64& rng) {
  const float bound = std::sqrt(6.0f / static_cast<float>(in + out));
  std::uniform_real_distribution<float> u(-bound, bound);
  Tensor t({out, in});
  for (float& v : t.data) v = u(rng);
  return t;
}

Linear::Linear(ParamStore& ps, const std::string& name, int in, int out, std::mt19937_64& rng) {
  weight = ps.add(name + ".weight", xavier_uniform(out, in, rng));
  bias = ps.add(name + ".bias", Tensor({out}, 0.0f));
}

LayerNorm::LayerNorm(ParamStore& ps, const std::string& name, int dim) {
  gamma = ps.add(name + ".gamma", Tensor({dim}, 1.0f));
  beta = ps.add(name + ".beta", Tensor({dim}, 0.0f));
}

Conv2d::Conv2d(ParamStore& ps, const std::string& name, int in, int out, int k, int s, int p,
               std::mt19937_64& rng)
    : ksize(k), stride(s), pad(p) {
  const int fan_in = in * k * k;
  std::normal_distribution<float> nd(0.0f, std::sqrt(2.0f / static_cast<float>(fan_in)));
  Tensor w({out, fan_in});
  for (float& v : w.data) v = nd(rng);
  weight = ps.add(name + ".weight", std::move(w));
  bias = ps.add(name + ".bias", Tensor({out}, 0.0f));
}

MultiHeadAttention::MultiHeadAttention(ParamStore& ps, const std::string& name, int dim, int h,
                                       std::mt19937_64& rng)
    : q(ps, name + ".q", dim, dim, rng),
      k(ps, name + ".k", dim, dim, rng),
      v(ps, name + ".v", dim, dim, rng),
      o(ps, name + ".o", dim, dim, rng),
      heads(h) {}

Var MultiHeadAttention::operator()(const Var& query, const Var& key, const Var& value) const {
  return o(attention(q(query), k(key), v(value), heads));
}

FeedForward::FeedForward(ParamStore& ps, const std::string& name, int dim, int hidden,
                         std::mt19937_64& rng)
    : in(ps, name + ".in", dim, hidden, rng), out(ps, name + ".out", hidden, dim, rng) {}

}  // namespace unic::nn
