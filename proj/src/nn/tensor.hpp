// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/StdVector>

namespace unic::nn {

using MatRM = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using ConstMapRM = Eigen::Map<const MatRM>;

// Vector-width aligned so Eigen kernels round identically for every allocation.
using FloatBuffer = std::vector<float, Eigen::aligned_allocator<float>>;

/// Dense row-major float tensor. Most ops view it as a matrix of
/// shape[0] rows by numel / shape[0] columns.
struct Tensor {
  std::vector<int> shape;
  FloatBuffer data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s, float fill = 0.0f) : shape(std::move(s)) {
    data.assign(count(shape), fill);
  }
  Tensor(std::vector<int> s, std::span<const float> d) : shape(std::move(s)), data(d.begin(), d.end()) {
    if (data.size() != count(shape)) throw std::invalid_argument("tensor data/shape mismatch");
  }

  static size_t count(const std::vector<int>& s) {
    return std::accumulate(s.begin(), s.end(), size_t{1},
                           [](size_t a, int b) { return a * static_cast<size_t>(b); });
  }

  size_t numel() const { return data.size(); }
  int rows() const { return shape.empty() ? 1 : shape[0]; }
  int cols() const { return rows() == 0 ? 0 : static_cast<int>(numel() / rows()); }
  bool empty() const { return data.empty(); }

  MapRM mat() { return {data.data(), rows(), cols()}; }
  ConstMapRM mat() const { return {data.data(), rows(), cols()}; }
  std::span<float> span() { return data; }
  std::span<const float> span() const { return data; }

  float& operator()(int r, int c) { return data[static_cast<size_t>(r) * cols() + c]; }
  float operator()(int r, int c) const { return data[static_cast<size_t>(r) * cols() + c]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  std::string shape_str() const;
};

inline std::string Tensor::shape_str() const {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

}  // namespace unic::nn
