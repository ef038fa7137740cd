// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <functional>
#include <random>

#include "nn/autograd.hpp"
#include "nn/checkpoint.hpp"
#include "nn/layers.hpp"
#include "nn/ops.hpp"
#include "nn/optim.hpp"

using namespace unic::nn;

namespace {

Tensor random_tensor(std::vector<int> shape, std::mt19937_64& rng, float scale = 1.0f) {
  Tensor t(std::move(shape));
  std::normal_distribution<float> d(0.0f, scale);
  for (auto& v : t.data) v = d(rng);
  return t;
}

// Compares the analytic gradient of sum(w * f(inputs)) with central differences
// for every input element.
void grad_check(const std::function<Var(const std::vector<Var>&)>& f, std::vector<Tensor> inputs, uint64_t seed,
                double tol = 2e-2, float h = 1e-2f) {
  std::mt19937_64 rng(seed);
  std::vector<Var> vars;
  for (auto& t : inputs) vars.push_back(parameter(t));
  const Var out = f(vars);
  const Tensor w = random_tensor(out.shape(), rng);
  backward(dot_const(out, w));

  auto eval = [&](std::vector<Tensor>& in) {
    NoGradGuard ng;
    std::vector<Var> vs;
    for (auto& t : in) vs.push_back(constant(t));
    const Tensor o = f(vs).value();
    double s = 0;
    for (size_t i = 0; i < o.numel(); ++i) s += static_cast<double>(o.data[i]) * w.data[i];
    return s;
  };
  for (size_t k = 0; k < inputs.size(); ++k) {
    for (size_t i = 0; i < inputs[k].numel(); ++i) {
      const float orig = inputs[k].data[i];
      inputs[k].data[i] = orig + h;
      const double fp = eval(inputs);
      inputs[k].data[i] = orig - h;
      const double fm = eval(inputs);
      inputs[k].data[i] = orig;
      const double num = (fp - fm) / (2.0 * h);
      const double ana = vars[k].grad().data[i];
      INFO("input ", k, " element ", i);
      CHECK(std::abs(num - ana) <= tol * std::max(1.0, std::abs(num)));
    }
  }
}

}  // namespace

TEST_CASE("op gradients match finite differences") {
  std::mt19937_64 rng(1);
  SUBCASE("matmul") {
    grad_check([](auto& v) { return matmul(v[0], v[1]); }, {random_tensor({3, 4}, rng), random_tensor({4, 2}, rng)}, 1);
  }
  SUBCASE("matmul_nt") {
    grad_check([](auto& v) { return matmul_nt(v[0], v[1]); }, {random_tensor({3, 4}, rng), random_tensor({5, 4}, rng)},
               2);
  }
  SUBCASE("linear") {
    grad_check([](auto& v) { return linear(v[0], v[1], v[2]); },
               {random_tensor({3, 4}, rng), random_tensor({5, 4}, rng), random_tensor({5}, rng)}, 3);
  }
  SUBCASE("elementwise") {
    grad_check([](auto& v) { return mul(add(v[0], v[1]), sub(v[0], scale(v[1], 0.5f))); },
               {random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)}, 4);
    grad_check([](auto& v) { return sigmoid(v[0]); }, {random_tensor({2, 5}, rng)}, 5);
  }
  SUBCASE("row broadcast and repeat") {
    grad_check([](auto& v) { return add_rowvec(v[0], v[1]); }, {random_tensor({3, 4}, rng), random_tensor({4}, rng)},
               6);
    grad_check([](auto& v) { return repeat_rows(v[0], 3); }, {random_tensor({1, 4}, rng)}, 7);
  }
  SUBCASE("layer norm") {
    grad_check([](auto& v) { return layer_norm(v[0], v[1], v[2]); },
               {random_tensor({3, 6}, rng), random_tensor({6}, rng), random_tensor({6}, rng)}, 8);
  }
  SUBCASE("attention") {
    grad_check([](auto& v) { return attention(v[0], v[1], v[2], 2); },
               {random_tensor({3, 4}, rng), random_tensor({5, 4}, rng), random_tensor({5, 4}, rng)}, 9);
  }
  SUBCASE("conv2d") {
    grad_check([](auto& v) { return conv2d(v[0], v[1], v[2], 3, 2, 1); },
               {random_tensor({2, 6, 6}, rng), random_tensor({3, 2 * 3 * 3}, rng, 0.5f), random_tensor({3}, rng)}, 10);
  }
  SUBCASE("shape ops") {
    grad_check([](auto& v) { return transpose(v[0]); }, {random_tensor({2, 3}, rng)}, 11);
    grad_check([](auto& v) { return concat_rows({v[0], v[1]}); }, {random_tensor({2, 3}, rng), random_tensor({1, 3}, rng)},
               12);
    grad_check([](auto& v) { return concat_cols(v[0], v[1]); }, {random_tensor({2, 3}, rng), random_tensor({2, 2}, rng)},
               13);
    grad_check([](auto& v) { return slice_rows(v[0], 1, 3); }, {random_tensor({4, 2}, rng)}, 14);
    grad_check([](auto& v) { return slice_cols(v[0], 1, 3); }, {random_tensor({2, 4}, rng)}, 15);
    grad_check([](auto& v) { return gather_rows(v[0], {2, 0, 2}); }, {random_tensor({3, 2}, rng)}, 16);
  }
  SUBCASE("sine embedding") {
    grad_check([](auto& v) { return sine_embed(v[0], 8); }, {random_tensor({3, 2}, rng, 0.3f)}, 17, 5e-2, 1e-4f);
  }
}

TEST_CASE("no-grad guard records no graph") {
  std::mt19937_64 rng(2);
  Var a = parameter(random_tensor({2, 2}, rng));
  {
    NoGradGuard ng;
    CHECK_FALSE(grad_enabled());
    Var b = matmul(a, a);
    CHECK_FALSE(b.requires_grad());
    CHECK(b.node()->parents.empty());
  }
  CHECK(grad_enabled());
  CHECK(matmul(a, a).requires_grad());
}

TEST_CASE("shape errors are reported") {
  std::mt19937_64 rng(3);
  Var a = constant(random_tensor({2, 3}, rng)), b = constant(random_tensor({2, 3}, rng));
  CHECK_THROWS_AS(matmul(a, b), std::invalid_argument);
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<float>{1, 2, 3}), std::invalid_argument);
}

TEST_CASE("adamw step matches the closed form") {
  Var p = parameter(Tensor({2, 2}, std::vector<float>{1, -2, 3, 0.5f}));
  p.grad_buffer().data = {0.1f, -0.2f, 0.3f, 0.0f};
  AdamW::Options o;
  o.weight_decay = 0.01;
  AdamW opt({{{p}, 1e-2}}, o);
  opt.step();
  // First step: m_hat = g, v_hat = g^2, so the update is lr * g / (|g| + eps) after decay.
  const std::vector<float> w0{1, -2, 3, 0.5f}, g{0.1f, -0.2f, 0.3f, 0.0f};
  for (int i = 0; i < 4; ++i) {
    const double want = w0[i] * (1 - 1e-2 * 0.01) - 1e-2 * g[i] / (std::abs(g[i]) + 1e-8);
    CHECK(p.value().data[i] == doctest::Approx(want).epsilon(1e-5));
  }
}

TEST_CASE("gradient clipping bounds the global norm") {
  Var a = parameter(Tensor({2}, std::vector<float>{0, 0}));
  Var b = parameter(Tensor({1}, std::vector<float>{0}));
  a.grad_buffer().data = {3, 0};
  b.grad_buffer().data = {4};
  CHECK(clip_grad_norm({a, b}, 1.0) == doctest::Approx(5.0));
  CHECK(a.grad().data[0] == doctest::Approx(0.6));
  CHECK(b.grad().data[0] == doctest::Approx(0.8));
  CHECK(clip_grad_norm({a, b}, 10.0) == doctest::Approx(1.0));
  CHECK(a.grad().data[0] == doctest::Approx(0.6));
}

TEST_CASE("checkpoint round trip") {
  std::mt19937_64 rng(4);
  ParamStore ps;
  ps.add("a.weight", random_tensor({3, 2}, rng));
  ps.add("b", random_tensor({4}, rng));
  const auto path = std::filesystem::temp_directory_path() / "unic_test_nn.ckpt";
  save_checkpoint(path, {{"k", 1}}, ps);
  const CheckpointData d = read_checkpoint(path);
  CHECK(d.config.at("k") == 1);
  ParamStore other;
  other.add("a.weight", Tensor({3, 2}));
  other.add("b", Tensor({4}));
  load_into(d, other);
  CHECK(other.get("a.weight").value().data == ps.get("a.weight").value().data);
  CHECK(other.get("b").value().data == ps.get("b").value().data);

  ParamStore wrong;
  wrong.add("a.weight", Tensor({2, 3}));
  wrong.add("b", Tensor({4}));
  CHECK_THROWS(load_into(d, wrong));
  std::filesystem::remove(path);
  CHECK_THROWS(read_checkpoint(path));
}
