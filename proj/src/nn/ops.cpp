// SPDX-License-Identifier: Apache-2.0
#include "nn/ops.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace unic::nn {

namespace {

void require(bool cond, const char* op, const std::string& detail) {
  if (!cond) throw std::invalid_argument(std::string(op) + ": " + detail);
}

Node& parent(Node& self, size_t i) { return *self.parents[i]; }

}  // namespace

Var matmul(const Var& a, const Var& b) {
  require(a.cols() == b.rows(), "matmul",
          a.value().shape_str() + " x " + b.value().shape_str());
  Tensor out({a.rows(), b.cols()});
  out.mat().noalias() = a.value().mat() * b.value().mat();
  return make_result(std::move(out), {a, b}, [](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    const auto g = self.grad.mat();
    if (pa.requires_grad) pa.grad_buffer().mat().noalias() += g * pb.value.mat().transpose();
    if (pb.requires_grad) pb.grad_buffer().mat().noalias() += pa.value.mat().transpose() * g;
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  require(a.cols() == b.cols(), "matmul_nt",
          a.value().shape_str() + " x " + b.value().shape_str() + "^T");
  Tensor out({a.rows(), b.rows()});
  out.mat().noalias() = a.value().mat() * b.value().mat().transpose();
  return make_result(std::move(out), {a, b}, [](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    const auto g = self.grad.mat();
    if (pa.requires_grad) pa.grad_buffer().mat().noalias() += g * pb.value.mat();
    if (pb.requires_grad) pb.grad_buffer().mat().noalias() += g.transpose() * pa.value.mat();
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  require(x.cols() == weight.cols(), "linear",
          x.value().shape_str() + " with weight " + weight.value().shape_str());
  require(static_cast<int>(bias.value().numel()) == weight.rows(), "linear", "bias size");
  Tensor out({x.rows(), weight.rows()});
  auto m = out.mat();
  m.noalias() = x.value().mat() * weight.value().mat().transpose();
  const Eigen::Map<const Eigen::RowVectorXf> b(bias.value().data.data(), weight.rows());
  m.rowwise() += b;
  return make_result(std::move(out), {x, weight, bias}, [](Node& self) {
    Node& px = parent(self, 0);
    Node& pw = parent(self, 1);
    Node& pb = parent(self, 2);
    const auto g = self.grad.mat();
    if (px.requires_grad) px.grad_buffer().mat().noalias() += g * pw.value.mat();
    if (pw.requires_grad) pw.grad_buffer().mat().noalias() += g.transpose() * px.value.mat();
    if (pb.requires_grad) {
      Eigen::Map<Eigen::RowVectorXf> gb(pb.grad_buffer().data.data(), g.cols());
      gb += g.colwise().sum();
    }
  });
}

Var add(const Var& a, const Var& b) {
  require(a.value().numel() == b.value().numel(), "add",
          a.value().shape_str() + " + " + b.value().shape_str());
  Tensor out = a.value();
  for (size_t i = 0; i < out.numel(); ++i) out.data[i] += b.value().data[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    for (size_t p = 0; p < 2; ++p) {
      Node& n = parent(self, p);
      if (!n.requires_grad) continue;
      auto& g = n.grad_buffer().data;
      for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad.data[i];
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require(a.value().numel() == b.value().numel(), "sub",
          a.value().shape_str() + " - " + b.value().shape_str());
  Tensor out = a.value();
  for (size_t i = 0; i < out.numel(); ++i) out.data[i] -= b.value().data[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    if (pa.requires_grad) {
      auto& g = pa.grad_buffer().data;
      for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad.data[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.grad_buffer().data;
      for (size_t i = 0; i < g.size(); ++i) g[i] -= self.grad.data[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require(a.value().numel() == b.value().numel(), "mul",
          a.value().shape_str() + " * " + b.value().shape_str());
  Tensor out = a.value();
  for (size_t i = 0; i < out.numel(); ++i) out.data[i] *= b.value().data[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    if (pa.requires_grad) {
      auto& g = pa.grad_buffer().data;
      for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad.data[i] * pb.value.data[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.grad_buffer().data;
      for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad.data[i] * pa.value.data[i];
    }
  });
}

Var scale(const Var& a, float s) {
  Tensor out = a.value();
  for (float& v : out.data) v *= s;
  return make_result(std::move(out), {a}, [s](Node& self) {
    auto& g = parent(self, 0).grad_buffer().data;
    for (size_t i = 0; i < g.size(); ++i) g[i] += s * self.grad.data[i];
  });
}

Var add_rowvec(const Var& a, const Var& v) {
  require(static_cast<int>(v.value().numel()) == a.cols(), "add_rowvec",
          a.value().shape_str() + " + row " + v.value().shape_str());
  Tensor out = a.value();
  const Eigen::Map<const Eigen::RowVectorXf> row(v.value().data.data(), a.cols());
  out.mat().rowwise() += row;
  return make_result(std::move(out), {a, v}, [](Node& self) {
    Node& pa = parent(self, 0);
    Node& pv = parent(self, 1);
    if (pa.requires_grad) pa.grad_buffer().mat() += self.grad.mat();
    if (pv.requires_grad) {
      Eigen::Map<Eigen::RowVectorXf> gv(pv.grad_buffer().data.data(), self.grad.cols());
      gv += self.grad.mat().colwise().sum();
    }
  });
}

Var repeat_rows(const Var& row, int n) {
  const int c = static_cast<int>(row.value().numel());
  Tensor out({n, c});
  for (int r = 0; r < n; ++r) std::copy(row.value().data.begin(), row.value().data.end(), out.data.begin() + static_cast<size_t>(r) * c);
  return make_result(std::move(out), {row}, [c](Node& self) {
    Eigen::Map<Eigen::RowVectorXf> g(parent(self, 0).grad_buffer().data.data(), c);
    g += self.grad.mat().colwise().sum();
  });
}

Var relu(const Var& a) {
  Tensor out = a.value();
  for (float& v : out.data) v = v > 0.0f ? v : 0.0f;
  return make_result(std::move(out), {a}, [](Node& self) {
    auto& g = parent(self, 0).grad_buffer().data;
    for (size_t i = 0; i < g.size(); ++i) {
      if (self.value.data[i] > 0.0f) g[i] += self.grad.data[i];
    }
  });
}

Var sigmoid(const Var& a) {
  Tensor out = a.value();
  for (float& v : out.data) v = 1.0f / (1.0f + std::exp(-v));
  return make_result(std::move(out), {a}, [](Node& self) {
    auto& g = parent(self, 0).grad_buffer().data;
    for (size_t i = 0; i < g.size(); ++i) {
      const float s = self.value.data[i];
      g[i] += self.grad.data[i] * s * (1.0f - s);
    }
  });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, float eps) {
  const int n = x.rows();
  const int c = x.cols();
  require(static_cast<int>(gamma.value().numel()) == c && static_cast<int>(beta.value().numel()) == c,
          "layer_norm", "affine size");
  auto xhat = std::make_shared<Tensor>(std::vector<int>{n, c});
  auto rstd = std::make_shared<std::vector<float>>(n);
  Tensor out({n, c});
  const float* gm = gamma.value().data.data();
  const float* bt = beta.value().data.data();
  for (int r = 0; r < n; ++r) {
    const float* row = &x.value().data[static_cast<size_t>(r) * c];
    double mean = 0.0;
    for (int j = 0; j < c; ++j) mean += row[j];
    mean /= c;
    double var = 0.0;
    for (int j = 0; j < c; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= c;
    const float rs = static_cast<float>(1.0 / std::sqrt(var + eps));
    (*rstd)[r] = rs;
    float* xh = &xhat->data[static_cast<size_t>(r) * c];
    float* o = &out.data[static_cast<size_t>(r) * c];
    for (int j = 0; j < c; ++j) {
      xh[j] = static_cast<float>(row[j] - mean) * rs;
      o[j] = xh[j] * gm[j] + bt[j];
    }
  }
  out.shape = x.shape();
  return make_result(std::move(out), {x, gamma, beta}, [xhat, rstd, n, c](Node& self) {
    Node& px = parent(self, 0);
    Node& pg = parent(self, 1);
    Node& pb = parent(self, 2);
    const float* gm = pg.value.data.data();
    float* dg = pg.requires_grad ? pg.grad_buffer().data.data() : nullptr;
    float* db = pb.requires_grad ? pb.grad_buffer().data.data() : nullptr;
    float* dx = px.requires_grad ? px.grad_buffer().data.data() : nullptr;
    std::vector<float> dxh(c);
    for (int r = 0; r < n; ++r) {
      const float* g = &self.grad.data[static_cast<size_t>(r) * c];
      const float* xh = &xhat->data[static_cast<size_t>(r) * c];
      double m1 = 0.0;
      double m2 = 0.0;
      for (int j = 0; j < c; ++j) {
        if (dg) dg[j] += g[j] * xh[j];
        if (db) db[j] += g[j];
        dxh[j] = g[j] * gm[j];
        m1 += dxh[j];
        m2 += dxh[j] * xh[j];
      }
      if (!dx) continue;
      m1 /= c;
      m2 /= c;
      float* d = &dx[static_cast<size_t>(r) * c];
      const float rs = (*rstd)[r];
      for (int j = 0; j < c; ++j) {
        d[j] += rs * (dxh[j] - static_cast<float>(m1) - xh[j] * static_cast<float>(m2));
      }
    }
  });
}

Var attention(const Var& q, const Var& k, const Var& v, int heads) {
  const int nq = q.rows();
  const int nk = k.rows();
  const int d = q.cols();
  require(k.cols() == d && v.cols() == d && v.rows() == nk, "attention",
          q.value().shape_str() + " " + k.value().shape_str() + " " + v.value().shape_str());
  require(heads > 0 && d % heads == 0, "attention", "dimension not divisible by heads");
  const int dh = d / heads;
  const float sc = 1.0f / std::sqrt(static_cast<float>(dh));
  auto probs = std::make_shared<std::vector<MatRM>>(heads);
  Tensor out({nq, d});
  auto om = out.mat();
  const auto qm = q.value().mat();
  const auto km = k.value().mat();
  const auto vm = v.value().mat();
  for (int h = 0; h < heads; ++h) {
    MatRM s = (qm.middleCols(h * dh, dh) * km.middleCols(h * dh, dh).transpose()) * sc;
    for (int r = 0; r < nq; ++r) {
      auto row = s.row(r);
      const float mx = row.maxCoeff();
      row = (row.array() - mx).exp();
      row /= row.sum();
    }
    om.middleCols(h * dh, dh).noalias() = s * vm.middleCols(h * dh, dh);
    (*probs)[h] = std::move(s);
  }
  return make_result(std::move(out), {q, k, v}, [probs, heads, dh, sc](Node& self) {
    Node& pq = parent(self, 0);
    Node& pk = parent(self, 1);
    Node& pv = parent(self, 2);
    const auto g = self.grad.mat();
    const auto qm = pq.value.mat();
    const auto km = pk.value.mat();
    const auto vm = pv.value.mat();
    for (int h = 0; h < heads; ++h) {
      const MatRM& p = (*probs)[h];
      const auto go = g.middleCols(h * dh, dh);
      if (pv.requires_grad) pv.grad_buffer().mat().middleCols(h * dh, dh).noalias() += p.transpose() * go;
      if (!pq.requires_grad && !pk.requires_grad) continue;
      MatRM dp = go * vm.middleCols(h * dh, dh).transpose();
      const Eigen::VectorXf rs = (dp.array() * p.array()).rowwise().sum();
      MatRM ds = (p.array() * (dp.colwise() - rs).array()).matrix() * sc;
      if (pq.requires_grad) pq.grad_buffer().mat().middleCols(h * dh, dh).noalias() += ds * km.middleCols(h * dh, dh);
      if (pk.requires_grad) pk.grad_buffer().mat().middleCols(h * dh, dh).noalias() += ds.transpose() * qm.middleCols(h * dh, dh);
    }
  });
}

namespace {

struct ConvGeom {
  int ci, h, w, k, stride, pad, ho, wo;
};

void im2col(const float* x, const ConvGeom& g, float* cols) {
  const int hw = g.ho * g.wo;
  for (int c = 0; c < g.ci; ++c) {
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        float* dst = cols + static_cast<size_t>((c * g.k + ky) * g.k + kx) * hw;
        for (int oy = 0; oy < g.ho; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          float* drow = dst + static_cast<size_t>(oy) * g.wo;
          if (iy < 0 || iy >= g.h) {
            std::fill(drow, drow + g.wo, 0.0f);
            continue;
          }
          const float* srow = x + (static_cast<size_t>(c) * g.h + iy) * g.w;
          for (int ox = 0; ox < g.wo; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            drow[ox] = (ix >= 0 && ix < g.w) ? srow[ix] : 0.0f;
          }
        }
      }
    }
  }
}

void col2im(const float* cols, const ConvGeom& g, float* dx) {
  const int hw = g.ho * g.wo;
  for (int c = 0; c < g.ci; ++c) {
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        const float* src = cols + static_cast<size_t>((c * g.k + ky) * g.k + kx) * hw;
        for (int oy = 0; oy < g.ho; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.h) continue;
          float* drow = dx + (static_cast<size_t>(c) * g.h + iy) * g.w;
          const float* srow = src + static_cast<size_t>(oy) * g.wo;
          for (int ox = 0; ox < g.wo; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.w) drow[ix] += srow[ox];
          }
        }
      }
    }
  }
}

}  // namespace

Var conv2d(const Var& x, const Var& weight, const Var& bias, int ksize, int stride, int pad) {
  require(x.shape().size() == 3, "conv2d", "input must be [C,H,W], got " + x.value().shape_str());
  ConvGeom g{x.shape()[0], x.shape()[1], x.shape()[2], ksize, stride, pad, 0, 0};
  g.ho = (g.h + 2 * pad - ksize) / stride + 1;
  g.wo = (g.w + 2 * pad - ksize) / stride + 1;
  const int co = weight.rows();
  require(weight.cols() == g.ci * ksize * ksize, "conv2d", "weight " + weight.value().shape_str());
  require(static_cast<int>(bias.value().numel()) == co, "conv2d", "bias size");
  require(g.ho > 0 && g.wo > 0, "conv2d", "empty output");
  const int kk = g.ci * ksize * ksize;
  const int hw = g.ho * g.wo;
  auto cols = std::make_shared<MatRM>(kk, hw);
  im2col(x.value().data.data(), g, cols->data());
  Tensor out({co, g.ho, g.wo});
  MapRM om(out.data.data(), co, hw);
  om.noalias() = weight.value().mat() * (*cols);
  const Eigen::Map<const Eigen::VectorXf> b(bias.value().data.data(), co);
  om.colwise() += b;
  return make_result(std::move(out), {x, weight, bias}, [cols, g, co, hw, kk](Node& self) {
    Node& px = parent(self, 0);
    Node& pw = parent(self, 1);
    Node& pb = parent(self, 2);
    const ConstMapRM go(self.grad.data.data(), co, hw);
    if (pw.requires_grad) pw.grad_buffer().mat().noalias() += go * cols->transpose();
    if (pb.requires_grad) {
      Eigen::Map<Eigen::VectorXf> gb(pb.grad_buffer().data.data(), co);
      gb += go.rowwise().sum();
    }
    if (px.requires_grad) {
      MatRM dcols(kk, hw);
      dcols.noalias() = pw.value.mat().transpose() * go;
      col2im(dcols.data(), g, px.grad_buffer().data.data());
    }
  });
}

Var transpose(const Var& a) {
  Tensor out({a.cols(), a.rows()});
  out.mat() = a.value().mat().transpose();
  return make_result(std::move(out), {a}, [](Node& self) {
    parent(self, 0).grad_buffer().mat() += self.grad.mat().transpose();
  });
}

Var reshape(const Var& a, std::vector<int> shape) {
  require(Tensor::count(shape) == a.value().numel(), "reshape", "element count mismatch");
  Tensor out(std::move(shape), a.value().data);
  return make_result(std::move(out), {a}, [](Node& self) {
    auto& g = parent(self, 0).grad_buffer().data;
    for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad.data[i];
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_rows", "no inputs");
  const int c = parts[0].cols();
  int n = 0;
  for (const Var& p : parts) {
    require(p.cols() == c, "concat_rows", "column mismatch");
    n += p.rows();
  }
  Tensor out({n, c});
  size_t off = 0;
  for (const Var& p : parts) {
    std::copy(p.value().data.begin(), p.value().data.end(), out.data.begin() + off);
    off += p.value().numel();
  }
  return make_result(std::move(out), parts, [](Node& self) {
    size_t off = 0;
    for (auto& p : self.parents) {
      const size_t len = p->value.numel();
      if (p->requires_grad) {
        auto& g = p->grad_buffer().data;
        for (size_t i = 0; i < len; ++i) g[i] += self.grad.data[off + i];
      }
      off += len;
    }
  });
}

Var slice_rows(const Var& a, int begin, int end) {
  require(0 <= begin && begin <= end && end <= a.rows(), "slice_rows", "range");
  const int c = a.cols();
  Tensor out({end - begin, c});
  std::copy(a.value().data.begin() + static_cast<size_t>(begin) * c,
            a.value().data.begin() + static_cast<size_t>(end) * c, out.data.begin());
  return make_result(std::move(out), {a}, [begin, c](Node& self) {
    auto& g = parent(self, 0).grad_buffer().data;
    const size_t off = static_cast<size_t>(begin) * c;
    for (size_t i = 0; i < self.grad.numel(); ++i) g[off + i] += self.grad.data[i];
  });
}

Var slice_cols(const Var& a, int begin, int end) {
  require(0 <= begin && begin <= end && end <= a.cols(), "slice_cols", "range");
  Tensor out({a.rows(), end - begin});
  out.mat() = a.value().mat().middleCols(begin, end - begin);
  return make_result(std::move(out), {a}, [begin, end](Node& self) {
    parent(self, 0).grad_buffer().mat().middleCols(begin, end - begin) += self.grad.mat();
  });
}

Var concat_cols(const Var& a, const Var& b) {
  require(a.rows() == b.rows(), "concat_cols", "row mismatch");
  const int ca = a.cols();
  const int cb = b.cols();
  Tensor out({a.rows(), ca + cb});
  out.mat().leftCols(ca) = a.value().mat();
  out.mat().rightCols(cb) = b.value().mat();
  return make_result(std::move(out), {a, b}, [ca, cb](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    if (pa.requires_grad) pa.grad_buffer().mat() += self.grad.mat().leftCols(ca);
    if (pb.requires_grad) pb.grad_buffer().mat() += self.grad.mat().rightCols(cb);
  });
}

Var gather_rows(const Var& a, const std::vector<int>& index) {
  const int c = a.cols();
  Tensor out({static_cast<int>(index.size()), c});
  for (size_t r = 0; r < index.size(); ++r) {
    require(index[r] >= 0 && index[r] < a.rows(), "gather_rows", "index out of range");
    std::copy_n(a.value().data.begin() + static_cast<size_t>(index[r]) * c, c,
                out.data.begin() + r * c);
  }
  return make_result(std::move(out), {a}, [index, c](Node& self) {
    auto& g = parent(self, 0).grad_buffer().data;
    for (size_t r = 0; r < index.size(); ++r) {
      const size_t dst = static_cast<size_t>(index[r]) * c;
      for (int j = 0; j < c; ++j) g[dst + j] += self.grad.data[r * c + j];
    }
  });
}

namespace {

// Frequencies span 1..kMaxCycles cycles per unit coordinate, geometrically spaced.
constexpr double kMaxCycles = 16.0;

double embed_frequency(int k, int nfreq) {
  if (nfreq <= 1) return 2.0 * std::numbers::pi;
  return 2.0 * std::numbers::pi * std::pow(kMaxCycles, static_cast<double>(k) / (nfreq - 1));
}

}  // namespace

Tensor sine_embedding(const Tensor& points, int dim) {
  require(points.cols() == 2, "sine_embedding", "points must be [n,2]");
  require(dim % 4 == 0, "sine_embedding", "dim must be divisible by 4");
  const int n = points.rows();
  const int half = dim / 2;
  const int nfreq = half / 2;
  Tensor out({n, dim});
  for (int r = 0; r < n; ++r) {
    for (int axis = 0; axis < 2; ++axis) {
      const double p = points(r, axis);
      for (int k = 0; k < nfreq; ++k) {
        const double a = p * embed_frequency(k, nfreq);
        out(r, axis * half + 2 * k) = static_cast<float>(std::sin(a));
        out(r, axis * half + 2 * k + 1) = static_cast<float>(std::cos(a));
      }
    }
  }
  return out;
}

Var sine_embed(const Var& points, int dim) {
  Tensor out = sine_embedding(points.value(), dim);
  return make_result(std::move(out), {points}, [dim](Node& self) {
    Node& pp = parent(self, 0);
    auto& g = pp.grad_buffer();
    const int half = dim / 2;
    const int nfreq = half / 2;
    for (int r = 0; r < pp.value.rows(); ++r) {
      for (int axis = 0; axis < 2; ++axis) {
        double acc = 0.0;
        for (int k = 0; k < nfreq; ++k) {
          const double f = embed_frequency(k, nfreq);
          const double s = self.value(r, axis * half + 2 * k);
          const double c = self.value(r, axis * half + 2 * k + 1);
          acc += f * (self.grad(r, axis * half + 2 * k) * c - self.grad(r, axis * half + 2 * k + 1) * s);
        }
        g(r, axis) += static_cast<float>(acc);
      }
    }
  });
}

Var sum_all(const Var& a) {
  double s = 0.0;
  for (float v : a.value().data) s += v;
  return make_result(Tensor({1}, {static_cast<float>(s)}), {a}, [](Node& self) {
    auto& g = parent(self, 0).grad_buffer().data;
    for (float& v : g) v += self.grad.data[0];
  });
}

Var mean_all(const Var& a) {
  const float inv = 1.0f / static_cast<float>(a.value().numel());
  return scale(sum_all(a), inv);
}

Var dot_const(const Var& a, const Tensor& g) {
  require(a.value().numel() == g.numel(), "dot_const", "size mismatch");
  double s = 0.0;
  for (size_t i = 0; i < g.numel(); ++i) s += static_cast<double>(a.value().data[i]) * g.data[i];
  auto gs = std::make_shared<Tensor>(g);
  return make_result(Tensor({1}, {static_cast<float>(s)}), {a}, [gs](Node& self) {
    auto& dst = parent(self, 0).grad_buffer().data;
    const float seed = self.grad.data[0];
    for (size_t i = 0; i < dst.size(); ++i) dst[i] += seed * gs->data[i];
  });
}

}  // namespace unic::nn
