/* Copyright 2026 The DVG Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "dvg/autograd.hpp"
#include "dvg/error.hpp"

namespace dvg {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

MapC as_mat(const std::vector<double>& v, std::size_t r, std::size_t c) {
  return MapC(v.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}
Map as_mat(std::vector<double>& v, std::size_t r, std::size_t c) {
  return Map(v.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

Tape& common_tape(const Var& a, const Var& b) {
  Tape& t = a.tape();
  t.check_owner(b);
  return t;
}

void require_same_shape(const char* op, const Var& a, const Var& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

void require_rank(const char* op, const Var& a, std::size_t rank) {
  if (a.shape().size() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_string(a.shape()));
  }
}

// Elementwise unary op; dydx(x, y) gives the local derivative.
template <typename F, typename D>
Var unary(const char* op, const Var& a, F f, D dydx) {
  Tape& t = a.tape();
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  const std::size_t ia = a.id();
  return t.record(op, std::move(y), {ia}, [ia, dydx](Tape& tp, std::size_t self) {
    const auto& g = *tp.grad_if_any(self);
    const Tensor& x = tp.value_of(ia);
    const Tensor& y = tp.value_of(self);
    auto& ga = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * dydx(x[i], y[i]);
  });
}

// Decompose a shape around an axis: outer * axis_len * inner.
struct AxisSplit {
  std::size_t outer = 1, len = 1, inner = 1;
};

AxisSplit split_axis(const Shape& s, std::size_t axis) {
  AxisSplit r;
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  r.len = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

Shape reduced_last(const Shape& s) {
  if (s.size() <= 1) return Shape{1};
  return Shape(s.begin(), s.end() - 1);
}

// Products run on Eigen-owned copies. Eigen picks the summation order of
// small and matrix-vector products from operand alignment, so products on
// raw tensor buffers could differ in the last bit from run to run.
RowMat owned(const std::vector<double>& v, std::size_t r, std::size_t c) { return as_mat(v, r, c); }

// Fixed summation order; vectorised reductions vary with buffer alignment.
void add_column_sums(std::vector<double>& dst, const std::vector<double>& g, std::size_t rows,
                     std::size_t cols) {
  if (rows == 0) return;
  std::vector<double> acc(g.begin(), g.begin() + static_cast<std::ptrdiff_t>(cols));
  for (std::size_t r = 1; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) acc[c] += g[r * cols + c];
  }
  for (std::size_t c = 0; c < cols; ++c) dst[c] += acc[c];
}

}  // namespace

Var add(const Var& a, const Var& b) {
  Tape& t = common_tape(a, b);
  require_same_shape("add", a, b);
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return t.record("add", std::move(y), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    const auto& g = *tp.grad_if_any(self);
    for (std::size_t id : {ia, ib}) {
      if (!tp.needs_grad(id)) continue;
      auto& gx = tp.grad_buffer(id);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
  });
}

Var sub(const Var& a, const Var& b) {
  Tape& t = common_tape(a, b);
  require_same_shape("sub", a, b);
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return t.record("sub", std::move(y), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    const auto& g = *tp.grad_if_any(self);
    if (tp.needs_grad(ia)) {
      auto& gx = tp.grad_buffer(ia);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
    if (tp.needs_grad(ib)) {
      auto& gx = tp.grad_buffer(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] -= g[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  Tape& t = common_tape(a, b);
  require_same_shape("mul", a, b);
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return t.record("mul", std::move(y), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    const auto& g = *tp.grad_if_any(self);
    const Tensor& av = tp.value_of(ia);
    const Tensor& bv = tp.value_of(ib);
    if (tp.needs_grad(ia)) {
      auto& gx = tp.grad_buffer(ia);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * bv[i];
    }
    if (tp.needs_grad(ib)) {
      auto& gx = tp.grad_buffer(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * av[i];
    }
  });
}

Var div(const Var& a, const Var& b) {
  Tape& t = common_tape(a, b);
  require_same_shape("div", a, b);
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] /= bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return t.record("div", std::move(y), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    const auto& g = *tp.grad_if_any(self);
    const Tensor& bv = tp.value_of(ib);
    const Tensor& yv = tp.value_of(self);
    if (tp.needs_grad(ia)) {
      auto& gx = tp.grad_buffer(ia);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] / bv[i];
    }
    if (tp.needs_grad(ib)) {
      auto& gx = tp.grad_buffer(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] -= g[i] * yv[i] / bv[i];
    }
  });
}

Var add_scalar(const Var& a, double s) {
  return unary("add_scalar", a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var mul_scalar(const Var& a, double s) {
  return unary("mul_scalar", a, [s](double x) { return x * s; }, [s](double, double) { return s; });
}

Var neg(const Var& a) {
  return unary("neg", a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Var matmul(const Var& a, const Var& b) {
  Tape& t = common_tape(a, b);
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) {
    throw ShapeError("matmul: inner dimensions differ " + shape_string(a.shape()) + " x " +
                     shape_string(b.shape()));
  }
  Tensor y(Shape{m, n});
  as_mat(y.storage(), m, n) = RowMat(owned(a.value().storage(), m, k) * owned(b.value().storage(), k, n));
  const std::size_t ia = a.id(), ib = b.id();
  return t.record("matmul", std::move(y), {ia, ib}, [=](Tape& tp, std::size_t self) {
    const RowMat G = owned(*tp.grad_if_any(self), m, n);
    if (tp.needs_grad(ia)) {
      as_mat(tp.grad_buffer(ia), m, k) += RowMat(G * owned(tp.value_of(ib).storage(), k, n).transpose());
    }
    if (tp.needs_grad(ib)) {
      as_mat(tp.grad_buffer(ib), k, n) += RowMat(owned(tp.value_of(ia).storage(), m, k).transpose() * G);
    }
  });
}

Var transpose(const Var& a) {
  Tape& t = a.tape();
  require_rank("transpose", a, 2);
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  Tensor y(Shape{n, m});
  as_mat(y.storage(), n, m) = as_mat(a.value().storage(), m, n).transpose();
  const std::size_t ia = a.id();
  return t.record("transpose", std::move(y), {ia}, [=](Tape& tp, std::size_t self) {
    as_mat(tp.grad_buffer(ia), m, n) += as_mat(*tp.grad_if_any(self), n, m).transpose();
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  Tape& t = common_tape(x, weight);
  t.check_owner(bias);
  require_rank("linear", x, 2);
  require_rank("linear", weight, 2);
  const std::size_t batch = x.shape()[0], in = x.shape()[1], out = weight.shape()[0];
  if (weight.shape()[1] != in || bias.shape() != Shape{out}) {
    throw ShapeError("linear: input " + shape_string(x.shape()) + ", weight " +
                     shape_string(weight.shape()) + ", bias " + shape_string(bias.shape()));
  }
  Tensor y(Shape{batch, out});
  auto Y = as_mat(y.storage(), batch, out);
  Y = RowMat(owned(x.value().storage(), batch, in) * owned(weight.value().storage(), out, in).transpose());
  Y.rowwise() += as_mat(bias.value().storage(), 1, out).row(0);
  const std::size_t ix = x.id(), iw = weight.id(), ib = bias.id();
  return t.record("linear", std::move(y), {ix, iw, ib}, [=](Tape& tp, std::size_t self) {
    const RowMat G = owned(*tp.grad_if_any(self), batch, out);
    if (tp.needs_grad(ix)) {
      as_mat(tp.grad_buffer(ix), batch, in) += RowMat(G * owned(tp.value_of(iw).storage(), out, in));
    }
    if (tp.needs_grad(iw)) {
      as_mat(tp.grad_buffer(iw), out, in) += RowMat(G.transpose() * owned(tp.value_of(ix).storage(), batch, in));
    }
    if (tp.needs_grad(ib)) {
      add_column_sums(tp.grad_buffer(ib), *tp.grad_if_any(self), batch, out);
    }
  });
}

Var add_row(const Var& x, const Var& b) {
  Tape& t = common_tape(x, b);
  require_rank("add_row", x, 2);
  const std::size_t rows = x.shape()[0], cols = x.shape()[1];
  if (b.shape() != Shape{cols}) {
    throw ShapeError("add_row: " + shape_string(x.shape()) + " + " + shape_string(b.shape()));
  }
  Tensor y = x.value();
  as_mat(y.storage(), rows, cols).rowwise() += as_mat(b.value().storage(), 1, cols).row(0);
  const std::size_t ix = x.id(), ib = b.id();
  return t.record("add_row", std::move(y), {ix, ib}, [=](Tape& tp, std::size_t self) {
    const auto& g = *tp.grad_if_any(self);
    if (tp.needs_grad(ix)) {
      auto& gx = tp.grad_buffer(ix);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
    if (tp.needs_grad(ib)) {
      add_column_sums(tp.grad_buffer(ib), g, rows, cols);
    }
  });
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no operands");
  Tape& t = parts.front().tape();
  const Shape& s0 = parts.front().shape();
  if (axis >= s0.size()) throw ShapeError("concat: axis out of range for " + shape_string(s0));
  Shape out_shape = s0;
  out_shape[axis] = 0;
  for (const Var& p : parts) {
    t.check_owner(p);
    const Shape& s = p.shape();
    bool ok = s.size() == s0.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = i == axis || s[i] == s0[i];
    if (!ok) {
      throw ShapeError("concat: " + shape_string(s) + " incompatible with " + shape_string(s0) +
                       " along axis " + std::to_string(axis));
    }
    out_shape[axis] += s[axis];
  }
  const AxisSplit os = split_axis(out_shape, axis);
  Tensor y(out_shape);
  std::vector<std::size_t> ids, lens;
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const std::size_t len = p.shape()[axis];
    const Tensor& v = p.value();
    for (std::size_t o = 0; o < os.outer; ++o) {
      std::copy_n(v.storage().begin() + o * len * os.inner, len * os.inner,
                  y.storage().begin() + (o * os.len + offset) * os.inner);
    }
    ids.push_back(p.id());
    lens.push_back(len);
    offset += len;
  }
  return t.record("concat", std::move(y), ids, [ids, lens, os](Tape& tp, std::size_t self) {
    const auto& g = *tp.grad_if_any(self);
    std::size_t offset = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const std::size_t len = lens[k];
      if (tp.needs_grad(ids[k])) {
        auto& gx = tp.grad_buffer(ids[k]);
        for (std::size_t o = 0; o < os.outer; ++o) {
          const double* src = g.data() + (o * os.len + offset) * os.inner;
          double* dst = gx.data() + o * len * os.inner;
          for (std::size_t i = 0; i < len * os.inner; ++i) dst[i] += src[i];
        }
      }
      offset += len;
    }
  });
}

Var concat(const Var& a, const Var& b, std::size_t axis) {
  const Var parts[] = {a, b};
  return concat(std::span<const Var>(parts), axis);
}

Var slice(const Var& a, std::size_t axis, std::size_t begin, std::size_t end) {
  Tape& t = a.tape();
  const Shape& s = a.shape();
  if (axis >= s.size() || begin >= end || end > s[axis]) {
    throw ShapeError("slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") out of range for " + shape_string(s) + " axis " + std::to_string(axis));
  }
  const AxisSplit is = split_axis(s, axis);
  Shape out_shape = s;
  out_shape[axis] = end - begin;
  const std::size_t len = end - begin;
  Tensor y(out_shape);
  const Tensor& v = a.value();
  for (std::size_t o = 0; o < is.outer; ++o) {
    std::copy_n(v.storage().begin() + (o * is.len + begin) * is.inner, len * is.inner,
                y.storage().begin() + o * len * is.inner);
  }
  const std::size_t ia = a.id();
  return t.record("slice", std::move(y), {ia}, [=](Tape& tp, std::size_t self) {
    const auto& g = *tp.grad_if_any(self);
    auto& gx = tp.grad_buffer(ia);
    for (std::size_t o = 0; o < is.outer; ++o) {
      const double* src = g.data() + o * len * is.inner;
      double* dst = gx.data() + (o * is.len + begin) * is.inner;
      for (std::size_t i = 0; i < len * is.inner; ++i) dst[i] += src[i];
    }
  });
}

Var sum(const Var& a) {
  Tape& t = a.tape();
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  const std::size_t ia = a.id();
  return t.record("sum", Tensor::scalar(s), {ia}, [ia](Tape& tp, std::size_t self) {
    const double g = (*tp.grad_if_any(self))[0];
    for (double& gx : tp.grad_buffer(ia)) gx += g;
  });
}

Var mean(const Var& a) { return mul_scalar(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var sum_last(const Var& a) {
  Tape& t = a.tape();
  const Shape& s = a.shape();
  const std::size_t n = s.back();
  const std::size_t rows = a.value().size() / n;
  Tensor y(reduced_last(s));
  const Tensor& v = a.value();
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += v[r * n + j];
    y[r] = acc;
  }
  const std::size_t ia = a.id();
  return t.record("sum_last", std::move(y), {ia}, [=](Tape& tp, std::size_t self) {
    const auto& g = *tp.grad_if_any(self);
    auto& gx = tp.grad_buffer(ia);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < n; ++j) gx[r * n + j] += g[r];
  });
}

Var l2_norm(const Var& a) {
  Tape& t = a.tape();
  const Shape& s = a.shape();
  const std::size_t n = s.back();
  const std::size_t rows = a.value().size() / n;
  Tensor y(reduced_last(s));
  const Tensor& v = a.value();
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += v[r * n + j] * v[r * n + j];
    y[r] = std::sqrt(acc);
  }
  const std::size_t ia = a.id();
  return t.record("l2_norm", std::move(y), {ia}, [=](Tape& tp, std::size_t self) {
    const auto& g = *tp.grad_if_any(self);
    const Tensor& x = tp.value_of(ia);
    const Tensor& norm = tp.value_of(self);
    auto& gx = tp.grad_buffer(ia);
    for (std::size_t r = 0; r < rows; ++r) {
      if (norm[r] == 0.0) continue;  // subgradient 0 at the origin
      const double k = g[r] / norm[r];
      for (std::size_t j = 0; j < n; ++j) gx[r * n + j] += k * x[r * n + j];
    }
  });
}

Var l1_norm(const Var& a) { return sum_last(abs(a)); }

Var normalize(const Var& a) {
  Tape& t = a.tape();
  const Shape& s = a.shape();
  const std::size_t n = s.back();
  const std::size_t rows = a.value().size() / n;
  const Tensor& v = a.value();
  Tensor y(s);
  std::vector<double> norms(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += v[r * n + j] * v[r * n + j];
    norms[r] = std::sqrt(acc);
    if (norms[r] == 0.0) throw NumericError("normalize: zero-norm row " + std::to_string(r));
    for (std::size_t j = 0; j < n; ++j) y[r * n + j] = v[r * n + j] / norms[r];
  }
  const std::size_t ia = a.id();
  return t.record("normalize", std::move(y), {ia}, [=](Tape& tp, std::size_t self) {
    const auto& g = *tp.grad_if_any(self);
    const Tensor& yv = tp.value_of(self);
    auto& gx = tp.grad_buffer(ia);
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += g[r * n + j] * yv[r * n + j];
      for (std::size_t j = 0; j < n; ++j)
        gx[r * n + j] += (g[r * n + j] - yv[r * n + j] * dot) / norms[r];
    }
  });
}

Var exp(const Var& a) {
  return unary("exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(const Var& a) {
  return unary("log", a, [](double x) { return std::log(x); },
               [](double x, double) { return 1.0 / x; });
}

Var sqrt(const Var& a) {
  return unary("sqrt", a, [](double x) { return std::sqrt(x); },
               [](double, double y) { return 0.5 / y; });
}

Var square(const Var& a) {
  return unary("square", a, [](double x) { return x * x; },
               [](double x, double) { return 2.0 * x; });
}

Var abs(const Var& a) {
  return unary("abs", a, [](double x) { return std::abs(x); },
               [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var tanh(const Var& a) {
  return unary("tanh", a, [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(const Var& a) {
  return unary(
      "sigmoid", a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var leaky_relu(const Var& a, double slope) {
  return unary("leaky_relu", a, [slope](double x) { return x > 0.0 ? x : slope * x; },
               [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Var clamp(const Var& a, double lo, double hi) {
  return unary("clamp", a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
               [lo, hi](double x, double) { return (x < lo || x > hi) ? 0.0 : 1.0; });
}

Var softmax_xent(const Var& logits, std::span<const std::size_t> labels) {
  Tape& t = logits.tape();
  require_rank("softmax_xent", logits, 2);
  const std::size_t batch = logits.shape()[0], classes = logits.shape()[1];
  if (labels.size() != batch) {
    throw ShapeError("softmax_xent: " + std::to_string(labels.size()) + " labels for batch " +
                     std::to_string(batch));
  }
  const Tensor& z = logits.value();
  Tensor probs(Shape{batch, classes});
  double loss = 0.0;
  for (std::size_t r = 0; r < batch; ++r) {
    if (labels[r] >= classes) {
      throw ShapeError("softmax_xent: label " + std::to_string(labels[r]) + " out of range for " +
                       std::to_string(classes) + " classes");
    }
    double mx = z[r * classes];
    for (std::size_t c = 1; c < classes; ++c) mx = std::max(mx, z[r * classes + c]);
    double se = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      probs[r * classes + c] = std::exp(z[r * classes + c] - mx);
      se += probs[r * classes + c];
    }
    for (std::size_t c = 0; c < classes; ++c) probs[r * classes + c] /= se;
    loss += (mx + std::log(se)) - z[r * classes + labels[r]];
  }
  loss /= static_cast<double>(batch);
  std::vector<std::size_t> lab(labels.begin(), labels.end());
  const std::size_t il = logits.id();
  return t.record("softmax_xent", Tensor::scalar(loss), {il},
                  [il, lab, probs = std::move(probs), batch, classes](Tape& tp, std::size_t self) {
                    const double g = (*tp.grad_if_any(self))[0] / static_cast<double>(batch);
                    auto& gx = tp.grad_buffer(il);
                    for (std::size_t r = 0; r < batch; ++r) {
                      for (std::size_t c = 0; c < classes; ++c) {
                        const double onehot = c == lab[r] ? 1.0 : 0.0;
                        gx[r * classes + c] += g * (probs[r * classes + c] - onehot);
                      }
                    }
                  });
}

}  // namespace dvg
