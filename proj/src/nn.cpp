// Copyright 2026 The prosody authors
// SPDX-License-Identifier: Apache-2.0

#include "prosody/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "prosody/error.hpp"
#include "prosody/kernels.hpp"

namespace prosody::nn {

namespace {

const char* const kComponent = "neural_core";

void require(bool ok, const std::string& what) {
  if (!ok) throw invalid_argument(kComponent, what);
}

std::string dims(const Tape& t, Var v) {
  return std::to_string(t.rows(v)) + "x" + std::to_string(t.cols(v));
}

void gemm(std::size_t n, std::size_t m, std::size_t k, bool ta, bool tb, bool acc,
          const double* a, const double* b, double* c) {
  kernels::omp::gemm(kernels::GemmShape{n, m, k, ta, tb, acc}, a, b, c);
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

ValueArray::ValueArray(std::vector<std::size_t> dims) : shape(std::move(dims)) {
  const std::size_t n =
      std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  data.assign(n, 0.0);
  grad.assign(n, 0.0);
}

std::size_t ParameterSet::add(const std::string& name, std::vector<std::size_t> shape) {
  require(!contains(name), "duplicate parameter " + name);
  Entry e{name, ValueArray(std::move(shape)), {}};
  e.adam.m.assign(e.value.size(), 0.0);
  e.adam.v.assign(e.value.size(), 0.0);
  entries_.push_back(std::move(e));
  return entries_.size() - 1;
}

std::size_t ParameterSet::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (entries_[i].name == name) return i;
  throw Error(ErrorKind::kNotFound, kComponent, "no parameter named " + std::string(name));
}

bool ParameterSet::contains(std::string_view name) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const Entry& e) { return e.name == name; });
}

std::size_t ParameterSet::total_elements() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& e : entries_) std::fill(e.value.grad.begin(), e.value.grad.end(), 0.0);
}

GradBuffer::GradBuffer(const ParameterSet& params) {
  grads.resize(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) grads[i].assign(params.value(i).size(), 0.0);
}

void GradBuffer::add_into(ParameterSet& params) const {
  for (std::size_t i = 0; i < grads.size(); ++i) {
    auto& g = params.value(i).grad;
    for (std::size_t j = 0; j < g.size(); ++j) g[j] += grads[i][j];
  }
}

// ---------------------------------------------------------------------------
// Tape

Var Tape::constant(std::size_t rows, std::size_t cols, std::vector<double> value) {
  require(value.size() == rows * cols, "constant: data size does not match shape");
  return push(rows, cols, std::move(value), nullptr);
}

Var Tape::parameter(const ValueArray& p, std::span<double> sink) {
  require(sink.empty() || sink.size() == p.size(), "parameter: gradient sink size mismatch");
  std::size_t rows = 1, cols = p.size();
  if (p.shape.size() == 2) {
    rows = p.shape[0];
    cols = p.shape[1];
  } else if (p.shape.size() == 3) {
    rows = p.shape[0] * p.shape[1];
    cols = p.shape[2];
  }
  Var v = push(rows, cols, p.data, nullptr);
  nodes_[v.id].sink = sink;
  return v;
}

Var Tape::push(std::size_t rows, std::size_t cols, std::vector<double> value, Backward back) {
  Node n;
  n.rows = rows;
  n.cols = cols;
  n.grad.assign(value.size(), 0.0);
  n.value = std::move(value);
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Matrix Tape::to_matrix(Var v) const {
  Matrix m;
  m.rows = rows(v);
  m.cols = cols(v);
  m.data = nodes_[v.id].value;
  return m;
}

void Tape::backward(Var root) {
  require(nodes_[root.id].value.size() == 1, "backward: root must be a scalar");
  for (auto& n : nodes_) std::fill(n.grad.begin(), n.grad.end(), 0.0);
  nodes_[root.id].grad[0] = 1.0;
  for (std::size_t i = root.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.back) n.back(*this, Var{i});
    if (!n.sink.empty())
      for (std::size_t j = 0; j < n.grad.size(); ++j) n.sink[j] += n.grad[j];
  }
}

// ---------------------------------------------------------------------------
// Operations

Var matmul(Tape& t, Var a, Var b) {
  require(t.cols(a) == t.rows(b), "matmul: shape mismatch " + dims(t, a) + " * " + dims(t, b));
  const std::size_t n = t.rows(a), k = t.cols(a), m = t.cols(b);
  std::vector<double> out(n * m);
  gemm(n, m, k, false, false, false, t.value(a).data(), t.value(b).data(), out.data());
  return t.push(n, m, std::move(out), [a, b, n, m, k](Tape& tp, Var self) {
    const double* g = tp.grad(self).data();
    gemm(n, k, m, false, true, true, g, tp.value(b).data(), tp.grad(a).data());
    gemm(k, m, n, true, false, true, tp.value(a).data(), g, tp.grad(b).data());
  });
}

Var add(Tape& t, Var a, Var b) {
  require(t.rows(a) == t.rows(b) && t.cols(a) == t.cols(b),
          "add: shape mismatch " + dims(t, a) + " + " + dims(t, b));
  const auto va = t.value(a), vb = t.value(b);
  std::vector<double> out(va.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] + vb[i];
  return t.push(t.rows(a), t.cols(a), std::move(out), [a, b](Tape& tp, Var self) {
    const auto g = tp.grad(self);
    auto ga = tp.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    auto gb = tp.grad(b);
    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
  });
}

Var scale(Tape& t, Var a, double factor) {
  const auto va = t.value(a);
  std::vector<double> out(va.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] * factor;
  return t.push(t.rows(a), t.cols(a), std::move(out), [a, factor](Tape& tp, Var self) {
    const auto g = tp.grad(self);
    auto ga = tp.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += factor * g[i];
  });
}

Var tanh(Tape& t, Var a) {
  const auto va = t.value(a);
  std::vector<double> out(va.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(va[i]);
  return t.push(t.rows(a), t.cols(a), std::move(out), [a](Tape& tp, Var self) {
    const auto g = tp.grad(self);
    const auto y = tp.value(self);
    auto ga = tp.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Var dense(Tape& t, Var x, Var w, Var b, Activation act) {
  require(t.cols(x) == t.rows(w), "dense: shape mismatch " + dims(t, x) + " * " + dims(t, w));
  require(t.rows(b) * t.cols(b) == t.cols(w), "dense: bias width mismatch");
  const std::size_t n = t.rows(x), in = t.cols(x), out_dim = t.cols(w);
  std::vector<double> y(n * out_dim);
  gemm(n, out_dim, in, false, false, false, t.value(x).data(), t.value(w).data(), y.data());
  const auto vb = t.value(b);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < out_dim; ++c) {
      double& v = y[r * out_dim + c];
      v += vb[c];
      if (act == Activation::kRelu) v = v > 0.0 ? v : 0.0;
      else if (act == Activation::kTanh) v = std::tanh(v);
    }
  return t.push(n, out_dim, std::move(y), [x, w, b, n, in, out_dim, act](Tape& tp, Var self) {
    const auto g = tp.grad(self);
    const auto y = tp.value(self);
    std::vector<double> dz(g.begin(), g.end());
    for (std::size_t i = 0; i < dz.size(); ++i) {
      if (act == Activation::kRelu) dz[i] = y[i] > 0.0 ? dz[i] : 0.0;
      else if (act == Activation::kTanh) dz[i] *= 1.0 - y[i] * y[i];
    }
    gemm(n, in, out_dim, false, true, true, dz.data(), tp.value(w).data(), tp.grad(x).data());
    gemm(in, out_dim, n, true, false, true, tp.value(x).data(), dz.data(), tp.grad(w).data());
    auto gb = tp.grad(b);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < out_dim; ++c) gb[c] += dz[r * out_dim + c];
  });
}

Var gru_cell(Tape& t, Var ax, Var h, Var u, Var b) {
  const std::size_t n = t.rows(ax), hid = t.cols(h);
  const std::size_t g3 = 3 * hid;
  require(t.rows(h) == n, "gru_cell: batch mismatch between input and h");
  require(t.cols(ax) == g3, "gru_cell: projected input must have width " + std::to_string(g3) +
                                ", got " + dims(t, ax));
  require(t.rows(u) == hid && t.cols(u) == g3, "gru_cell: U shape mismatch " + dims(t, u));
  require(t.rows(b) * t.cols(b) == g3, "gru_cell: bias width mismatch");

  std::vector<double> uh(n * g3);
  gemm(n, g3, hid, false, false, false, t.value(h).data(), t.value(u).data(), uh.data());
  const auto va = t.value(ax);
  const auto vb = t.value(b);
  const auto vh = t.value(h);
  // Saved per row: z, r, n, then U_n h.
  std::vector<double> saved(n * 4 * hid);
  std::vector<double> out(n * hid);
  for (std::size_t r = 0; r < n; ++r) {
    const double* a = va.data() + r * g3;
    const double* q = uh.data() + r * g3;
    double* sv = saved.data() + r * 4 * hid;
    for (std::size_t j = 0; j < hid; ++j) {
      const double z = sigmoid(a[j] + q[j] + vb[j]);
      const double rr = sigmoid(a[hid + j] + q[hid + j] + vb[hid + j]);
      const double nn = std::tanh(a[2 * hid + j] + rr * q[2 * hid + j] + vb[2 * hid + j]);
      sv[j] = z;
      sv[hid + j] = rr;
      sv[2 * hid + j] = nn;
      sv[3 * hid + j] = q[2 * hid + j];
      out[r * hid + j] = (1.0 - z) * nn + z * vh[r * hid + j];
    }
  }

  return t.push(n, hid, std::move(out), [ax, h, u, b, n, hid, saved = std::move(saved)](Tape& tp, Var self) {
    const std::size_t g3 = 3 * hid;
    const auto g = tp.grad(self);
    const auto vh = tp.value(h);
    std::vector<double> da(n * g3), du(n * g3);
    auto gh = tp.grad(h);
    for (std::size_t r = 0; r < n; ++r) {
      const double* sv = saved.data() + r * 4 * hid;
      for (std::size_t j = 0; j < hid; ++j) {
        const double z = sv[j], rr = sv[hid + j], nn = sv[2 * hid + j], un = sv[3 * hid + j];
        const double gy = g[r * hid + j];
        const double dn = gy * (1.0 - z);
        const double dz = gy * (vh[r * hid + j] - nn);
        gh[r * hid + j] += gy * z;
        const double dpre_n = dn * (1.0 - nn * nn);
        const double dpre_r = dpre_n * un * rr * (1.0 - rr);
        const double dpre_z = dz * z * (1.0 - z);
        da[r * g3 + j] = dpre_z;
        da[r * g3 + hid + j] = dpre_r;
        da[r * g3 + 2 * hid + j] = dpre_n;
        du[r * g3 + j] = dpre_z;
        du[r * g3 + hid + j] = dpre_r;
        du[r * g3 + 2 * hid + j] = dpre_n * rr;
      }
    }
    auto ga = tp.grad(ax);
    for (std::size_t i = 0; i < da.size(); ++i) ga[i] += da[i];
    gemm(n, hid, g3, false, true, true, du.data(), tp.value(u).data(), gh.data());
    gemm(hid, g3, n, true, false, true, vh.data(), du.data(), tp.grad(u).data());
    auto gb = tp.grad(b);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t j = 0; j < g3; ++j) gb[j] += da[r * g3 + j];
  });
}

Var gru_step(Tape& t, Var x, Var h, Var w, Var u, Var b) {
  require(t.rows(x) == t.rows(h), "gru_step: batch mismatch between x and h");
  require(t.cols(w) == 3 * t.cols(h), "gru_step: W must have " + std::to_string(3 * t.cols(h)) +
                                          " columns, got " + dims(t, w));
  return gru_cell(t, matmul(t, x, w), h, u, b);
}

Var gather_rows(Tape& t, Var table, std::span<const int> indices) {
  const std::size_t c = t.cols(table), rows = t.rows(table);
  const auto v = t.value(table);
  std::vector<double> out(indices.size() * c, 0.0);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0) continue;
    const auto k = static_cast<std::size_t>(indices[i]);
    require(k < rows, "gather_rows: index " + std::to_string(k) + " out of range");
    std::copy(v.begin() + static_cast<long>(k * c), v.begin() + static_cast<long>((k + 1) * c),
              out.begin() + static_cast<long>(i * c));
  }
  std::vector<int> idx(indices.begin(), indices.end());
  const std::size_t n = idx.size();
  return t.push(n, c, std::move(out), [table, c, idx = std::move(idx)](Tape& tp, Var self) {
    const auto g = tp.grad(self);
    auto gt = tp.grad(table);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] < 0) continue;
      const auto k = static_cast<std::size_t>(idx[i]);
      for (std::size_t j = 0; j < c; ++j) gt[k * c + j] += g[i * c + j];
    }
  });
}

void conv1d_values(std::span<const double> x, std::size_t frames, std::size_t cin,
                   std::span<const double> kernel, std::size_t width, std::size_t cout,
                   std::span<const double> bias, std::span<double> y) {
  const long half = static_cast<long>(width / 2);
  for (std::size_t r = 0; r < frames; ++r)
    for (std::size_t o = 0; o < cout; ++o) y[r * cout + o] = bias.empty() ? 0.0 : bias[o];
  for (std::size_t k = 0; k < width; ++k) {
    const long shift = static_cast<long>(k) - half;
    // Output rows whose shifted input row exists.
    const long t0 = std::max(0L, -shift);
    const long t1 = std::min(static_cast<long>(frames), static_cast<long>(frames) - shift);
    if (t1 <= t0) continue;
    gemm(static_cast<std::size_t>(t1 - t0), cout, cin, false, false, true,
         x.data() + static_cast<std::size_t>(t0 + shift) * cin, kernel.data() + k * cin * cout,
         y.data() + static_cast<std::size_t>(t0) * cout);
  }
}

Var conv1d(Tape& t, Var x, Var kernel, std::size_t width, std::optional<Var> bias) {
  require(width % 2 == 1, "conv1d: kernel width must be odd, got " + std::to_string(width));
  const std::size_t frames = t.rows(x), cin = t.cols(x), cout = t.cols(kernel);
  require(t.rows(kernel) == width * cin, "conv1d: kernel shape mismatch " + dims(t, kernel) +
                                             " for input " + dims(t, x));
  if (bias) require(t.rows(*bias) * t.cols(*bias) == cout, "conv1d: bias width mismatch");
  std::vector<double> y(frames * cout);
  conv1d_values(t.value(x), frames, cin, t.value(kernel), width, cout,
                bias ? t.value(*bias) : std::span<const double>{}, y);
  return t.push(frames, cout, std::move(y), [x, kernel, bias, width, frames, cin, cout](Tape& tp, Var self) {
    const auto g = tp.grad(self);
    const long half = static_cast<long>(width / 2);
    for (std::size_t k = 0; k < width; ++k) {
      const long shift = static_cast<long>(k) - half;
      const long t0 = std::max(0L, -shift);
      const long t1 = std::min(static_cast<long>(frames), static_cast<long>(frames) - shift);
      if (t1 <= t0) continue;
      const std::size_t rows = static_cast<std::size_t>(t1 - t0);
      const double* gy = g.data() + static_cast<std::size_t>(t0) * cout;
      gemm(rows, cin, cout, false, true, true, gy, tp.value(kernel).data() + k * cin * cout,
           tp.grad(x).data() + static_cast<std::size_t>(t0 + shift) * cin);
      gemm(cin, cout, rows, true, false, true,
           tp.value(x).data() + static_cast<std::size_t>(t0 + shift) * cin, gy,
           tp.grad(kernel).data() + k * cin * cout);
    }
    if (bias) {
      auto gb = tp.grad(*bias);
      for (std::size_t r = 0; r < frames; ++r)
        for (std::size_t o = 0; o < cout; ++o) gb[o] += g[r * cout + o];
    }
  });
}

Var concat_cols(Tape& t, std::span<const Var> parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  const std::size_t n = t.rows(parts[0]);
  std::size_t width = 0;
  for (Var p : parts) {
    require(t.rows(p) == n, "concat_cols: row count mismatch");
    width += t.cols(p);
  }
  std::vector<double> out(n * width);
  std::size_t off = 0;
  for (Var p : parts) {
    const auto v = t.value(p);
    const std::size_t c = t.cols(p);
    for (std::size_t r = 0; r < n; ++r)
      std::copy(v.begin() + static_cast<long>(r * c), v.begin() + static_cast<long>((r + 1) * c),
                out.begin() + static_cast<long>(r * width + off));
    off += c;
  }
  std::vector<Var> saved(parts.begin(), parts.end());
  return t.push(n, width, std::move(out), [saved = std::move(saved), n, width](Tape& tp, Var self) {
    const auto g = tp.grad(self);
    std::size_t off = 0;
    for (Var p : saved) {
      const std::size_t c = tp.cols(p);
      auto gp = tp.grad(p);
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < c; ++j) gp[r * c + j] += g[r * width + off + j];
      off += c;
    }
  });
}

Var row(Tape& t, Var a, std::size_t r) {
  require(r < t.rows(a), "row: index out of range");
  const std::size_t c = t.cols(a);
  const auto v = t.value(a);
  std::vector<double> out(v.begin() + static_cast<long>(r * c), v.begin() + static_cast<long>((r + 1) * c));
  return t.push(1, c, std::move(out), [a, r, c](Tape& tp, Var self) {
    const auto g = tp.grad(self);
    auto ga = tp.grad(a);
    for (std::size_t j = 0; j < c; ++j) ga[r * c + j] += g[j];
  });
}

Var stack_rows(Tape& t, std::span<const Var> rows) {
  require(!rows.empty(), "stack_rows: no inputs");
  const std::size_t c = t.cols(rows[0]);
  std::size_t n = 0;
  for (Var v : rows) {
    require(t.cols(v) == c, "stack_rows: column mismatch");
    n += t.rows(v);
  }
  std::vector<double> out;
  out.reserve(n * c);
  for (Var v : rows) {
    const auto val = t.value(v);
    out.insert(out.end(), val.begin(), val.end());
  }
  std::vector<Var> saved(rows.begin(), rows.end());
  return t.push(n, c, std::move(out), [saved = std::move(saved)](Tape& tp, Var self) {
    const auto g = tp.grad(self);
    std::size_t off = 0;
    for (Var v : saved) {
      auto gv = tp.grad(v);
      for (std::size_t j = 0; j < gv.size(); ++j) gv[j] += g[off + j];
      off += gv.size();
    }
  });
}

Var broadcast_rows(Tape& t, Var a, std::size_t n) {
  require(t.rows(a) == 1, "broadcast_rows: input must be a single row");
  const std::size_t c = t.cols(a);
  const auto v = t.value(a);
  std::vector<double> out(n * c);
  for (std::size_t r = 0; r < n; ++r) std::copy(v.begin(), v.end(), out.begin() + static_cast<long>(r * c));
  return t.push(n, c, std::move(out), [a, n, c](Tape& tp, Var self) {
    const auto g = tp.grad(self);
    auto ga = tp.grad(a);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t j = 0; j < c; ++j) ga[j] += g[r * c + j];
  });
}

Var reverse_rows(Tape& t, Var a) {
  const std::size_t n = t.rows(a), c = t.cols(a);
  const auto v = t.value(a);
  std::vector<double> out(n * c);
  for (std::size_t r = 0; r < n; ++r)
    std::copy(v.begin() + static_cast<long>(r * c), v.begin() + static_cast<long>((r + 1) * c),
              out.begin() + static_cast<long>((n - 1 - r) * c));
  return t.push(n, c, std::move(out), [a, n, c](Tape& tp, Var self) {
    const auto g = tp.grad(self);
    auto ga = tp.grad(a);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t j = 0; j < c; ++j) ga[(n - 1 - r) * c + j] += g[r * c + j];
  });
}

void log_softmax(std::span<const double> logits, std::span<double> out) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : logits) mx = std::max(mx, v);
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - mx);
  const double lse = mx + std::log(sum);
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
}

XentResult softmax_xent(const Matrix& logits, std::span<const int> targets,
                        std::span<const bool> mask) {
  require(targets.size() == logits.rows, "softmax_xent: target count mismatch");
  require(mask.empty() || mask.size() == logits.rows, "softmax_xent: mask length mismatch");
  XentResult res;
  res.grad = Matrix(logits.rows, logits.cols);
  std::vector<double> lp(logits.cols);
  for (std::size_t r = 0; r < logits.rows; ++r) {
    const int tgt = targets[r];
    require(tgt >= 0 && static_cast<std::size_t>(tgt) < logits.cols,
            "softmax_xent: target " + std::to_string(tgt) + " out of range");
    if (!mask.empty() && !mask[r]) continue;
    ++res.counted;
  }
  if (res.counted == 0) return res;
  const double inv = 1.0 / static_cast<double>(res.counted);
  for (std::size_t r = 0; r < logits.rows; ++r) {
    if (!mask.empty() && !mask[r]) continue;
    log_softmax(logits.row(r), lp);
    res.loss -= lp[static_cast<std::size_t>(targets[r])];
    auto g = res.grad.row(r);
    for (std::size_t c = 0; c < logits.cols; ++c) g[c] = std::exp(lp[c]) * inv;
    g[static_cast<std::size_t>(targets[r])] -= inv;
  }
  res.loss *= inv;
  return res;
}

Var softmax_xent(Tape& t, Var logits, std::span<const int> targets, std::span<const bool> mask,
                 double normalizer) {
  require(normalizer > 0.0, "softmax_xent: normalizer must be positive");
  const Matrix m = t.to_matrix(logits);
  XentResult r = softmax_xent(m, targets, mask);
  const double factor = static_cast<double>(r.counted) / normalizer;
  std::vector<double> value{r.loss * factor};
  return t.push(1, 1, std::move(value), [logits, grad = std::move(r.grad), factor](Tape& tp, Var self) {
    const double g = tp.grad(self)[0] * factor;
    auto gl = tp.grad(logits);
    for (std::size_t i = 0; i < gl.size(); ++i) gl[i] += g * grad.data[i];
  });
}

void adam_step(ParameterSet& params, const AdamConfig& config) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& g = params.value(i).grad;
    for (std::size_t j = 0; j < g.size(); ++j)
      if (!std::isfinite(g[j]))
        throw Error(ErrorKind::kNumerical, kComponent,
                    "non-finite gradient in " + params.name(i) + "[" + std::to_string(j) +
                        "] at step " + std::to_string(params.step + 1));
  }
  ++params.step;
  const double t = static_cast<double>(params.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params.value(i);
    auto& st = params.adam(i);
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double g = p.grad[j];
      st.m[j] = config.beta1 * st.m[j] + (1.0 - config.beta1) * g;
      st.v[j] = config.beta2 * st.v[j] + (1.0 - config.beta2) * g * g;
      const double mhat = st.m[j] / c1;
      const double vhat = st.v[j] / c2;
      p.data[j] -= config.lr * mhat / (std::sqrt(vhat) + config.eps);
      p.grad[j] = 0.0;
    }
  }
}

int sample_categorical(std::span<const double> logits, RngStream& rng, double temperature) {
  if (!(temperature > 0.0))
    throw invalid_argument(kComponent, "sample_categorical: temperature must be positive");
  require(!logits.empty(), "sample_categorical: empty logits");
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : logits) {
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity())
      throw invalid_argument(kComponent, "sample_categorical: non-finite logit");
    mx = std::max(mx, v);
  }
  require(std::isfinite(mx), "sample_categorical: every class is masked");
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp((logits[i] - mx) / temperature);
    sum += p[i];
  }
  const double u = rng.uniform() * sum;
  double cum = 0.0;
  int last = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    cum += p[i];
    last = static_cast<int>(i);
    if (u < cum) return last;
  }
  return last;
}

}  // namespace prosody::nn
