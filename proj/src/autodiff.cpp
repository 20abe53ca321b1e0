#include "chartex/autodiff.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>

namespace chartex {
namespace ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const RowMat>;
using MMap = Eigen::Map<RowMat>;

constexpr double kInvSqrt2 = 0.70710678118654752440084436210485;
constexpr double kInvSqrt2Pi = 0.39894228040143267793994605993438;

void check(bool cond, const char* msg) {
  if (!cond) throw std::logic_error(msg);
}

int last_dim(const Tensor& t) { return t.shape.back(); }

}  // namespace

Value Tape::constant(Tensor t) { return make(std::move(t), false, nullptr); }

Value Tape::param(const Tensor& t) { return make(t, true, nullptr); }

Value Tape::make(Tensor val, bool needs_grad, std::function<void(Tape&, int)> back) {
  Node n;
  n.val = std::move(val);
  n.needs_grad = needs_grad;
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Value{static_cast<int>(nodes_.size()) - 1};
}

Tensor& Tape::grad_ref(int id) {
  Node& n = nodes_[static_cast<size_t>(id)];
  if (n.grad.data.empty()) n.grad = Tensor::zeros(n.val.shape);
  return n.grad;
}

void Tape::backward(Value loss) {
  check(val(loss).numel() == 1, "backward: loss must be scalar");
  grad_ref(loss.id)[0] = 1.0;
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (!n.needs_grad || !n.back || n.grad.data.empty()) continue;
    n.back(*this, i);
  }
}

namespace {

// Builds a simple elementwise unary op. dfun receives (x, y) and returns dy/dx.
Value unary(Tape& t, Value a, double (*f)(double), double (*dfun)(double, double)) {
  const Tensor& x = t.val(a);
  Tensor y(x.shape);
  for (int64_t i = 0; i < x.numel(); ++i) y[i] = f(x[i]);
  const int pid = a.id;
  return t.make(std::move(y), t.needs_grad(a), [pid, dfun](Tape& tp, int self) {
    if (!tp.id_needs_grad(pid)) return;
    const Tensor& g = tp.grad_ref(self);
    const Tensor& x = tp.val_of(pid);
    const Tensor& y = tp.val_of(self);
    Tensor& gx = tp.grad_ref(pid);
    for (int64_t i = 0; i < g.numel(); ++i) gx[i] += g[i] * dfun(x[i], y[i]);
  });
}

}  // namespace

Value add(Tape& t, Value a, Value b) {
  const Tensor& x = t.val(a);
  const Tensor& y = t.val(b);
  check(x.same_shape(y), "add: shape mismatch");
  Tensor z(x.shape);
  for (int64_t i = 0; i < x.numel(); ++i) z[i] = x[i] + y[i];
  const int pa = a.id, pb = b.id;
  return t.make(std::move(z), t.needs_grad(a) || t.needs_grad(b), [pa, pb](Tape& tp, int self) {
    const Tensor& g = tp.grad_ref(self);
    if (tp.id_needs_grad(pa)) {
      Tensor& ga = tp.grad_ref(pa);
      for (int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
    }
    if (tp.id_needs_grad(pb)) {
      Tensor& gb = tp.grad_ref(pb);
      for (int64_t i = 0; i < g.numel(); ++i) gb[i] += g[i];
    }
  });
}

Value sub(Tape& t, Value a, Value b) {
  const Tensor& x = t.val(a);
  const Tensor& y = t.val(b);
  check(x.same_shape(y), "sub: shape mismatch");
  Tensor z(x.shape);
  for (int64_t i = 0; i < x.numel(); ++i) z[i] = x[i] - y[i];
  const int pa = a.id, pb = b.id;
  return t.make(std::move(z), t.needs_grad(a) || t.needs_grad(b), [pa, pb](Tape& tp, int self) {
    const Tensor& g = tp.grad_ref(self);
    if (tp.id_needs_grad(pa)) {
      Tensor& ga = tp.grad_ref(pa);
      for (int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
    }
    if (tp.id_needs_grad(pb)) {
      Tensor& gb = tp.grad_ref(pb);
      for (int64_t i = 0; i < g.numel(); ++i) gb[i] -= g[i];
    }
  });
}

Value mul(Tape& t, Value a, Value b) {
  const Tensor& x = t.val(a);
  const Tensor& y = t.val(b);
  check(x.same_shape(y), "mul: shape mismatch");
  Tensor z(x.shape);
  for (int64_t i = 0; i < x.numel(); ++i) z[i] = x[i] * y[i];
  const int pa = a.id, pb = b.id;
  return t.make(std::move(z), t.needs_grad(a) || t.needs_grad(b), [pa, pb](Tape& tp, int self) {
    const Tensor& g = tp.grad_ref(self);
    const Tensor& x = tp.val_of(pa);
    const Tensor& y = tp.val_of(pb);
    if (tp.id_needs_grad(pa)) {
      Tensor& ga = tp.grad_ref(pa);
      for (int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * y[i];
    }
    if (tp.id_needs_grad(pb)) {
      Tensor& gb = tp.grad_ref(pb);
      for (int64_t i = 0; i < g.numel(); ++i) gb[i] += g[i] * x[i];
    }
  });
}

Value scale(Tape& t, Value a, double c) {
  const Tensor& x = t.val(a);
  Tensor z(x.shape);
  for (int64_t i = 0; i < x.numel(); ++i) z[i] = x[i] * c;
  const int pa = a.id;
  return t.make(std::move(z), t.needs_grad(a), [pa, c](Tape& tp, int self) {
    if (!tp.id_needs_grad(pa)) return;
    const Tensor& g = tp.grad_ref(self);
    Tensor& ga = tp.grad_ref(pa);
    for (int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * c;
  });
}

Value add_scalar(Tape& t, Value a, double c) {
  const Tensor& x = t.val(a);
  Tensor z(x.shape);
  for (int64_t i = 0; i < x.numel(); ++i) z[i] = x[i] + c;
  const int pa = a.id;
  return t.make(std::move(z), t.needs_grad(a), [pa](Tape& tp, int self) {
    if (!tp.id_needs_grad(pa)) return;
    const Tensor& g = tp.grad_ref(self);
    Tensor& ga = tp.grad_ref(pa);
    for (int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
  });
}

Value neg(Tape& t, Value a) { return scale(t, a, -1.0); }

namespace {

Value min_max(Tape& t, Value a, Value b, bool take_min) {
  const Tensor& x = t.val(a);
  const Tensor& y = t.val(b);
  check(x.same_shape(y), "min/max: shape mismatch");
  Tensor z(x.shape);
  for (int64_t i = 0; i < x.numel(); ++i)
    z[i] = take_min ? std::min(x[i], y[i]) : std::max(x[i], y[i]);
  const int pa = a.id, pb = b.id;
  return t.make(std::move(z), t.needs_grad(a) || t.needs_grad(b),
                [pa, pb, take_min](Tape& tp, int self) {
                  const Tensor& g = tp.grad_ref(self);
                  const Tensor& x = tp.val_of(pa);
                  const Tensor& y = tp.val_of(pb);
                  for (int64_t i = 0; i < g.numel(); ++i) {
                    const bool a_wins = take_min ? (x[i] <= y[i]) : (x[i] >= y[i]);
                    const int target = a_wins ? pa : pb;
                    if (tp.id_needs_grad(target)) tp.grad_ref(target)[i] += g[i];
                  }
                });
}

}  // namespace

Value minimum(Tape& t, Value a, Value b) { return min_max(t, a, b, true); }
Value maximum(Tape& t, Value a, Value b) { return min_max(t, a, b, false); }

Value relu(Tape& t, Value a) {
  return unary(
      t, a, +[](double x) { return x > 0 ? x : 0.0; },
      +[](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Value leaky_relu(Tape& t, Value a, double slope) {
  const Tensor& x = t.val(a);
  Tensor z(x.shape);
  for (int64_t i = 0; i < x.numel(); ++i) z[i] = x[i] > 0 ? x[i] : slope * x[i];
  const int pa = a.id;
  return t.make(std::move(z), t.needs_grad(a), [pa, slope](Tape& tp, int self) {
    if (!tp.id_needs_grad(pa)) return;
    const Tensor& g = tp.grad_ref(self);
    const Tensor& x = tp.val_of(pa);
    Tensor& ga = tp.grad_ref(pa);
    for (int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * (x[i] > 0 ? 1.0 : slope);
  });
}

Value gelu(Tape& t, Value a) {
  return unary(
      t, a, +[](double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); },
      +[](double x, double) {
        const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
        return cdf + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
      });
}

Value sigmoid(Tape& t, Value a) {
  return unary(
      t, a,
      +[](double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); },
      +[](double, double y) { return y * (1.0 - y); });
}

Value tanh_v(Tape& t, Value a) {
  return unary(
      t, a, +[](double x) { return std::tanh(x); },
      +[](double, double y) { return 1.0 - y * y; });
}

Value exp_v(Tape& t, Value a) {
  return unary(
      t, a, +[](double x) { return std::exp(x); }, +[](double, double y) { return y; });
}

Value log_v(Tape& t, Value a) {
  return unary(
      t, a, +[](double x) { return std::log(x); }, +[](double x, double) { return 1.0 / x; });
}

Value abs_v(Tape& t, Value a) {
  return unary(
      t, a, +[](double x) { return std::fabs(x); },
      +[](double x, double) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

Value reshape(Tape& t, Value a, std::vector<int> shape) {
  const Tensor& x = t.val(a);
  check(Tensor::numel_of(shape) == x.numel(), "reshape: element count mismatch");
  Tensor z(std::move(shape), x.data);
  const int pa = a.id;
  return t.make(std::move(z), t.needs_grad(a), [pa](Tape& tp, int self) {
    if (!tp.id_needs_grad(pa)) return;
    const Tensor& g = tp.grad_ref(self);
    Tensor& ga = tp.grad_ref(pa);
    for (int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
  });
}

Value transpose2(Tape& t, Value a) {
  const Tensor& x = t.val(a);
  check(x.shape.size() == 2, "transpose2: rank must be 2");
  const int m = x.dim(0), n = x.dim(1);
  Tensor z({n, m});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) z[static_cast<int64_t>(j) * m + i] = x[static_cast<int64_t>(i) * n + j];
  const int pa = a.id;
  return t.make(std::move(z), t.needs_grad(a), [pa, m, n](Tape& tp, int self) {
    if (!tp.id_needs_grad(pa)) return;
    const Tensor& g = tp.grad_ref(self);
    Tensor& ga = tp.grad_ref(pa);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < m; ++i)
        ga[static_cast<int64_t>(i) * n + j] += g[static_cast<int64_t>(j) * m + i];
  });
}

Value gather_elems(Tape& t, Value a, std::vector<int64_t> idx) {
  const Tensor& x = t.val(a);
  Tensor z({static_cast<int>(idx.size())});
  for (size_t i = 0; i < idx.size(); ++i) z[static_cast<int64_t>(i)] = x[idx[i]];
  const int pa = a.id;
  auto ids = std::make_shared<std::vector<int64_t>>(std::move(idx));
  return t.make(std::move(z), t.needs_grad(a), [pa, ids](Tape& tp, int self) {
    if (!tp.id_needs_grad(pa)) return;
    const Tensor& g = tp.grad_ref(self);
    Tensor& ga = tp.grad_ref(pa);
    for (size_t i = 0; i < ids->size(); ++i) ga[(*ids)[i]] += g[static_cast<int64_t>(i)];
  });
}

Value gather_rows(Tape& t, Value a, std::vector<int> rows) {
  const Tensor& x = t.val(a);
  check(x.shape.size() == 2, "gather_rows: rank must be 2");
  const int d = x.dim(1);
  Tensor z({static_cast<int>(rows.size()), d});
  for (size_t i = 0; i < rows.size(); ++i)
    std::copy_n(&x.data[static_cast<size_t>(rows[i]) * d], d, &z.data[i * d]);
  const int pa = a.id;
  auto ids = std::make_shared<std::vector<int>>(std::move(rows));
  return t.make(std::move(z), t.needs_grad(a), [pa, ids, d](Tape& tp, int self) {
    if (!tp.id_needs_grad(pa)) return;
    const Tensor& g = tp.grad_ref(self);
    Tensor& ga = tp.grad_ref(pa);
    for (size_t i = 0; i < ids->size(); ++i) {
      const double* gs = &g.data[i * d];
      double* gd = &ga.data[static_cast<size_t>((*ids)[i]) * d];
      for (int j = 0; j < d; ++j) gd[j] += gs[j];
    }
  });
}

Value concat_cols(Tape& t, Value a, Value b) {
  const Tensor& x = t.val(a);
  const Tensor& y = t.val(b);
  check(x.shape.size() == 2 && y.shape.size() == 2 && x.dim(0) == y.dim(0),
        "concat_cols: incompatible shapes");
  const int m = x.dim(0), p = x.dim(1), q = y.dim(1);
  Tensor z({m, p + q});
  for (int i = 0; i < m; ++i) {
    std::copy_n(&x.data[static_cast<size_t>(i) * p], p, &z.data[static_cast<size_t>(i) * (p + q)]);
    std::copy_n(&y.data[static_cast<size_t>(i) * q], q,
                &z.data[static_cast<size_t>(i) * (p + q) + p]);
  }
  const int pa = a.id, pb = b.id;
  return t.make(std::move(z), t.needs_grad(a) || t.needs_grad(b),
                [pa, pb, m, p, q](Tape& tp, int self) {
                  const Tensor& g = tp.grad_ref(self);
                  if (tp.id_needs_grad(pa)) {
                    Tensor& ga = tp.grad_ref(pa);
                    for (int i = 0; i < m; ++i)
                      for (int j = 0; j < p; ++j)
                        ga[static_cast<int64_t>(i) * p + j] += g[static_cast<int64_t>(i) * (p + q) + j];
                  }
                  if (tp.id_needs_grad(pb)) {
                    Tensor& gb = tp.grad_ref(pb);
                    for (int i = 0; i < m; ++i)
                      for (int j = 0; j < q; ++j)
                        gb[static_cast<int64_t>(i) * q + j] +=
                            g[static_cast<int64_t>(i) * (p + q) + p + j];
                  }
                });
}

Value concat_rows(Tape& t, const std::vector<Value>& parts) {
  check(!parts.empty(), "concat_rows: empty");
  const int n = t.val(parts[0]).dim(1);
  int m = 0;
  bool ng = false;
  for (Value p : parts) {
    check(t.val(p).shape.size() == 2 && t.val(p).dim(1) == n, "concat_rows: col mismatch");
    m += t.val(p).dim(0);
    ng = ng || t.needs_grad(p);
  }
  Tensor z({m, n});
  auto ids = std::make_shared<std::vector<std::pair<int, int>>>();  // (id, row offset)
  int off = 0;
  for (Value p : parts) {
    const Tensor& x = t.val(p);
    std::copy_n(x.data.data(), x.numel(), &z.data[static_cast<size_t>(off) * n]);
    ids->emplace_back(p.id, off);
    off += x.dim(0);
  }
  return t.make(std::move(z), ng, [ids, n](Tape& tp, int self) {
    const Tensor& g = tp.grad_ref(self);
    for (auto [pid, roff] : *ids) {
      if (!tp.id_needs_grad(pid)) continue;
      Tensor& gp = tp.grad_ref(pid);
      const int rows = gp.dim(0);
      for (int64_t i = 0; i < static_cast<int64_t>(rows) * n; ++i)
        gp[i] += g[static_cast<int64_t>(roff) * n + i];
    }
  });
}

Value slice_rows(Tape& t, Value a, int r0, int r1) {
  const Tensor& x = t.val(a);
  check(x.shape.size() == 2 && 0 <= r0 && r0 < r1 && r1 <= x.dim(0), "slice_rows: bad range");
  const int n = x.dim(1);
  Tensor z({r1 - r0, n});
  std::copy_n(&x.data[static_cast<size_t>(r0) * n], static_cast<size_t>(r1 - r0) * n, z.data.data());
  const int pa = a.id;
  return t.make(std::move(z), t.needs_grad(a), [pa, r0, n](Tape& tp, int self) {
    if (!tp.id_needs_grad(pa)) return;
    const Tensor& g = tp.grad_ref(self);
    Tensor& ga = tp.grad_ref(pa);
    for (int64_t i = 0; i < g.numel(); ++i) ga[static_cast<int64_t>(r0) * n + i] += g[i];
  });
}

Value slice_cols(Tape& t, Value a, int c0, int c1) {
  const Tensor& x = t.val(a);
  check(x.shape.size() == 2 && 0 <= c0 && c0 < c1 && c1 <= x.dim(1), "slice_cols: bad range");
  const int m = x.dim(0), n = x.dim(1), k = c1 - c0;
  Tensor z({m, k});
  for (int i = 0; i < m; ++i)
    std::copy_n(&x.data[static_cast<size_t>(i) * n + c0], k, &z.data[static_cast<size_t>(i) * k]);
  const int pa = a.id;
  return t.make(std::move(z), t.needs_grad(a), [pa, c0, m, n, k](Tape& tp, int self) {
    if (!tp.id_needs_grad(pa)) return;
    const Tensor& g = tp.grad_ref(self);
    Tensor& ga = tp.grad_ref(pa);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < k; ++j)
        ga[static_cast<int64_t>(i) * n + c0 + j] += g[static_cast<int64_t>(i) * k + j];
  });
}

Value matmul(Tape& t, Value a, Value b) {
  const Tensor& x = t.val(a);
  const Tensor& y = t.val(b);
  check(x.shape.size() == 2 && y.shape.size() == 2 && x.dim(1) == y.dim(0), "matmul: shape mismatch");
  const int m = x.dim(0), k = x.dim(1), n = y.dim(1);
  Tensor z({m, n});
  MMap(z.data.data(), m, n).noalias() = CMap(x.data.data(), m, k) * CMap(y.data.data(), k, n);
  const int pa = a.id, pb = b.id;
  return t.make(std::move(z), t.needs_grad(a) || t.needs_grad(b),
                [pa, pb, m, k, n](Tape& tp, int self) {
                  const Tensor& g = tp.grad_ref(self);
                  CMap gm(g.data.data(), m, n);
                  if (tp.id_needs_grad(pa)) {
                    Tensor& ga = tp.grad_ref(pa);
                    MMap(ga.data.data(), m, k).noalias() +=
                        gm * CMap(tp.val_of(pb).data.data(), k, n).transpose();
                  }
                  if (tp.id_needs_grad(pb)) {
                    Tensor& gb = tp.grad_ref(pb);
                    MMap(gb.data.data(), k, n).noalias() +=
                        CMap(tp.val_of(pa).data.data(), m, k).transpose() * gm;
                  }
                });
}

Value add_bias(Tape& t, Value x, Value b) {
  const Tensor& xv = t.val(x);
  const Tensor& bv = t.val(b);
  const int n = last_dim(xv);
  check(bv.numel() == n, "add_bias: bias size mismatch");
  Tensor z(xv.shape);
  const int64_t rows = xv.numel() / n;
  for (int64_t r = 0; r < rows; ++r)
    for (int j = 0; j < n; ++j) z[r * n + j] = xv[r * n + j] + bv[j];
  const int px = x.id, pb = b.id;
  return t.make(std::move(z), t.needs_grad(x) || t.needs_grad(b),
                [px, pb, n, rows](Tape& tp, int self) {
                  const Tensor& g = tp.grad_ref(self);
                  if (tp.id_needs_grad(px)) {
                    Tensor& gx = tp.grad_ref(px);
                    for (int64_t i = 0; i < g.numel(); ++i) gx[i] += g[i];
                  }
                  if (tp.id_needs_grad(pb)) {
                    Tensor& gb = tp.grad_ref(pb);
                    for (int64_t r = 0; r < rows; ++r)
                      for (int j = 0; j < n; ++j) gb[j] += g[r * n + j];
                  }
                });
}

Value linear(Tape& t, Value x, Value w, Value b) { return add_bias(t, matmul(t, x, w), b); }

Value softmax_rows(Tape& t, Value a) {
  const Tensor& x = t.val(a);
  const int n = last_dim(x);
  const int64_t rows = x.numel() / n;
  Tensor z(x.shape);
  for (int64_t r = 0; r < rows; ++r) {
    const double* xr = &x.data[static_cast<size_t>(r) * n];
    double* zr = &z.data[static_cast<size_t>(r) * n];
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j) mx = std::max(mx, xr[j]);
    double s = 0;
    for (int j = 0; j < n; ++j) {
      zr[j] = std::exp(xr[j] - mx);
      s += zr[j];
    }
    for (int j = 0; j < n; ++j) zr[j] /= s;
  }
  const int pa = a.id;
  return t.make(std::move(z), t.needs_grad(a), [pa, n, rows](Tape& tp, int self) {
    if (!tp.id_needs_grad(pa)) return;
    const Tensor& g = tp.grad_ref(self);
    const Tensor& y = tp.val_of(self);
    Tensor& ga = tp.grad_ref(pa);
    for (int64_t r = 0; r < rows; ++r) {
      const double* gr = &g.data[static_cast<size_t>(r) * n];
      const double* yr = &y.data[static_cast<size_t>(r) * n];
      double dot = 0;
      for (int j = 0; j < n; ++j) dot += gr[j] * yr[j];
      double* gar = &ga.data[static_cast<size_t>(r) * n];
      for (int j = 0; j < n; ++j) gar[j] += yr[j] * (gr[j] - dot);
    }
  });
}

Value layer_norm(Tape& t, Value x, Value gamma, Value beta, double eps) {
  const Tensor& xv = t.val(x);
  const int d = last_dim(xv);
  check(t.val(gamma).numel() == d && t.val(beta).numel() == d, "layer_norm: affine size mismatch");
  const int64_t rows = xv.numel() / d;
  Tensor z(xv.shape);
  auto stats = std::make_shared<std::vector<double>>(static_cast<size_t>(rows) * 2);  // mu, inv
  const Tensor& gv = t.val(gamma);
  const Tensor& bv = t.val(beta);
  for (int64_t r = 0; r < rows; ++r) {
    const double* xr = &xv.data[static_cast<size_t>(r) * d];
    double mu = 0;
    for (int j = 0; j < d; ++j) mu += xr[j];
    mu /= d;
    double var = 0;
    for (int j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= d;
    const double inv = 1.0 / std::sqrt(var + eps);
    (*stats)[static_cast<size_t>(r) * 2] = mu;
    (*stats)[static_cast<size_t>(r) * 2 + 1] = inv;
    double* zr = &z.data[static_cast<size_t>(r) * d];
    for (int j = 0; j < d; ++j) zr[j] = (xr[j] - mu) * inv * gv[j] + bv[j];
  }
  const int px = x.id, pg = gamma.id, pb = beta.id;
  return t.make(std::move(z), t.needs_grad(x) || t.needs_grad(gamma) || t.needs_grad(beta),
                [px, pg, pb, d, rows, stats](Tape& tp, int self) {
                  const Tensor& g = tp.grad_ref(self);
                  const Tensor& xv = tp.val_of(px);
                  const Tensor& gv = tp.val_of(pg);
                  for (int64_t r = 0; r < rows; ++r) {
                    const double mu = (*stats)[static_cast<size_t>(r) * 2];
                    const double inv = (*stats)[static_cast<size_t>(r) * 2 + 1];
                    const double* xr = &xv.data[static_cast<size_t>(r) * d];
                    const double* gr = &g.data[static_cast<size_t>(r) * d];
                    if (tp.id_needs_grad(pg)) {
                      Tensor& gg = tp.grad_ref(pg);
                      for (int j = 0; j < d; ++j) gg[j] += gr[j] * (xr[j] - mu) * inv;
                    }
                    if (tp.id_needs_grad(pb)) {
                      Tensor& gb = tp.grad_ref(pb);
                      for (int j = 0; j < d; ++j) gb[j] += gr[j];
                    }
                    if (tp.id_needs_grad(px)) {
                      Tensor& gx = tp.grad_ref(px);
                      // dxhat = g*gamma; dx = inv*(dxhat - mean(dxhat) - xhat*mean(dxhat*xhat))
                      double mean_dxh = 0, mean_dxh_xh = 0;
                      for (int j = 0; j < d; ++j) {
                        const double xh = (xr[j] - mu) * inv;
                        const double dxh = gr[j] * gv[j];
                        mean_dxh += dxh;
                        mean_dxh_xh += dxh * xh;
                      }
                      mean_dxh /= d;
                      mean_dxh_xh /= d;
                      double* gxr = &gx.data[static_cast<size_t>(r) * d];
                      for (int j = 0; j < d; ++j) {
                        const double xh = (xr[j] - mu) * inv;
                        const double dxh = gr[j] * gv[j];
                        gxr[j] += inv * (dxh - mean_dxh - xh * mean_dxh_xh);
                      }
                    }
                  }
                });
}

Value sum_all(Tape& t, Value a) {
  const Tensor& x = t.val(a);
  double s = 0;
  for (int64_t i = 0; i < x.numel(); ++i) s += x[i];
  const int pa = a.id;
  return t.make(Tensor::scalar(s), t.needs_grad(a), [pa](Tape& tp, int self) {
    if (!tp.id_needs_grad(pa)) return;
    const double g = tp.grad_ref(self)[0];
    Tensor& ga = tp.grad_ref(pa);
    for (int64_t i = 0; i < ga.numel(); ++i) ga[i] += g;
  });
}

Value mean_all(Tape& t, Value a) {
  const int64_t n = t.val(a).numel();
  return scale(t, sum_all(t, a), 1.0 / static_cast<double>(n));
}

Value mean_rows(Tape& t, Value a) {
  const Tensor& x = t.val(a);
  check(x.shape.size() == 2, "mean_rows: rank must be 2");
  const int m = x.dim(0), d = x.dim(1);
  Tensor z({1, d});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < d; ++j) z[j] += x[static_cast<int64_t>(i) * d + j];
  for (int j = 0; j < d; ++j) z[j] /= m;
  const int pa = a.id;
  return t.make(std::move(z), t.needs_grad(a), [pa, m, d](Tape& tp, int self) {
    if (!tp.id_needs_grad(pa)) return;
    const Tensor& g = tp.grad_ref(self);
    Tensor& ga = tp.grad_ref(pa);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < d; ++j) ga[static_cast<int64_t>(i) * d + j] += g[j] / m;
  });
}

Value cross_entropy_rows(Tape& t, Value logits, const std::vector<int>& labels) {
  const Tensor& x = t.val(logits);
  check(x.shape.size() == 2, "cross_entropy_rows: rank must be 2");
  const int m = x.dim(0), n = x.dim(1);
  check(static_cast<int>(labels.size()) == m, "cross_entropy_rows: label count mismatch");
  double loss = 0;
  for (int r = 0; r < m; ++r) {
    const double* xr = &x.data[static_cast<size_t>(r) * n];
    double mx = xr[0];
    for (int j = 1; j < n; ++j) mx = std::max(mx, xr[j]);
    double s = 0;
    for (int j = 0; j < n; ++j) s += std::exp(xr[j] - mx);
    loss += mx + std::log(s) - xr[labels[static_cast<size_t>(r)]];
  }
  loss /= m;
  const int pa = logits.id;
  auto labs = std::make_shared<std::vector<int>>(labels);
  return t.make(Tensor::scalar(loss), t.needs_grad(logits), [pa, m, n, labs](Tape& tp, int self) {
    if (!tp.id_needs_grad(pa)) return;
    const double g = tp.grad_ref(self)[0];
    const Tensor& x = tp.val_of(pa);
    Tensor& ga = tp.grad_ref(pa);
    for (int r = 0; r < m; ++r) {
      const double* xr = &x.data[static_cast<size_t>(r) * n];
      double mx = xr[0];
      for (int j = 1; j < n; ++j) mx = std::max(mx, xr[j]);
      double s = 0;
      for (int j = 0; j < n; ++j) s += std::exp(xr[j] - mx);
      double* gr = &ga.data[static_cast<size_t>(r) * n];
      for (int j = 0; j < n; ++j) {
        const double p = std::exp(xr[j] - mx) / s;
        gr[j] += g * (p - (j == (*labs)[static_cast<size_t>(r)] ? 1.0 : 0.0)) / m;
      }
    }
  });
}

Value bce_logits_mean(Tape& t, Value logits, const Tensor& targets) {
  const Tensor& x = t.val(logits);
  check(x.numel() == targets.numel(), "bce_logits_mean: target size mismatch");
  const int64_t n = x.numel();
  double loss = 0;
  for (int64_t i = 0; i < n; ++i) {
    // Stable formulation: max(x,0) - x*t + log(1 + exp(-|x|)).
    loss += std::max(x[i], 0.0) - x[i] * targets[i] + std::log1p(std::exp(-std::fabs(x[i])));
  }
  loss /= static_cast<double>(n);
  const int pa = logits.id;
  auto tg = std::make_shared<Tensor>(targets);
  return t.make(Tensor::scalar(loss), t.needs_grad(logits), [pa, n, tg](Tape& tp, int self) {
    if (!tp.id_needs_grad(pa)) return;
    const double g = tp.grad_ref(self)[0];
    const Tensor& x = tp.val_of(pa);
    Tensor& ga = tp.grad_ref(pa);
    for (int64_t i = 0; i < n; ++i) {
      const double s =
          x[i] >= 0 ? 1.0 / (1.0 + std::exp(-x[i])) : std::exp(x[i]) / (1.0 + std::exp(x[i]));
      ga[i] += g * (s - (*tg)[i]) / static_cast<double>(n);
    }
  });
}

Value conv2d(Tape& t, Value x, Value w, Value b, int stride, int pad) {
  const Tensor& xv = t.val(x);
  const Tensor& wv = t.val(w);
  check(xv.shape.size() == 3 && wv.shape.size() == 4, "conv2d: expects x[C,H,W], w[Co,Ci,kh,kw]");
  const int ci = xv.dim(0), h = xv.dim(1), ww = xv.dim(2);
  const int co = wv.dim(0), kh = wv.dim(2), kw = wv.dim(3);
  check(wv.dim(1) == ci, "conv2d: channel mismatch");
  const int ho = (h + 2 * pad - kh) / stride + 1;
  const int wo = (ww + 2 * pad - kw) / stride + 1;
  check(ho >= 1 && wo >= 1, "conv2d: output collapsed");
  const int K = ci * kh * kw;
  const int M = ho * wo;

  auto cols = std::make_shared<Tensor>(std::vector<int>{K, M});
  for (int c = 0; c < ci; ++c)
    for (int ky = 0; ky < kh; ++ky)
      for (int kx = 0; kx < kw; ++kx) {
        const int row = (c * kh + ky) * kw + kx;
        double* dst = &cols->data[static_cast<size_t>(row) * M];
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride + ky - pad;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride + kx - pad;
            dst[oy * wo + ox] = (iy >= 0 && iy < h && ix >= 0 && ix < ww)
                                    ? xv.data[(static_cast<size_t>(c) * h + iy) * ww + ix]
                                    : 0.0;
          }
        }
      }

  Tensor z({co, ho, wo});
  MMap(z.data.data(), co, M).noalias() =
      CMap(wv.data.data(), co, K) * CMap(cols->data.data(), K, M);
  const Tensor& bv = t.val(b);
  check(bv.numel() == co, "conv2d: bias size mismatch");
  for (int c = 0; c < co; ++c)
    for (int i = 0; i < M; ++i) z[static_cast<int64_t>(c) * M + i] += bv[c];

  const int px = x.id, pw = w.id, pb = b.id;
  return t.make(
      std::move(z), t.needs_grad(x) || t.needs_grad(w) || t.needs_grad(b),
      [px, pw, pb, cols, ci, h, ww, co, kh, kw, ho, wo, stride, pad, K, M](Tape& tp, int self) {
        const Tensor& g = tp.grad_ref(self);
        CMap gm(g.data.data(), co, M);
        if (tp.id_needs_grad(pb)) {
          Tensor& gb = tp.grad_ref(pb);
          for (int c = 0; c < co; ++c)
            for (int i = 0; i < M; ++i) gb[c] += g[static_cast<int64_t>(c) * M + i];
        }
        if (tp.id_needs_grad(pw)) {
          Tensor& gw = tp.grad_ref(pw);
          MMap(gw.data.data(), co, K).noalias() += gm * CMap(cols->data.data(), K, M).transpose();
        }
        if (tp.id_needs_grad(px)) {
          Tensor dcols({K, M});
          MMap(dcols.data.data(), K, M).noalias() =
              CMap(tp.val_of(pw).data.data(), co, K).transpose() * gm;
          Tensor& gx = tp.grad_ref(px);
          for (int c = 0; c < ci; ++c)
            for (int ky = 0; ky < kh; ++ky)
              for (int kx = 0; kx < kw; ++kx) {
                const int row = (c * kh + ky) * kw + kx;
                const double* src = &dcols.data[static_cast<size_t>(row) * M];
                for (int oy = 0; oy < ho; ++oy) {
                  const int iy = oy * stride + ky - pad;
                  if (iy < 0 || iy >= h) continue;
                  for (int ox = 0; ox < wo; ++ox) {
                    const int ix = ox * stride + kx - pad;
                    if (ix < 0 || ix >= ww) continue;
                    gx.data[(static_cast<size_t>(c) * h + iy) * ww + ix] += src[oy * wo + ox];
                  }
                }
              }
        }
      });
}

Value maxpool2d(Tape& t, Value x, int ph, int pw) {
  const Tensor& xv = t.val(x);
  check(xv.shape.size() == 3, "maxpool2d: expects [C,H,W]");
  const int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
  check(h % ph == 0 && w % pw == 0, "maxpool2d: dims not divisible by pool size");
  const int ho = h / ph, wo = w / pw;
  Tensor z({c, ho, wo});
  auto arg = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(c) * ho * wo);
  for (int ch = 0; ch < c; ++ch)
    for (int oy = 0; oy < ho; ++oy)
      for (int ox = 0; ox < wo; ++ox) {
        double best = -std::numeric_limits<double>::infinity();
        int64_t best_i = 0;
        for (int dy = 0; dy < ph; ++dy)
          for (int dx = 0; dx < pw; ++dx) {
            const int64_t i =
                (static_cast<int64_t>(ch) * h + oy * ph + dy) * w + ox * pw + dx;
            if (xv[i] > best) {
              best = xv[i];
              best_i = i;
            }
          }
        const int64_t o = (static_cast<int64_t>(ch) * ho + oy) * wo + ox;
        z[o] = best;
        (*arg)[static_cast<size_t>(o)] = best_i;
      }
  const int pa = x.id;
  return t.make(std::move(z), t.needs_grad(x), [pa, arg](Tape& tp, int self) {
    if (!tp.id_needs_grad(pa)) return;
    const Tensor& g = tp.grad_ref(self);
    Tensor& ga = tp.grad_ref(pa);
    for (int64_t o = 0; o < g.numel(); ++o) ga[(*arg)[static_cast<size_t>(o)]] += g[o];
  });
}

Value upsample_nn2(Tape& t, Value x) {
  const Tensor& xv = t.val(x);
  check(xv.shape.size() == 3, "upsample_nn2: expects [C,H,W]");
  const int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
  Tensor z({c, 2 * h, 2 * w});
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < 2 * h; ++y)
      for (int xx = 0; xx < 2 * w; ++xx)
        z[(static_cast<int64_t>(ch) * 2 * h + y) * 2 * w + xx] =
            xv[(static_cast<int64_t>(ch) * h + y / 2) * w + xx / 2];
  const int pa = x.id;
  return t.make(std::move(z), t.needs_grad(x), [pa, c, h, w](Tape& tp, int self) {
    if (!tp.id_needs_grad(pa)) return;
    const Tensor& g = tp.grad_ref(self);
    Tensor& ga = tp.grad_ref(pa);
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < 2 * h; ++y)
        for (int xx = 0; xx < 2 * w; ++xx)
          ga[(static_cast<int64_t>(ch) * h + y / 2) * w + xx / 2] +=
              g[(static_cast<int64_t>(ch) * 2 * h + y) * 2 * w + xx];
  });
}

Value grid_sample(Tape& t, Value img, Value coords) {
  const Tensor& xv = t.val(img);
  const Tensor& cv = t.val(coords);
  check(xv.shape.size() == 3, "grid_sample: image must be [C,H,W]");
  check(cv.shape.size() == 2 && cv.dim(1) == 2, "grid_sample: coords must be [N,2]");
  const int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
  const int n = cv.dim(0);
  Tensor z({n, c});
  for (int i = 0; i < n; ++i) {
    const double fx = std::clamp(cv[static_cast<int64_t>(i) * 2], 0.0, static_cast<double>(w - 1));
    const double fy =
        std::clamp(cv[static_cast<int64_t>(i) * 2 + 1], 0.0, static_cast<double>(h - 1));
    const int x0 = static_cast<int>(std::floor(fx));
    const int y0 = static_cast<int>(std::floor(fy));
    const int x1 = std::min(x0 + 1, w - 1);
    const int y1 = std::min(y0 + 1, h - 1);
    const double wx = fx - x0, wy = fy - y0;
    for (int ch = 0; ch < c; ++ch) {
      const auto px = [&](int yy, int xx) {
        return xv[(static_cast<int64_t>(ch) * h + yy) * w + xx];
      };
      const double top = px(y0, x0) * (1 - wx) + px(y0, x1) * wx;
      const double bot = px(y1, x0) * (1 - wx) + px(y1, x1) * wx;
      z[static_cast<int64_t>(i) * c + ch] = top * (1 - wy) + bot * wy;
    }
  }
  const int pi = img.id, pc = coords.id;
  return t.make(std::move(z), t.needs_grad(img) || t.needs_grad(coords),
                [pi, pc, c, h, w, n](Tape& tp, int self) {
                  const Tensor& g = tp.grad_ref(self);
                  const Tensor& xv = tp.val_of(pi);
                  const Tensor& cv = tp.val_of(pc);
                  for (int i = 0; i < n; ++i) {
                    const double rx = cv[static_cast<int64_t>(i) * 2];
                    const double ry = cv[static_cast<int64_t>(i) * 2 + 1];
                    const bool cx = rx < 0.0 || rx > w - 1;
                    const bool cy = ry < 0.0 || ry > h - 1;
                    const double fx = std::clamp(rx, 0.0, static_cast<double>(w - 1));
                    const double fy = std::clamp(ry, 0.0, static_cast<double>(h - 1));
                    const int x0 = static_cast<int>(std::floor(fx));
                    const int y0 = static_cast<int>(std::floor(fy));
                    const int x1 = std::min(x0 + 1, w - 1);
                    const int y1 = std::min(y0 + 1, h - 1);
                    const double wx = fx - x0, wy = fy - y0;
                    double dfx = 0, dfy = 0;
                    for (int ch = 0; ch < c; ++ch) {
                      const double go = g[static_cast<int64_t>(i) * c + ch];
                      if (go == 0.0) continue;
                      const auto idx = [&](int yy, int xx) {
                        return (static_cast<int64_t>(ch) * h + yy) * w + xx;
                      };
                      if (tp.id_needs_grad(pi)) {
                        Tensor& gi = tp.grad_ref(pi);
                        gi[idx(y0, x0)] += go * (1 - wx) * (1 - wy);
                        gi[idx(y0, x1)] += go * wx * (1 - wy);
                        gi[idx(y1, x0)] += go * (1 - wx) * wy;
                        gi[idx(y1, x1)] += go * wx * wy;
                      }
                      if (tp.id_needs_grad(pc)) {
                        const double i00 = xv[idx(y0, x0)], i01 = xv[idx(y0, x1)];
                        const double i10 = xv[idx(y1, x0)], i11 = xv[idx(y1, x1)];
                        dfx += go * ((1 - wy) * (i01 - i00) + wy * (i11 - i10));
                        dfy += go * ((1 - wx) * (i10 - i00) + wx * (i11 - i01));
                      }
                    }
                    if (tp.id_needs_grad(pc)) {
                      Tensor& gc = tp.grad_ref(pc);
                      if (!cx) gc[static_cast<int64_t>(i) * 2] += dfx;
                      if (!cy) gc[static_cast<int64_t>(i) * 2 + 1] += dfy;
                    }
                  }
                });
}

}  // namespace ad
}  // namespace chartex
