// Copyright 2026 The visrssi Authors
// SPDX-License-Identifier: Apache-2.0

#include "visrssi/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cstring>
#include <memory>

#include "visrssi/errors.hpp"

namespace visrssi {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;
using MapVec = Eigen::Map<Eigen::VectorXd>;
using CMapVec = Eigen::Map<const Eigen::VectorXd>;

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeMismatch(what);
}

CMapMat as_mat(const Tensor& t, std::size_t rows, std::size_t cols) {
  return CMapMat(t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
MapMat as_mat(Tensor& t, std::size_t rows, std::size_t cols) {
  return MapMat(t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
MapMat as_mat(double* p, std::size_t rows, std::size_t cols) {
  return MapMat(p, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
CMapMat as_mat(const double* p, std::size_t rows, std::size_t cols) {
  return CMapMat(p, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

struct ConvGeometry {
  std::size_t cin, h, w, k, stride, pad, hout, wout;
  std::size_t patch() const { return cin * k * k; }
  std::size_t positions() const { return hout * wout; }
};

void im2col(const double* x, const ConvGeometry& g, double* col) {
  const std::size_t p = g.positions();
  for (std::size_t c = 0; c < g.cin; ++c) {
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        double* row = col + ((c * g.k + ky) * g.k + kx) * p;
        for (std::size_t oy = 0; oy < g.hout; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
          double* out = row + oy * g.wout;
          if (iy < 0 || iy >= static_cast<long>(g.h)) {
            std::fill(out, out + g.wout, 0.0);
            continue;
          }
          const double* src = x + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
          for (std::size_t ox = 0; ox < g.wout; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
            out[ox] = (ix < 0 || ix >= static_cast<long>(g.w)) ? 0.0 : src[ix];
          }
        }
      }
    }
  }
}

void col2im_add(const double* col, const ConvGeometry& g, double* dx) {
  const std::size_t p = g.positions();
  for (std::size_t c = 0; c < g.cin; ++c) {
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        const double* row = col + ((c * g.k + ky) * g.k + kx) * p;
        for (std::size_t oy = 0; oy < g.hout; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
          if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
          double* dst = dx + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
          const double* in = row + oy * g.wout;
          for (std::size_t ox = 0; ox < g.wout; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
            if (ix >= 0 && ix < static_cast<long>(g.w)) dst[ix] += in[ox];
          }
        }
      }
    }
  }
}

}  // namespace

// ---------------------------------------------------------------- ParameterSet

std::size_t ParameterSet::add(std::string name, Shape shape) {
  if (contains(name)) throw Error("duplicate parameter name: " + name);
  Parameter p;
  p.name = std::move(name);
  p.value = Tensor(shape);
  p.grad = Tensor(std::move(shape));
  params_.push_back(std::move(p));
  return params_.size() - 1;
}

Parameter& ParameterSet::get(std::string_view name) {
  for (auto& p : params_)
    if (p.name == name) return p;
  throw Error("unknown parameter: " + std::string(name));
}

const Parameter& ParameterSet::get(std::string_view name) const {
  return const_cast<ParameterSet*>(this)->get(name);
}

bool ParameterSet::contains(std::string_view name) const {
  return std::any_of(params_.begin(), params_.end(), [&](const Parameter& p) { return p.name == name; });
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p.grad.fill(0.0);
}

void ParameterSet::set_frozen(std::string_view prefix, bool frozen) {
  for (auto& p : params_)
    if (std::string_view(p.name).starts_with(prefix)) p.frozen = frozen;
}

std::size_t ParameterSet::scalar_count(bool trainable_only) const {
  std::size_t n = 0;
  for (const auto& p : params_)
    if (!trainable_only || !p.frozen) n += p.value.size();
  return n;
}

std::vector<Tensor> ParameterSet::snapshot() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.value);
  return out;
}

void ParameterSet::restore(const std::vector<Tensor>& values) {
  require(values.size() == params_.size(), "snapshot has a different parameter count");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    require(values[i].same_shape(params_[i].value), "snapshot shape mismatch for " + params_[i].name);
    params_[i].value = values[i];
  }
}

// ----------------------------------------------------------------------- Graph

Graph::Var Graph::push(Tensor value, std::vector<std::size_t> parents) {
  Node n;
  n.value = std::move(value);
  n.parents = std::move(parents);
  for (std::size_t p : n.parents) {
    if (p >= nodes_.size()) throw GraphCycle("node parent does not precede its child");
    n.requires_grad = n.requires_grad || nodes_[p].requires_grad;
  }
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Tensor& Graph::grad_of(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.size() != n.value.size() || !n.grad.same_shape(n.value)) n.grad = Tensor(n.value.shape());
  return n.grad;
}

Tensor Graph::grad(Var v) const {
  const Node& n = nodes_.at(v.id);
  if (n.grad.same_shape(n.value) && n.grad.size() == n.value.size()) return n.grad;
  return Tensor(n.value.shape());
}

bool Graph::any_requires_grad(std::initializer_list<Var> vars) const {
  return std::any_of(vars.begin(), vars.end(), [&](Var v) { return nodes_[v.id].requires_grad; });
}

Graph::Var Graph::input(Tensor value) { return push(std::move(value), {}); }

Graph::Var Graph::param(Parameter& p) {
  Var v = push(p.value, {});
  Node& n = nodes_[v.id];
  n.requires_grad = grad_enabled_ && !p.frozen;
  if (n.requires_grad) n.param = &p;
  return v;
}

Graph::Var Graph::linear(Var x, Var w, Var b) {
  const Tensor& X = value(x);
  const Tensor& W = value(w);
  const Tensor& B = value(b);
  require(W.rank() == 2 && B.rank() == 1 && B.dim(0) == W.dim(0), "linear: weight/bias shapes " +
                                                                         shape_string(W.shape()) + ", " +
                                                                         shape_string(B.shape()));
  require((X.rank() == 1 || X.rank() == 2) && X.shape().back() == W.dim(1),
          "linear: input " + shape_string(X.shape()) + " vs weight " + shape_string(W.shape()));
  const std::size_t n = X.rank() == 1 ? 1 : X.dim(0);
  const std::size_t in = W.dim(1), out = W.dim(0);
  Tensor Y(X.rank() == 1 ? Shape{out} : Shape{n, out});
  auto y = as_mat(Y, n, out);
  y.noalias() = as_mat(X, n, in) * as_mat(W, out, in).transpose();
  y.rowwise() += CMapVec(B.data(), static_cast<Eigen::Index>(out)).transpose();
  Var r = push(std::move(Y), {x.id, w.id, b.id});
  if (requires_grad(r)) {
    nodes_[r.id].backward = [this, x, w, b, r, n, in, out] {
      const Tensor& dY = nodes_[r.id].grad;
      auto dy = as_mat(dY, n, out);
      if (requires_grad(x)) as_mat(grad_of(x.id), n, in).noalias() += dy * as_mat(value(w), out, in);
      if (requires_grad(w)) as_mat(grad_of(w.id), out, in).noalias() += dy.transpose() * as_mat(value(x), n, in);
      if (requires_grad(b)) MapVec(grad_of(b.id).data(), static_cast<Eigen::Index>(out)) += dy.colwise().sum().transpose();
    };
  }
  return r;
}

Graph::Var Graph::relu(Var x) {
  Tensor Y = value(x);
  for (double& v : Y.values()) v = v > 0.0 ? v : 0.0;
  Var r = push(std::move(Y), {x.id});
  nodes_[r.id].relu = true;
  if (requires_grad(r)) {
    nodes_[r.id].backward = [this, x, r] {
      const Tensor& X = value(x);
      const Tensor& dY = nodes_[r.id].grad;
      Tensor& dX = grad_of(x.id);
      // Subgradient at exactly zero is zero.
      for (std::size_t i = 0; i < X.size(); ++i)
        if (X[i] > 0.0) dX[i] += dY[i];
    };
  }
  return r;
}

Graph::Var Graph::conv1d_k1(Var x, Var w, Var b) {
  const Tensor& X = value(x);
  const Tensor& W = value(w);
  const Tensor& B = value(b);
  require(W.rank() == 2 && B.rank() == 1 && B.dim(0) == W.dim(0), "conv1d_k1: weight/bias shapes");
  require(X.rank() == 3 && X.dim(1) == W.dim(1),
          "conv1d_k1: input " + shape_string(X.shape()) + " vs weight " + shape_string(W.shape()));
  const std::size_t n = X.dim(0), cin = X.dim(1), len = X.dim(2), cout = W.dim(0);
  Tensor Y(Shape{n, cout, len});
  auto wm = as_mat(W, cout, cin);
  for (std::size_t s = 0; s < n; ++s) {
    auto y = as_mat(Y.data() + s * cout * len, cout, len);
    y.noalias() = wm * as_mat(X.data() + s * cin * len, cin, len);
    y.colwise() += CMapVec(B.data(), static_cast<Eigen::Index>(cout));
  }
  Var r = push(std::move(Y), {x.id, w.id, b.id});
  if (requires_grad(r)) {
    nodes_[r.id].backward = [this, x, w, b, r, n, cin, len, cout] {
      const Tensor& dY = nodes_[r.id].grad;
      for (std::size_t s = 0; s < n; ++s) {
        auto dy = as_mat(dY.data() + s * cout * len, cout, len);
        if (requires_grad(x))
          as_mat(grad_of(x.id).data() + s * cin * len, cin, len).noalias() +=
              as_mat(value(w), cout, cin).transpose() * dy;
        if (requires_grad(w))
          as_mat(grad_of(w.id), cout, cin).noalias() +=
              dy * as_mat(value(x).data() + s * cin * len, cin, len).transpose();
        if (requires_grad(b)) MapVec(grad_of(b.id).data(), static_cast<Eigen::Index>(cout)) += dy.rowwise().sum();
      }
    };
  }
  return r;
}

Graph::Var Graph::adaptive_avg_pool1d(Var x) {
  const Tensor& X = value(x);
  require(X.rank() == 3 && X.dim(2) >= 1, "adaptive_avg_pool1d: expected [N,C,L], got " + shape_string(X.shape()));
  const std::size_t n = X.dim(0), c = X.dim(1), len = X.dim(2);
  Tensor Y(Shape{n, c});
  for (std::size_t i = 0; i < n * c; ++i) {
    double s = 0.0;
    for (std::size_t l = 0; l < len; ++l) s += X[i * len + l];
    Y[i] = s / static_cast<double>(len);
  }
  Var r = push(std::move(Y), {x.id});
  if (requires_grad(r)) {
    nodes_[r.id].backward = [this, x, r, n, c, len] {
      const Tensor& dY = nodes_[r.id].grad;
      Tensor& dX = grad_of(x.id);
      for (std::size_t i = 0; i < n * c; ++i) {
        const double g = dY[i] / static_cast<double>(len);
        for (std::size_t l = 0; l < len; ++l) dX[i * len + l] += g;
      }
    };
  }
  return r;
}

Graph::Var Graph::conv2d(Var x, Var w, Var b, std::size_t stride, std::size_t padding) {
  const Tensor& X = value(x);
  const Tensor& W = value(w);
  const Tensor& B = value(b);
  require(W.rank() == 4 && W.dim(2) == W.dim(3) && B.rank() == 1 && B.dim(0) == W.dim(0),
          "conv2d: weight/bias shapes " + shape_string(W.shape()) + ", " + shape_string(B.shape()));
  require(X.rank() == 4 && X.dim(1) == W.dim(1),
          "conv2d: input " + shape_string(X.shape()) + " vs weight " + shape_string(W.shape()));
  require(stride >= 1, "conv2d: stride must be >= 1");
  const std::size_t k = W.dim(2);
  require(X.dim(2) + 2 * padding >= k && X.dim(3) + 2 * padding >= k, "conv2d: input smaller than kernel");
  ConvGeometry g{X.dim(1), X.dim(2), X.dim(3), k, stride, padding, 0, 0};
  g.hout = (g.h + 2 * padding - k) / stride + 1;
  g.wout = (g.w + 2 * padding - k) / stride + 1;
  const std::size_t n = X.dim(0), cout = W.dim(0), kk = g.patch(), pos = g.positions();

  const bool keep_cols = grad_enabled_ && requires_grad(w);
  auto cols = std::make_shared<AlignedBuffer>(keep_cols ? n * kk * pos : kk * pos);
  Tensor Y(Shape{n, cout, g.hout, g.wout});
  auto wm = as_mat(W, cout, kk);
  for (std::size_t s = 0; s < n; ++s) {
    double* col = cols->data() + (keep_cols ? s * kk * pos : 0);
    im2col(X.data() + s * g.cin * g.h * g.w, g, col);
    auto y = as_mat(Y.data() + s * cout * pos, cout, pos);
    y.noalias() = wm * as_mat(static_cast<const double*>(col), kk, pos);
    y.colwise() += CMapVec(B.data(), static_cast<Eigen::Index>(cout));
  }
  if (!keep_cols) cols.reset();
  Var r = push(std::move(Y), {x.id, w.id, b.id});
  if (requires_grad(r)) {
    nodes_[r.id].backward = [this, x, w, b, r, g, n, cout, kk, pos, cols] {
      const Tensor& dY = nodes_[r.id].grad;
      AlignedBuffer dcol;
      if (requires_grad(x)) dcol.resize(kk * pos);
      for (std::size_t s = 0; s < n; ++s) {
        auto dy = as_mat(dY.data() + s * cout * pos, cout, pos);
        if (requires_grad(w)) {
          const double* col = cols->data() + s * kk * pos;
          as_mat(grad_of(w.id), cout, kk).noalias() += dy * as_mat(col, kk, pos).transpose();
        }
        if (requires_grad(b)) MapVec(grad_of(b.id).data(), static_cast<Eigen::Index>(cout)) += dy.rowwise().sum();
        if (requires_grad(x)) {
          as_mat(dcol.data(), kk, pos).noalias() = as_mat(value(w), cout, kk).transpose() * dy;
          col2im_add(dcol.data(), g, grad_of(x.id).data() + s * g.cin * g.h * g.w);
        }
      }
    };
  }
  return r;
}

Graph::Var Graph::global_avg_pool2d(Var x) {
  const Tensor& X = value(x);
  require(X.rank() == 4, "global_avg_pool2d: expected [N,C,H,W], got " + shape_string(X.shape()));
  Tensor flat = X.reshaped(Shape{X.dim(0), X.dim(1), X.dim(2) * X.dim(3)});
  Var v = reshape(x, flat.shape());
  return adaptive_avg_pool1d(v);
}

Graph::Var Graph::concat(std::span<const Var> parts) {
  require(!parts.empty(), "concat: no inputs");
  const std::size_t n = value(parts[0]).rank() == 2 ? value(parts[0]).dim(0) : 0;
  std::vector<std::size_t> widths;
  std::vector<std::size_t> ids;
  std::size_t total = 0;
  for (Var p : parts) {
    const Tensor& t = value(p);
    require(t.rank() == 2 && t.dim(0) == n, "concat: inputs must be [N,*] with equal N");
    widths.push_back(t.dim(1));
    ids.push_back(p.id);
    total += t.dim(1);
  }
  Tensor Y(Shape{n, total});
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& t = value(parts[k]);
    for (std::size_t i = 0; i < n; ++i)
      std::copy_n(t.data() + i * widths[k], widths[k], Y.data() + i * total + off);
    off += widths[k];
  }
  Var r = push(std::move(Y), ids);
  if (requires_grad(r)) {
    nodes_[r.id].backward = [this, ids, widths, r, n, total] {
      const Tensor& dY = nodes_[r.id].grad;
      std::size_t off = 0;
      for (std::size_t k = 0; k < ids.size(); ++k) {
        if (nodes_[ids[k]].requires_grad) {
          Tensor& dX = grad_of(ids[k]);
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < widths[k]; ++j) dX[i * widths[k] + j] += dY[i * total + off + j];
        }
        off += widths[k];
      }
    };
  }
  return r;
}

Graph::Var Graph::reshape(Var x, Shape shape) {
  Var r = push(value(x).reshaped(std::move(shape)), {x.id});
  if (requires_grad(r)) {
    nodes_[r.id].backward = [this, x, r] {
      const Tensor& dY = nodes_[r.id].grad;
      Tensor& dX = grad_of(x.id);
      for (std::size_t i = 0; i < dX.size(); ++i) dX[i] += dY[i];
    };
  }
  return r;
}

Graph::Var Graph::transpose_last2(Var x) {
  const Tensor& X = value(x);
  require(X.rank() == 3, "transpose_last2: expected rank 3, got " + shape_string(X.shape()));
  const std::size_t n = X.dim(0), a = X.dim(1), bdim = X.dim(2);
  Tensor Y(Shape{n, bdim, a});
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t i = 0; i < a; ++i)
      for (std::size_t j = 0; j < bdim; ++j) Y[(s * bdim + j) * a + i] = X[(s * a + i) * bdim + j];
  Var r = push(std::move(Y), {x.id});
  if (requires_grad(r)) {
    nodes_[r.id].backward = [this, x, r, n, a, bdim] {
      const Tensor& dY = nodes_[r.id].grad;
      Tensor& dX = grad_of(x.id);
      for (std::size_t s = 0; s < n; ++s)
        for (std::size_t i = 0; i < a; ++i)
          for (std::size_t j = 0; j < bdim; ++j) dX[(s * a + i) * bdim + j] += dY[(s * bdim + j) * a + i];
    };
  }
  return r;
}

Graph::Var Graph::add(Var a, Var b) {
  require(value(a).same_shape(value(b)), "add: shapes " + shape_string(value(a).shape()) + " and " +
                                             shape_string(value(b).shape()));
  Tensor Y = value(a);
  const Tensor& B = value(b);
  for (std::size_t i = 0; i < Y.size(); ++i) Y[i] += B[i];
  Var r = push(std::move(Y), {a.id, b.id});
  if (requires_grad(r)) {
    nodes_[r.id].backward = [this, a, b, r] {
      const Tensor& dY = nodes_[r.id].grad;
      for (Var v : {a, b}) {
        if (!requires_grad(v)) continue;
        Tensor& d = grad_of(v.id);
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += dY[i];
      }
    };
  }
  return r;
}

Graph::Var Graph::scale(Var x, double factor) {
  Tensor Y = value(x);
  for (double& v : Y.values()) v *= factor;
  Var r = push(std::move(Y), {x.id});
  if (requires_grad(r)) {
    nodes_[r.id].backward = [this, x, r, factor] {
      const Tensor& dY = nodes_[r.id].grad;
      Tensor& dX = grad_of(x.id);
      for (std::size_t i = 0; i < dX.size(); ++i) dX[i] += factor * dY[i];
    };
  }
  return r;
}

Graph::Var Graph::mse(Var pred, Var target) {
  const Tensor& P = value(pred);
  const Tensor& T = value(target);
  require(P.size() == T.size() && P.size() >= 1,
          "mse: sizes " + std::to_string(P.size()) + " and " + std::to_string(T.size()));
  const double n = static_cast<double>(P.size());
  double s = 0.0;
  for (std::size_t i = 0; i < P.size(); ++i) {
    const double e = P[i] - T[i];
    s += e * e;
  }
  Var r = push(Tensor::scalar(s / n), {pred.id, target.id});
  if (requires_grad(r)) {
    nodes_[r.id].backward = [this, pred, target, r, n] {
      const double g = nodes_[r.id].grad[0];
      const Tensor& P = value(pred);
      const Tensor& T = value(target);
      for (Var v : {pred, target}) {
        if (!requires_grad(v)) continue;
        const double sign = v.id == pred.id ? 1.0 : -1.0;
        Tensor& d = grad_of(v.id);
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += sign * 2.0 * (P[i] - T[i]) / n * g;
      }
    };
  }
  return r;
}

std::vector<bool> Graph::relu_pattern() const {
  std::vector<bool> out;
  for (const Node& n : nodes_)
    if (n.relu)
      for (double v : n.value.values()) out.push_back(v > 0.0);
  return out;
}

void Graph::backward(Var loss) {
  const Tensor& L = value(loss);
  require(L.size() == 1, "backward: loss must be a scalar, got " + shape_string(L.shape()));

  // Depth-first topological order over nodes that need gradients.
  enum class Mark : unsigned char { kNone, kActive, kDone };
  std::vector<Mark> mark(nodes_.size(), Mark::kNone);
  std::vector<std::size_t> order;
  std::vector<std::pair<std::size_t, std::size_t>> stack{{loss.id, 0}};
  mark[loss.id] = Mark::kActive;
  while (!stack.empty()) {
    auto& [id, next] = stack.back();
    const auto& parents = nodes_[id].parents;
    if (next < parents.size()) {
      const std::size_t p = parents[next++];
      if (!nodes_[p].requires_grad) continue;
      if (mark[p] == Mark::kActive) throw GraphCycle("cycle detected at node " + std::to_string(p));
      if (mark[p] == Mark::kNone) {
        mark[p] = Mark::kActive;
        stack.emplace_back(p, 0);
      }
    } else {
      mark[id] = Mark::kDone;
      order.push_back(id);
      stack.pop_back();
    }
  }

  for (auto& n : nodes_) n.grad = Tensor();
  if (!nodes_[loss.id].requires_grad) return;
  grad_of(loss.id).fill(1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node& n = nodes_[*it];
    if (n.grad.empty()) continue;
    if (n.backward) n.backward();
  }
  for (auto& n : nodes_) {
    if (n.param == nullptr || n.grad.empty()) continue;
    Tensor& g = n.param->grad;
    if (!g.same_shape(n.value)) g = Tensor(n.value.shape());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
  }
}

}  // namespace visrssi
