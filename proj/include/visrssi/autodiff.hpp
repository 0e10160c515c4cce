// Copyright 2026 The visrssi Authors
// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode differentiation over a tape of dense tensor operations.
//
// A Graph records every operation in creation order; a node's parents always
// precede it. Trainable leaves are bound to Parameter objects, and backward()
// accumulates their gradients into Parameter::grad. Frozen parameters enter
// the graph as constants, so no gradient is computed through them and any
// subgraph that depends only on constants is skipped during backward.

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "visrssi/tensor.hpp"

namespace visrssi {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool frozen = false;
};

/// Ordered, name-addressable collection of parameters.
class ParameterSet {
 public:
  /// Registers a new zero-initialized parameter and returns its index.
  std::size_t add(std::string name, Shape shape);

  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  Parameter& get(std::string_view name);
  const Parameter& get(std::string_view name) const;
  bool contains(std::string_view name) const;

  std::size_t size() const { return params_.size(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad();
  /// Marks every parameter whose name starts with `prefix` as (un)frozen.
  void set_frozen(std::string_view prefix, bool frozen);

  /// Number of scalar values, optionally restricted to non-frozen parameters.
  std::size_t scalar_count(bool trainable_only = false) const;

  std::vector<Tensor> snapshot() const;
  void restore(const std::vector<Tensor>& values);

 private:
  std::vector<Parameter> params_;
};

class Graph {
 public:
  struct Var {
    std::size_t id = 0;
  };

  explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var input(Tensor value);
  Var param(Parameter& p);

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  /// Gradient of the last backward() target with respect to `v` (zeros if unreached).
  Tensor grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  std::size_t node_count() const { return nodes_.size(); }
  /// Active/inactive state of every ReLU unit recorded so far, in order.
  std::vector<bool> relu_pattern() const;

  // x: [in] or [N,in]; w: [out,in]; b: [out]
  Var linear(Var x, Var w, Var b);
  Var relu(Var x);
  // x: [N,Cin,L]; w: [Cout,Cin]; b: [Cout]
  Var conv1d_k1(Var x, Var w, Var b);
  // [N,C,L] -> [N,C]
  Var adaptive_avg_pool1d(Var x);
  // x: [N,Cin,H,W]; w: [Cout,Cin,k,k]; b: [Cout]; zero padding
  Var conv2d(Var x, Var w, Var b, std::size_t stride, std::size_t padding);
  // [N,C,H,W] -> [N,C]
  Var global_avg_pool2d(Var x);
  // Concatenates rank-2 tensors along axis 1.
  Var concat(std::span<const Var> parts);
  Var reshape(Var x, Shape shape);
  // [N,A,B] -> [N,B,A]
  Var transpose_last2(Var x);
  Var add(Var a, Var b);
  Var scale(Var x, double factor);
  /// Mean squared difference, returned as a scalar.
  Var mse(Var pred, Var target);

  /// Accumulates d(loss)/d(parameter) into every reachable trainable Parameter.
  /// Throws ShapeMismatch unless `loss` holds one value, GraphCycle if the
  /// recorded parent relation is not a DAG.
  void backward(Var loss);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> parents;
    std::function<void()> backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
    bool relu = false;
  };

  Var push(Tensor value, std::vector<std::size_t> parents);
  Tensor& grad_of(std::size_t id);
  bool any_requires_grad(std::initializer_list<Var> vars) const;

  std::vector<Node> nodes_;
  bool grad_enabled_;
};

}  // namespace visrssi
