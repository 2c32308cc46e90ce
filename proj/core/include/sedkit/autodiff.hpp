// Copyright 2026 The sedkit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

// Reverse-mode automatic differentiation over dense float64 tensors.
//
// A Tape owns every tensor recorded on it; Tensor is a lightweight handle
// (tape pointer + node index). Each forward op appends one node holding its
// value and a pullback closure. backward() walks the nodes in exact reverse
// order and accumulates gradients, so fan-out is handled by summation.
//
// A tape is single-use: after backward() it must be clear()ed before new
// ops are recorded. Every forward op validates shapes and rejects non-finite
// results with NumericError.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sedkit::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tape;

class Tensor {
 public:
  Tensor() = default;

  bool valid() const noexcept { return tape_ != nullptr; }
  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }

  const Shape& shape() const;
  std::size_t size() const;
  std::size_t dim(std::size_t axis) const { return shape().at(axis); }
  std::span<const double> values() const;
  /// Value of a single-element tensor.
  double item() const;
  bool requires_grad() const;

 private:
  friend class Tape;
  Tensor(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  /// Receives the tape and the node's own output tensor.
  using Pullback = std::function<void(Tape&, const Tensor& self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Tensor constant(Shape shape, std::vector<double> values);
  Tensor scalar(double value) { return constant({}, {value}); }
  /// Leaf that receives a gradient in backward().
  Tensor variable(Shape shape, std::vector<double> values);

  /// Appends an op node. Used by op implementations; the pullback is dropped
  /// when no input requires a gradient.
  Tensor record(std::string_view op, Shape shape, std::vector<double> values,
                std::span<const Tensor> inputs, Pullback pullback);
  Tensor record(std::string_view op, Shape shape, std::vector<double> values,
                std::initializer_list<Tensor> inputs, Pullback pullback) {
    return record(op, std::move(shape), std::move(values),
                  std::span<const Tensor>(inputs.begin(), inputs.size()),
                  std::move(pullback));
  }

  void backward(const Tensor& loss);

  /// Gradient of the last backward() w.r.t. `t` (all zeros if unreachable).
  std::span<const double> grad(const Tensor& t) const;
  /// Mutable gradient buffer; only valid inside pullbacks.
  std::span<double> grad_mut(const Tensor& t);

  const Shape& shape_of(std::size_t id) const { return nodes_[id].shape; }
  std::span<const double> values_of(std::size_t id) const {
    return nodes_[id].values;
  }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  std::size_t size() const noexcept { return nodes_.size(); }
  bool consumed() const noexcept { return consumed_; }
  void clear();

  /// Op names in recording order; two structurally identical graphs produce
  /// identical traces.
  std::vector<std::string_view> op_trace() const;

 private:
  struct Node {
    std::string_view op;
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;
    bool requires_grad = false;
    Pullback pullback;
  };

  Tensor push(std::string_view op, Shape shape, std::vector<double> values,
              bool requires_grad, Pullback pullback);

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

// Elementwise binary ops. Shapes must match, or the smaller operand's shape
// must equal a trailing suffix of the larger one (it repeats over the leading
// dims); a single-element tensor broadcasts everywhere.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);

// Elementwise unary ops.
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor log(const Tensor& a);
Tensor exp(const Tensor& a);

// Reductions.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor sum(const Tensor& a, std::size_t axis);
Tensor mean(const Tensor& a, std::size_t axis);

// Shape manipulation.
Tensor reshape(const Tensor& a, Shape shape);
Tensor transpose(const Tensor& a);  // 2-D only
Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis);
Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin,
             std::size_t end);

Tensor softmax(const Tensor& a, std::size_t axis);
Tensor log_softmax(const Tensor& a, std::size_t axis);

/// [M x K] . [K x N] -> [M x N]
Tensor matmul(const Tensor& a, const Tensor& b);

/// x [C_in, H, W], w [C_out, C_in, k, k] (k odd), b [C_out]; stride 1, zero
/// "same" padding -> [C_out, H, W].
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b);

/// Non-overlapping max pooling over a [C, H, W] tensor with a
/// pool_h x pool_w window. Ties route the gradient to the first maximum in
/// row-major window order.
Tensor maxpool2d(const Tensor& x, std::size_t pool_h, std::size_t pool_w);

/// Single-direction GRU layer with PyTorch gate layout [reset|update|new]:
///   r = sig(x Wr + br + h Ur + cr)
///   u = sig(x Wu + bu + h Uu + cu)
///   n = tanh(x Wn + bn + r * (h Un + cn))
///   h' = (1 - u) * n + u * h,  h_0 = 0
/// x [T x D], w_ih [D x 3H], w_hh [H x 3H], b_ih/b_hh [3H] -> [T x H].
/// With `reverse`, time runs from T-1 down to 0; row t still holds the state
/// after consuming x[t].
Tensor gru(const Tensor& x, const Tensor& w_ih, const Tensor& w_hh,
           const Tensor& b_ih, const Tensor& b_hh, bool reverse);

/// sum_n w[n] * sum_t [max(y,0) - y*z + log(1 + exp(-|y|))] for logits
/// y [N x T], constant targets z [N x T] and row weights w [N].
Tensor bce_with_logits(const Tensor& logits, const Tensor& targets,
                       const Tensor& row_weights);

// Finite-difference gradient check ------------------------------------------

struct ParamPoint {
  Shape shape;
  std::vector<double> values;
};

/// Builds a scalar-valued graph on `tape` from leaf variables `params`.
using GraphBuilder =
    std::function<Tensor(Tape& tape, std::span<const Tensor> params)>;

struct GradcheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Compares reverse-mode gradients with central differences. Per element:
/// |analytic - numeric| / max(1e-8, |analytic| + |numeric|). Throws
/// std::logic_error if the builder records a different graph between calls.
GradcheckResult gradcheck(const GraphBuilder& builder,
                          std::span<const ParamPoint> point,
                          double step = 1e-5);

}  // namespace sedkit::ad
