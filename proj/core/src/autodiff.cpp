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
#include "sedkit/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "autodiff_detail.hpp"
#include "sedkit/errors.hpp"

namespace sedkit::ad {

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

// Tensor ---------------------------------------------------------------------

const Shape& Tensor::shape() const { return tape_->shape_of(id_); }
std::size_t Tensor::size() const { return tape_->values_of(id_).size(); }
std::span<const double> Tensor::values() const { return tape_->values_of(id_); }
bool Tensor::requires_grad() const { return tape_->requires_grad(id_); }

double Tensor::item() const {
  const auto v = values();
  if (v.size() != 1) {
    throw std::invalid_argument("item() on tensor of shape " +
                                shape_str(shape()));
  }
  return v[0];
}

// Tape -----------------------------------------------------------------------

Tensor Tape::push(std::string_view op, Shape shape, std::vector<double> values,
                  bool requires_grad, Pullback pullback) {
  if (consumed_) {
    throw std::logic_error("tape already consumed by backward(); clear() it");
  }
  if (values.size() != numel(shape)) {
    throw std::invalid_argument(std::string(op) + ": value count " +
                                std::to_string(values.size()) +
                                " does not match shape " + shape_str(shape));
  }
  for (const double v : values) {
    if (!std::isfinite(v)) {
      throw NumericError("op '" + std::string(op) +
                         "' produced a non-finite value (shape " +
                         shape_str(shape) + ")");
    }
  }
  nodes_.push_back(Node{op, std::move(shape), std::move(values), {},
                        requires_grad,
                        requires_grad ? std::move(pullback) : Pullback{}});
  return Tensor(this, nodes_.size() - 1);
}

Tensor Tape::constant(Shape shape, std::vector<double> values) {
  return push("constant", std::move(shape), std::move(values), false, {});
}

Tensor Tape::variable(Shape shape, std::vector<double> values) {
  return push("variable", std::move(shape), std::move(values), true, {});
}

Tensor Tape::record(std::string_view op, Shape shape, std::vector<double> values,
                    std::span<const Tensor> inputs, Pullback pullback) {
  bool needs_grad = false;
  for (const auto& in : inputs) {
    if (!in.valid() || &in.tape() != this) {
      throw std::invalid_argument(std::string(op) +
                                  ": input tensor belongs to another tape");
    }
    needs_grad = needs_grad || nodes_[in.id()].requires_grad;
  }
  return push(op, std::move(shape), std::move(values), needs_grad,
              std::move(pullback));
}

void Tape::backward(const Tensor& loss) {
  if (nodes_.empty()) throw std::logic_error("backward() on an empty tape");
  if (consumed_) {
    throw std::logic_error("backward() called twice without a new forward pass");
  }
  if (!loss.valid() || &loss.tape() != this) {
    throw std::invalid_argument("backward(): loss belongs to another tape");
  }
  if (loss.size() != 1) {
    throw std::invalid_argument("backward(): loss must be scalar, got " +
                                shape_str(loss.shape()));
  }
  consumed_ = true;
  for (auto& node : nodes_) {
    if (node.requires_grad) node.grad.assign(node.values.size(), 0.0);
  }
  if (!nodes_[loss.id()].requires_grad) return;
  nodes_[loss.id()].grad[0] = 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    if (nodes_[i].pullback) nodes_[i].pullback(*this, Tensor(this, i));
  }
}

std::span<const double> Tape::grad(const Tensor& t) const {
  const Node& node = nodes_.at(t.id());
  if (!node.requires_grad || !consumed_) {
    throw std::logic_error(
        "grad(): tensor has no gradient (constant, or backward() not run)");
  }
  return node.grad;
}

std::span<double> Tape::grad_mut(const Tensor& t) { return nodes_[t.id()].grad; }

void Tape::clear() {
  nodes_.clear();
  consumed_ = false;
}

std::vector<std::string_view> Tape::op_trace() const {
  std::vector<std::string_view> trace;
  trace.reserve(nodes_.size());
  for (const auto& node : nodes_) trace.push_back(node.op);
  return trace;
}

// Helpers --------------------------------------------------------------------

namespace detail {

void check_same_tape(std::string_view op, const Tensor& a, const Tensor& b) {
  if (!a.valid() || !b.valid() || &a.tape() != &b.tape()) {
    throw std::invalid_argument(std::string(op) +
                                ": operands live on different tapes");
  }
}

void shape_error(std::string_view op, const Shape& a, const Shape& b) {
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " +
                              shape_str(a) + " and " + shape_str(b));
}

AxisSplit split_axis(const Shape& shape, std::size_t axis, std::string_view op) {
  if (axis >= shape.size()) {
    throw std::invalid_argument(std::string(op) + ": axis " +
                                std::to_string(axis) + " out of range for " +
                                shape_str(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.len = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace detail

namespace {

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

Shape broadcast_shape(std::string_view op, const Tensor& a, const Tensor& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa == sb) return sa;
  if (b.size() == 1 || (is_suffix(sb, sa) && a.size() >= b.size())) return sa;
  if (a.size() == 1 || is_suffix(sa, sb)) return sb;
  detail::shape_error(op, sa, sb);
}

// Elementwise binary op with suffix broadcasting. `da`/`db` return the local
// partial derivatives given (a_i, b_i).
template <typename Fwd, typename DA, typename DB>
Tensor binary_op(std::string_view op, const Tensor& a, const Tensor& b, Fwd fwd,
                 DA da, DB db) {
  detail::check_same_tape(op, a, b);
  Shape out_shape = broadcast_shape(op, a, b);
  const std::size_t n = numel(out_shape);
  const auto av = a.values();
  const auto bv = b.values();
  const std::size_t na = av.size(), nb = bv.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = fwd(av[i % na], bv[i % nb]);
  return a.tape().record(
      op, std::move(out_shape), std::move(out), {a, b},
      [a, b, n, na, nb, da, db](Tape& t, const Tensor& self) {
        const auto g = t.grad_mut(self);
        const auto av = a.values();
        const auto bv = b.values();
        if (a.requires_grad()) {
          auto ga = t.grad_mut(a);
          for (std::size_t i = 0; i < n; ++i) {
            ga[i % na] += g[i] * da(av[i % na], bv[i % nb]);
          }
        }
        if (b.requires_grad()) {
          auto gb = t.grad_mut(b);
          for (std::size_t i = 0; i < n; ++i) {
            gb[i % nb] += g[i] * db(av[i % na], bv[i % nb]);
          }
        }
      });
}

// Elementwise unary op; `dfdx` receives (x, y=f(x)).
template <typename Fwd, typename Deriv>
Tensor unary_op(std::string_view op, const Tensor& a, Fwd fwd, Deriv dfdx) {
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
  return a.tape().record(op, a.shape(), std::move(out), {a},
                         [a, dfdx](Tape& t, const Tensor& self) {
                           const auto g = t.grad_mut(self);
                           const auto x = a.values();
                           const auto y = self.values();
                           auto ga = t.grad_mut(a);
                           for (std::size_t i = 0; i < x.size(); ++i) {
                             ga[i] += g[i] * dfdx(x[i], y[i]);
                           }
                         });
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

// Elementwise ------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor scale(const Tensor& a, double c) {
  return unary_op(
      "scale", a, [c](double x) { return c * x; },
      [c](double, double) { return c; });
}

Tensor relu(const Tensor& a) {
  return unary_op(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_op("sigmoid", a, stable_sigmoid,
                  [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& a) {
  return unary_op(
      "tanh", a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor log(const Tensor& a) {
  return unary_op(
      "log", a, [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

Tensor exp(const Tensor& a) {
  return unary_op(
      "exp", a, [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

// Reductions -------------------------------------------------------------------

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (const double v : a.values()) s += v;
  return a.tape().record("sum", {}, {s}, {a},
                         [a](Tape& t, const Tensor& self) {
                           const double g = t.grad_mut(self)[0];
                           for (double& v : t.grad_mut(a)) v += g;
                         });
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw std::invalid_argument("mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor sum(const Tensor& a, std::size_t axis) {
  const auto s = detail::split_axis(a.shape(), axis, "sum");
  Shape out_shape = a.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  const auto av = a.values();
  std::vector<double> out(s.outer * s.inner, 0.0);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t l = 0; l < s.len; ++l) {
      const double* src = av.data() + (o * s.len + l) * s.inner;
      double* dst = out.data() + o * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i];
    }
  }
  return a.tape().record("sum_axis", std::move(out_shape), std::move(out), {a},
                         [a, s](Tape& t, const Tensor& self) {
                           const auto g = t.grad_mut(self);
                           auto ga = t.grad_mut(a);
                           for (std::size_t o = 0; o < s.outer; ++o) {
                             for (std::size_t l = 0; l < s.len; ++l) {
                               double* dst = ga.data() + (o * s.len + l) * s.inner;
                               const double* src = g.data() + o * s.inner;
                               for (std::size_t i = 0; i < s.inner; ++i) {
                                 dst[i] += src[i];
                               }
                             }
                           }
                         });
}

Tensor mean(const Tensor& a, std::size_t axis) {
  const std::size_t len = detail::split_axis(a.shape(), axis, "mean").len;
  if (len == 0) throw std::invalid_argument("mean: empty axis");
  return scale(sum(a, axis), 1.0 / static_cast<double>(len));
}

// Shape ops ------------------------------------------------------------------

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a.size()) detail::shape_error("reshape", a.shape(), shape);
  std::vector<double> out(a.values().begin(), a.values().end());
  return a.tape().record("reshape", std::move(shape), std::move(out), {a},
                         [a](Tape& t, const Tensor& self) {
                           const auto g = t.grad_mut(self);
                           auto ga = t.grad_mut(a);
                           for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                         });
}

Tensor transpose(const Tensor& a) {
  if (a.shape().size() != 2) {
    throw std::invalid_argument("transpose: expected 2-D tensor, got " +
                                shape_str(a.shape()));
  }
  const std::size_t rows = a.dim(0), cols = a.dim(1);
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = av[r * cols + c];
  }
  return a.tape().record("transpose", {cols, rows}, std::move(out), {a},
                         [a, rows, cols](Tape& t, const Tensor& self) {
                           const auto g = t.grad_mut(self);
                           auto ga = t.grad_mut(a);
                           for (std::size_t r = 0; r < rows; ++r) {
                             for (std::size_t c = 0; c < cols; ++c) {
                               ga[r * cols + c] += g[c * rows + r];
                             }
                           }
                         });
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  const Shape& first = parts.front().shape();
  Shape out_shape = first;
  const auto base = detail::split_axis(first, axis, "concat");
  std::size_t total = 0;
  for (const auto& p : parts) {
    detail::check_same_tape("concat", parts.front(), p);
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) {
      if (i != axis && s[i] != first[i]) ok = false;
    }
    if (!ok) detail::shape_error("concat", first, s);
    total += s[axis];
  }
  out_shape[axis] = total;
  std::vector<double> out(numel(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const std::size_t len = p.shape()[axis];
    const auto pv = p.values();
    for (std::size_t o = 0; o < base.outer; ++o) {
      std::copy_n(pv.data() + o * len * base.inner, len * base.inner,
                  out.data() + (o * total + off) * base.inner);
    }
    off += len;
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return parts.front().tape().record(
      "concat", std::move(out_shape), std::move(out), parts,
      [inputs, offsets, base, total, axis](Tape& t, const Tensor& self) {
        const auto g = t.grad_mut(self);
        for (std::size_t k = 0; k < inputs.size(); ++k) {
          const Tensor& p = inputs[k];
          if (!p.requires_grad()) continue;
          const std::size_t len = p.shape()[axis];
          auto gp = t.grad_mut(p);
          for (std::size_t o = 0; o < base.outer; ++o) {
            const double* src = g.data() + (o * total + offsets[k]) * base.inner;
            double* dst = gp.data() + o * len * base.inner;
            for (std::size_t i = 0; i < len * base.inner; ++i) dst[i] += src[i];
          }
        }
      });
}

Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis) {
  return concat(std::span<const Tensor>(parts.begin(), parts.size()), axis);
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin,
             std::size_t end) {
  const auto s = detail::split_axis(a.shape(), axis, "slice");
  if (begin >= end || end > s.len) {
    throw std::invalid_argument("slice: range [" + std::to_string(begin) + ", " +
                                std::to_string(end) + ") invalid for " +
                                shape_str(a.shape()) + " on axis " +
                                std::to_string(axis));
  }
  Shape out_shape = a.shape();
  const std::size_t len = end - begin;
  out_shape[axis] = len;
  const auto av = a.values();
  std::vector<double> out(s.outer * len * s.inner);
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(av.data() + (o * s.len + begin) * s.inner, len * s.inner,
                out.data() + o * len * s.inner);
  }
  return a.tape().record(
      "slice", std::move(out_shape), std::move(out), {a},
      [a, s, begin, len](Tape& t, const Tensor& self) {
        const auto g = t.grad_mut(self);
        auto ga = t.grad_mut(a);
        for (std::size_t o = 0; o < s.outer; ++o) {
          const double* src = g.data() + o * len * s.inner;
          double* dst = ga.data() + (o * s.len + begin) * s.inner;
          for (std::size_t i = 0; i < len * s.inner; ++i) dst[i] += src[i];
        }
      });
}

// Softmax --------------------------------------------------------------------

Tensor softmax(const Tensor& a, std::size_t axis) {
  const auto s = detail::split_axis(a.shape(), axis, "softmax");
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.len * s.inner + i;
      double mx = av[base];
      for (std::size_t l = 1; l < s.len; ++l) mx = std::max(mx, av[base + l * s.inner]);
      double z = 0.0;
      for (std::size_t l = 0; l < s.len; ++l) {
        out[base + l * s.inner] = std::exp(av[base + l * s.inner] - mx);
        z += out[base + l * s.inner];
      }
      for (std::size_t l = 0; l < s.len; ++l) out[base + l * s.inner] /= z;
    }
  }
  return a.tape().record(
      "softmax", a.shape(), std::move(out), {a},
      [a, s](Tape& t, const Tensor& self) {
        const auto g = t.grad_mut(self);
        const auto y = self.values();
        auto ga = t.grad_mut(a);
        for (std::size_t o = 0; o < s.outer; ++o) {
          for (std::size_t i = 0; i < s.inner; ++i) {
            const std::size_t base = o * s.len * s.inner + i;
            double dot = 0.0;
            for (std::size_t l = 0; l < s.len; ++l) {
              dot += g[base + l * s.inner] * y[base + l * s.inner];
            }
            for (std::size_t l = 0; l < s.len; ++l) {
              const std::size_t k = base + l * s.inner;
              ga[k] += y[k] * (g[k] - dot);
            }
          }
        }
      });
}

Tensor log_softmax(const Tensor& a, std::size_t axis) {
  const auto s = detail::split_axis(a.shape(), axis, "log_softmax");
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.len * s.inner + i;
      double mx = av[base];
      for (std::size_t l = 1; l < s.len; ++l) mx = std::max(mx, av[base + l * s.inner]);
      double z = 0.0;
      for (std::size_t l = 0; l < s.len; ++l) z += std::exp(av[base + l * s.inner] - mx);
      const double lse = mx + std::log(z);
      for (std::size_t l = 0; l < s.len; ++l) {
        out[base + l * s.inner] = av[base + l * s.inner] - lse;
      }
    }
  }
  return a.tape().record(
      "log_softmax", a.shape(), std::move(out), {a},
      [a, s](Tape& t, const Tensor& self) {
        const auto g = t.grad_mut(self);
        const auto y = self.values();
        auto ga = t.grad_mut(a);
        for (std::size_t o = 0; o < s.outer; ++o) {
          for (std::size_t i = 0; i < s.inner; ++i) {
            const std::size_t base = o * s.len * s.inner + i;
            double gsum = 0.0;
            for (std::size_t l = 0; l < s.len; ++l) gsum += g[base + l * s.inner];
            for (std::size_t l = 0; l < s.len; ++l) {
              const std::size_t k = base + l * s.inner;
              ga[k] += g[k] - std::exp(y[k]) * gsum;
            }
          }
        }
      });
}

}  // namespace sedkit::ad
