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
#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>
#include <stdexcept>

#include "autodiff_detail.hpp"
#include "sedkit/autodiff.hpp"

namespace sedkit::ad {
namespace {

void require_rank(std::string_view op, const Tensor& t, std::size_t rank) {
  if (t.shape().size() != rank) {
    throw std::invalid_argument(std::string(op) + ": expected rank-" +
                                std::to_string(rank) + " tensor, got " +
                                shape_str(t.shape()));
  }
}

double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Eight doubles per register block. Lanes never mix, so results do not depend
// on the vector width the compiler picks.
constexpr std::size_t kLanes = 8;
using Lanes = double __attribute__((vector_size(kLanes * sizeof(double))));

Lanes load(const double* p) {
  Lanes v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

void store(double* p, Lanes v) { std::memcpy(p, &v, sizeof v); }

double lane_sum(Lanes v) {
  double s = 0.0;
  for (std::size_t l = 0; l < kLanes; ++l) s += v[l];
  return s;
}

// Dot product with lane-wise partial sums in a fixed order.
double dot(const double* a, const double* b, std::size_t n) {
  Lanes acc = {};
  std::size_t j = 0;
  for (; j + kLanes <= n; j += kLanes) acc += load(a + j) * load(b + j);
  double s = lane_sum(acc);
  for (; j < n; ++j) s += a[j] * b[j];
  return s;
}

// out[M x N] += a[M x K] . b[K x N]
void gemm_nn(const double* a, const double* b, double* out, std::size_t m,
             std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = out + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
}

// out[M x K] += g[M x N] . b[K x N]^T
void gemm_nt(const double* g, const double* b, double* out, std::size_t m,
             std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* grow = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      out[i * k + p] += dot(grow, b + p * n, n);
    }
  }
}

// out[K x N] += a[M x K]^T . g[M x N]
void gemm_tn(const double* a, const double* g, double* out, std::size_t m,
             std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* grow = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      double* orow = out + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * grow[j];
    }
  }
}

}  // namespace

// Matmul -----------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  detail::check_same_tape("matmul", a, b);
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) detail::shape_error("matmul", a.shape(), b.shape());
  std::vector<double> out(m * n, 0.0);
  gemm_nn(a.values().data(), b.values().data(), out.data(), m, k, n);
  return a.tape().record(
      "matmul", {m, n}, std::move(out), {a, b},
      [a, b, m, k, n](Tape& t, const Tensor& self) {
        const auto g = t.grad_mut(self);
        if (a.requires_grad()) {
          gemm_nt(g.data(), b.values().data(), t.grad_mut(a).data(), m, k, n);
        }
        if (b.requires_grad()) {
          gemm_tn(a.values().data(), g.data(), t.grad_mut(b).data(), m, k, n);
        }
      });
}

// Conv2d -----------------------------------------------------------------------

namespace {

struct ConvGeometry {
  std::size_t cin, cout, h, w, k;
};

std::size_t round_up(std::size_t n, std::size_t m) { return (n + m - 1) / m * m; }

// Zero-padded copy: `pad` rows/columns around each plane, row stride
// round_up(w, kLanes) + 2 * pad + kLanes.
struct PaddedPlanes {
  std::vector<double> data;
  std::size_t rows = 0, stride = 0;

  PaddedPlanes(const double* src, std::size_t planes, std::size_t h, std::size_t w,
               std::size_t pad)
      : rows(h + 2 * pad), stride(round_up(w, kLanes) + 2 * pad + kLanes) {
    data.assign(planes * rows * stride, 0.0);
    for (std::size_t c = 0; c < planes; ++c) {
      for (std::size_t i = 0; i < h; ++i) {
        std::copy_n(src + (c * h + i) * w, w, plane(c) + (i + pad) * stride + pad);
      }
    }
  }
  double* plane(std::size_t c) { return data.data() + c * rows * stride; }
  const double* plane(std::size_t c) const { return data.data() + c * rows * stride; }
};

// out[co, i, j] = sum_{ci, a, b} w[co, ci, a, b] * xp[ci, i + a, j + b] for CB
// output channels starting at co0; `out` rows have stride round_up(w, kLanes).
template <std::size_t CB, std::size_t K>
void conv_block(const PaddedPlanes& xp, const double* w, const ConvGeometry& g,
                std::size_t co0, double* out) {
  const std::size_t wp = round_up(g.w, kLanes);
  const std::size_t wstride = g.cin * K * K;
  for (std::size_t i = 0; i < g.h; ++i) {
    for (std::size_t j0 = 0; j0 < wp; j0 += kLanes) {
      Lanes acc[CB] = {};
      for (std::size_t ci = 0; ci < g.cin; ++ci) {
        const double* xplane = xp.plane(ci);
        const double* wci = w + co0 * wstride + ci * K * K;
        for (std::size_t a = 0; a < K; ++a) {
          const double* xrow = xplane + (i + a) * xp.stride + j0;
          for (std::size_t b = 0; b < K; ++b) {
            const Lanes xv = load(xrow + b);
            for (std::size_t c = 0; c < CB; ++c) acc[c] += wci[c * wstride + a * K + b] * xv;
          }
        }
      }
      for (std::size_t c = 0; c < CB; ++c) store(out + ((co0 + c) * g.h + i) * wp + j0, acc[c]);
    }
  }
}

// gw[co, ci, a, b] += sum_{i, j} gy[co, i, j] * xp[ci, i + a, j + b] for CB
// output channels. Column strips are accumulated lane-wise in a fixed order.
template <std::size_t CB, std::size_t K>
void weight_grad_block(const PaddedPlanes& gyp, const PaddedPlanes& xp,
                       const ConvGeometry& g, std::size_t co0, double* gw) {
  const std::size_t pad = K / 2, wp = round_up(g.w, kLanes);
  for (std::size_t ci = 0; ci < g.cin; ++ci) {
    const double* xplane = xp.plane(ci);
    for (std::size_t a = 0; a < K; ++a) {
      Lanes acc[CB][K] = {};
      for (std::size_t i = 0; i < g.h; ++i) {
        const double* xrow = xplane + (i + a) * xp.stride;
        const double* grows[CB];
        for (std::size_t c = 0; c < CB; ++c) {
          grows[c] = gyp.plane(co0 + c) + (i + pad) * gyp.stride + pad;
        }
        for (std::size_t j0 = 0; j0 < wp; j0 += kLanes) {
          Lanes xv[K];
          for (std::size_t b = 0; b < K; ++b) xv[b] = load(xrow + j0 + b);
          for (std::size_t c = 0; c < CB; ++c) {
            const Lanes gv = load(grows[c] + j0);
            for (std::size_t b = 0; b < K; ++b) acc[c][b] += gv * xv[b];
          }
        }
      }
      for (std::size_t c = 0; c < CB; ++c) {
        for (std::size_t b = 0; b < K; ++b) {
          gw[(((co0 + c) * g.cin + ci) * K + a) * K + b] += lane_sum(acc[c][b]);
        }
      }
    }
  }
}

template <std::size_t K>
void conv_all(const PaddedPlanes& xp, const double* w, const ConvGeometry& g, double* out) {
  std::size_t co = 0;
  for (; co + 4 <= g.cout; co += 4) conv_block<4, K>(xp, w, g, co, out);
  for (; co < g.cout; ++co) conv_block<1, K>(xp, w, g, co, out);
}

template <std::size_t K>
void weight_grad_all(const PaddedPlanes& gyp, const PaddedPlanes& xp, const ConvGeometry& g,
                     double* gw) {
  std::size_t co = 0;
  for (; co + 4 <= g.cout; co += 4) weight_grad_block<4, K>(gyp, xp, g, co, gw);
  for (; co < g.cout; ++co) weight_grad_block<1, K>(gyp, xp, g, co, gw);
}

// Same-padded correlation of x [cin, h, w] with w [cout, cin, k, k]; returns
// [cout, h, w] without bias.
std::vector<double> conv_same(const double* x, const double* w, const ConvGeometry& g) {
  const PaddedPlanes xp(x, g.cin, g.h, g.w, g.k / 2);
  const std::size_t wp = round_up(g.w, kLanes);
  std::vector<double> wide(g.cout * g.h * wp);
  switch (g.k) {
    case 1: conv_all<1>(xp, w, g, wide.data()); break;
    case 3: conv_all<3>(xp, w, g, wide.data()); break;
    case 5: conv_all<5>(xp, w, g, wide.data()); break;
    case 7: conv_all<7>(xp, w, g, wide.data()); break;
    default: throw std::invalid_argument("conv2d: kernel size " + std::to_string(g.k) +
                                         " not supported (1, 3, 5 or 7)");
  }
  if (wp == g.w) return wide;
  std::vector<double> out(g.cout * g.h * g.w);
  for (std::size_t r = 0; r < g.cout * g.h; ++r) {
    std::copy_n(wide.data() + r * wp, g.w, out.data() + r * g.w);
  }
  return out;
}

void conv_weight_grad(const double* gy, const double* x, const ConvGeometry& g, double* gw) {
  const PaddedPlanes xp(x, g.cin, g.h, g.w, g.k / 2);
  const PaddedPlanes gyp(gy, g.cout, g.h, g.w, g.k / 2);
  switch (g.k) {
    case 1: weight_grad_all<1>(gyp, xp, g, gw); break;
    case 3: weight_grad_all<3>(gyp, xp, g, gw); break;
    case 5: weight_grad_all<5>(gyp, xp, g, gw); break;
    case 7: weight_grad_all<7>(gyp, xp, g, gw); break;
    default: throw std::invalid_argument("conv2d: unsupported kernel size");
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b) {
  detail::check_same_tape("conv2d", x, w);
  detail::check_same_tape("conv2d", x, b);
  require_rank("conv2d", x, 3);
  require_rank("conv2d", w, 4);
  require_rank("conv2d", b, 1);
  const ConvGeometry g{x.dim(0), w.dim(0), x.dim(1), x.dim(2), w.dim(2)};
  if (w.dim(1) != g.cin || w.dim(3) != g.k || g.k % 2 == 0) {
    detail::shape_error("conv2d", x.shape(), w.shape());
  }
  if (b.dim(0) != g.cout) detail::shape_error("conv2d", w.shape(), b.shape());

  const std::size_t plane = g.h * g.w;
  std::vector<double> out = conv_same(x.values().data(), w.values().data(), g);
  const double* bv = b.values().data();
  for (std::size_t co = 0; co < g.cout; ++co) {
    for (std::size_t i = 0; i < plane; ++i) out[co * plane + i] += bv[co];
  }

  return x.tape().record(
      "conv2d", {g.cout, g.h, g.w}, std::move(out), {x, w, b},
      [x, w, b, g](Tape& t, const Tensor& self) {
        const std::size_t plane = g.h * g.w;
        const double* gv = t.grad_mut(self).data();
        if (b.requires_grad()) {
          auto gb = t.grad_mut(b);
          for (std::size_t co = 0; co < g.cout; ++co) {
            double s = 0.0;
            for (std::size_t i = 0; i < plane; ++i) s += gv[co * plane + i];
            gb[co] += s;
          }
        }
        if (x.requires_grad()) {
          // Input gradient: same-padded correlation of the output gradient
          // with the flipped, channel-transposed kernel.
          const std::size_t k = g.k;
          const double* wv = w.values().data();
          std::vector<double> flipped(g.cin * g.cout * k * k);
          for (std::size_t co = 0; co < g.cout; ++co) {
            for (std::size_t ci = 0; ci < g.cin; ++ci) {
              for (std::size_t a = 0; a < k; ++a) {
                for (std::size_t bb = 0; bb < k; ++bb) {
                  flipped[((ci * g.cout + co) * k + (k - 1 - a)) * k + (k - 1 - bb)] =
                      wv[((co * g.cin + ci) * k + a) * k + bb];
                }
              }
            }
          }
          const ConvGeometry back{g.cout, g.cin, g.h, g.w, k};
          const std::vector<double> dx = conv_same(gv, flipped.data(), back);
          auto gx = t.grad_mut(x);
          for (std::size_t i = 0; i < dx.size(); ++i) gx[i] += dx[i];
        }
        if (w.requires_grad()) {
          conv_weight_grad(gv, x.values().data(), g, t.grad_mut(w).data());
        }
      });
}

// Maxpool ----------------------------------------------------------------------

Tensor maxpool2d(const Tensor& x, std::size_t pool_h, std::size_t pool_w) {
  require_rank("maxpool2d", x, 3);
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (pool_h == 0 || pool_w == 0 || h % pool_h != 0 || w % pool_w != 0) {
    throw std::invalid_argument(
        "maxpool2d: window " + std::to_string(pool_h) + "x" +
        std::to_string(pool_w) + " does not tile input " + shape_str(x.shape()));
  }
  const std::size_t oh = h / pool_h, ow = w / pool_w;
  const double* xv = x.values().data();
  std::vector<double> out(c * oh * ow);
  auto argmax = std::make_shared<std::vector<std::size_t>>(out.size());
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        std::size_t best = (ch * h + i * pool_h) * w + j * pool_w;
        for (std::size_t a = 0; a < pool_h; ++a) {
          for (std::size_t bb = 0; bb < pool_w; ++bb) {
            const std::size_t idx = (ch * h + i * pool_h + a) * w + j * pool_w + bb;
            if (xv[idx] > xv[best]) best = idx;
          }
        }
        const std::size_t o = (ch * oh + i) * ow + j;
        out[o] = xv[best];
        (*argmax)[o] = best;
      }
    }
  }
  return x.tape().record("maxpool2d", {c, oh, ow}, std::move(out), {x},
                         [x, argmax](Tape& t, const Tensor& self) {
                           const auto g = t.grad_mut(self);
                           auto gx = t.grad_mut(x);
                           for (std::size_t o = 0; o < g.size(); ++o) {
                             gx[(*argmax)[o]] += g[o];
                           }
                         });
}

// GRU --------------------------------------------------------------------------

namespace {

struct GruCache {
  std::vector<double> r, u, n, hn;  // [T x H] each, indexed by time
};

}  // namespace

Tensor gru(const Tensor& x, const Tensor& w_ih, const Tensor& w_hh,
           const Tensor& b_ih, const Tensor& b_hh, bool reverse) {
  require_rank("gru", x, 2);
  require_rank("gru", w_ih, 2);
  require_rank("gru", w_hh, 2);
  require_rank("gru", b_ih, 1);
  require_rank("gru", b_hh, 1);
  detail::check_same_tape("gru", x, w_ih);
  const std::size_t steps = x.dim(0), d = x.dim(1), h3 = w_ih.dim(1);
  const std::size_t hs = h3 / 3;
  if (w_ih.dim(0) != d || h3 % 3 != 0) {
    detail::shape_error("gru", x.shape(), w_ih.shape());
  }
  if (w_hh.dim(0) != hs || w_hh.dim(1) != h3) {
    detail::shape_error("gru", w_ih.shape(), w_hh.shape());
  }
  if (b_ih.dim(0) != h3 || b_hh.dim(0) != h3) {
    detail::shape_error("gru", b_ih.shape(), b_hh.shape());
  }

  // Input projections for all steps at once.
  std::vector<double> gx(steps * h3);
  for (std::size_t t = 0; t < steps; ++t) {
    std::copy_n(b_ih.values().data(), h3, gx.data() + t * h3);
  }
  gemm_nn(x.values().data(), w_ih.values().data(), gx.data(), steps, d, h3);

  auto cache = std::make_shared<GruCache>();
  cache->r.resize(steps * hs);
  cache->u.resize(steps * hs);
  cache->n.resize(steps * hs);
  cache->hn.resize(steps * hs);
  std::vector<double> out(steps * hs);
  std::vector<double> h_prev(hs, 0.0), gh(h3);
  const double* whh = w_hh.values().data();
  const double* bhh = b_hh.values().data();
  for (std::size_t k = 0; k < steps; ++k) {
    const std::size_t t = reverse ? steps - 1 - k : k;
    std::copy_n(bhh, h3, gh.data());
    gemm_nn(h_prev.data(), whh, gh.data(), 1, hs, h3);
    const double* gxt = gx.data() + t * h3;
    for (std::size_t j = 0; j < hs; ++j) {
      const double r = sigmoid_scalar(gxt[j] + gh[j]);
      const double u = sigmoid_scalar(gxt[hs + j] + gh[hs + j]);
      const double n = std::tanh(gxt[2 * hs + j] + r * gh[2 * hs + j]);
      const double hnew = (1.0 - u) * n + u * h_prev[j];
      cache->r[t * hs + j] = r;
      cache->u[t * hs + j] = u;
      cache->n[t * hs + j] = n;
      cache->hn[t * hs + j] = gh[2 * hs + j];
      out[t * hs + j] = hnew;
    }
    std::copy_n(out.data() + t * hs, hs, h_prev.data());
  }

  return x.tape().record(
      "gru", {steps, hs}, std::move(out), {x, w_ih, w_hh, b_ih, b_hh},
      [x, w_ih, w_hh, b_ih, b_hh, reverse, cache, steps, d, hs, h3](
          Tape& t, const Tensor& self) {
        const auto g = t.grad_mut(self);
        const auto hv = self.values();
        const double* whh = w_hh.values().data();
        std::vector<double> dgx(steps * h3, 0.0);
        std::vector<double> dgh_all(steps * h3), hprev_all(steps * hs, 0.0);
        std::vector<double> carry(hs, 0.0), zeros(hs, 0.0);
        for (std::size_t k = steps; k-- > 0;) {
          const std::size_t step = reverse ? steps - 1 - k : k;
          const double* hprev =
              k == 0 ? zeros.data()
                     : hv.data() + (reverse ? step + 1 : step - 1) * hs;
          double* dgh = dgh_all.data() + step * h3;
          std::copy_n(hprev, hs, hprev_all.data() + step * hs);
          for (std::size_t j = 0; j < hs; ++j) {
            const std::size_t idx = step * hs + j;
            const double r = cache->r[idx], u = cache->u[idx];
            const double n = cache->n[idx], hn = cache->hn[idx];
            const double dh = g[idx] + carry[j];
            const double dn_pre = dh * (1.0 - u) * (1.0 - n * n);
            const double du_pre = dh * (hprev[j] - n) * u * (1.0 - u);
            const double dr_pre = dn_pre * hn * r * (1.0 - r);
            double* dgxt = dgx.data() + step * h3;
            dgxt[j] = dr_pre;
            dgxt[hs + j] = du_pre;
            dgxt[2 * hs + j] = dn_pre;
            dgh[j] = dr_pre;
            dgh[hs + j] = du_pre;
            dgh[2 * hs + j] = dn_pre * r;
            carry[j] = dh * u;
          }
          gemm_nt(dgh, whh, carry.data(), 1, hs, h3);
        }
        if (x.requires_grad()) {
          gemm_nt(dgx.data(), w_ih.values().data(), t.grad_mut(x).data(), steps,
                  d, h3);
        }
        if (w_ih.requires_grad()) {
          gemm_tn(x.values().data(), dgx.data(), t.grad_mut(w_ih).data(), steps,
                  d, h3);
        }
        if (b_ih.requires_grad()) {
          auto gb = t.grad_mut(b_ih);
          for (std::size_t s = 0; s < steps; ++s) {
            for (std::size_t j = 0; j < h3; ++j) gb[j] += dgx[s * h3 + j];
          }
        }
        if (w_hh.requires_grad()) {
          gemm_tn(hprev_all.data(), dgh_all.data(), t.grad_mut(w_hh).data(), steps,
                  hs, h3);
        }
        if (b_hh.requires_grad()) {
          auto gb = t.grad_mut(b_hh);
          for (std::size_t s = 0; s < steps; ++s) {
            for (std::size_t j = 0; j < h3; ++j) gb[j] += dgh_all[s * h3 + j];
          }
        }
      });
}

// Logit-form binary cross-entropy ----------------------------------------------

Tensor bce_with_logits(const Tensor& logits, const Tensor& targets,
                       const Tensor& row_weights) {
  detail::check_same_tape("bce_with_logits", logits, targets);
  detail::check_same_tape("bce_with_logits", logits, row_weights);
  require_rank("bce_with_logits", logits, 2);
  if (targets.shape() != logits.shape()) {
    detail::shape_error("bce_with_logits", logits.shape(), targets.shape());
  }
  if (row_weights.shape() != Shape{logits.dim(0)}) {
    detail::shape_error("bce_with_logits", logits.shape(), row_weights.shape());
  }
  if (targets.requires_grad()) {
    throw std::invalid_argument("bce_with_logits: targets must be constant");
  }
  const std::size_t rows = logits.dim(0), cols = logits.dim(1);
  const auto y = logits.values();
  const auto z = targets.values();
  const auto w = row_weights.values();
  auto row_sums = std::make_shared<std::vector<double>>(rows, 0.0);
  double total = 0.0;
  for (std::size_t n = 0; n < rows; ++n) {
    double s = 0.0;
    for (std::size_t t = 0; t < cols; ++t) {
      const double v = y[n * cols + t];
      s += std::max(v, 0.0) - v * z[n * cols + t] +
           std::log1p(std::exp(-std::abs(v)));
    }
    (*row_sums)[n] = s;
    total += w[n] * s;
  }
  return logits.tape().record(
      "bce_with_logits", {}, {total}, {logits, targets, row_weights},
      [logits, targets, row_weights, row_sums, rows, cols](Tape& t,
                                                           const Tensor& self) {
        const double g = t.grad_mut(self)[0];
        if (logits.requires_grad()) {
          const auto y = logits.values();
          const auto z = targets.values();
          const auto w = row_weights.values();
          auto gy = t.grad_mut(logits);
          for (std::size_t n = 0; n < rows; ++n) {
            const double gw = g * w[n];
            for (std::size_t k = 0; k < cols; ++k) {
              const std::size_t i = n * cols + k;
              gy[i] += gw * (sigmoid_scalar(y[i]) - z[i]);
            }
          }
        }
        if (row_weights.requires_grad()) {
          auto gw = t.grad_mut(row_weights);
          for (std::size_t n = 0; n < rows; ++n) gw[n] += g * (*row_sums)[n];
        }
      });
}

// Gradcheck --------------------------------------------------------------------

namespace {

struct Evaluation {
  double value = 0.0;
  std::vector<std::string_view> trace;
};

Evaluation evaluate(const GraphBuilder& builder,
                    std::span<const ParamPoint> point) {
  Tape tape;
  std::vector<Tensor> params;
  params.reserve(point.size());
  for (const auto& p : point) params.push_back(tape.variable(p.shape, p.values));
  const Tensor loss = builder(tape, params);
  if (loss.size() != 1) {
    throw std::invalid_argument("gradcheck: builder output must be scalar");
  }
  return {loss.item(), tape.op_trace()};
}

}  // namespace

GradcheckResult gradcheck(const GraphBuilder& builder,
                          std::span<const ParamPoint> point, double step) {
  std::vector<std::vector<double>> analytic;
  std::vector<std::string_view> reference_trace;
  {
    Tape tape;
    std::vector<Tensor> params;
    for (const auto& p : point) params.push_back(tape.variable(p.shape, p.values));
    const Tensor loss = builder(tape, params);
    if (loss.size() != 1) {
      throw std::invalid_argument("gradcheck: builder output must be scalar");
    }
    reference_trace = tape.op_trace();
    tape.backward(loss);
    for (const auto& p : params) {
      const auto g = tape.grad(p);
      analytic.emplace_back(g.begin(), g.end());
    }
  }

  std::vector<ParamPoint> probe(point.begin(), point.end());
  GradcheckResult result;
  const auto eval_checked = [&]() {
    Evaluation e = evaluate(builder, probe);
    if (e.trace != reference_trace) {
      throw std::logic_error(
          "gradcheck: builder is non-deterministic (graph changed between "
          "calls)");
    }
    return e.value;
  };
  for (std::size_t p = 0; p < probe.size(); ++p) {
    for (std::size_t i = 0; i < probe[p].values.size(); ++i) {
      const double orig = probe[p].values[i];
      probe[p].values[i] = orig + step;
      const double fp = eval_checked();
      probe[p].values[i] = orig - step;
      const double fm = eval_checked();
      probe[p].values[i] = orig;
      const double numeric = (fp - fm) / (2.0 * step);
      const double a = analytic[p][i];
      const double err =
          std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      if (err > result.max_rel_error) {
        result = {err, p, i, a, numeric};
      }
    }
  }
  return result;
}

}  // namespace sedkit::ad
