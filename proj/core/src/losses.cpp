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
#include "sedkit/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "sedkit/errors.hpp"

namespace sedkit {
namespace {

void check_logits(const ad::Tensor& logits, const TargetMatrix& target,
                  const char* op) {
  const auto& s = logits.shape();
  if (s.size() != 2 || s[0] != target.n_events() || s[1] != target.n_frames()) {
    throw std::invalid_argument(
        std::string(op) + ": logits " + ad::shape_str(s) + " vs target [" +
        std::to_string(target.n_events()) + "x" +
        std::to_string(target.n_frames()) + "]");
  }
}

ad::Tensor target_tensor(ad::Tape& tape, const TargetMatrix& target) {
  const auto& z = target.z.data();
  return tape.constant({target.n_events(), target.n_frames()},
                       std::vector<double>(z.begin(), z.end()));
}

}  // namespace

double CurriculumState::alpha() const { return alpha_schedule(s, s_max, lambda); }

double alpha_schedule(std::size_t s, std::size_t s_max, double lambda) {
  if (s_max < 1) throw ConfigError("alpha_schedule: s_max must be >= 1");
  if (s > s_max) {
    throw ConfigError("alpha_schedule: epoch " + std::to_string(s) +
                      " exceeds s_max " + std::to_string(s_max));
  }
  if (!(lambda > 0.0)) throw ConfigError("alpha_schedule: lambda must be > 0");
  if (s == s_max) return 1.0;
  const double q = static_cast<double>(s) / static_cast<double>(s_max);
  // Integral exponents by repeated multiplication: lambda = 2 gives q * q
  // exactly, independent of the libm pow() rounding.
  if (lambda == std::floor(lambda) && lambda <= 64.0) {
    double r = 1.0;
    for (int i = 0; i < static_cast<int>(lambda); ++i) r *= q;
    return r;
  }
  return std::pow(q, lambda);
}

std::vector<double> gate(const EventFlags& flags, double alpha) {
  std::vector<double> g(flags.f.size());
  for (std::size_t n = 0; n < g.size(); ++n) {
    const double f = flags.f[n] ? 1.0 : 0.0;
    g[n] = alpha * f + (1.0 - alpha) * (1.0 - f);
  }
  return g;
}

ad::Tensor bce(const ad::Tensor& logits, const TargetMatrix& target) {
  check_logits(logits, target, "bce");
  ad::Tape& tape = logits.tape();
  return ad::bce_with_logits(
      logits, target_tensor(tape, target),
      tape.constant({target.n_events()},
                    std::vector<double>(target.n_events(), 1.0)));
}

ad::Tensor curriculum_loss(const ad::Tensor& logits, const TargetMatrix& target,
                           const EventFlags& flags, double alpha) {
  check_logits(logits, target, "curriculum_loss");
  if (flags.f.size() != target.n_events()) {
    throw std::invalid_argument("curriculum_loss: flag vector has " +
                                std::to_string(flags.f.size()) +
                                " entries, expected " +
                                std::to_string(target.n_events()));
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("curriculum_loss: alpha outside [0, 1]");
  }
  ad::Tape& tape = logits.tape();
  return ad::bce_with_logits(logits, target_tensor(tape, target),
                             tape.constant({target.n_events()}, gate(flags, alpha)));
}

std::vector<double> sad_target(const TargetMatrix& target) {
  std::vector<double> z(target.n_frames(), 0.0);
  for (std::size_t n = 0; n < target.n_events(); ++n) {
    for (std::size_t t = 0; t < target.n_frames(); ++t) {
      if (target.z(n, t)) z[t] = 1.0;
    }
  }
  return z;
}

ad::Tensor sad_loss(const ad::Tensor& sad_logits, const TargetMatrix& target) {
  const auto& s = sad_logits.shape();
  if (s.size() != 2 || s[0] != 1 || s[1] != target.n_frames()) {
    throw std::invalid_argument("sad_loss: logits " + ad::shape_str(s) +
                                " vs " + std::to_string(target.n_frames()) +
                                " frames");
  }
  ad::Tape& tape = sad_logits.tape();
  return ad::bce_with_logits(sad_logits,
                             tape.constant({1, target.n_frames()}, sad_target(target)),
                             tape.constant({1}, {1.0}));
}

ad::Tensor asc_loss(const ad::Tensor& scene_logits, std::size_t scene) {
  if (scene_logits.shape().size() != 1) {
    throw std::invalid_argument("asc_loss: expected 1-D scene logits, got " +
                                ad::shape_str(scene_logits.shape()));
  }
  if (scene >= scene_logits.dim(0)) {
    throw std::out_of_range("asc_loss: scene index " + std::to_string(scene) +
                            " out of range for " +
                            std::to_string(scene_logits.dim(0)) + " scenes");
  }
  const ad::Tensor logp = ad::log_softmax(scene_logits, 0);
  return ad::scale(ad::reshape(ad::slice(logp, 0, scene, scene + 1), {}), -1.0);
}

ad::Tensor combined_loss(const ad::Tensor& primary, const ad::Tensor& aux,
                         double beta) {
  if (!(beta >= 0.0)) throw std::invalid_argument("combined_loss: beta < 0");
  if (beta == 0.0) return primary;
  return ad::add(primary, ad::scale(aux, beta));
}

ad::Tensor batch_mean(std::span<const ad::Tensor> clip_losses) {
  if (clip_losses.empty()) throw std::invalid_argument("batch_mean: empty batch");
  ad::Tensor total = clip_losses.front();
  for (std::size_t i = 1; i < clip_losses.size(); ++i) {
    total = ad::add(total, clip_losses[i]);
  }
  return ad::scale(total, 1.0 / static_cast<double>(clip_losses.size()));
}

LossValue bce_breakdown(std::span<const double> logits, const TargetMatrix& target,
                        std::span<const double> weights) {
  const std::size_t rows = target.n_events(), cols = target.n_frames();
  if (logits.size() != rows * cols) {
    throw std::invalid_argument("bce_breakdown: logits size mismatch");
  }
  if (!weights.empty() && weights.size() != rows) {
    throw std::invalid_argument("bce_breakdown: weight size mismatch");
  }
  LossValue out;
  out.per_event.emplace(rows, 0.0);
  for (std::size_t n = 0; n < rows; ++n) {
    double s = 0.0;
    for (std::size_t t = 0; t < cols; ++t) {
      const double y = logits[n * cols + t];
      const double z = target.z(n, t);
      s += std::max(y, 0.0) - y * z + std::log1p(std::exp(-std::abs(y)));
    }
    const double w = weights.empty() ? 1.0 : weights[n];
    (*out.per_event)[n] = w * s;
    out.scalar += w * s;
  }
  return out;
}

}  // namespace sedkit
