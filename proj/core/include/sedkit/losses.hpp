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

// Training objectives for frame-wise multi-label event detection.
//
// All per-clip losses are sums over events and frames (not means); batch
// reduction is a plain mean over clips (see batch_mean). With this convention
// the curriculum loss with an all-ones gate is the very same computation as
// plain BCE.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "sedkit/annotations.hpp"
#include "sedkit/autodiff.hpp"

namespace sedkit {

struct LossValue {
  double scalar = 0.0;
  std::optional<std::vector<double>> per_event;
};

/// Curriculum progress: alpha = (s / s_max)^lambda.
struct CurriculumState {
  std::size_t s = 0;
  std::size_t s_max = 1;
  double lambda = 2.0;

  double alpha() const;
};

/// Throws ConfigError unless s_max >= 1 and s <= s_max.
double alpha_schedule(std::size_t s, std::size_t s_max, double lambda = 2.0);

/// g[n] = alpha * f[n] + (1 - alpha) * (1 - f[n]).
std::vector<double> gate(const EventFlags& flags, double alpha);

/// Stable logit-form BCE summed over [N x T]; logits shaped [N x T].
ad::Tensor bce(const ad::Tensor& logits, const TargetMatrix& target);

/// Gated BCE: each event row weighted by gate(flags, alpha).
ad::Tensor curriculum_loss(const ad::Tensor& logits, const TargetMatrix& target,
                           const EventFlags& flags, double alpha);

/// Frame-wise BCE of [1 x T] activity logits against max_n z[n, t].
ad::Tensor sad_loss(const ad::Tensor& sad_logits, const TargetMatrix& target);

/// -log softmax(scene_logits)[scene].
ad::Tensor asc_loss(const ad::Tensor& scene_logits, std::size_t scene);

/// primary + beta * aux. beta must be >= 0.
ad::Tensor combined_loss(const ad::Tensor& primary, const ad::Tensor& aux,
                         double beta);

/// Mean of per-clip scalar losses.
ad::Tensor batch_mean(std::span<const ad::Tensor> clip_losses);

/// Activity target for the SAD head.
std::vector<double> sad_target(const TargetMatrix& target);

/// Non-differentiable evaluation of the (optionally gated) BCE with a
/// per-event breakdown. `weights` empty means all ones.
LossValue bce_breakdown(std::span<const double> logits, const TargetMatrix& target,
                        std::span<const double> weights = {});

}  // namespace sedkit
