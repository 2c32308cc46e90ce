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
#include "sedkit/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace sedkit {

Adam::Adam(const AdamConfig& config, const ModelParams& params) : config_(config) {
  for (const auto& t : params.tensors) {
    m_.emplace_back(t.values.size(), 0.0);
    v_.emplace_back(t.values.size(), 0.0);
  }
}

void Adam::step(ModelParams& params, std::span<const std::vector<double>> grads) {
  if (grads.size() != params.tensors.size() || m_.size() != grads.size()) {
    throw std::invalid_argument("Adam::step: gradient count mismatch");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < grads.size(); ++i) {
    auto& w = params.tensors[i].values;
    const auto& g = grads[i];
    if (g.size() != w.size()) {
      throw std::invalid_argument("Adam::step: gradient shape mismatch for " +
                                  params.tensors[i].name);
    }
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = config_.beta1 * m[k] + (1.0 - config_.beta1) * g[k];
      v[k] = config_.beta2 * v[k] + (1.0 - config_.beta2) * g[k] * g[k];
      w[k] -= config_.lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + config_.eps);
    }
  }
}

}  // namespace sedkit
