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

// CNN + BiGRU frame classifier.
//
//   log-mel [T x F] -> (conv3x3 -> ReLU -> freq max-pool) x L
//                   -> flatten [T x C*F'] -> BiGRU (concat, 2H)
//                   -> FC + ReLU -> event logits [N x T]
//                                -> SAD logits [1 x T]      (optional)
//                                -> time-mean -> ASC logits (optional)
//
// Pooling only touches the frequency axis, so T is preserved end to end.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sedkit/autodiff.hpp"
#include "sedkit/config.hpp"
#include "sedkit/features.hpp"
#include "sedkit/matrix.hpp"

namespace sedkit {

struct ModelConfig {
  std::size_t n_mels = 64;
  std::vector<std::size_t> conv_channels{128, 128, 128};
  std::size_t kernel = 3;
  std::vector<std::size_t> pools{8, 2, 2};  // frequency factors; time is 1
  bool enable_gru = true;
  std::size_t gru_units = 32;
  std::size_t fc_units = 32;
  std::size_t n_events = 25;
  bool enable_sad_head = false;
  bool enable_asc_head = false;
  std::size_t n_scenes = 4;

  /// Throws ConfigError.
  void validate() const;
  /// Width of one frame entering the recurrent layer: C_last * F / prod(pools).
  std::size_t rnn_input_width() const;

  /// Reads/writes the `model.*` keys.
  void write(KeyValues& kv) const;
  static ModelConfig read(KeyValues& kv);
  static ModelConfig read(KeyValues& kv, const ModelConfig& defaults);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct NamedTensor {
  std::string name;
  ad::Shape shape;
  std::vector<double> values;

  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

struct ModelParams {
  ModelConfig config;
  std::uint64_t seed = 0;
  std::vector<NamedTensor> tensors;  // fixed order, see init()

  const NamedTensor& at(std::string_view name) const;
  NamedTensor& at(std::string_view name);
  std::size_t parameter_count() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Glorot-uniform weights, zero biases. Deterministic per seed.
ModelParams init(const ModelConfig& config, std::uint64_t seed);

struct FrameLogits {
  RealMatrix y;                       // [n_events x T]
  std::optional<RealMatrix> sad;      // [1 x T]
  std::optional<std::vector<double>> asc;  // [n_scenes]
};

struct GraphOutputs {
  ad::Tensor events;              // [n_events x T]
  std::optional<ad::Tensor> sad;  // [1 x T]
  std::optional<ad::Tensor> asc;  // [n_scenes]
};

/// Parameters placed on a tape, either as trainable leaves or constants.
class BoundModel {
 public:
  BoundModel(ad::Tape& tape, const ModelParams& params, bool trainable);
  /// Uses caller-provided tensors, ordered and shaped like init(config).
  BoundModel(ad::Tape& tape, const ModelConfig& config,
             std::vector<ad::Tensor> tensors);

  GraphOutputs forward(const FeatureMatrix& x) const;
  /// Same order as ModelParams::tensors.
  std::span<const ad::Tensor> tensors() const noexcept { return bound_; }

 private:
  const ad::Tensor& get(std::size_t index) const { return bound_[index]; }

  ad::Tape* tape_;
  const ModelConfig* config_;
  std::vector<ad::Tensor> bound_;
};

/// Inference-only forward pass.
FrameLogits forward(const ModelParams& params, const FeatureMatrix& x);

/// active iff sigmoid(y) > threshold.
BinaryMatrix predict(const RealMatrix& logits, double threshold = 0.5);

}  // namespace sedkit
