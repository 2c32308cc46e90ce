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

// Versioned binary checkpoint, little-endian:
//
//   "SEDKCKPT" u32 version  u32 header_len  header (key = value text)
//   u32 tensor_count, then per tensor:
//     u32 name_len  name  u32 ndim  u64 dims[ndim]  f64 values[prod(dims)]
//
// The header carries the model config, init seed and label vocabularies;
// feature normalization stats travel as the tensors norm.mean / norm.std.

#include <filesystem>
#include <string>
#include <vector>

#include "sedkit/features.hpp"
#include "sedkit/model.hpp"

namespace sedkit {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelParams params;
  FeatureNormalizer normalizer;  // empty when normalization is off
  std::vector<std::string> event_labels;
  std::vector<std::string> scene_labels;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

/// Throws DataError on malformed files and ConfigError when `expected` is
/// given and differs from the stored model config.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const ModelConfig* expected = nullptr);

}  // namespace sedkit
