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

#include <cstddef>
#include <string_view>

#include "sedkit/autodiff.hpp"

namespace sedkit::ad::detail {

void check_same_tape(std::string_view op, const Tensor& a, const Tensor& b);

[[noreturn]] void shape_error(std::string_view op, const Shape& a,
                              const Shape& b);

/// View of a shape as [outer, len, inner] around one axis.
struct AxisSplit {
  std::size_t outer = 1;
  std::size_t len = 1;
  std::size_t inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis, std::string_view op);

}  // namespace sedkit::ad::detail
