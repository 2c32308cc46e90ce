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
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace sedkit {

/// Flat `key = value` document with dotted keys. '#' starts a comment line.
/// Every key must be consumed through one of the getters; finish() reports
/// the leftovers so typos surface as errors.
class KeyValues {
 public:
  KeyValues() = default;
  static KeyValues parse(std::string_view text);

  void set(const std::string& key, const std::string& value);
  bool has(std::string_view key) const;
  const std::map<std::string, std::string>& entries() const noexcept {
    return entries_;
  }

  std::optional<std::string> take_string(const std::string& key);
  std::optional<double> take_double(const std::string& key);
  std::optional<std::int64_t> take_int(const std::string& key);
  std::optional<std::size_t> take_size(const std::string& key);
  std::optional<bool> take_bool(const std::string& key);
  std::optional<std::vector<std::size_t>> take_size_list(const std::string& key);
  std::optional<std::vector<std::string>> take_string_list(const std::string& key);

  /// Throws ConfigError naming every key that no getter consumed.
  void finish() const;

  /// Serializes in key order.
  std::string to_text() const;

 private:
  std::map<std::string, std::string> entries_;
  std::set<std::string> consumed_;
};

std::vector<std::string> split_list(std::string_view text, char sep = ',');
std::string join_sizes(const std::vector<std::size_t>& values);

}  // namespace sedkit
