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
#include "sedkit/config.hpp"

#include <charconv>
#include <cmath>

#include "sedkit/errors.hpp"

namespace sedkit {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const char* expected) {
  throw ConfigError("config key '" + key + "': expected " + expected +
                    ", got '" + value + "'");
}

}  // namespace

KeyValues KeyValues::parse(std::string_view text) {
  KeyValues kv;
  std::size_t line_no = 0, pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(
        pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected 'key = value'");
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) {
      throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    }
    if (kv.entries_.count(key)) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": duplicate key '" + key + "'");
    }
    kv.entries_[key] = value;
  }
  return kv;
}

void KeyValues::set(const std::string& key, const std::string& value) {
  entries_[key] = value;
}

bool KeyValues::has(std::string_view key) const {
  return entries_.count(std::string(key)) > 0;
}

std::optional<std::string> KeyValues::take_string(const std::string& key) {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  consumed_.insert(key);
  return it->second;
}

std::optional<double> KeyValues::take_double(const std::string& key) {
  const auto s = take_string(key);
  if (!s) return std::nullopt;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s->data(), s->data() + s->size(), v);
  if (s->empty() || ec != std::errc{} || ptr != s->data() + s->size() ||
      !std::isfinite(v)) {
    bad_value(key, *s, "a real number");
  }
  return v;
}

std::optional<std::int64_t> KeyValues::take_int(const std::string& key) {
  const auto s = take_string(key);
  if (!s) return std::nullopt;
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s->data(), s->data() + s->size(), v);
  if (s->empty() || ec != std::errc{} || ptr != s->data() + s->size()) {
    bad_value(key, *s, "an integer");
  }
  return v;
}

std::optional<std::size_t> KeyValues::take_size(const std::string& key) {
  const auto v = take_int(key);
  if (!v) return std::nullopt;
  if (*v < 0) bad_value(key, std::to_string(*v), "a non-negative integer");
  return static_cast<std::size_t>(*v);
}

std::optional<bool> KeyValues::take_bool(const std::string& key) {
  const auto s = take_string(key);
  if (!s) return std::nullopt;
  if (*s == "true" || *s == "1" || *s == "on" || *s == "yes") return true;
  if (*s == "false" || *s == "0" || *s == "off" || *s == "no") return false;
  bad_value(key, *s, "a boolean");
}

std::optional<std::vector<std::size_t>> KeyValues::take_size_list(
    const std::string& key) {
  const auto s = take_string(key);
  if (!s) return std::nullopt;
  std::vector<std::size_t> out;
  for (const auto& item : split_list(*s)) {
    std::size_t v = 0;
    const auto [ptr, ec] =
        std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc{} || ptr != item.data() + item.size()) {
      bad_value(key, *s, "a comma-separated list of non-negative integers");
    }
    out.push_back(v);
  }
  return out;
}

std::optional<std::vector<std::string>> KeyValues::take_string_list(
    const std::string& key) {
  const auto s = take_string(key);
  if (!s) return std::nullopt;
  return split_list(*s);
}

void KeyValues::finish() const {
  std::string unknown;
  for (const auto& [key, value] : entries_) {
    if (!consumed_.count(key)) unknown += (unknown.empty() ? "" : ", ") + key;
  }
  if (!unknown.empty()) throw ConfigError("unknown config key(s): " + unknown);
}

std::string KeyValues::to_text() const {
  std::string out;
  for (const auto& [key, value] : entries_) out += key + " = " + value + "\n";
  return out;
}

std::vector<std::string> split_list(std::string_view text, char sep) {
  std::vector<std::string> out;
  if (trim(text).empty()) return out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t next = text.find(sep, pos);
    out.emplace_back(trim(text.substr(
        pos, next == std::string_view::npos ? std::string_view::npos : next - pos)));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

std::string join_sizes(const std::vector<std::size_t>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(values[i]);
  }
  return out;
}

}  // namespace sedkit
