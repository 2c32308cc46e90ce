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
#include "sedkit/annotations.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>

#include "sedkit/errors.hpp"

namespace sedkit {
namespace {

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(
        pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return lines;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (true) {
    const std::size_t tab = line.find('\t', pos);
    fields.push_back(line.substr(pos, tab == std::string_view::npos
                                          ? std::string_view::npos
                                          : tab - pos));
    if (tab == std::string_view::npos) break;
    pos = tab + 1;
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

bool is_blank(std::string_view line) { return trim(line).empty(); }

double parse_seconds(std::string_view field, std::size_t line_no,
                     const char* what) {
  field = trim(field);
  double value = 0.0;
  const auto [ptr, ec] =
      std::from_chars(field.data(), field.data() + field.size(), value);
  if (field.empty() || ec != std::errc{} || ptr != field.data() + field.size() ||
      !std::isfinite(value)) {
    throw ParseError(line_no, std::string("non-numeric ") + what + " '" +
                                  std::string(field) + "'");
  }
  return value;
}

bool overlaps_or_touches(const EventInterval& a, const EventInterval& b) {
  return a.onset <= b.offset && b.onset <= a.offset;
}

double snap_to_grid(double q) {
  const double r = std::round(q);
  return std::abs(q - r) < 1e-9 ? r : q;
}

}  // namespace

Vocabulary::Vocabulary(std::vector<std::string> labels)
    : labels_(std::move(labels)) {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i].empty()) throw DataError("vocabulary: empty label");
    if (!index_.emplace(labels_[i], i).second) {
      throw DataError("vocabulary: duplicate label '" + labels_[i] + "'");
    }
  }
}

bool Vocabulary::contains(std::string_view label) const {
  return index_.find(std::string(label)) != index_.end();
}

std::size_t Vocabulary::index_of(std::string_view label) const {
  const auto it = index_.find(std::string(label));
  if (it == index_.end()) {
    throw DataError("label '" + std::string(label) + "' not in vocabulary");
  }
  return it->second;
}

bool SceneEventMap::has_scene(std::string_view scene) const {
  return map_.find(scene) != map_.end();
}

const std::set<std::string>& SceneEventMap::events_for(
    std::string_view scene) const {
  const auto it = map_.find(scene);
  if (it == map_.end()) {
    throw DataError("scene '" + std::string(scene) +
                    "' not present in the scene/event map");
  }
  return it->second;
}

std::vector<std::string> SceneEventMap::scenes() const {
  std::vector<std::string> out;
  out.reserve(map_.size());
  for (const auto& [scene, events] : map_) out.push_back(scene);
  return out;
}

std::vector<EventInterval> merge_same_label(std::vector<EventInterval> events) {
  std::vector<EventInterval> out;
  out.reserve(events.size());
  for (auto& ev : events) {
    // Absorb every existing same-label interval that the new one touches;
    // the merged interval stays in the slot of the earliest one.
    std::size_t slot = out.size();
    for (std::size_t i = 0; i < out.size();) {
      if (out[i].label == ev.label && overlaps_or_touches(out[i], ev)) {
        ev.onset = std::min(ev.onset, out[i].onset);
        ev.offset = std::max(ev.offset, out[i].offset);
        if (slot == out.size()) {
          slot = i;
          ++i;
        } else {
          out.erase(out.begin() + static_cast<std::ptrdiff_t>(i));
        }
      } else {
        ++i;
      }
    }
    if (slot == out.size()) {
      out.push_back(std::move(ev));
    } else {
      out[slot] = std::move(ev);
    }
  }
  return out;
}

std::vector<EventInterval> parse_event_file(std::string_view text) {
  std::vector<EventInterval> events;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    if (is_blank(lines[i])) continue;
    const auto fields = split_tabs(lines[i]);
    if (fields.size() != 3) {
      throw ParseError(line_no, "expected 3 tab-separated fields, got " +
                                    std::to_string(fields.size()));
    }
    EventInterval ev;
    ev.onset = parse_seconds(fields[0], line_no, "onset");
    ev.offset = parse_seconds(fields[1], line_no, "offset");
    ev.label = std::string(trim(fields[2]));
    if (ev.onset < 0.0) throw ParseError(line_no, "negative onset");
    if (ev.offset <= ev.onset) {
      throw ParseError(line_no, "offset must be greater than onset");
    }
    if (ev.label.empty()) throw ParseError(line_no, "empty event label");
    events.push_back(std::move(ev));
  }
  return merge_same_label(std::move(events));
}

std::string serialize_event_file(std::span<const EventInterval> events) {
  std::string out;
  char buf[64];
  for (const auto& ev : events) {
    std::snprintf(buf, sizeof(buf), "%.6f\t%.6f\t", ev.onset, ev.offset);
    out += buf;
    out += ev.label;
    out += '\n';
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> parse_meta_entries(
    std::string_view text) {
  std::vector<std::pair<std::string, std::string>> entries;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    if (is_blank(lines[i])) continue;
    const auto fields = split_tabs(lines[i]);
    if (fields.size() < 2 || trim(fields[0]).empty() ||
        trim(fields[1]).empty()) {
      throw ParseError(line_no, "expected clip_path<TAB>scene_label");
    }
    if (fields.size() > 2) {
      throw ParseError(line_no, "too many fields");
    }
    entries.emplace_back(std::string(trim(fields[0])),
                         std::string(trim(fields[1])));
  }
  return entries;
}

std::map<std::string, std::string> parse_meta_file(std::string_view text) {
  std::map<std::string, std::string> out;
  for (const auto& [path, scene] : parse_meta_entries(text)) {
    const std::string id = path_stem(path);
    if (!out.emplace(id, scene).second) {
      throw DataError("meta: duplicate clip id '" + id + "'");
    }
  }
  return out;
}

Vocabulary parse_vocab_file(std::string_view text) {
  std::vector<std::string> labels;
  for (const auto line : split_lines(text)) {
    if (is_blank(line)) continue;
    labels.emplace_back(trim(line));
  }
  return Vocabulary(std::move(labels));
}

std::string serialize_vocab_file(const Vocabulary& vocab) {
  std::string out;
  for (const auto& label : vocab.labels()) {
    out += label;
    out += '\n';
  }
  return out;
}

std::string path_stem(std::string_view path) {
  const std::size_t slash = path.find_last_of("/\\");
  if (slash != std::string_view::npos) path.remove_prefix(slash + 1);
  const std::size_t dot = path.rfind('.');
  if (dot != std::string_view::npos && dot > 0) path = path.substr(0, dot);
  return std::string(path);
}

SceneEventMap build_scene_event_map(std::span<const ClipRecord> train_clips) {
  if (train_clips.empty()) {
    throw DataError("cannot build a scene/event map from zero clips");
  }
  SceneEventMap map;
  for (const auto& clip : train_clips) {
    if (clip.scene.empty()) {
      throw DataError("clip '" + clip.clip_id + "' has no scene label");
    }
    auto& events = map.map_[clip.scene];
    for (const auto& ev : clip.events) events.insert(ev.label);
  }
  return map;
}

std::pair<std::size_t, std::size_t> active_frame_range(double onset,
                                                       double offset,
                                                       const FrameGrid& grid) {
  const double first_q = std::floor(snap_to_grid(onset / grid.hop));
  const double last_q = std::ceil(snap_to_grid(offset / grid.hop));
  const auto clamp = [&](double q) {
    if (q <= 0.0) return std::size_t{0};
    return std::min(static_cast<std::size_t>(q), grid.n_frames);
  };
  const std::size_t first = clamp(first_q);
  const std::size_t last = clamp(last_q);
  return {first, std::max(first, last)};
}

TargetMatrix make_target_matrix(const ClipRecord& clip, const Vocabulary& vocab,
                                const FrameGrid& grid) {
  if (grid.hop <= 0.0) throw DataError("frame hop must be positive");
  TargetMatrix target{BinaryMatrix(vocab.size(), grid.n_frames, 0), grid.hop};
  for (const auto& ev : clip.events) {
    const std::size_t n = vocab.index_of(ev.label);
    const auto [first, last] = active_frame_range(ev.onset, ev.offset, grid);
    for (std::size_t t = first; t < last; ++t) target.z(n, t) = 1;
  }
  return target;
}

EventFlags make_event_flags(std::string_view scene, const SceneEventMap& map,
                            const Vocabulary& vocab) {
  const auto& present = map.events_for(scene);
  EventFlags flags;
  flags.f.resize(vocab.size(), 0);
  for (std::size_t n = 0; n < vocab.size(); ++n) {
    flags.f[n] = present.count(vocab[n]) ? 1 : 0;
  }
  return flags;
}

}  // namespace sedkit
