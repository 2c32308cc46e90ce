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
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sedkit/matrix.hpp"

namespace sedkit {

struct EventInterval {
  double onset = 0.0;   // seconds
  double offset = 0.0;  // seconds, strictly greater than onset
  std::string label;

  friend bool operator==(const EventInterval&, const EventInterval&) = default;
};

struct ClipRecord {
  std::string clip_id;
  std::string scene;
  double duration = 0.0;
  std::vector<EventInterval> events;
  std::string audio_path;

  friend bool operator==(const ClipRecord&, const ClipRecord&) = default;
};

/// Ordered label list; position defines the class index.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> labels);

  std::size_t size() const noexcept { return labels_.size(); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const std::string& operator[](std::size_t i) const { return labels_[i]; }

  bool contains(std::string_view label) const;
  /// Throws DataError for unknown labels.
  std::size_t index_of(std::string_view label) const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.labels_ == b.labels_;
  }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Scene -> set of events seen at least once in a training clip of that
/// scene. Built once from the training split, read-only afterwards.
class SceneEventMap {
 public:
  SceneEventMap() = default;

  bool has_scene(std::string_view scene) const;
  /// Throws DataError for scenes that never occurred in training.
  const std::set<std::string>& events_for(std::string_view scene) const;
  std::vector<std::string> scenes() const;

  friend bool operator==(const SceneEventMap&, const SceneEventMap&) = default;

 private:
  friend SceneEventMap build_scene_event_map(std::span<const ClipRecord>);
  std::map<std::string, std::set<std::string>, std::less<>> map_;
};

struct TargetMatrix {
  BinaryMatrix z;  // [events x frames]
  double frame_hop = 0.0;

  std::size_t n_events() const noexcept { return z.rows(); }
  std::size_t n_frames() const noexcept { return z.cols(); }
};

struct EventFlags {
  std::vector<std::uint8_t> f;  // 1 = event occurs in the clip's scene

  friend bool operator==(const EventFlags&, const EventFlags&) = default;
};

/// Hop-aligned frame grid: frame t spans [t*hop, (t+1)*hop).
struct FrameGrid {
  std::size_t n_frames = 0;
  double hop = 0.0;
};

// Text formats --------------------------------------------------------------

/// Parses `onset<TAB>offset<TAB>label` lines. Same-label overlaps (and
/// touching intervals) are merged into the earliest interval's slot.
std::vector<EventInterval> parse_event_file(std::string_view text);
std::string serialize_event_file(std::span<const EventInterval> events);

/// Parses `clip_path<TAB>scene` lines. Keys are path stems.
std::map<std::string, std::string> parse_meta_file(std::string_view text);
/// Like parse_meta_file but keeps the raw paths, in file order.
std::vector<std::pair<std::string, std::string>> parse_meta_entries(
    std::string_view text);

Vocabulary parse_vocab_file(std::string_view text);
std::string serialize_vocab_file(const Vocabulary& vocab);

/// Merges same-label intervals that overlap or touch. Output keeps the
/// position of the first contributing interval.
std::vector<EventInterval> merge_same_label(std::vector<EventInterval> events);

/// Stem of a path: "dir/a.wav" -> "a".
std::string path_stem(std::string_view path);

// Derived structures --------------------------------------------------------

SceneEventMap build_scene_event_map(std::span<const ClipRecord> train_clips);

TargetMatrix make_target_matrix(const ClipRecord& clip, const Vocabulary& vocab,
                                const FrameGrid& grid);

EventFlags make_event_flags(std::string_view scene, const SceneEventMap& map,
                            const Vocabulary& vocab);

/// Half-open range [first, last) of frames overlapping (onset, offset) by a
/// positive duration on a hop grid, clamped to n_frames.
std::pair<std::size_t, std::size_t> active_frame_range(double onset,
                                                       double offset,
                                                       const FrameGrid& grid);

}  // namespace sedkit
