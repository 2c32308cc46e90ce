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

// Scene-structured synthetic corpus.
//
// Every scene owns a background texture (noise with a scene-specific
// spectral tilt) and a vocabulary: `shared_events` classes common to all
// scenes plus `events_per_scene - shared_events` classes unique to it. Event
// classes are spectrally disjoint templates (tone, chirp or band-limited
// noise burst around a class-specific center frequency). Interval times are
// quantized to whole milliseconds, so annotation files round-trip exactly.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sedkit/annotations.hpp"
#include "sedkit/config.hpp"
#include "sedkit/wav.hpp"

namespace sedkit {

struct CorpusSpec {
  std::size_t n_scenes = 4;
  std::size_t events_per_scene = 5;
  std::size_t shared_events = 2;
  std::size_t clips_per_scene = 50;       // training clips
  std::size_t eval_clips_per_scene = 20;
  double clip_seconds = 10.0;
  double sample_rate = 16000.0;
  double event_rate = 3.0;  // expected events per clip
  double snr_db = 0.0;      // event RMS relative to background RMS
  std::uint64_t seed = 1;

  /// Throws ConfigError.
  void validate() const;
  void write(KeyValues& kv) const;
  static CorpusSpec read(KeyValues& kv);
  static CorpusSpec read(KeyValues& kv, const CorpusSpec& defaults);
};

enum class TemplateFamily { kTone, kChirp, kNoiseBurst };

struct EventTemplate {
  std::string label;
  TemplateFamily family = TemplateFamily::kTone;
  double center_hz = 0.0;
};

struct SceneTemplate {
  std::string name;
  double tilt = 0.0;  // one-pole coefficient shaping the background noise
  std::vector<std::size_t> events;  // class indices into the vocabulary
};

struct CorpusLayout {
  Vocabulary vocab;
  std::vector<EventTemplate> events;  // parallel to vocab
  std::vector<SceneTemplate> scenes;
};

/// Throws ConfigError when shared_events >= events_per_scene.
CorpusLayout make_layout(const CorpusSpec& spec);

struct EventPlacement {
  std::size_t event = 0;       // class index
  std::int64_t onset_ms = 0;   // inclusive
  std::int64_t offset_ms = 0;  // exclusive
  double gain_db = 0.0;        // relative to spec.snr_db
};

struct GeneratedClip {
  ClipRecord record;
  std::size_t scene = 0;
  std::vector<EventPlacement> placements;
  std::optional<Waveform> wave;  // kept only on request
};

struct GeneratedCorpus {
  CorpusLayout layout;
  std::vector<GeneratedClip> train;
  std::vector<GeneratedClip> eval;
};

/// Per-clip seed derived from (corpus seed, clip counter).
std::uint64_t clip_seed(std::uint64_t corpus_seed, std::uint64_t clip_index);

/// Draws the event placements of one clip from its scene vocabulary.
std::vector<EventPlacement> sample_placements(const CorpusSpec& spec,
                                              const SceneTemplate& scene,
                                              std::uint64_t seed);

/// Background + sum of scaled event templates, peak-normalized to 0.99.
Waveform render_clip(const CorpusSpec& spec, const CorpusLayout& layout,
                     std::size_t scene, std::span<const EventPlacement> placements,
                     std::uint64_t seed);

/// Generates both splits. When `root` is set, writes
/// root/{train,eval}/{meta.txt,vocab.txt,annotations/*.ann,audio/*.wav}.
/// Work is spread over `threads` workers; the output does not depend on it.
GeneratedCorpus generate_corpus(const CorpusSpec& spec,
                                const std::optional<std::filesystem::path>& root,
                                std::size_t threads = 1, bool keep_audio = false);

/// Exact per-frame activity [n_events x n_frames] of a placement list on a
/// hop grid given in whole milliseconds.
BinaryMatrix placement_activity(std::span<const EventPlacement> placements,
                                std::size_t n_events, std::size_t n_frames,
                                std::int64_t hop_ms);

}  // namespace sedkit
