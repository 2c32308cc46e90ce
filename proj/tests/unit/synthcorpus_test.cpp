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
#include "sedkit/synthcorpus.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sedkit/errors.hpp"
#include "sedkit/features.hpp"

namespace sedkit {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

CorpusSpec small_spec() {
  CorpusSpec s;
  s.clips_per_scene = 3;
  s.eval_clips_per_scene = 2;
  s.clip_seconds = 4.0;
  s.seed = 17;
  return s;
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  return dir;
}

TEST(Layout, DefaultVocabularyBoundsAndFlags) {
  const CorpusSpec spec;
  const CorpusLayout layout = make_layout(spec);
  EXPECT_GE(layout.vocab.size(), 5u);
  EXPECT_LE(layout.vocab.size(), 14u);
  ASSERT_EQ(layout.scenes.size(), 4u);
  for (const auto& scene : layout.scenes) {
    EXPECT_EQ(scene.events.size(), 5u);
    std::vector<std::uint8_t> flags(layout.vocab.size(), 0);
    for (const auto e : scene.events) flags[e] = 1;
    EXPECT_NE(std::count(flags.begin(), flags.end(), 0), 0) << scene.name;
  }
  // Scene names are distinct, event centers strictly increasing.
  for (std::size_t i = 1; i < layout.events.size(); ++i) {
    EXPECT_LT(layout.events[i - 1].center_hz, layout.events[i].center_hz);
  }
}

TEST(Layout, ImpossibleVocabularyIsRejected) {
  CorpusSpec spec;
  spec.shared_events = spec.events_per_scene;
  EXPECT_THROW(make_layout(spec), ConfigError);
  spec.shared_events = 7;
  EXPECT_THROW(make_layout(spec), ConfigError);
  spec = CorpusSpec{};
  spec.n_scenes = 1;
  EXPECT_THROW(make_layout(spec), ConfigError);
}

TEST(Generate, SameSeedGivesByteIdenticalFiles) {
  const auto a = fresh_dir("sedkit_synth_a"), b = fresh_dir("sedkit_synth_b");
  generate_corpus(small_spec(), a, 1);
  generate_corpus(small_spec(), b, 3);
  std::size_t compared = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), a);
    ASSERT_TRUE(fs::exists(b / rel)) << rel;
    EXPECT_EQ(slurp(entry.path()), slurp(b / rel)) << rel;
    ++compared;
  }
  // 4 scenes x (3 + 2) clips, each with audio and annotation, plus meta and
  // vocab per split.
  EXPECT_EQ(compared, 4u * 5u * 2u + 4u);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Generate, SplitsAreDisjointAndLabelsStayInScene) {
  const auto corpus = generate_corpus(CorpusSpec{}, std::nullopt);
  EXPECT_EQ(corpus.train.size(), 200u);
  EXPECT_EQ(corpus.eval.size(), 80u);
  std::set<std::string> ids;
  for (const auto* split : {&corpus.train, &corpus.eval}) {
    for (const auto& clip : *split) {
      EXPECT_TRUE(ids.insert(clip.record.clip_id).second) << clip.record.clip_id;
      const auto& allowed = corpus.layout.scenes[clip.scene].events;
      for (const auto& ev : clip.record.events) {
        const auto n = corpus.layout.vocab.index_of(ev.label);
        EXPECT_NE(std::find(allowed.begin(), allowed.end(), n), allowed.end());
        EXPECT_GE(ev.onset, 0.0);
        EXPECT_LE(ev.offset, clip.record.duration);
      }
    }
  }
}

TEST(Generate, TargetsMatchPlacementListExactly) {
  const CorpusSpec spec;
  const auto corpus = generate_corpus(spec, std::nullopt);
  const FeatureConfig fc;
  const std::size_t frames = frame_count(160000, frame_samples(fc, 16000), hop_samples(fc, 16000));
  std::int64_t total_targets = 0, total_truth = 0;
  for (const auto* split : {&corpus.train, &corpus.eval}) {
    for (const auto& clip : *split) {
      const auto tm = make_target_matrix(clip.record, corpus.layout.vocab, FrameGrid{frames, 0.02});
      const auto truth = placement_activity(clip.placements, corpus.layout.vocab.size(), frames, 20);
      ASSERT_EQ(tm.z, truth) << clip.record.clip_id;
      total_targets += std::count(tm.z.data().begin(), tm.z.data().end(), 1);
      total_truth += std::count(truth.data().begin(), truth.data().end(), 1);
    }
  }
  EXPECT_EQ(total_targets, total_truth);
  EXPECT_GT(total_truth, 0);
}

TEST(Generate, SceneMapRecoversSceneVocabularies) {
  const auto corpus = generate_corpus(CorpusSpec{}, std::nullopt);
  std::vector<ClipRecord> train;
  for (const auto& c : corpus.train) train.push_back(c.record);
  const auto map = build_scene_event_map(train);
  for (const auto& scene : corpus.layout.scenes) {
    std::set<std::string> expected;
    for (const auto e : scene.events) expected.insert(corpus.layout.vocab[e]);
    EXPECT_EQ(map.events_for(scene.name), expected) << scene.name;
  }
}

TEST(Generate, ZeroEventRateGivesEmptyAnnotations) {
  CorpusSpec spec = small_spec();
  spec.event_rate = 0.0;
  const auto dir = fresh_dir("sedkit_synth_empty");
  const auto corpus = generate_corpus(spec, dir);
  std::vector<ClipRecord> train;
  for (const auto& c : corpus.train) {
    EXPECT_TRUE(c.record.events.empty());
    EXPECT_EQ(fs::file_size(dir / "train" / "annotations" / (c.record.clip_id + ".ann")), 0u);
    train.push_back(c.record);
  }
  const auto map = build_scene_event_map(train);
  for (const auto& s : map.scenes()) EXPECT_TRUE(map.events_for(s).empty());
  fs::remove_all(dir);
}

TEST(Generate, FilesReparseToInMemoryRecords) {
  const auto dir = fresh_dir("sedkit_synth_parse");
  const auto corpus = generate_corpus(small_spec(), dir);
  for (const auto& [split, clips] : {std::pair{"train", &corpus.train}, std::pair{"eval", &corpus.eval}}) {
    const auto meta = parse_meta_file(slurp(dir / split / "meta.txt"));
    EXPECT_EQ(meta.size(), clips->size());
    EXPECT_EQ(parse_vocab_file(slurp(dir / split / "vocab.txt")), corpus.layout.vocab);
    for (const auto& c : *clips) {
      EXPECT_EQ(meta.at(c.record.clip_id), c.record.scene);
      EXPECT_EQ(parse_event_file(slurp(dir / split / "annotations" / (c.record.clip_id + ".ann"))),
                c.record.events);
      const Waveform w = read_wav(dir / split / c.record.audio_path);
      EXPECT_EQ(w.samples.size(), 64000u);
      EXPECT_EQ(w.sample_rate, 16000.0);
    }
  }
  fs::remove_all(dir);
}

TEST(Render, NeverClips) {
  CorpusSpec spec = small_spec();
  spec.snr_db = 20.0;
  spec.event_rate = 4.0;
  const CorpusLayout layout = make_layout(spec);
  for (std::uint64_t i = 0; i < 100; ++i) {
    const std::size_t scene = i % spec.n_scenes;
    const auto seed = clip_seed(99, i);
    const auto placements = sample_placements(spec, layout.scenes[scene], seed);
    const Waveform w = render_clip(spec, layout, scene, placements, seed);
    double peak = 0.0;
    for (const double s : w.samples) peak = std::max(peak, std::abs(s));
    EXPECT_LE(peak, 0.99);
    EXPECT_GT(peak, 0.98);
  }
}

TEST(Render, BackgroundIsNearStationary) {
  CorpusSpec spec;
  const CorpusLayout layout = make_layout(spec);
  for (std::size_t scene = 0; scene < spec.n_scenes; ++scene) {
    const Waveform w = render_clip(spec, layout, scene, {}, clip_seed(5, scene));
    const FeatureMatrix f = logmel(w);
    const std::size_t half = f.n_frames() / 2;
    for (std::size_t b = 0; b < f.n_bands(); ++b) {
      double first = 0.0, second = 0.0;
      for (std::size_t t = 0; t < half; ++t) first += f.values(t, b);
      for (std::size_t t = half; t < 2 * half; ++t) second += f.values(t, b);
      EXPECT_NEAR(first / half, second / half, 0.3) << "scene " << scene << " band " << b;
    }
  }
}

TEST(Render, LoudToneStandsOutInItsBand) {
  CorpusSpec spec;
  spec.snr_db = 20.0;
  const CorpusLayout layout = make_layout(spec);
  ASSERT_EQ(layout.events[0].family, TemplateFamily::kTone);
  const std::vector<EventPlacement> placements{{0, 2000, 5000, 0.0}};
  const Waveform w = render_clip(spec, layout, 0, placements, clip_seed(3, 0));
  const FeatureMatrix f = logmel(w);
  const auto centers = mel_center_frequencies(16000, 64);
  std::size_t band = 0;
  for (std::size_t m = 0; m < centers.size(); ++m) {
    if (std::abs(centers[m] - layout.events[0].center_hz) <
        std::abs(centers[band] - layout.events[0].center_hz)) {
      band = m;
    }
  }
  double inside = 0.0, outside = 0.0;
  std::size_t n_in = 0, n_out = 0;
  for (std::size_t t = 0; t < f.n_frames(); ++t) {
    const double start = 0.02 * t, end = start + 0.04;
    const double power = std::exp(f.values(t, band));
    if (start >= 2.0 && end <= 5.0) {
      inside += power;
      ++n_in;
    } else if (end <= 2.0 || start >= 5.0) {
      outside += power;
      ++n_out;
    }
  }
  const double db = 10.0 * std::log10((inside / n_in) / (outside / n_out));
  EXPECT_GE(db, 10.0);
}

TEST(Placement, ActivityOracleOnHandCase) {
  const std::vector<EventPlacement> p{{1, 50, 100, 0.0}};
  const auto z = placement_activity(p, 2, 10, 20);
  for (std::size_t t = 0; t < 10; ++t) {
    EXPECT_EQ(z(0, t), 0);
    EXPECT_EQ(z(1, t), (t >= 2 && t <= 4) ? 1 : 0);
  }
}

TEST(CorpusSpec, KeyValueRoundTrip) {
  CorpusSpec s = small_spec();
  s.snr_db = -3.5;
  KeyValues kv;
  s.write(kv);
  KeyValues back = KeyValues::parse(kv.to_text());
  const CorpusSpec r = CorpusSpec::read(back);
  EXPECT_EQ(r.n_scenes, s.n_scenes);
  EXPECT_EQ(r.clip_seconds, s.clip_seconds);
  EXPECT_EQ(r.snr_db, s.snr_db);
  EXPECT_EQ(r.seed, s.seed);
  EXPECT_NO_THROW(back.finish());
}

}  // namespace
}  // namespace sedkit
