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

#include <gtest/gtest.h>

#include <cstdio>

#include "oracles.hpp"
#include "sedkit/errors.hpp"
#include "sedkit/rng.hpp"

namespace sedkit {
namespace {

TEST(ParseEventFile, SingleLine) {
  const auto ev = parse_event_file("0.50\t1.20\tcar");
  ASSERT_EQ(ev.size(), 1u);
  EXPECT_DOUBLE_EQ(ev[0].onset, 0.5);
  EXPECT_DOUBLE_EQ(ev[0].offset, 1.2);
  EXPECT_EQ(ev[0].label, "car");
}

TEST(ParseEventFile, EmptyFile) { EXPECT_TRUE(parse_event_file("").empty()); }

TEST(ParseEventFile, OffsetBeforeOnsetNamesLine) {
  try {
    parse_event_file("1.0\t0.5\tcar");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1u);
  }
}

TEST(ParseEventFile, MalformedLinesReportLineNumber) {
  const char* bad[] = {
      "0.1\t0.2\tcar\n0.3\t0.4\n",          // missing field on line 2
      "0.1\t0.2\tcar\n\n0.3\tx\tdog\n",     // non-numeric on line 3
      "0.1\t0.2\tcar\n0.3\t0.3\tdog\n",     // zero-length on line 2
      "0.1\t0.2\tcar\t extra\n",            // too many fields on line 1
  };
  const std::size_t lines[] = {2, 3, 2, 1};
  for (std::size_t i = 0; i < std::size(bad); ++i) {
    try {
      parse_event_file(bad[i]);
      ADD_FAILURE() << "accepted: " << bad[i];
    } catch (const ParseError& e) {
      EXPECT_EQ(e.line(), lines[i]) << bad[i];
    }
  }
}

TEST(ParseEventFile, MergesSameLabelOverlapsOnly) {
  const auto ev = parse_event_file(
      "0.0\t1.0\tcar\n"
      "0.5\t2.0\tcar\n"
      "0.7\t0.9\tdog\n"
      "3.0\t4.0\tcar\n");
  ASSERT_EQ(ev.size(), 3u);
  EXPECT_EQ(ev[0], (EventInterval{0.0, 2.0, "car"}));
  EXPECT_EQ(ev[1], (EventInterval{0.7, 0.9, "dog"}));
  EXPECT_EQ(ev[2], (EventInterval{3.0, 4.0, "car"}));
}

TEST(ParseEventFile, RoundTripAtMillisecondPrecision) {
  Rng rng = make_rng(7, 0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<EventInterval> events;
    const char* labels[] = {"a", "b", "c"};
    for (int i = 0; i < 6; ++i) {
      const double on = std::round(uniform(rng, 0.0, 9.0) * 1000.0) / 1000.0;
      const double off = on + std::round(uniform(rng, 1.0, 900.0)) / 1000.0;
      events.push_back({on, off, labels[uniform_index(rng, 3)]});
    }
    const auto once = parse_event_file(serialize_event_file(merge_same_label(events)));
    const auto twice = parse_event_file(serialize_event_file(once));
    ASSERT_EQ(once, twice);
    for (const auto& e : once) {
      EXPECT_EQ(std::round(e.onset * 1000.0) / 1000.0, e.onset);
      EXPECT_EQ(std::round(e.offset * 1000.0) / 1000.0, e.offset);
    }
  }
}

TEST(ParseMetaFile, Examples) {
  const auto a = parse_meta_file("a.wav\thome");
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a.at("a"), "home");
  const auto b = parse_meta_file("audio/b.wav\tcity_center\n");
  EXPECT_EQ(b.at("b"), "city_center");
  EXPECT_THROW(parse_meta_file("a.wav\thome\na.wav\toffice\n"), DataError);
}

TEST(ParseMetaFile, MissingFieldNamesLine) {
  try {
    parse_meta_file("a.wav\thome\nb.wav\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Vocabulary, FileRoundTripAndLookup) {
  const Vocabulary v = parse_vocab_file("dishes\nwater_tap\ncar\n");
  EXPECT_EQ(v.size(), 3u);
  EXPECT_EQ(v.index_of("car"), 2u);
  EXPECT_THROW(v.index_of("bird"), DataError);
  EXPECT_EQ(parse_vocab_file(serialize_vocab_file(v)), v);
}

ClipRecord clip(std::string scene, std::vector<std::string> labels) {
  ClipRecord c;
  c.scene = std::move(scene);
  c.duration = 10.0;
  double t = 0.0;
  for (auto& l : labels) {
    c.events.push_back({t, t + 0.5, std::move(l)});
    t += 1.0;
  }
  return c;
}

TEST(SceneEventMap, UnionPerScene) {
  const std::vector<ClipRecord> clips{clip("A", {"a", "b"}), clip("A", {"a"})};
  const auto map = build_scene_event_map(clips);
  EXPECT_EQ(map.events_for("A"), (std::set<std::string>{"a", "b"}));
}

TEST(SceneEventMap, WorkedCaseFromScenePremise) {
  // Scene A holds events a and b at least once and c never.
  const std::vector<ClipRecord> clips{clip("A", {"a"}), clip("A", {"b", "a"})};
  const auto map = build_scene_event_map(clips);
  EXPECT_EQ(map.events_for("A"), (std::set<std::string>{"a", "b"}));
  const Vocabulary vocab({"a", "b", "c"});
  EXPECT_EQ(make_event_flags("A", map, vocab).f, (std::vector<std::uint8_t>{1, 1, 0}));
}

TEST(SceneEventMap, EmptySceneAndErrors) {
  const std::vector<ClipRecord> clips{clip("B", {}), clip("A", {"x"})};
  const auto map = build_scene_event_map(clips);
  EXPECT_TRUE(map.events_for("B").empty());
  EXPECT_THROW(map.events_for("C"), DataError);
  EXPECT_THROW(build_scene_event_map({}), DataError);
}

TEST(EventFlags, Examples) {
  const std::vector<ClipRecord> clips{clip("home", {"dishes", "water_tap"}),
                                      clip("quiet", {})};
  const auto map = build_scene_event_map(clips);
  const Vocabulary vocab({"dishes", "water_tap", "car"});
  EXPECT_EQ(make_event_flags("home", map, vocab).f, (std::vector<std::uint8_t>{1, 1, 0}));
  EXPECT_EQ(make_event_flags("quiet", map, vocab).f, (std::vector<std::uint8_t>{0, 0, 0}));
  const Vocabulary sub({"water_tap", "dishes"});
  EXPECT_EQ(make_event_flags("home", map, sub).f, (std::vector<std::uint8_t>{1, 1}));
  EXPECT_THROW(make_event_flags("office", map, vocab), DataError);
}

TEST(TargetMatrix, HandOverlapCase) {
  ClipRecord c;
  c.duration = 0.2;
  c.events = {{0.05, 0.10, "e"}};
  const auto tm = make_target_matrix(c, Vocabulary({"e"}), FrameGrid{10, 0.02});
  for (std::size_t t = 0; t < 10; ++t) {
    EXPECT_EQ(tm.z(0, t), (t >= 2 && t <= 4) ? 1 : 0) << "frame " << t;
  }
}

TEST(TargetMatrix, EmptyAndFullRows) {
  ClipRecord c;
  c.duration = 10.0;
  const Vocabulary vocab({"a", "b"});
  const FrameGrid grid{499, 0.02};
  auto tm = make_target_matrix(c, vocab, grid);
  for (const auto v : tm.z.data()) EXPECT_EQ(v, 0);
  c.events = {{0.0, 10.0, "b"}};
  tm = make_target_matrix(c, vocab, grid);
  for (std::size_t t = 0; t < 499; ++t) {
    EXPECT_EQ(tm.z(0, t), 0);
    EXPECT_EQ(tm.z(1, t), 1);
  }
  c.events = {{0.0, 1.0, "zzz"}};
  EXPECT_THROW(make_target_matrix(c, vocab, grid), DataError);
}

TEST(TargetMatrix, MatchesMillisecondOverlapOracle) {
  // Times on a 1 ms lattice, hop 20 ms: overlap is decided exactly in
  // integer milliseconds.
  Rng rng = make_rng(11, 0);
  for (int trial = 0; trial < 300; ++trial) {
    const std::int64_t on = static_cast<std::int64_t>(uniform_index(rng, 9000));
    const std::int64_t off = on + 1 + static_cast<std::int64_t>(uniform_index(rng, 999));
    ClipRecord c;
    c.duration = 10.0;
    c.events = {{on / 1000.0, off / 1000.0, "e"}};
    const auto tm = make_target_matrix(c, Vocabulary({"e"}), FrameGrid{499, 0.02});
    for (std::size_t t = 0; t < 499; ++t) {
      const std::int64_t lo = 20 * static_cast<std::int64_t>(t), hi = lo + 20;
      ASSERT_EQ(tm.z(0, t), (on < hi && off > lo) ? 1 : 0)
          << on << ".." << off << " frame " << t;
    }
  }
}

}  // namespace
}  // namespace sedkit
