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
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "sedkit/config.hpp"
#include "sedkit/errors.hpp"
#include "sedkit/optim.hpp"
#include "sedkit/wav.hpp"

namespace sedkit {
namespace {

namespace fs = std::filesystem;

TEST(KeyValues, ParsesTypedValues) {
  KeyValues kv = KeyValues::parse(
      "# comment\n  a.b = 3 \nflag = true\nx = 2.5\nlist = 1, 2,3\nnames = a , b\n\n");
  EXPECT_EQ(kv.take_size("a.b"), 3u);
  EXPECT_EQ(kv.take_bool("flag"), true);
  EXPECT_EQ(kv.take_double("x"), 2.5);
  EXPECT_EQ(kv.take_size_list("list"), (std::vector<std::size_t>{1, 2, 3}));
  EXPECT_EQ(kv.take_string_list("names"), (std::vector<std::string>{"a", "b"}));
  EXPECT_FALSE(kv.take_int("missing").has_value());
  EXPECT_NO_THROW(kv.finish());
}

TEST(KeyValues, Errors) {
  EXPECT_THROW(KeyValues::parse("novalue\n"), ConfigError);
  EXPECT_THROW(KeyValues::parse("a = 1\na = 2\n"), ConfigError);
  KeyValues kv = KeyValues::parse("n = -1\nb = maybe\nd = 1.5x\ntypo = 1\n");
  EXPECT_THROW(kv.take_size("n"), ConfigError);
  EXPECT_THROW(kv.take_bool("b"), ConfigError);
  EXPECT_THROW(kv.take_double("d"), ConfigError);
  try {
    kv.finish();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("typo"), std::string::npos);
  }
}

TEST(KeyValues, TextRoundTrip) {
  KeyValues kv;
  kv.set("z", "1");
  kv.set("a.b", "x y");
  const KeyValues back = KeyValues::parse(kv.to_text());
  EXPECT_EQ(back.entries(), kv.entries());
}

TEST(Wav, Pcm16RoundTrip) {
  const auto path = fs::temp_directory_path() / "sedkit_wav_test.wav";
  Waveform w;
  w.sample_rate = 16000;
  for (int i = 0; i < 1000; ++i) w.samples.push_back(0.9 * std::sin(0.01 * i));
  w.samples.push_back(2.0);
  write_wav(path, w);
  const Waveform r = read_wav(path);
  EXPECT_EQ(r.sample_rate, 16000);
  ASSERT_EQ(r.samples.size(), w.samples.size());
  for (std::size_t i = 0; i + 1 < w.samples.size(); ++i) {
    EXPECT_NEAR(r.samples[i], w.samples[i], 0.5 / 32768 + 1e-15);
  }
  EXPECT_EQ(r.samples.back(), 32767.0 / 32768.0);
  fs::remove(path);
}

TEST(Wav, RejectsGarbage) {
  const auto path = fs::temp_directory_path() / "sedkit_wav_bad.wav";
  std::ofstream(path) << "not a wav file at all";
  EXPECT_THROW(read_wav(path), DataError);
  EXPECT_THROW(read_wav(path.string() + ".missing"), Error);
  fs::remove(path);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ModelParams p;
  p.tensors.push_back({"w", {3}, {1.0, -2.0, 0.5}});
  Adam adam(AdamConfig{}, p);
  const std::vector<std::vector<double>> g{{0.3, -7.0, 0.0}};
  adam.step(p, g);
  EXPECT_NEAR(p.tensors[0].values[0], 1.0 - 1e-3, 1e-10);
  EXPECT_NEAR(p.tensors[0].values[1], -2.0 + 1e-3, 1e-10);
  EXPECT_EQ(p.tensors[0].values[2], 0.5);
  EXPECT_EQ(adam.steps(), 1u);
}

TEST(Adam, MatchesReferenceRecurrence) {
  ModelParams p;
  p.tensors.push_back({"w", {1}, {0.0}});
  AdamConfig c;
  c.lr = 0.1;
  Adam adam(c, p);
  double x = 0.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 50; ++t) {
    const double g = 2.0 * (x - 3.0);
    adam.step(p, std::vector<std::vector<double>>{{g}});
    m = c.beta1 * m + (1 - c.beta1) * g;
    v = c.beta2 * v + (1 - c.beta2) * g * g;
    const double mh = m / (1 - std::pow(c.beta1, t));
    const double vh = v / (1 - std::pow(c.beta2, t));
    x -= c.lr * mh / (std::sqrt(vh) + c.eps);
    EXPECT_NEAR(p.tensors[0].values[0], x, 1e-12);
  }
}

TEST(Adam, ShapeMismatchThrows) {
  ModelParams p;
  p.tensors.push_back({"w", {2}, {0.0, 0.0}});
  Adam adam(AdamConfig{}, p);
  EXPECT_THROW(adam.step(p, std::vector<std::vector<double>>{{1.0}}), std::invalid_argument);
}

}  // namespace
}  // namespace sedkit
