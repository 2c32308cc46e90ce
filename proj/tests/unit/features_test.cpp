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
#include "sedkit/features.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "oracles.hpp"
#include "sedkit/errors.hpp"
#include "sedkit/rng.hpp"

namespace sedkit {
namespace {

Waveform noise(double seconds, double rate, std::uint64_t seed, double amp = 0.1) {
  Waveform w;
  w.sample_rate = rate;
  Rng rng = make_rng(seed, 0);
  w.samples.resize(static_cast<std::size_t>(std::llround(seconds * rate)));
  for (auto& s : w.samples) s = amp * gaussian(rng);
  return w;
}

TEST(FrameCount, TenSecondClips) {
  const FeatureConfig cfg;
  EXPECT_EQ(frame_count(441000, frame_samples(cfg, 44100), hop_samples(cfg, 44100)), 499u);
  EXPECT_EQ(frame_count(160000, frame_samples(cfg, 16000), hop_samples(cfg, 16000)), 499u);
  EXPECT_EQ(frame_samples(cfg, 44100), 1764u);
  EXPECT_EQ(hop_samples(cfg, 44100), 882u);
}

TEST(FrameCount, MatchesLoopOracle) {
  Rng rng = make_rng(3, 0);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t frame = 1 + uniform_index(rng, 2048);
    const std::size_t hop = 1 + uniform_index(rng, frame);
    const std::size_t n = uniform_index(rng, 50000);
    ASSERT_EQ(frame_count(n, frame, hop), oracle::frame_count_loop(n, frame, hop))
        << n << " " << frame << " " << hop;
  }
}

TEST(FftSize, NextPowerOfTwo) {
  const FeatureConfig cfg;
  EXPECT_EQ(next_pow2(frame_samples(cfg, 44100)), 2048u);
  EXPECT_EQ(next_pow2(frame_samples(cfg, 16000)), 1024u);
  EXPECT_EQ(next_pow2(1), 1u);
  EXPECT_EQ(next_pow2(1024), 1024u);
}

TEST(MelScale, InverseAndKnownValue) {
  EXPECT_NEAR(hz_to_mel(1000.0), 999.98, 0.01);
  for (double f : {0.0, 100.0, 1234.5, 8000.0, 22050.0}) {
    EXPECT_NEAR(mel_to_hz(hz_to_mel(f)), f, 1e-9 * std::max(1.0, f));
  }
}

TEST(MelFilterbank, SingleFilterCoversBand) {
  const RealMatrix fb = mel_filterbank(16000, 1024, 1);
  ASSERT_EQ(fb.rows(), 1u);
  ASSERT_EQ(fb.cols(), 513u);
  double sum = 0.0;
  for (std::size_t k = 0; k < fb.cols(); ++k) sum += fb(0, k);
  EXPECT_GT(sum, 0.0);
}

TEST(MelFilterbank, ConstructionProperties) {
  for (const double rate : {16000.0, 44100.0}) {
    const std::size_t fft = rate == 16000.0 ? 1024 : 2048;
    const RealMatrix fb = mel_filterbank(rate, fft, 64);
    const auto centers = mel_center_frequencies(rate, 64);
    for (std::size_t m = 0; m + 1 < centers.size(); ++m) EXPECT_LT(centers[m], centers[m + 1]);
    const double bin_hz = rate / static_cast<double>(fft);
    for (std::size_t m = 0; m < 64; ++m) {
      double area = 0.0;
      for (std::size_t k = 0; k < fb.cols(); ++k) area += fb(m, k);
      EXPECT_GT(area, 0.0) << "filter " << m;
    }
    // Every bin between the first and last centers carries weight.
    for (std::size_t k = 0; k < fb.cols(); ++k) {
      const double f = static_cast<double>(k) * bin_hz;
      if (f <= centers.front() || f >= centers.back()) continue;
      double total = 0.0;
      for (std::size_t m = 0; m < 64; ++m) total += fb(m, k);
      EXPECT_GT(total, 0.0) << "bin " << k;
    }
  }
}

TEST(MelFilterbank, TooManyFiltersForResolution) {
  EXPECT_THROW(mel_filterbank(16000, 64, 128), ConfigError);
}

TEST(Logmel, ShapeAndSilence) {
  Waveform w;
  w.sample_rate = 16000;
  w.samples.assign(160000, 0.0);
  const FeatureMatrix f = logmel(w);
  EXPECT_EQ(f.n_frames(), 499u);
  EXPECT_EQ(f.n_bands(), 64u);
  for (const double v : f.values.data()) EXPECT_EQ(v, std::log(1e-10));
}

TEST(Logmel, FortyFourKiloHertz) {
  const FeatureMatrix f = logmel(noise(10.0, 44100, 1));
  EXPECT_EQ(f.n_frames(), 499u);
}

TEST(Logmel, AmplitudeScalingShiftsByTwoLogC) {
  const Waveform w = noise(1.0, 16000, 2, 0.05);
  Waveform scaled = w;
  const double c = 3.7;
  for (auto& s : scaled.samples) s *= c;
  const FeatureMatrix a = logmel(w), b = logmel(scaled);
  const double floor_db60 = std::log(1e-10) + std::log(1e6);
  std::size_t checked = 0;
  for (std::size_t i = 0; i < a.values.data().size(); ++i) {
    if (a.values.data()[i] < floor_db60) continue;
    EXPECT_NEAR(b.values.data()[i] - a.values.data()[i], 2.0 * std::log(c), 1e-6);
    ++checked;
  }
  EXPECT_GT(checked, 1000u);
}

TEST(Logmel, PureToneEnergyPeaksNearItsBand) {
  Waveform w;
  w.sample_rate = 16000;
  const double f0 = 1000.0;
  for (int i = 0; i < 16000; ++i) {
    w.samples.push_back(0.5 * std::sin(2.0 * std::numbers::pi * f0 * i / 16000.0));
  }
  const FeatureMatrix f = logmel(w);
  const auto centers = mel_center_frequencies(16000, 64);
  std::size_t best = 0;
  for (std::size_t m = 0; m < 64; ++m) {
    if (f.values(10, m) > f.values(10, best)) best = m;
  }
  EXPECT_LT(std::abs(hz_to_mel(centers[best]) - hz_to_mel(f0)),
            hz_to_mel(8000.0) / 65.0 * 1.01);
}

TEST(Logmel, DeterministicAndErrors) {
  const Waveform w = noise(0.5, 16000, 4);
  EXPECT_EQ(logmel(w).values, logmel(w).values);

  Waveform bad = w;
  bad.samples[100] = std::nan("");
  EXPECT_THROW(logmel(bad), DataError);
  Waveform shorty;
  shorty.sample_rate = 16000;
  shorty.samples.assign(100, 0.0);
  EXPECT_THROW(logmel(shorty), DataError);
}

TEST(FeatureCache, RoundTripIsBitExact) {
  const FeatureMatrix f = logmel(noise(0.3, 16000, 5));
  const auto path = std::filesystem::temp_directory_path() / "sedkit_cache_test.feat";
  write_feature_cache(path, f);
  EXPECT_EQ(std::filesystem::file_size(path), 8 + 8 * f.values.data().size());
  const FeatureMatrix g = read_feature_cache(path);
  EXPECT_EQ(g.values, f.values);
  std::filesystem::remove(path);
}

TEST(FeatureNormalizer, ZeroMeanUnitStd) {
  std::vector<FeatureMatrix> train{logmel(noise(0.5, 16000, 6)), logmel(noise(0.7, 16000, 7))};
  const auto norm = FeatureNormalizer::fit(train);
  std::vector<double> sum(64, 0.0), sq(64, 0.0);
  std::size_t n = 0;
  for (auto f : train) {
    norm.apply(f);
    for (std::size_t t = 0; t < f.n_frames(); ++t) {
      for (std::size_t b = 0; b < 64; ++b) {
        sum[b] += f.values(t, b);
        sq[b] += f.values(t, b) * f.values(t, b);
      }
      ++n;
    }
  }
  for (std::size_t b = 0; b < 64; ++b) {
    EXPECT_NEAR(sum[b] / n, 0.0, 1e-9);
    EXPECT_NEAR(sq[b] / n, 1.0, 1e-9);
  }
  FeatureMatrix same = train[0];
  FeatureNormalizer::identity(64).apply(same);
  EXPECT_EQ(same.values, train[0].values);
}

}  // namespace
}  // namespace sedkit
