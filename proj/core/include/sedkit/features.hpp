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
#include <filesystem>
#include <span>
#include <vector>

#include "sedkit/matrix.hpp"
#include "sedkit/wav.hpp"

namespace sedkit {

struct FeatureConfig {
  double frame_seconds = 0.040;
  double hop_seconds = 0.020;
  std::size_t n_mels = 64;
  double log_floor = 1e-10;
};

/// Log-mel features, [frames x bands].
struct FeatureMatrix {
  RealMatrix values;
  double frame_len = 0.040;
  double frame_hop = 0.020;

  std::size_t n_frames() const noexcept { return values.rows(); }
  std::size_t n_bands() const noexcept { return values.cols(); }
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Smallest power of two >= n.
std::size_t next_pow2(std::size_t n);

/// Frame and hop lengths in samples for a sample rate.
std::size_t frame_samples(const FeatureConfig& cfg, double sample_rate);
std::size_t hop_samples(const FeatureConfig& cfg, double sample_rate);

/// 1 + floor((n - frame) / hop); zero when the signal is shorter than a frame.
std::size_t frame_count(std::size_t num_samples, std::size_t frame,
                        std::size_t hop);

/// Triangular filters on the mel scale, 0 Hz to Nyquist, [n_mels x fft/2+1].
/// Throws ConfigError when a filter would catch no FFT bin.
RealMatrix mel_filterbank(double sample_rate, std::size_t fft_size,
                          std::size_t n_mels);

/// Mel filter center frequencies in Hz, strictly increasing.
std::vector<double> mel_center_frequencies(double sample_rate,
                                           std::size_t n_mels);

/// Hamming window -> |FFT|^2 -> mel -> log(x + floor).
FeatureMatrix logmel(const Waveform& wave, const FeatureConfig& cfg = {});

// Feature cache: [u32 T][u32 bands][T*bands f64], little-endian, row-major.
void write_feature_cache(const std::filesystem::path& path,
                         const FeatureMatrix& features);
FeatureMatrix read_feature_cache(const std::filesystem::path& path);

/// Per-band mean/std computed on the training split.
struct FeatureNormalizer {
  std::vector<double> mean;
  std::vector<double> stddev;

  static FeatureNormalizer fit(std::span<const FeatureMatrix> train);
  /// Identity transform for `bands` bands.
  static FeatureNormalizer identity(std::size_t bands);
  void apply(FeatureMatrix& features) const;
  bool empty() const noexcept { return mean.empty(); }
};

}  // namespace sedkit
