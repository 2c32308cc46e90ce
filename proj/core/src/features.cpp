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

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>

#include "binary_io.hpp"
#include "sedkit/errors.hpp"

namespace sedkit {
namespace {

// FFTW planning is not thread-safe; plans are created once per size under a
// lock and then executed concurrently on caller-owned buffers.
class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan r2c(std::size_t n) {
    std::lock_guard lock(mu_);
    auto it = plans_.find(n);
    if (it != plans_.end()) return it->second;
    double* in = fftw_alloc_real(n);
    fftw_complex* out = fftw_alloc_complex(n / 2 + 1);
    fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out,
                                          FFTW_ESTIMATE);
    fftw_free(in);
    fftw_free(out);
    plans_.emplace(n, plan);
    return plan;
  }

  ~PlanCache() {
    for (auto& [n, plan] : plans_) fftw_destroy_plan(plan);
  }

 private:
  std::mutex mu_;
  std::map<std::size_t, fftw_plan> plans_;
};

struct FftwDeleter {
  void operator()(void* p) const { fftw_free(p); }
};

struct FilterSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
};

}  // namespace

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

std::size_t frame_samples(const FeatureConfig& cfg, double sample_rate) {
  return static_cast<std::size_t>(std::lround(cfg.frame_seconds * sample_rate));
}

std::size_t hop_samples(const FeatureConfig& cfg, double sample_rate) {
  return static_cast<std::size_t>(std::lround(cfg.hop_seconds * sample_rate));
}

std::size_t frame_count(std::size_t num_samples, std::size_t frame,
                        std::size_t hop) {
  if (frame == 0 || hop == 0 || num_samples < frame) return 0;
  return 1 + (num_samples - frame) / hop;
}

std::vector<double> mel_center_frequencies(double sample_rate,
                                           std::size_t n_mels) {
  const double mel_max = hz_to_mel(sample_rate / 2.0);
  std::vector<double> centers(n_mels);
  for (std::size_t m = 0; m < n_mels; ++m) {
    centers[m] = mel_to_hz(mel_max * static_cast<double>(m + 1) /
                           static_cast<double>(n_mels + 1));
  }
  return centers;
}

RealMatrix mel_filterbank(double sample_rate, std::size_t fft_size,
                          std::size_t n_mels) {
  if (n_mels < 1) throw ConfigError("mel_filterbank: n_mels must be >= 1");
  if (sample_rate <= 0.0) throw ConfigError("mel_filterbank: bad sample rate");
  if (fft_size < 2 || (fft_size & (fft_size - 1)) != 0) {
    throw ConfigError("mel_filterbank: fft_size must be a power of two");
  }
  const std::size_t n_bins = fft_size / 2 + 1;
  const double mel_max = hz_to_mel(sample_rate / 2.0);
  std::vector<double> edges(n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_max * static_cast<double>(i) /
                         static_cast<double>(n_mels + 1));
  }
  RealMatrix bank(n_mels, n_bins, 0.0);
  const double bin_hz = sample_rate / static_cast<double>(fft_size);
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double lo = edges[m], center = edges[m + 1], hi = edges[m + 2];
    double area = 0.0;
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * bin_hz;
      double w = 0.0;
      if (f > lo && f <= center) {
        w = (f - lo) / (center - lo);
      } else if (f > center && f < hi) {
        w = (hi - f) / (hi - center);
      }
      bank(m, k) = w;
      area += w;
    }
    if (!(area > 0.0)) {
      throw ConfigError("mel_filterbank: filter " + std::to_string(m) +
                        " is empty; too many mel bands for fft size " +
                        std::to_string(fft_size));
    }
  }
  return bank;
}

FeatureMatrix logmel(const Waveform& wave, const FeatureConfig& cfg) {
  if (wave.sample_rate <= 0.0) throw DataError("logmel: bad sample rate");
  const std::size_t frame = frame_samples(cfg, wave.sample_rate);
  const std::size_t hop = hop_samples(cfg, wave.sample_rate);
  if (frame == 0 || hop == 0) throw ConfigError("logmel: degenerate framing");
  if (wave.samples.size() <= frame) {
    throw DataError("logmel: waveform shorter than one frame");
  }
  for (const double s : wave.samples) {
    if (!std::isfinite(s)) throw DataError("logmel: non-finite sample");
  }

  const std::size_t fft_size = next_pow2(frame);
  const std::size_t n_bins = fft_size / 2 + 1;
  const RealMatrix bank = mel_filterbank(wave.sample_rate, fft_size, cfg.n_mels);
  std::vector<FilterSpan> spans(cfg.n_mels);
  for (std::size_t m = 0; m < cfg.n_mels; ++m) {
    const double* row = bank.row(m);
    std::size_t b = 0;
    while (b < n_bins && row[b] == 0.0) ++b;
    std::size_t e = n_bins;
    while (e > b && row[e - 1] == 0.0) --e;
    spans[m] = {b, e};
  }

  std::vector<double> window(frame);
  for (std::size_t i = 0; i < frame; ++i) {
    window[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi *
                                       static_cast<double>(i) /
                                       static_cast<double>(frame - 1));
  }

  fftw_plan plan = PlanCache::instance().r2c(fft_size);
  std::unique_ptr<double, FftwDeleter> in(fftw_alloc_real(fft_size));
  std::unique_ptr<fftw_complex, FftwDeleter> out(fftw_alloc_complex(n_bins));
  std::vector<double> power(n_bins);

  const std::size_t n_frames = frame_count(wave.samples.size(), frame, hop);
  FeatureMatrix feats{RealMatrix(n_frames, cfg.n_mels), cfg.frame_seconds,
                      cfg.hop_seconds};
  for (std::size_t t = 0; t < n_frames; ++t) {
    const double* src = wave.samples.data() + t * hop;
    double* buf = in.get();
    for (std::size_t i = 0; i < frame; ++i) buf[i] = src[i] * window[i];
    std::fill(buf + frame, buf + fft_size, 0.0);
    fftw_execute_dft_r2c(plan, buf, out.get());
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double re = out.get()[k][0], im = out.get()[k][1];
      power[k] = re * re + im * im;
    }
    double* dst = feats.values.row(t);
    for (std::size_t m = 0; m < cfg.n_mels; ++m) {
      const double* w = bank.row(m);
      double e = 0.0;
      for (std::size_t k = spans[m].begin; k < spans[m].end; ++k) {
        e += w[k] * power[k];
      }
      dst[m] = std::log(e + cfg.log_floor);
    }
  }
  return feats;
}

void write_feature_cache(const std::filesystem::path& path,
                         const FeatureMatrix& features) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write feature cache " + path.string());
  detail::write_le<std::uint32_t>(os,
                                  static_cast<std::uint32_t>(features.n_frames()));
  detail::write_le<std::uint32_t>(os,
                                  static_cast<std::uint32_t>(features.n_bands()));
  for (const double v : features.values.data()) detail::write_le<double>(os, v);
  if (!os) throw DataError("write failed: " + path.string());
}

FeatureMatrix read_feature_cache(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open feature cache " + path.string());
  const std::string ctx = path.string();
  const auto frames = detail::read_le<std::uint32_t>(is, ctx.c_str());
  const auto bands = detail::read_le<std::uint32_t>(is, ctx.c_str());
  FeatureMatrix feats;
  feats.values = RealMatrix(frames, bands);
  for (double& v : feats.values.data()) {
    v = detail::read_le<double>(is, ctx.c_str());
    if (!std::isfinite(v)) throw DataError(ctx + ": non-finite feature value");
  }
  return feats;
}

FeatureNormalizer FeatureNormalizer::fit(std::span<const FeatureMatrix> train) {
  if (train.empty()) throw DataError("normalizer: no training features");
  const std::size_t bands = train.front().n_bands();
  std::vector<double> sum(bands, 0.0), sq(bands, 0.0);
  std::size_t count = 0;
  for (const auto& fm : train) {
    if (fm.n_bands() != bands) throw DataError("normalizer: band mismatch");
    for (std::size_t t = 0; t < fm.n_frames(); ++t) {
      const double* row = fm.values.row(t);
      for (std::size_t b = 0; b < bands; ++b) {
        sum[b] += row[b];
        sq[b] += row[b] * row[b];
      }
    }
    count += fm.n_frames();
  }
  if (count == 0) throw DataError("normalizer: zero frames");
  FeatureNormalizer norm;
  norm.mean.resize(bands);
  norm.stddev.resize(bands);
  const double n = static_cast<double>(count);
  for (std::size_t b = 0; b < bands; ++b) {
    norm.mean[b] = sum[b] / n;
    const double var = std::max(0.0, sq[b] / n - norm.mean[b] * norm.mean[b]);
    norm.stddev[b] = std::max(std::sqrt(var), 1e-8);
  }
  return norm;
}

FeatureNormalizer FeatureNormalizer::identity(std::size_t bands) {
  return {std::vector<double>(bands, 0.0), std::vector<double>(bands, 1.0)};
}

void FeatureNormalizer::apply(FeatureMatrix& features) const {
  if (features.n_bands() != mean.size()) {
    throw DataError("normalizer: expected " + std::to_string(mean.size()) +
                    " bands, got " + std::to_string(features.n_bands()));
  }
  for (std::size_t t = 0; t < features.n_frames(); ++t) {
    double* row = features.values.row(t);
    for (std::size_t b = 0; b < mean.size(); ++b) {
      row[b] = (row[b] - mean[b]) / stddev[b];
    }
  }
}

}  // namespace sedkit
