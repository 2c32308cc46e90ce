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
#include "sedkit/wav.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "binary_io.hpp"
#include "sedkit/errors.hpp"

namespace sedkit {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::string read_tag(std::istream& is, const std::string& context) {
  std::array<char, 4> tag{};
  is.read(tag.data(), 4);
  if (!is) throw DataError(context + ": truncated RIFF header");
  return std::string(tag.data(), 4);
}

}  // namespace

Waveform read_wav(const std::filesystem::path& path) {
  const std::string ctx = path.string();
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + ctx);

  if (read_tag(is, ctx) != "RIFF") throw DataError(ctx + ": not a RIFF file");
  detail::read_le<std::uint32_t>(is, ctx.c_str());
  if (read_tag(is, ctx) != "WAVE") throw DataError(ctx + ": not a WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  while (true) {
    const std::string id = read_tag(is, ctx);
    const auto size = detail::read_le<std::uint32_t>(is, ctx.c_str());
    if (id == "fmt ") {
      format = detail::read_le<std::uint16_t>(is, ctx.c_str());
      channels = detail::read_le<std::uint16_t>(is, ctx.c_str());
      rate = detail::read_le<std::uint32_t>(is, ctx.c_str());
      detail::read_le<std::uint32_t>(is, ctx.c_str());  // byte rate
      detail::read_le<std::uint16_t>(is, ctx.c_str());  // block align
      bits = detail::read_le<std::uint16_t>(is, ctx.c_str());
      std::uint32_t consumed = 16;
      if (format == kFormatExtensible && size >= 40) {
        detail::read_le<std::uint16_t>(is, ctx.c_str());  // cbSize
        detail::read_le<std::uint16_t>(is, ctx.c_str());  // valid bits
        detail::read_le<std::uint32_t>(is, ctx.c_str());  // channel mask
        format = detail::read_le<std::uint16_t>(is, ctx.c_str());
        consumed = 26;
      }
      is.seekg(size - consumed + (size & 1u), std::ios::cur);
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw DataError(ctx + ": data chunk before fmt chunk");
      if (channels == 0 || rate == 0) throw DataError(ctx + ": bad fmt chunk");
      const bool pcm16 = format == kFormatPcm && bits == 16;
      const bool float32 = format == kFormatFloat && bits == 32;
      if (!pcm16 && !float32) {
        throw DataError(ctx + ": only 16-bit PCM and 32-bit float WAV supported");
      }
      const std::size_t bytes_per_sample = bits / 8;
      const std::size_t frames = size / (bytes_per_sample * channels);
      Waveform wave;
      wave.sample_rate = rate;
      std::vector<unsigned char> raw(frames * channels * bytes_per_sample);
      is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
      if (!is) throw DataError(ctx + ": truncated data chunk");
      wave.samples.resize(frames);
      const unsigned char* p = raw.data();
      for (std::size_t i = 0; i < frames; ++i) {
        double acc = 0.0;
        for (std::uint16_t c = 0; c < channels; ++c, p += bytes_per_sample) {
          if (pcm16) {
            const auto u = static_cast<std::uint16_t>(p[0] | (p[1] << 8));
            acc += static_cast<std::int16_t>(u) / 32768.0;
          } else {
            const std::uint32_t u = static_cast<std::uint32_t>(p[0]) |
                                    (static_cast<std::uint32_t>(p[1]) << 8) |
                                    (static_cast<std::uint32_t>(p[2]) << 16) |
                                    (static_cast<std::uint32_t>(p[3]) << 24);
            acc += std::bit_cast<float>(u);
          }
        }
        wave.samples[i] = acc / channels;
      }
      return wave;
    } else {
      is.seekg(size + (size & 1u), std::ios::cur);
      if (!is) throw DataError(ctx + ": truncated chunk '" + id + "'");
    }
  }
}

void write_wav(const std::filesystem::path& path, const Waveform& wave) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path.string());
  const auto rate = static_cast<std::uint32_t>(std::lround(wave.sample_rate));
  const auto data_bytes = static_cast<std::uint32_t>(wave.samples.size() * 2);
  os.write("RIFF", 4);
  detail::write_le<std::uint32_t>(os, 36 + data_bytes);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  detail::write_le<std::uint32_t>(os, 16);
  detail::write_le<std::uint16_t>(os, kFormatPcm);
  detail::write_le<std::uint16_t>(os, 1);
  detail::write_le<std::uint32_t>(os, rate);
  detail::write_le<std::uint32_t>(os, rate * 2);
  detail::write_le<std::uint16_t>(os, 2);
  detail::write_le<std::uint16_t>(os, 16);
  os.write("data", 4);
  detail::write_le<std::uint32_t>(os, data_bytes);
  for (const double s : wave.samples) {
    const double clipped = std::clamp(s, -1.0, 1.0);
    const auto q = static_cast<std::int16_t>(
        std::clamp(std::lround(clipped * 32768.0), -32768L, 32767L));
    detail::write_le<std::int16_t>(os, q);
  }
  if (!os) throw DataError("write failed: " + path.string());
}

}  // namespace sedkit
