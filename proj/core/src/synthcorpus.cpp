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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <thread>

#include "sedkit/errors.hpp"
#include "sedkit/features.hpp"
#include "sedkit/rng.hpp"

namespace sedkit {
namespace {

constexpr double kMinEventSeconds = 0.2;
constexpr double kMaxEventSeconds = 2.0;
constexpr double kRampSeconds = 0.01;
constexpr double kGainJitterDb = 3.0;
constexpr double kPeak = 0.99;

const char* const kSceneNames[] = {"home", "residential_area", "city_center",
                                   "office"};

const char* family_name(TemplateFamily f) {
  switch (f) {
    case TemplateFamily::kTone: return "tone";
    case TemplateFamily::kChirp: return "chirp";
    case TemplateFamily::kNoiseBurst: return "burst";
  }
  return "event";
}

std::string two_digits(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%02zu", i);
  return buf;
}

std::string clip_name(const std::string& scene, const char* split, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%03zu", i);
  return scene + "_" + split + "_" + buf;
}

// RBJ band-pass biquad (constant 0 dB peak gain).
struct Biquad {
  double b0, b1, b2, a1, a2;
  double x1 = 0, x2 = 0, y1 = 0, y2 = 0;

  static Biquad bandpass(double fc, double q, double fs) {
    const double w0 = 2.0 * std::numbers::pi * fc / fs;
    const double alpha = std::sin(w0) / (2.0 * q);
    const double a0 = 1.0 + alpha;
    return {alpha / a0, 0.0, -alpha / a0, -2.0 * std::cos(w0) / a0,
            (1.0 - alpha) / a0};
  }

  double operator()(double x) {
    const double y = b0 * x + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
    x2 = x1;
    x1 = x;
    y2 = y1;
    y1 = y;
    return y;
  }
};

std::vector<double> event_signal(const EventTemplate& tpl, std::size_t length,
                                 double fs, Rng& rng) {
  std::vector<double> s(length);
  const double phase0 = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  switch (tpl.family) {
    case TemplateFamily::kTone: {
      const double w = 2.0 * std::numbers::pi * tpl.center_hz / fs;
      for (std::size_t i = 0; i < length; ++i) {
        s[i] = std::sin(phase0 + w * static_cast<double>(i));
      }
      break;
    }
    case TemplateFamily::kChirp: {
      // Linear sweep 0.9 fc -> 1.1 fc over the event.
      const double f0 = 0.9 * tpl.center_hz, f1 = 1.1 * tpl.center_hz;
      const double dur = static_cast<double>(length) / fs;
      for (std::size_t i = 0; i < length; ++i) {
        const double t = static_cast<double>(i) / fs;
        const double phase =
            2.0 * std::numbers::pi * (f0 * t + 0.5 * (f1 - f0) / dur * t * t);
        s[i] = std::sin(phase0 + phase);
      }
      break;
    }
    case TemplateFamily::kNoiseBurst: {
      Biquad bp = Biquad::bandpass(tpl.center_hz, 6.0, fs);
      for (std::size_t i = 0; i < length; ++i) s[i] = bp(gaussian(rng));
      break;
    }
  }
  // Unit RMS, then raised-cosine ramps at both ends.
  double energy = 0.0;
  for (const double v : s) energy += v * v;
  const double rms = std::sqrt(energy / static_cast<double>(std::max<std::size_t>(1, length)));
  const std::size_t ramp =
      std::min(length / 2, static_cast<std::size_t>(std::lround(kRampSeconds * fs)));
  for (std::size_t i = 0; i < length; ++i) {
    double env = 1.0;
    if (i < ramp) {
      env = 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(i) / ramp);
    } else if (i >= length - ramp) {
      env = 0.5 - 0.5 * std::cos(std::numbers::pi *
                                 static_cast<double>(length - 1 - i) / ramp);
    }
    s[i] = rms > 0.0 ? env * s[i] / rms : 0.0;
  }
  return s;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path.string());
  os << text;
  if (!os) throw DataError("write failed: " + path.string());
}

}  // namespace

void CorpusSpec::validate() const {
  if (n_scenes < 2) throw ConfigError("synth.n_scenes must be >= 2");
  if (events_per_scene < 1) throw ConfigError("synth.events_per_scene must be >= 1");
  if (shared_events >= events_per_scene) {
    throw ConfigError(
        "synth.shared_events must be smaller than synth.events_per_scene so "
        "that every scene has events absent from the others");
  }
  if (clips_per_scene < 1 || eval_clips_per_scene < 1) {
    throw ConfigError("synth clip counts must be >= 1");
  }
  if (!(sample_rate >= 8000.0)) throw ConfigError("synth.sample_rate must be >= 8000");
  if (!(clip_seconds >= 2.0 * kMaxEventSeconds)) {
    throw ConfigError("synth.clip_seconds must be >= 4");
  }
  if (std::abs(clip_seconds * 1000.0 - std::round(clip_seconds * 1000.0)) > 1e-9) {
    throw ConfigError("synth.clip_seconds must be a whole number of milliseconds");
  }
  if (!(event_rate >= 0.0)) throw ConfigError("synth.event_rate must be >= 0");
}

void CorpusSpec::write(KeyValues& kv) const {
  char buf[64];
  const auto real = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  kv.set("synth.n_scenes", std::to_string(n_scenes));
  kv.set("synth.events_per_scene", std::to_string(events_per_scene));
  kv.set("synth.shared_events", std::to_string(shared_events));
  kv.set("synth.clips_per_scene", std::to_string(clips_per_scene));
  kv.set("synth.eval_clips_per_scene", std::to_string(eval_clips_per_scene));
  kv.set("synth.clip_seconds", real(clip_seconds));
  kv.set("synth.sample_rate", real(sample_rate));
  kv.set("synth.event_rate", real(event_rate));
  kv.set("synth.snr_db", real(snr_db));
  kv.set("synth.seed", std::to_string(seed));
}

CorpusSpec CorpusSpec::read(KeyValues& kv) { return read(kv, CorpusSpec{}); }

CorpusSpec CorpusSpec::read(KeyValues& kv, const CorpusSpec& defaults) {
  CorpusSpec s = defaults;
  if (auto v = kv.take_size("synth.n_scenes")) s.n_scenes = *v;
  if (auto v = kv.take_size("synth.events_per_scene")) s.events_per_scene = *v;
  if (auto v = kv.take_size("synth.shared_events")) s.shared_events = *v;
  if (auto v = kv.take_size("synth.clips_per_scene")) s.clips_per_scene = *v;
  if (auto v = kv.take_size("synth.eval_clips_per_scene")) s.eval_clips_per_scene = *v;
  if (auto v = kv.take_double("synth.clip_seconds")) s.clip_seconds = *v;
  if (auto v = kv.take_double("synth.sample_rate")) s.sample_rate = *v;
  if (auto v = kv.take_double("synth.event_rate")) s.event_rate = *v;
  if (auto v = kv.take_double("synth.snr_db")) s.snr_db = *v;
  if (auto v = kv.take_size("synth.seed")) s.seed = *v;
  return s;
}

CorpusLayout make_layout(const CorpusSpec& spec) {
  spec.validate();
  const std::size_t unique = spec.events_per_scene - spec.shared_events;
  const std::size_t total = spec.shared_events + spec.n_scenes * unique;

  // Class centers evenly spaced on the mel scale between 250 Hz and 80% of
  // Nyquist, in vocabulary order.
  const double mel_lo = hz_to_mel(250.0);
  const double mel_hi = hz_to_mel(0.4 * spec.sample_rate);
  CorpusLayout layout;
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < total; ++i) {
    EventTemplate tpl;
    tpl.family = static_cast<TemplateFamily>(i % 3);
    tpl.center_hz = mel_to_hz(
        total == 1 ? mel_lo
                   : mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                  static_cast<double>(total - 1));
    tpl.label = std::string(family_name(tpl.family)) + "_" + two_digits(i);
    labels.push_back(tpl.label);
    layout.events.push_back(std::move(tpl));
  }
  layout.vocab = Vocabulary(std::move(labels));

  for (std::size_t s = 0; s < spec.n_scenes; ++s) {
    SceneTemplate scene;
    scene.name = s < std::size(kSceneNames) ? kSceneNames[s]
                                            : "scene" + std::to_string(s);
    scene.tilt = -0.5 + 1.4 * static_cast<double>(s) /
                            static_cast<double>(spec.n_scenes - 1);
    for (std::size_t e = 0; e < spec.shared_events; ++e) scene.events.push_back(e);
    for (std::size_t u = 0; u < unique; ++u) {
      scene.events.push_back(spec.shared_events + s * unique + u);
    }
    layout.scenes.push_back(std::move(scene));
  }
  return layout;
}

std::uint64_t clip_seed(std::uint64_t corpus_seed, std::uint64_t clip_index) {
  return derive_seed(corpus_seed, clip_index);
}

std::vector<EventPlacement> sample_placements(const CorpusSpec& spec,
                                              const SceneTemplate& scene,
                                              std::uint64_t seed) {
  Rng rng = make_rng(seed, 1);
  const auto max_count = static_cast<std::uint64_t>(std::llround(2.0 * spec.event_rate));
  const std::uint64_t count = uniform_index(rng, max_count + 1);
  const auto clip_ms = static_cast<std::int64_t>(std::llround(spec.clip_seconds * 1000.0));
  std::vector<EventPlacement> out;
  for (std::uint64_t i = 0; i < count; ++i) {
    EventPlacement p;
    p.event = scene.events[uniform_index(rng, scene.events.size())];
    const double dur = uniform(rng, kMinEventSeconds, kMaxEventSeconds);
    const double onset = uniform(rng, 0.0, spec.clip_seconds - dur);
    p.onset_ms = std::llround(onset * 1000.0);
    p.offset_ms = std::min<std::int64_t>(clip_ms, std::llround((onset + dur) * 1000.0));
    p.gain_db = uniform(rng, -kGainJitterDb, kGainJitterDb);
    out.push_back(p);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const EventPlacement& a, const EventPlacement& b) {
                     return a.onset_ms < b.onset_ms;
                   });
  return out;
}

Waveform render_clip(const CorpusSpec& spec, const CorpusLayout& layout,
                     std::size_t scene, std::span<const EventPlacement> placements,
                     std::uint64_t seed) {
  const double fs = spec.sample_rate;
  const auto n = static_cast<std::size_t>(std::llround(spec.clip_seconds * fs));
  Waveform wave;
  wave.sample_rate = fs;
  wave.samples.resize(n);

  // Background: tilted noise at unit RMS.
  Rng bg = make_rng(seed, 2);
  const double tilt = layout.scenes.at(scene).tilt;
  double y = 0.0, energy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    y = gaussian(bg) + tilt * y;
    wave.samples[i] = y;
    energy += y * y;
  }
  const double bg_rms = std::sqrt(energy / static_cast<double>(n));
  for (double& s : wave.samples) s /= bg_rms;

  for (std::size_t k = 0; k < placements.size(); ++k) {
    const auto& p = placements[k];
    const auto begin = static_cast<std::size_t>(std::llround(p.onset_ms * fs / 1000.0));
    const auto end = std::min(
        n, static_cast<std::size_t>(std::llround(p.offset_ms * fs / 1000.0)));
    if (end <= begin) continue;
    Rng ev_rng = make_rng(seed, 100 + k);
    const auto sig = event_signal(layout.events.at(p.event), end - begin, fs, ev_rng);
    const double amp = std::pow(10.0, (spec.snr_db + p.gain_db) / 20.0);
    for (std::size_t i = 0; i < sig.size(); ++i) wave.samples[begin + i] += amp * sig[i];
  }

  double peak = 0.0;
  for (const double s : wave.samples) peak = std::max(peak, std::abs(s));
  if (peak > 0.0) {
    const double gain = kPeak / peak;
    for (double& s : wave.samples) s = std::clamp(s * gain, -kPeak, kPeak);
  }
  return wave;
}

BinaryMatrix placement_activity(std::span<const EventPlacement> placements,
                                std::size_t n_events, std::size_t n_frames,
                                std::int64_t hop_ms) {
  BinaryMatrix z(n_events, n_frames, 0);
  for (std::size_t t = 0; t < n_frames; ++t) {
    const auto lo = static_cast<std::int64_t>(t) * hop_ms;
    const auto hi = lo + hop_ms;
    for (const auto& p : placements) {
      if (p.onset_ms < hi && p.offset_ms > lo) z(p.event, t) = 1;
    }
  }
  return z;
}

GeneratedCorpus generate_corpus(const CorpusSpec& spec,
                                const std::optional<std::filesystem::path>& root,
                                std::size_t threads, bool keep_audio) {
  GeneratedCorpus corpus;
  corpus.layout = make_layout(spec);
  const CorpusLayout& layout = corpus.layout;

  struct Job {
    const char* split;
    std::vector<GeneratedClip>* out;
    std::size_t per_scene;
    std::uint64_t counter_base;
  };
  const std::uint64_t train_total = spec.n_scenes * spec.clips_per_scene;
  const Job jobs[] = {
      {"train", &corpus.train, spec.clips_per_scene, 0},
      {"eval", &corpus.eval, spec.eval_clips_per_scene, train_total},
  };

  for (const auto& job : jobs) {
    const std::size_t count = spec.n_scenes * job.per_scene;
    job.out->resize(count);
    std::optional<std::filesystem::path> dir;
    if (root) {
      dir = *root / job.split;
      std::filesystem::create_directories(*dir / "audio");
      std::filesystem::create_directories(*dir / "annotations");
    }

    const auto make_one = [&](std::size_t i) {
      const std::size_t scene = i / job.per_scene;
      const std::size_t within = i % job.per_scene;
      const std::uint64_t seed = clip_seed(spec.seed, job.counter_base + i);
      GeneratedClip clip;
      clip.scene = scene;
      clip.placements = sample_placements(spec, layout.scenes[scene], seed);
      clip.record.clip_id = clip_name(layout.scenes[scene].name, job.split, within);
      clip.record.scene = layout.scenes[scene].name;
      clip.record.duration = spec.clip_seconds;
      clip.record.audio_path = "audio/" + clip.record.clip_id + ".wav";
      std::vector<EventInterval> intervals;
      for (const auto& p : clip.placements) {
        intervals.push_back({static_cast<double>(p.onset_ms) / 1000.0,
                             static_cast<double>(p.offset_ms) / 1000.0,
                             layout.vocab[p.event]});
      }
      clip.record.events = merge_same_label(std::move(intervals));
      if (dir || keep_audio) {
        Waveform wave = render_clip(spec, layout, scene, clip.placements, seed);
        if (dir) {
          write_wav(*dir / clip.record.audio_path, wave);
          write_text(*dir / "annotations" / (clip.record.clip_id + ".ann"),
                     serialize_event_file(clip.record.events));
        }
        if (keep_audio) clip.wave = std::move(wave);
      }
      (*job.out)[i] = std::move(clip);
    };

    const std::size_t workers = std::max<std::size_t>(1, std::min(threads, count));
    if (workers == 1) {
      for (std::size_t i = 0; i < count; ++i) make_one(i);
    } else {
      std::vector<std::thread> pool;
      std::vector<std::exception_ptr> errors(workers);
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          try {
            for (std::size_t i = w; i < count; i += workers) make_one(i);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
      for (auto& th : pool) th.join();
      for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
      }
    }

    if (dir) {
      std::string meta;
      for (const auto& clip : *job.out) {
        meta += clip.record.audio_path + "\t" + clip.record.scene + "\n";
      }
      write_text(*dir / "meta.txt", meta);
      write_text(*dir / "vocab.txt", serialize_vocab_file(layout.vocab));
    }
  }
  return corpus;
}

}  // namespace sedkit
