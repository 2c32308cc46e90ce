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
#include "sedkit/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "sedkit/checkpoint.hpp"
#include "sedkit/config.hpp"
#include "sedkit/errors.hpp"
#include "sedkit/losses.hpp"
#include "sedkit/rng.hpp"
#include "sedkit/wav.hpp"

namespace sedkit {

void tune_allocator() {
#if defined(__GLIBC__)
  static std::once_flag once;
  std::call_once(once, [] {
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
  });
#endif
}

namespace {

constexpr std::uint64_t kShuffleStream = 0x73687566666c65ULL;

std::string read_text(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path.string());
  os << text;
  if (!os) throw DataError("write failed: " + path.string());
}

std::string real_str(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Runs fn(i) for i in [0, n) on up to `threads` workers, rethrowing the
// first failure by index.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (const double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (const double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

std::string_view objective_name(Objective objective) {
  switch (objective) {
    case Objective::kBce: return "bce";
    case Objective::kCurriculum: return "curriculum";
    case Objective::kBceSad: return "bce+sad";
    case Objective::kBceAsc: return "bce+asc";
    case Objective::kCurriculumSad: return "curriculum+sad";
    case Objective::kCurriculumAsc: return "curriculum+asc";
  }
  return "unknown";
}

Objective parse_objective(std::string_view name) {
  for (const Objective o : kAllObjectives) {
    if (objective_name(o) == name) return o;
  }
  throw ConfigError("unknown objective '" + std::string(name) +
                    "' (expected bce, curriculum, bce+sad, bce+asc, "
                    "curriculum+sad or curriculum+asc)");
}

bool uses_curriculum(Objective o) {
  return o == Objective::kCurriculum || o == Objective::kCurriculumSad ||
         o == Objective::kCurriculumAsc;
}

bool uses_sad(Objective o) {
  return o == Objective::kBceSad || o == Objective::kCurriculumSad;
}

bool uses_asc(Objective o) {
  return o == Objective::kBceAsc || o == Objective::kCurriculumAsc;
}

// ---------------------------------------------------------------- config

void ExperimentConfig::validate() const {
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(lambda > 0.0)) throw ConfigError("curriculum.lambda must be > 0");
  if (!(beta >= 0.0)) throw ConfigError("aux.beta must be >= 0");
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw ConfigError("eval.threshold must lie in [0, 1]");
  }
  if (!(optimizer.lr > 0.0)) throw ConfigError("optimizer.lr must be > 0");
  if (!(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0) ||
      !(optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0)) {
    throw ConfigError("optimizer betas must lie in [0, 1)");
  }
  if (!(optimizer.eps > 0.0)) throw ConfigError("optimizer.eps must be > 0");
  if (!(features.hop_seconds > 0.0) || !(features.frame_seconds >= features.hop_seconds)) {
    throw ConfigError("features: need 0 < hop_seconds <= frame_seconds");
  }
  if (features.n_mels != model.n_mels) {
    throw ConfigError("model.n_mels must equal features.n_mels");
  }
  if (seeds.empty()) throw ConfigError("seeds must list at least one seed");
  if (variants.empty()) throw ConfigError("compare.variants must not be empty");
  if (jobs < 1) throw ConfigError("compare.jobs must be >= 1");
  for (const Objective o : variants) {
    if (pinned_sad_head && *pinned_sad_head != uses_sad(o)) {
      throw ConfigError("model.enable_sad_head conflicts with objective " +
                        std::string(objective_name(o)));
    }
    if (pinned_asc_head && *pinned_asc_head != uses_asc(o)) {
      throw ConfigError("model.enable_asc_head conflicts with objective " +
                        std::string(objective_name(o)));
    }
  }
  ModelConfig probe = model;
  probe.enable_sad_head = uses_sad(objective);
  probe.enable_asc_head = uses_asc(objective);
  probe.validate();
}

ExperimentConfig ExperimentConfig::parse(std::string_view text) {
  KeyValues kv = KeyValues::parse(text);
  ExperimentConfig c;
  if (auto v = kv.take_string("corpus.dir")) c.corpus_dir = *v;
  if (auto v = kv.take_string("objective")) c.objective = parse_objective(*v);

  if (auto v = kv.take_double("features.frame_seconds")) c.features.frame_seconds = *v;
  if (auto v = kv.take_double("features.hop_seconds")) c.features.hop_seconds = *v;
  if (auto v = kv.take_size("features.n_mels")) c.features.n_mels = *v;
  if (auto v = kv.take_bool("features.normalize")) c.normalize = *v;

  const bool mels_pinned = kv.has("model.n_mels");
  if (kv.has("model.n_events")) c.pinned_n_events.emplace();
  if (kv.has("model.n_scenes")) c.pinned_n_scenes.emplace();
  const bool sad_pinned = kv.has("model.enable_sad_head");
  const bool asc_pinned = kv.has("model.enable_asc_head");
  c.model = ModelConfig::read(kv);
  if (!mels_pinned) c.model.n_mels = c.features.n_mels;
  if (c.pinned_n_events) c.pinned_n_events = c.model.n_events;
  if (c.pinned_n_scenes) c.pinned_n_scenes = c.model.n_scenes;
  if (sad_pinned) c.pinned_sad_head = c.model.enable_sad_head;
  if (asc_pinned) c.pinned_asc_head = c.model.enable_asc_head;

  if (auto v = kv.take_string("optimizer.kind"); v && *v != "adam") {
    throw ConfigError("optimizer.kind must be adam");
  }
  if (auto v = kv.take_double("optimizer.lr")) c.optimizer.lr = *v;
  if (auto v = kv.take_double("optimizer.beta1")) c.optimizer.beta1 = *v;
  if (auto v = kv.take_double("optimizer.beta2")) c.optimizer.beta2 = *v;
  if (auto v = kv.take_double("optimizer.eps")) c.optimizer.eps = *v;

  if (auto v = kv.take_size("train.epochs")) c.epochs = *v;
  if (auto v = kv.take_size("train.batch_size")) c.batch_size = *v;
  if (auto v = kv.take_double("curriculum.lambda")) c.lambda = *v;
  if (auto v = kv.take_double("aux.beta")) c.beta = *v;
  if (auto v = kv.take_double("eval.threshold")) c.threshold = *v;
  if (auto v = kv.take_size_list("seeds")) {
    c.seeds.assign(v->begin(), v->end());
  }
  if (auto v = kv.take_string_list("compare.variants")) {
    c.variants.clear();
    for (const auto& name : *v) c.variants.push_back(parse_objective(name));
  } else if (c.pinned_sad_head || c.pinned_asc_head) {
    c.variants = {c.objective};
  }
  if (auto v = kv.take_size("compare.jobs")) c.jobs = *v;
  c.synth = CorpusSpec::read(kv);
  kv.finish();
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse(ss.str());
}

std::string ExperimentConfig::to_text() const {
  KeyValues kv;
  kv.set("corpus.dir", corpus_dir.string());
  kv.set("objective", std::string(objective_name(objective)));
  kv.set("features.frame_seconds", real_str(features.frame_seconds));
  kv.set("features.hop_seconds", real_str(features.hop_seconds));
  kv.set("features.n_mels", std::to_string(features.n_mels));
  kv.set("features.normalize", normalize ? "true" : "false");
  KeyValues model_kv;
  model.write(model_kv);
  for (const auto& [key, value] : model_kv.entries()) {
    // Corpus-derived fields are written only when the user pinned them.
    if ((key == "model.n_events" && !pinned_n_events) ||
        (key == "model.n_scenes" && !pinned_n_scenes) ||
        (key == "model.enable_sad_head" && !pinned_sad_head) ||
        (key == "model.enable_asc_head" && !pinned_asc_head)) {
      continue;
    }
    kv.set(key, value);
  }
  kv.set("optimizer.kind", "adam");
  kv.set("optimizer.lr", real_str(optimizer.lr));
  kv.set("optimizer.beta1", real_str(optimizer.beta1));
  kv.set("optimizer.beta2", real_str(optimizer.beta2));
  kv.set("optimizer.eps", real_str(optimizer.eps));
  kv.set("train.epochs", std::to_string(epochs));
  kv.set("train.batch_size", std::to_string(batch_size));
  kv.set("curriculum.lambda", real_str(lambda));
  kv.set("aux.beta", real_str(beta));
  kv.set("eval.threshold", real_str(threshold));
  std::string seed_list;
  for (const auto s : seeds) {
    if (!seed_list.empty()) seed_list += ", ";
    seed_list += std::to_string(s);
  }
  kv.set("seeds", seed_list);
  std::string variant_list;
  for (const auto v : variants) {
    if (!variant_list.empty()) variant_list += ", ";
    variant_list += objective_name(v);
  }
  kv.set("compare.variants", variant_list);
  kv.set("compare.jobs", std::to_string(jobs));
  synth.write(kv);
  return kv.to_text();
}

ModelConfig resolve_model(const ExperimentConfig& cfg, Objective objective,
                          std::size_t n_events, std::size_t n_scenes) {
  if (cfg.pinned_n_events && *cfg.pinned_n_events != n_events) {
    throw ConfigError("model.n_events = " + std::to_string(*cfg.pinned_n_events) +
                      " but the corpus vocabulary has " + std::to_string(n_events) +
                      " events");
  }
  if (cfg.pinned_n_scenes && uses_asc(objective) && *cfg.pinned_n_scenes != n_scenes) {
    throw ConfigError("model.n_scenes = " + std::to_string(*cfg.pinned_n_scenes) +
                      " but the training split has " + std::to_string(n_scenes) +
                      " scenes");
  }
  if (cfg.pinned_sad_head && *cfg.pinned_sad_head != uses_sad(objective)) {
    throw ConfigError("model.enable_sad_head conflicts with objective " +
                      std::string(objective_name(objective)));
  }
  if (cfg.pinned_asc_head && *cfg.pinned_asc_head != uses_asc(objective)) {
    throw ConfigError("model.enable_asc_head conflicts with objective " +
                      std::string(objective_name(objective)));
  }
  ModelConfig m = cfg.model;
  m.n_events = n_events;
  m.n_scenes = n_scenes;
  m.enable_sad_head = uses_sad(objective);
  m.enable_asc_head = uses_asc(objective);
  m.validate();
  return m;
}

// ---------------------------------------------------------------- data

SplitData load_split(const std::filesystem::path& dir, const Vocabulary& vocab,
                     const FeatureConfig& features, std::size_t threads) {
  const auto entries = parse_meta_entries(read_text(dir / "meta.txt"));
  SplitData split;
  split.clips.resize(entries.size());
  split.features.resize(entries.size());
  split.targets.resize(entries.size());
  parallel_for(entries.size(), threads, [&](std::size_t i) {
    const auto& [path, scene] = entries[i];
    ClipRecord& clip = split.clips[i];
    clip.clip_id = path_stem(path);
    clip.scene = scene;
    clip.audio_path = path;
    const auto ann = dir / "annotations" / (clip.clip_id + ".ann");
    try {
      clip.events = parse_event_file(read_text(ann));
    } catch (const ParseError& e) {
      throw ParseError(e.line(), ann.string() + ": " + e.what());
    }
    for (const auto& ev : clip.events) {
      if (!vocab.contains(ev.label)) {
        throw DataError(ann.string() + ": label '" + ev.label +
                        "' is not in the vocabulary");
      }
    }

    const auto cache = dir / "features" / (clip.clip_id + ".feat");
    FeatureMatrix feats;
    double duration = 0.0;
    if (std::filesystem::exists(cache)) {
      feats = read_feature_cache(cache);
      feats.frame_len = features.frame_seconds;
      feats.frame_hop = features.hop_seconds;
      if (feats.n_bands() != features.n_mels) {
        throw DataError(cache.string() + ": cached features have " +
                        std::to_string(feats.n_bands()) + " bands, expected " +
                        std::to_string(features.n_mels));
      }
      duration = features.frame_seconds +
                 features.hop_seconds * static_cast<double>(feats.n_frames() - 1);
    } else {
      const Waveform wave = read_wav(dir / path);
      feats = logmel(wave, features);
      duration = wave.duration();
    }
    clip.duration = duration;
    for (const auto& ev : clip.events) clip.duration = std::max(clip.duration, ev.offset);
    split.targets[i] = make_target_matrix(
        clip, vocab, FrameGrid{feats.n_frames(), features.hop_seconds});
    split.features[i] = std::move(feats);
  });
  return split;
}

CorpusData load_corpus(const std::filesystem::path& root,
                       const FeatureConfig& features, std::size_t threads) {
  CorpusData corpus;
  corpus.vocab = parse_vocab_file(read_text(root / "train" / "vocab.txt"));
  corpus.train = load_split(root / "train", corpus.vocab, features, threads);
  corpus.eval = load_split(root / "eval", corpus.vocab, features, threads);
  corpus.scene_map = build_scene_event_map(corpus.train.clips);
  corpus.scenes = corpus.scene_map.scenes();
  return corpus;
}

std::size_t featurize_split(const std::filesystem::path& dir,
                            const FeatureConfig& features, std::size_t threads) {
  const auto entries = parse_meta_entries(read_text(dir / "meta.txt"));
  std::filesystem::create_directories(dir / "features");
  parallel_for(entries.size(), threads, [&](std::size_t i) {
    const auto& path = entries[i].first;
    const Waveform wave = read_wav(dir / path);
    write_feature_cache(dir / "features" / (path_stem(path) + ".feat"),
                        logmel(wave, features));
  });
  return entries.size();
}

TrainingSet make_training_set(const CorpusData& corpus, const SplitData& split,
                              const FeatureNormalizer& normalizer, bool need_flags) {
  TrainingSet set;
  set.x = split.features;
  if (!normalizer.empty()) {
    for (auto& x : set.x) normalizer.apply(x);
  }
  set.targets = split.targets;
  for (const auto& clip : split.clips) {
    if (need_flags && !corpus.scene_map.has_scene(clip.scene)) {
      throw DataError("clip " + clip.clip_id + " has scene '" + clip.scene +
                      "' which is absent from the scene-event map");
    }
    set.flags.push_back(corpus.scene_map.has_scene(clip.scene)
                            ? make_event_flags(clip.scene, corpus.scene_map, corpus.vocab)
                            : EventFlags{std::vector<std::uint8_t>(corpus.vocab.size(), 0)});
    const auto it = std::find(corpus.scenes.begin(), corpus.scenes.end(), clip.scene);
    set.scene.push_back(static_cast<std::size_t>(it - corpus.scenes.begin()));
  }
  return set;
}

// ---------------------------------------------------------------- training

BatchGradient batch_gradient(const ModelParams& params, Objective objective,
                             double beta, const TrainingSet& data,
                             std::span<const std::size_t> batch, double alpha) {
  ad::Tape tape;
  const BoundModel model(tape, params, true);
  std::vector<ad::Tensor> losses;
  losses.reserve(batch.size());
  for (const std::size_t i : batch) {
    const GraphOutputs out = model.forward(data.x.at(i));
    const TargetMatrix& target = data.targets.at(i);
    ad::Tensor loss = uses_curriculum(objective)
                          ? curriculum_loss(out.events, target, data.flags.at(i), alpha)
                          : bce(out.events, target);
    if (uses_sad(objective)) {
      loss = combined_loss(loss, sad_loss(*out.sad, target), beta);
    }
    if (uses_asc(objective)) {
      loss = combined_loss(loss, asc_loss(*out.asc, data.scene.at(i)), beta);
    }
    losses.push_back(loss);
  }
  const ad::Tensor total = batch_mean(losses);
  tape.backward(total);

  BatchGradient result;
  result.loss = total.item();
  for (const auto& t : model.tensors()) {
    const auto g = tape.grad(t);
    result.grads.emplace_back(g.begin(), g.end());
  }
  return result;
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed,
                                     std::size_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_rng(derive_seed(seed, kShuffleStream), epoch);
  for (std::size_t i = n; i > 1; --i) {
    std::swap(order[i - 1], order[uniform_index(rng, i)]);
  }
  return order;
}

TrainResult train(const ExperimentConfig& cfg, Objective objective,
                  const CorpusData& corpus, std::uint64_t seed,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  if (corpus.train.clips.empty()) throw DataError("training split is empty");
  tune_allocator();
  const ModelConfig model =
      resolve_model(cfg, objective, corpus.vocab.size(), corpus.scenes.size());

  TrainResult result;
  Checkpoint& ckpt = result.checkpoint;
  ckpt.params = init(model, seed);
  ckpt.event_labels = corpus.vocab.labels();
  ckpt.scene_labels = corpus.scenes;
  if (cfg.normalize) ckpt.normalizer = FeatureNormalizer::fit(corpus.train.features);

  const TrainingSet data = make_training_set(corpus, corpus.train, ckpt.normalizer,
                                             uses_curriculum(objective));
  Adam adam(cfg.optimizer, ckpt.params);
  const std::size_t n = data.x.size();

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const double alpha = alpha_schedule(epoch, cfg.s_max(), cfg.lambda);
    const auto order = epoch_order(n, seed, epoch);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < n; b += cfg.batch_size) {
      const std::span<const std::size_t> batch(
          order.data() + b, std::min(cfg.batch_size, n - b));
      const std::string where = "epoch " + std::to_string(epoch) + " batch " +
                                std::to_string(batches);
      BatchGradient g;
      try {
        g = batch_gradient(ckpt.params, objective, cfg.beta, data, batch, alpha);
      } catch (const NumericError& e) {
        throw NumericError(where + ": " + e.what());
      }
      if (!std::isfinite(g.loss)) throw NumericError(where + ": loss is not finite");
      adam.step(ckpt.params, g.grads);
      loss_sum += g.loss;
      ++batches;
    }
    EpochLog entry;
    entry.epoch = epoch;
    entry.alpha = alpha;
    entry.loss = loss_sum / static_cast<double>(batches);
    entry.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                        .count();
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }
  return result;
}

std::string trainlog_csv(std::span<const EpochLog> log) {
  std::string out = "epoch,alpha,loss\n";
  char buf[128];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", e.epoch, e.alpha, e.loss);
    out += buf;
  }
  return out;
}

std::string timing_csv(std::span<const EpochLog> log) {
  std::string out = "epoch,seconds\n";
  char buf[128];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof(buf), "%zu,%.3f\n", e.epoch, e.seconds);
    out += buf;
  }
  return out;
}

// ---------------------------------------------------------------- evaluation

MetricsReport evaluate(const Checkpoint& ckpt, const SplitData& split,
                       double threshold) {
  const ModelConfig& model = ckpt.params.config;
  if (ckpt.event_labels.size() != model.n_events) {
    throw ConfigError("checkpoint stores " + std::to_string(ckpt.event_labels.size()) +
                      " event labels for a model with " +
                      std::to_string(model.n_events) + " outputs");
  }
  std::map<std::string, BinaryMatrix> refs, preds;
  for (std::size_t i = 0; i < split.clips.size(); ++i) {
    FeatureMatrix x = split.features[i];
    if (x.n_bands() != model.n_mels) {
      throw ConfigError("features have " + std::to_string(x.n_bands()) +
                        " bands but the checkpoint expects " +
                        std::to_string(model.n_mels));
    }
    if (split.targets[i].n_events() != model.n_events) {
      throw ConfigError("eval vocabulary has " +
                        std::to_string(split.targets[i].n_events()) +
                        " events but the checkpoint has " +
                        std::to_string(model.n_events));
    }
    if (!ckpt.normalizer.empty()) ckpt.normalizer.apply(x);
    const FrameLogits logits = forward(ckpt.params, x);
    refs.emplace(split.clips[i].clip_id, split.targets[i].z);
    preds.emplace(split.clips[i].clip_id, predict(logits.y, threshold));
  }
  return evaluate_corpus(refs, preds, ckpt.event_labels);
}

MetricsReport run_experiment(const ExperimentConfig& cfg, Objective objective,
                             const CorpusData& corpus, std::uint64_t seed,
                             const std::filesystem::path& out,
                             const EpochCallback& on_epoch) {
  std::filesystem::create_directories(out);
  const TrainResult trained = train(cfg, objective, corpus, seed, on_epoch);
  save_checkpoint(out / "checkpoint.bin", trained.checkpoint);
  write_text(out / "trainlog.csv", trainlog_csv(trained.log));
  write_text(out / "timing.csv", timing_csv(trained.log));
  const MetricsReport report = evaluate(trained.checkpoint, corpus.eval, cfg.threshold);
  write_text(out / "metrics.json", report_to_json(report));
  write_text(out / "metrics.csv", report_to_csv(report));
  return report;
}

// ---------------------------------------------------------------- compare

bool CompareResult::any_failed() const {
  return std::any_of(runs.begin(), runs.end(),
                     [](const RunOutcome& r) { return !r.report; });
}

std::vector<CompareRow> aggregate(std::span<const RunOutcome> runs,
                                  std::span<const Objective> variants) {
  std::vector<CompareRow> rows;
  for (std::size_t slot = 0; slot < variants.size(); ++slot) {
    CompareRow row;
    row.variant = objective_name(variants[slot]);
    std::vector<double> mf, Mf, me, Me;
    for (const auto& r : runs) {
      if (r.slot != slot) continue;
      ++row.runs;
      if (!r.report) {
        ++row.failed;
        continue;
      }
      mf.push_back(r.report->micro_f);
      Mf.push_back(r.report->macro_f);
      me.push_back(r.report->micro_er);
      Me.push_back(r.report->macro_er);
    }
    row.micro_f_mean = mean_of(mf);
    row.micro_f_std = std_of(mf);
    row.macro_f_mean = mean_of(Mf);
    row.macro_f_std = std_of(Mf);
    row.micro_er_mean = mean_of(me);
    row.micro_er_std = std_of(me);
    row.macro_er_mean = mean_of(Me);
    row.macro_er_std = std_of(Me);
    rows.push_back(row);
  }
  return rows;
}

namespace {

// A variant listed more than once gets a numbered directory for each repeat.
std::string variant_dir(std::span<const Objective> variants, std::size_t slot) {
  std::string name(objective_name(variants[slot]));
  std::size_t repeat = 0;
  for (std::size_t i = 0; i < slot; ++i) {
    if (variants[i] == variants[slot]) ++repeat;
  }
  return repeat == 0 ? name : name + "." + std::to_string(repeat + 1);
}

}  // namespace

CompareResult compare(const ExperimentConfig& cfg, const CorpusData& corpus,
                      const std::filesystem::path& out,
                      const std::function<void(const RunOutcome&)>& on_run) {
  cfg.validate();
  struct Job {
    std::size_t slot;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t v = 0; v < cfg.variants.size(); ++v) {
    for (const auto s : cfg.seeds) jobs.push_back({v, s});
  }
  CompareResult result;
  result.runs.resize(jobs.size());
  std::mutex report_mutex;
  parallel_for(jobs.size(), cfg.jobs, [&](std::size_t i) {
    RunOutcome& run = result.runs[i];
    run.slot = jobs[i].slot;
    run.variant = cfg.variants[run.slot];
    run.seed = jobs[i].seed;
    const auto dir = out / "runs" / variant_dir(cfg.variants, run.slot) /
                     ("seed" + std::to_string(run.seed));
    const auto start = std::chrono::steady_clock::now();
    try {
      run.report = run_experiment(cfg, run.variant, corpus, run.seed, dir);
    } catch (const Error& e) {
      run.error = e.what();
      run.exit_code = e.exit_code();
    } catch (const std::exception& e) {
      run.error = e.what();
      run.exit_code = 3;
    }
    run.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (on_run) {
      const std::lock_guard lock(report_mutex);
      on_run(run);
    }
  });
  result.rows = aggregate(result.runs, cfg.variants);

  std::filesystem::create_directories(out);
  write_text(out / "compare.csv", compare_csv(result.rows));
  std::string runs_csv = "variant,seed,status,micro_f,macro_f,micro_er,macro_er\n";
  for (const auto& r : result.runs) {
    runs_csv += std::string(objective_name(r.variant)) + "," + std::to_string(r.seed);
    if (r.report) {
      runs_csv += ",ok," + real_str(r.report->micro_f) + "," + real_str(r.report->macro_f) +
                  "," + real_str(r.report->micro_er) + "," +
                  real_str(r.report->macro_er) + "\n";
    } else {
      runs_csv += ",FAILED,,,,\n";
    }
  }
  write_text(out / "runs.csv", runs_csv);
  return result;
}

namespace {
constexpr const char* kCompareHeader =
    "variant,runs,failed,micro_f_mean,micro_f_std,macro_f_mean,macro_f_std,"
    "micro_er_mean,micro_er_std,macro_er_mean,macro_er_std";
}  // namespace

std::string compare_csv(std::span<const CompareRow> rows) {
  std::string out = std::string(kCompareHeader) + "\n";
  for (const auto& r : rows) {
    out += r.variant + "," + std::to_string(r.runs) + "," + std::to_string(r.failed);
    if (r.failed == r.runs) {
      out += ",FAILED,FAILED,FAILED,FAILED,FAILED,FAILED,FAILED,FAILED\n";
      continue;
    }
    for (const double v : {r.micro_f_mean, r.micro_f_std, r.macro_f_mean, r.macro_f_std,
                           r.micro_er_mean, r.micro_er_std, r.macro_er_mean,
                           r.macro_er_std}) {
      out += "," + real_str(v);
    }
    out += "\n";
  }
  return out;
}

std::vector<CompareRow> parse_compare_csv(std::string_view text) {
  std::vector<CompareRow> rows;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != kCompareHeader) throw ParseError(1, "unexpected compare.csv header");
      continue;
    }
    const auto fields = split_list(line, ',');
    if (fields.size() != 11) throw ParseError(line_no, "expected 11 fields");
    CompareRow r;
    r.variant = fields[0];
    try {
      r.runs = std::stoul(fields[1]);
      r.failed = std::stoul(fields[2]);
      if (fields[3] != "FAILED") {
        double* slots[] = {&r.micro_f_mean,  &r.micro_f_std,  &r.macro_f_mean,
                           &r.macro_f_std,   &r.micro_er_mean, &r.micro_er_std,
                           &r.macro_er_mean, &r.macro_er_std};
        for (std::size_t k = 0; k < 8; ++k) *slots[k] = std::stod(fields[3 + k]);
      }
    } catch (const std::logic_error&) {
      throw ParseError(line_no, "non-numeric field");
    }
    rows.push_back(r);
  }
  return rows;
}

std::string format_compare_table(std::span<const CompareRow> rows) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-16s %17s %17s %15s %15s %s\n", "method",
                "micro F (%)", "macro F (%)", "micro ER", "macro ER", "runs");
  out += buf;
  for (const auto& r : rows) {
    if (r.failed == r.runs) {
      std::snprintf(buf, sizeof(buf), "%-16s %17s %17s %15s %15s %zu/%zu\n",
                    r.variant.c_str(), "FAILED", "FAILED", "FAILED", "FAILED",
                    r.runs - r.failed, r.runs);
    } else {
      std::snprintf(buf, sizeof(buf),
                    "%-16s %8.2f ± %6.2f %8.2f ± %6.2f %6.3f ± %5.3f %6.3f ± %5.3f %zu/%zu\n",
                    r.variant.c_str(), 100.0 * r.micro_f_mean, 100.0 * r.micro_f_std,
                    100.0 * r.macro_f_mean, 100.0 * r.macro_f_std, r.micro_er_mean,
                    r.micro_er_std, r.macro_er_mean, r.macro_er_std,
                    r.runs - r.failed, r.runs);
    }
    out += buf;
  }
  return out;
}

}  // namespace sedkit
