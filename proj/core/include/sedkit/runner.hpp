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

// Experiment orchestration: corpus loading, training, evaluation and the
// multi-variant comparison.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sedkit/annotations.hpp"
#include "sedkit/checkpoint.hpp"
#include "sedkit/features.hpp"
#include "sedkit/metrics.hpp"
#include "sedkit/model.hpp"
#include "sedkit/optim.hpp"
#include "sedkit/synthcorpus.hpp"

namespace sedkit {

enum class Objective {
  kBce,
  kCurriculum,
  kBceSad,
  kBceAsc,
  kCurriculumSad,
  kCurriculumAsc,
};

inline constexpr Objective kAllObjectives[] = {
    Objective::kBce,        Objective::kCurriculum,    Objective::kBceSad,
    Objective::kBceAsc,     Objective::kCurriculumSad, Objective::kCurriculumAsc,
};

std::string_view objective_name(Objective objective);
/// Throws ConfigError for unknown names.
Objective parse_objective(std::string_view name);
bool uses_curriculum(Objective objective);
bool uses_sad(Objective objective);
bool uses_asc(Objective objective);

struct ExperimentConfig {
  std::filesystem::path corpus_dir = "corpus";
  Objective objective = Objective::kCurriculum;
  ModelConfig model;
  AdamConfig optimizer;
  FeatureConfig features;
  bool normalize = true;
  std::size_t epochs = 30;
  std::size_t batch_size = 8;
  double lambda = 2.0;
  double beta = 1.0;
  double threshold = 0.5;
  std::vector<std::uint64_t> seeds{1};
  std::vector<Objective> variants{std::begin(kAllObjectives), std::end(kAllObjectives)};
  std::size_t jobs = 1;
  CorpusSpec synth;

  // Keys given explicitly in the file; checked against the corpus and the
  // objective when a run starts.
  std::optional<std::size_t> pinned_n_events;
  std::optional<std::size_t> pinned_n_scenes;
  std::optional<bool> pinned_sad_head;
  std::optional<bool> pinned_asc_head;

  /// Throws ConfigError.
  void validate() const;
  /// Flat `key = value` text. Unknown keys throw ConfigError.
  static ExperimentConfig parse(std::string_view text);
  static ExperimentConfig load(const std::filesystem::path& path);
  std::string to_text() const;

  /// s_max of the curriculum schedule.
  std::size_t s_max() const { return epochs > 1 ? epochs - 1 : 1; }
};

/// Model config for a run: n_mels, n_events, n_scenes and heads filled in
/// from the corpus and objective. Throws ConfigError on conflicts with
/// explicitly configured values.
ModelConfig resolve_model(const ExperimentConfig& cfg, Objective objective,
                          std::size_t n_events, std::size_t n_scenes);

struct SplitData {
  std::vector<ClipRecord> clips;
  std::vector<FeatureMatrix> features;  // raw log-mel
  std::vector<TargetMatrix> targets;
};

struct CorpusData {
  Vocabulary vocab;
  std::vector<std::string> scenes;  // sorted scene names seen in training
  SceneEventMap scene_map;
  SplitData train;
  SplitData eval;
};

/// Reads dir/{meta.txt, annotations/<id>.ann, audio/*}. Features come from
/// dir/features/<id>.feat when present, otherwise from the audio.
SplitData load_split(const std::filesystem::path& dir, const Vocabulary& vocab,
                     const FeatureConfig& features, std::size_t threads = 1);

/// Loads root/train and root/eval with the vocabulary of root/train.
CorpusData load_corpus(const std::filesystem::path& root,
                       const FeatureConfig& features, std::size_t threads = 1);

/// Writes dir/features/<id>.feat for every clip of the split. Returns the
/// number of files written.
std::size_t featurize_split(const std::filesystem::path& dir,
                            const FeatureConfig& features, std::size_t threads = 1);

/// Network inputs and training targets for one split.
struct TrainingSet {
  std::vector<FeatureMatrix> x;  // normalized
  std::vector<TargetMatrix> targets;
  std::vector<EventFlags> flags;
  std::vector<std::size_t> scene;  // index into CorpusData::scenes
};

/// Applies `normalizer` and derives flags and scene indices. Throws
/// DataError for clips whose scene is missing from the scene map.
TrainingSet make_training_set(const CorpusData& corpus, const SplitData& split,
                              const FeatureNormalizer& normalizer, bool need_flags);

struct BatchGradient {
  double loss = 0.0;
  std::vector<std::vector<double>> grads;  // parallel to params.tensors
};

/// Mean loss of the configured objective over `batch` and its gradient.
BatchGradient batch_gradient(const ModelParams& params, Objective objective,
                             double beta, const TrainingSet& data,
                             std::span<const std::size_t> batch, double alpha);

/// Deterministic permutation of 0..n-1 keyed on (seed, epoch).
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed,
                                     std::size_t epoch);

struct EpochLog {
  std::size_t epoch = 0;
  double alpha = 0.0;
  double loss = 0.0;     // mean over mini-batches
  double seconds = 0.0;  // wall time, excluded from trainlog.csv
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochLog> log;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Full training run. Throws NumericError with epoch/batch context on a
/// non-finite loss.
TrainResult train(const ExperimentConfig& cfg, Objective objective,
                  const CorpusData& corpus, std::uint64_t seed,
                  const EpochCallback& on_epoch = {});

/// epoch,alpha,loss
std::string trainlog_csv(std::span<const EpochLog> log);
/// epoch,seconds
std::string timing_csv(std::span<const EpochLog> log);

/// Scores `split` with a trained checkpoint.
MetricsReport evaluate(const Checkpoint& ckpt, const SplitData& split,
                       double threshold);

/// Writes checkpoint.bin, trainlog.csv, timing.csv, metrics.json and
/// metrics.csv (eval split) under `out`.
MetricsReport run_experiment(const ExperimentConfig& cfg, Objective objective,
                             const CorpusData& corpus, std::uint64_t seed,
                             const std::filesystem::path& out,
                             const EpochCallback& on_epoch = {});

struct RunOutcome {
  std::size_t slot = 0;  // position in the variant list
  Objective variant = Objective::kBce;
  std::uint64_t seed = 0;
  std::optional<MetricsReport> report;  // empty on failure
  std::string error;
  int exit_code = 0;
  double seconds = 0.0;  // wall time of the whole run
};

struct CompareRow {
  std::string variant;
  std::size_t runs = 0;
  std::size_t failed = 0;
  double micro_f_mean = 0.0, micro_f_std = 0.0;
  double macro_f_mean = 0.0, macro_f_std = 0.0;
  double micro_er_mean = 0.0, micro_er_std = 0.0;
  double macro_er_mean = 0.0, macro_er_std = 0.0;
};

struct CompareResult {
  std::vector<RunOutcome> runs;
  std::vector<CompareRow> rows;  // one per variant, in config order
  bool any_failed() const;
};

/// Aggregates mean and population standard deviation over successful runs.
/// Rows follow `variants`; row i pools the runs whose slot is i.
std::vector<CompareRow> aggregate(std::span<const RunOutcome> runs,
                                  std::span<const Objective> variants);

/// Keeps large short-lived tape buffers on the heap instead of mmap. Called
/// by train; idempotent.
void tune_allocator();

/// Runs every (variant, seed) under out/runs/<variant>/seed<k>/ and writes
/// out/compare.csv and out/runs.csv. Failed runs are recorded, not thrown.
CompareResult compare(const ExperimentConfig& cfg, const CorpusData& corpus,
                      const std::filesystem::path& out,
                      const std::function<void(const RunOutcome&)>& on_run = {});

std::string compare_csv(std::span<const CompareRow> rows);
std::vector<CompareRow> parse_compare_csv(std::string_view text);
/// Fixed-width table: F in percent, ER as a ratio, mean ± std.
std::string format_compare_table(std::span<const CompareRow> rows);

}  // namespace sedkit
