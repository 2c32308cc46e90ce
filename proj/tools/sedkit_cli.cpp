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
// sedkit command-line front end.
//
//   sedkit [--config PATH] [--seed N] [--out DIR] <subcommand> [options]
//
// Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical
// failure.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "sedkit/checkpoint.hpp"
#include "sedkit/errors.hpp"
#include "sedkit/metrics.hpp"
#include "sedkit/runner.hpp"
#include "sedkit/synthcorpus.hpp"

namespace fs = std::filesystem;
using namespace sedkit;

namespace {

struct GlobalOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::size_t threads = 1;
  bool quiet = false;
};

ExperimentConfig load_config(const GlobalOptions& g) {
  ExperimentConfig cfg;
  if (!g.config.empty()) cfg = ExperimentConfig::load(g.config);
  if (g.seed) {
    cfg.seeds = {*g.seed};
    cfg.synth.seed = *g.seed;
  }
  return cfg;
}

fs::path out_dir(const GlobalOptions& g, const fs::path& fallback) {
  return g.out.empty() ? fallback : fs::path(g.out);
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path.string());
  os << text;
}

std::string read_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void print_report(const MetricsReport& r) {
  std::printf("micro F %.2f%%  macro F %.2f%%  micro ER %.3f  macro ER %.3f\n",
              100.0 * r.micro_f, 100.0 * r.macro_f, r.micro_er, r.macro_er);
}

EpochCallback progress(const GlobalOptions& g) {
  if (g.quiet) return {};
  return [](const EpochLog& e) {
    std::fprintf(stderr, "epoch %3zu  alpha %.4f  loss %.4f  (%.1f s)\n", e.epoch,
                 e.alpha, e.loss, e.seconds);
  };
}

int cmd_synth(const GlobalOptions& g) {
  const ExperimentConfig cfg = load_config(g);
  const fs::path root = out_dir(g, cfg.corpus_dir);
  const GeneratedCorpus corpus = generate_corpus(cfg.synth, root, g.threads);
  std::printf("wrote %zu train and %zu eval clips, %zu event classes, to %s\n",
              corpus.train.size(), corpus.eval.size(), corpus.layout.vocab.size(),
              root.string().c_str());
  return 0;
}

int cmd_featurize(const GlobalOptions& g, const std::string& corpus_opt) {
  const ExperimentConfig cfg = load_config(g);
  const fs::path root = corpus_opt.empty() ? cfg.corpus_dir : fs::path(corpus_opt);
  for (const char* split : {"train", "eval"}) {
    const std::size_t n = featurize_split(root / split, cfg.features, g.threads);
    std::printf("%s: %zu feature files\n", split, n);
  }
  return 0;
}

int cmd_train(const GlobalOptions& g, const std::string& corpus_opt) {
  ExperimentConfig cfg = load_config(g);
  if (!corpus_opt.empty()) cfg.corpus_dir = corpus_opt;
  const fs::path out = out_dir(g, "run");
  const CorpusData corpus = load_corpus(cfg.corpus_dir, cfg.features, g.threads);
  fs::create_directories(out);
  write_file(out / "config.txt", cfg.to_text());
  const MetricsReport report =
      run_experiment(cfg, cfg.objective, corpus, cfg.seeds.front(), out, progress(g));
  print_report(report);
  return 0;
}

int cmd_evaluate(const GlobalOptions& g, const std::string& corpus_opt,
                 const std::string& checkpoint_opt, const std::string& split,
                 std::optional<double> threshold) {
  ExperimentConfig cfg = load_config(g);
  if (!corpus_opt.empty()) cfg.corpus_dir = corpus_opt;
  const fs::path out = out_dir(g, "run");
  const fs::path ckpt_path = checkpoint_opt.empty() ? out / "checkpoint.bin"
                                                    : fs::path(checkpoint_opt);
  const CorpusData corpus = load_corpus(cfg.corpus_dir, cfg.features, g.threads);
  std::optional<ModelConfig> expected;
  if (!g.config.empty()) {
    expected = resolve_model(cfg, cfg.objective, corpus.vocab.size(), corpus.scenes.size());
  }
  const Checkpoint ckpt = load_checkpoint(ckpt_path, expected ? &*expected : nullptr);
  if (ckpt.event_labels != corpus.vocab.labels()) {
    throw ConfigError("checkpoint event labels differ from the corpus vocabulary");
  }
  const SplitData& data = split == "train" ? corpus.train : corpus.eval;
  const MetricsReport report = evaluate(ckpt, data, threshold.value_or(cfg.threshold));
  fs::create_directories(out);
  write_file(out / "metrics.json", report_to_json(report));
  write_file(out / "metrics.csv", report_to_csv(report));
  print_report(report);
  return 0;
}

int cmd_compare(const GlobalOptions& g, const std::string& corpus_opt,
                std::optional<std::size_t> jobs) {
  ExperimentConfig cfg = load_config(g);
  if (!corpus_opt.empty()) cfg.corpus_dir = corpus_opt;
  if (jobs) cfg.jobs = *jobs;
  const fs::path out = out_dir(g, "compare");
  const CorpusData corpus = load_corpus(cfg.corpus_dir, cfg.features, g.threads);
  fs::create_directories(out);
  write_file(out / "config.txt", cfg.to_text());
  const CompareResult result = compare(cfg, corpus, out, [&](const RunOutcome& r) {
    if (g.quiet) return;
    if (r.report) {
      std::fprintf(stderr, "%-16s seed %-4llu micro F %.4f  micro ER %.4f\n",
                   std::string(objective_name(r.variant)).c_str(),
                   static_cast<unsigned long long>(r.seed), r.report->micro_f,
                   r.report->micro_er);
    } else {
      std::fprintf(stderr, "%-16s seed %-4llu FAILED: %s\n",
                   std::string(objective_name(r.variant)).c_str(),
                   static_cast<unsigned long long>(r.seed), r.error.c_str());
    }
  });
  std::fputs(format_compare_table(result.rows).c_str(), stdout);
  for (const auto& r : result.runs) {
    if (!r.report) return r.exit_code != 0 ? r.exit_code : 3;
  }
  return 0;
}

int cmd_report(const GlobalOptions& g, const std::string& path_opt) {
  const fs::path path =
      path_opt.empty() ? out_dir(g, "compare") / "compare.csv" : fs::path(path_opt);
  const auto rows = parse_compare_csv(read_file(path));
  std::fputs(format_compare_table(rows).c_str(), stdout);
  for (const auto& r : rows) {
    if (r.failed > 0) return 3;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sedkit: sound event detection experiments"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--config", g.config, "Experiment config file (key = value)");
  app.add_option("--seed", g.seed, "Seed override (run seed and corpus seed)");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--threads", g.threads, "Worker threads for audio and features")
      ->check(CLI::PositiveNumber);
  app.add_flag("-q,--quiet", g.quiet, "Suppress progress output");

  std::string corpus_opt, checkpoint_opt, split = "eval", report_path;
  std::optional<double> threshold;
  std::optional<std::size_t> jobs;

  auto* synth = app.add_subcommand("synth", "Generate the synthetic corpus");
  auto* featurize = app.add_subcommand("featurize", "Write log-mel feature caches");
  featurize->add_option("--corpus", corpus_opt, "Corpus root (overrides corpus.dir)");
  auto* train = app.add_subcommand("train", "Train one model and score the eval split");
  train->add_option("--corpus", corpus_opt, "Corpus root (overrides corpus.dir)");
  auto* evaluate = app.add_subcommand("evaluate", "Score a checkpoint");
  evaluate->add_option("--corpus", corpus_opt, "Corpus root (overrides corpus.dir)");
  evaluate->add_option("--checkpoint", checkpoint_opt, "Checkpoint (default OUT/checkpoint.bin)");
  evaluate->add_option("--split", split, "Split to score")->check(CLI::IsMember({"train", "eval"}));
  evaluate->add_option("--threshold", threshold, "Decision threshold")
      ->check(CLI::Range(0.0, 1.0));
  auto* cmp = app.add_subcommand("compare", "Train every objective variant for every seed");
  cmp->add_option("--corpus", corpus_opt, "Corpus root (overrides corpus.dir)");
  cmp->add_option("--jobs", jobs, "Parallel runs")->check(CLI::PositiveNumber);
  auto* report = app.add_subcommand("report", "Print a comparison table");
  report->add_option("csv", report_path, "compare.csv (default OUT/compare.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*synth) return cmd_synth(g);
    if (*featurize) return cmd_featurize(g, corpus_opt);
    if (*train) return cmd_train(g, corpus_opt);
    if (*evaluate) return cmd_evaluate(g, corpus_opt, checkpoint_opt, split, threshold);
    if (*cmp) return cmd_compare(g, corpus_opt, jobs);
    if (*report) return cmd_report(g, report_path);
  } catch (const Error& e) {
    std::fprintf(stderr, "sedkit: %s\n", e.what());
    return e.exit_code();
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "sedkit: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "sedkit: %s\n", e.what());
    return 3;
  }
  return 1;
}
