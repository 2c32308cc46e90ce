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

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace {

namespace fs = std::filesystem;

const fs::path& work_dir() {
  static const fs::path dir = [] {
    const auto d = fs::temp_directory_path() / "sedkit_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int run(const std::string& args) {
  const std::string cmd = "cd '" + work_dir().string() + "' && '" SEDKIT_CLI_PATH "' -q " +
                          args + " > last.out 2> last.err";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    write(work_dir() / "tiny.conf",
          "corpus.dir = corpus\n"
          "synth.n_scenes = 2\nsynth.events_per_scene = 2\nsynth.shared_events = 1\n"
          "synth.clips_per_scene = 3\nsynth.eval_clips_per_scene = 1\n"
          "synth.clip_seconds = 4\n"
          "model.conv_channels = 2, 2, 2\nmodel.gru_units = 2\nmodel.fc_units = 2\n"
          "train.epochs = 2\ntrain.batch_size = 2\n"
          "objective = curriculum\ncompare.variants = bce, curriculum\nseeds = 1, 2\n");
    ASSERT_EQ(run("--config tiny.conf synth"), 0) << slurp(work_dir() / "last.err");
  }
};

TEST_F(Cli, UsageErrorsExitWithOne) {
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("frobnicate"), 1);
  EXPECT_EQ(run("train --bogus"), 1);
}

TEST_F(Cli, ConfigErrorsExitWithOne) {
  write(work_dir() / "typo.conf", "model.gru_unit = 3\n");
  EXPECT_EQ(run("--config typo.conf train"), 1);
  EXPECT_NE(slurp(work_dir() / "last.err").find("model.gru_unit"), std::string::npos);
}

TEST_F(Cli, MissingDataExitsWithTwo) {
  EXPECT_EQ(run("--config tiny.conf train --corpus nowhere"), 2);
  EXPECT_EQ(run("--config tiny.conf --out run_missing evaluate"), 2);
}

TEST_F(Cli, TrainThenEvaluate) {
  ASSERT_EQ(run("--config tiny.conf featurize"), 0);
  ASSERT_EQ(run("--config tiny.conf --out run1 train"), 0) << slurp(work_dir() / "last.err");
  for (const char* f : {"checkpoint.bin", "trainlog.csv", "timing.csv", "metrics.json",
                        "config.txt"}) {
    EXPECT_TRUE(fs::exists(work_dir() / "run1" / f)) << f;
  }
  const std::string trained = slurp(work_dir() / "run1" / "metrics.json");
  ASSERT_EQ(run("--config tiny.conf --out run1 evaluate"), 0);
  EXPECT_EQ(slurp(work_dir() / "run1" / "metrics.json"), trained);

  // A config whose model differs from the checkpoint is rejected.
  write(work_dir() / "other.conf", slurp(work_dir() / "tiny.conf") + "model.fc_units = 3\n");
  EXPECT_EQ(run("--config other.conf --out run1 evaluate"), 1);
}

TEST_F(Cli, CompareAndReport) {
  ASSERT_EQ(run("--config tiny.conf --out cmp compare --jobs 2"), 0)
      << slurp(work_dir() / "last.err");
  const std::string table = slurp(work_dir() / "last.out");
  EXPECT_NE(table.find("bce"), std::string::npos);
  EXPECT_NE(table.find("curriculum"), std::string::npos);
  EXPECT_NE(table.find("2/2"), std::string::npos) << table;
  ASSERT_EQ(run("--out cmp report"), 0);
  EXPECT_EQ(slurp(work_dir() / "last.out"), table);

  write(work_dir() / "failed.csv",
        "variant,runs,failed,micro_f_mean,micro_f_std,macro_f_mean,macro_f_std,"
        "micro_er_mean,micro_er_std,macro_er_mean,macro_er_std\n"
        "bce,1,1,FAILED,FAILED,FAILED,FAILED,FAILED,FAILED,FAILED,FAILED\n");
  EXPECT_EQ(run("report failed.csv"), 3);
}

}  // namespace
