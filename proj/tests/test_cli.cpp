// Copyright 2026 The fedad Authors
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

// Drives the fedad executable end to end.

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "fedad/cli.hpp"

using namespace fedad;
namespace fs = std::filesystem;

namespace {

const fs::path kBinary = FEDAD_CLI_PATH;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("fedad_cli_" + std::string(::testing::UnitTest::GetInstance()
                                           ->current_test_info()
                                           ->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    write("small.json", R"({
      "seed": 1,
      "generator": {"num_tenants": 3, "records_per_tenant": 300},
      "federation": {"rounds": 3},
      "sweep": {"participation_rates": [1.0], "noise_rates": [0.0, 0.2],
                "seeds": [1]}
    })");
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path at(const std::string& name) const { return dir_ / name; }

  void write(const std::string& name, const std::string& text) const {
    std::ofstream(at(name)) << text;
  }

  static std::string read(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  int run(const std::string& args) const {
    const std::string cmd = kBinary.string() + " " + args + " > " +
                            (dir_ / "stdout.txt").string() + " 2> " +
                            (dir_ / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string cfg() const { return "--config " + at("small.json").string(); }

  fs::path dir_;
};

std::size_t lines(const std::string& s) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

}  // namespace

TEST_F(CliTest, PrintDefaultConfigParsesBack) {
  ASSERT_EQ(run("print-default-config"), 0);
  const auto text = read(at("stdout.txt"));
  EXPECT_EQ(dump_config(parse_config(text)), text);
}

TEST_F(CliTest, GenerateLineCountAndRoundTrip) {
  ASSERT_EQ(run("generate " + cfg() + " --out " + at("d.csv").string()), 0);
  const auto text = read(at("d.csv"));
  EXPECT_EQ(lines(text), 1u + 3u * 300u);
  const auto c = load_config(at("small.json"));
  const auto expect = generate_dataset(c.experiment.generator_for(c.seed));
  EXPECT_EQ(load_csv(at("d.csv"), 5), expect);
}

TEST_F(CliTest, CorruptConfigExitsTwoWithoutOutput) {
  write("bad.json", R"({"federation": {"roundz": 3}})");
  EXPECT_EQ(run("generate --config " + at("bad.json").string() + " --out " +
                at("d.csv").string()),
            2);
  EXPECT_FALSE(fs::exists(at("d.csv")));
  write("broken.json", "{");
  EXPECT_EQ(run("generate --config " + at("broken.json").string() + " --out " +
                at("d.csv").string()),
            2);
  EXPECT_FALSE(fs::exists(at("d.csv")));
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("sweep " + cfg() + " --kind sideways --out " + at("s").string()), 2);
  EXPECT_FALSE(fs::exists(at("s")));
  EXPECT_EQ(run("train " + cfg()), 2);
}

TEST_F(CliTest, RuntimeFailureExitsOneWithoutOutput) {
  EXPECT_EQ(run("train " + cfg() + " --data " + at("missing.csv").string() +
                " --out " + at("run").string()),
            1);
  EXPECT_FALSE(fs::exists(at("run")));
  write("garbage.csv", "timestamp,tenant_id\n");
  EXPECT_EQ(run("train " + cfg() + " --data " + at("garbage.csv").string() +
                " --out " + at("run").string()),
            1);
  EXPECT_FALSE(fs::exists(at("run")));
}

TEST_F(CliTest, TrainWritesEverythingDeterministically) {
  write("one.json", R"({"generator": {"num_tenants": 3, "records_per_tenant": 300},
                        "federation": {"rounds": 1}})");
  const std::string c1 = "--config " + at("one.json").string();
  ASSERT_EQ(run("generate " + c1 + " --out " + at("d.csv").string()), 0);
  ASSERT_EQ(run("train " + c1 + " --data " + at("d.csv").string() + " --out " +
                at("a").string()),
            0);
  ASSERT_EQ(run("train " + c1 + " --data " + at("d.csv").string() + " --out " +
                at("b").string()),
            0);
  EXPECT_EQ(lines(read(at("a") / "history.csv")), 2u);
  EXPECT_EQ(read(at("a") / "model.txt"), read(at("b") / "model.txt"));
  EXPECT_EQ(read(at("a") / "metrics.csv"), read(at("b") / "metrics.csv"));
  for (int t = 0; t < 3; ++t) {
    EXPECT_TRUE(fs::exists(at("a") / "personalized" /
                           ("tenant_" + std::to_string(t) + ".txt")));
  }
  EXPECT_EQ(parse_config(read(at("a") / "config.json")).experiment.federation.rounds,
            1u);
}

TEST_F(CliTest, SingleRateSweepMatchesTrain) {
  ASSERT_EQ(run("generate " + cfg() + " --out " + at("d.csv").string()), 0);
  ASSERT_EQ(run("train " + cfg() + " --data " + at("d.csv").string() + " --out " +
                at("run").string()),
            0);
  ASSERT_EQ(run("sweep " + cfg() + " --kind participation --out " +
                at("sw").string()),
            0);
  EXPECT_EQ(read(at("sw") / "metrics.csv"), read(at("run") / "metrics.csv"));
  EXPECT_TRUE(fs::exists(at("sw") / "config.json"));
  EXPECT_TRUE(fs::exists(at("sw") / "summary.txt"));
}

TEST_F(CliTest, SweepIsByteIdenticalAcrossInvocations) {
  ASSERT_EQ(run("sweep " + cfg() + " --kind noise --out " + at("x").string()), 0);
  ASSERT_EQ(run("sweep " + cfg() + " --kind noise --out " + at("y").string()), 0);
  EXPECT_EQ(read(at("x") / "metrics.csv"), read(at("y") / "metrics.csv"));
  EXPECT_EQ(read(at("x") / "summary.txt"), read(at("y") / "summary.txt"));
  EXPECT_EQ(lines(read(at("x") / "metrics.csv")), 3u);
}

TEST_F(CliTest, ScoreReproducesInProcessScores) {
  ASSERT_EQ(run("generate " + cfg() + " --out " + at("d.csv").string()), 0);
  ASSERT_EQ(run("train " + cfg() + " --data " + at("d.csv").string() + " --out " +
                at("run").string()),
            0);
  const std::string score = "score " + cfg() + " --model " +
                            (at("run") / "model.txt").string() + " --data " +
                            at("d.csv").string() + " --out ";
  ASSERT_EQ(run(score + at("s1.csv").string()), 0);
  ASSERT_EQ(run(score + at("s2.csv").string()), 0);
  EXPECT_EQ(read(at("s1.csv")), read(at("s2.csv")));

  auto c = load_config(at("small.json"));
  c.experiment.scoring.model = EvalModel::global;
  const auto data = load_csv(at("d.csv"), 5);
  const auto r = run_experiment_on(data, c.experiment, c.seed);
  EXPECT_EQ(read(at("s1.csv")), cli::score_csv(r.evaluation.scores));
  EXPECT_EQ(lines(read(at("s1.csv"))), 1u + 3u * 60u);
}

TEST_F(CliTest, ScoreRejectsMismatchedSnapshot) {
  ASSERT_EQ(run("generate " + cfg() + " --out " + at("d.csv").string()), 0);
  std::ofstream(at("m.txt")) << to_snapshot(init_params(3, 2, 1));
  EXPECT_EQ(run("score " + cfg() + " --model " + at("m.txt").string() + " --data " +
                at("d.csv").string() + " --out " + at("s.csv").string()),
            1);
  EXPECT_FALSE(fs::exists(at("s.csv")));
}
