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

#include <gtest/gtest.h>

#include "fedad/cli.hpp"
#include "fedad/config.hpp"

using namespace fedad;

namespace {

std::string field_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "<accepted>";
}

}  // namespace

TEST(Config, DefaultsRoundTrip) {
  const RunConfig d;
  const auto again = parse_config(dump_config(d));
  EXPECT_EQ(dump_config(again), dump_config(d));
}

TEST(Config, EmptyObjectGivesDefaults) {
  EXPECT_EQ(dump_config(parse_config("{}")), dump_config(RunConfig{}));
}

TEST(Config, PartialSectionsOverride) {
  const auto c = parse_config(R"({"federation": {"rounds": 7},
                                  "scoring": {"space": "raw"},
                                  "threshold": {"kind": "f1_optimal"},
                                  "sweep": {"seeds": [4, 5]}})");
  EXPECT_EQ(c.experiment.federation.rounds, 7u);
  EXPECT_EQ(c.experiment.federation.alpha, 0.25);
  EXPECT_EQ(c.experiment.scoring.space, ScoreSpace::raw);
  EXPECT_EQ(c.experiment.threshold.kind, ThresholdKind::f1_optimal);
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{4, 5}));
}

TEST(Config, UnknownKeysNameTheirPath) {
  EXPECT_EQ(field_of(R"({"sed": 1})"), "sed");
  EXPECT_EQ(field_of(R"({"train": {"lr": 0.1}})"), "train.lr");
  EXPECT_EQ(field_of(R"({"generator": {"anomaly_mix": {"disk": 0.1}}})"),
            "generator.anomaly_mix.disk");
}

TEST(Config, TypeAndRangeErrors) {
  EXPECT_EQ(field_of(R"({"federation": {"rounds": "ten"}})"), "federation.rounds");
  EXPECT_EQ(field_of(R"({"federation": {"rounds": -3}})"), "federation.rounds");
  EXPECT_EQ(field_of(R"({"federation": {"alpha": 2}})"), "federation.alpha");
  EXPECT_EQ(field_of(R"({"scoring": {"space": "latent"}})"), "scoring.space");
  EXPECT_EQ(field_of(R"({"sweep": {"participation_rates": [0.5, 0]}})"),
            "sweep.participation_rates");
  EXPECT_EQ(field_of(R"({"sweep": {"seeds": []}})"), "sweep.seeds");
  EXPECT_EQ(field_of(R"({"federation": {"fixed_participants": 1}})"),
            "federation.fixed_participants");
  EXPECT_EQ(field_of("[1, 2]"), "config");
  EXPECT_EQ(field_of("{not json"), "config");
}

TEST(Config, SeedOverrideReplacesSeedList) {
  const auto c = cli::resolve_config(std::nullopt, 42);
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{42}));
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(cli::exit_code_for(ConfigError("x", "y")), 2);
  EXPECT_EQ(cli::exit_code_for(cli::UsageError("x")), 2);
  EXPECT_EQ(cli::exit_code_for(ParseError(3, "bad")), 1);
  EXPECT_EQ(cli::exit_code_for(IoError("disk")), 1);
  EXPECT_THROW(cli::parse_sweep_kind("both"), cli::UsageError);
}
