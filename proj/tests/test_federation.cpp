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

#include <algorithm>
#include <random>
#include <sstream>

#include "fedad/federation.hpp"
#include "fedad/telemetry.hpp"
#include "oracles.hpp"
#include "poison.hpp"

using namespace fedad;

namespace {

ParamVector scalar(double v) { return ParamVector(Layout{1, 1}, {v, 0, 0, 0}); }

std::vector<ClientUpdate> random_updates(std::size_t k, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> n(1, 5000);
  std::normal_distribution<double> g(0.0, 3.0);
  std::vector<ClientUpdate> out;
  for (std::size_t i = 0; i < k; ++i) {
    ParamVector p(Layout{5, 16});
    for (auto& v : p.values()) v = g(rng) * std::pow(10.0, static_cast<int>(i % 5) - 2);
    out.push_back({static_cast<std::int64_t>(i), n(rng), std::move(p)});
  }
  return out;
}

std::vector<TenantDataset> corpus(std::size_t tenants = 4) {
  GeneratorConfig g;
  g.num_tenants = tenants;
  g.records_per_tenant = 250;
  g.seed = 3;
  return generate_dataset(g);
}

FederationConfig fed_config() {
  FederationConfig f;
  f.rounds = 3;
  f.seed = 17;
  f.train.local_epochs = 1;
  f.train.hidden_dim = 6;
  return f;
}

}  // namespace

TEST(Sampling, CountRounding) {
  EXPECT_EQ(sample_participants(10, 0.2, 1, 0).size(), 2u);
  EXPECT_EQ(sample_participants(10, 0.25, 1, 0).size(), 3u);  // 2.5 rounds up
  EXPECT_EQ(sample_participants(10, 0.01, 1, 0).size(), 1u);
  EXPECT_EQ(sample_participants(10, 1.0, 1, 0).size(), 10u);
  EXPECT_EQ(sample_participants(3, 0.1, 1, 0).size(), 1u);
}

TEST(Sampling, SortedDistinctDeterministic) {
  const auto a = sample_participants(20, 0.4, 5, 99);
  EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
  EXPECT_EQ(std::adjacent_find(a.begin(), a.end()), a.end());
  EXPECT_EQ(a, sample_participants(20, 0.4, 5, 99));
  EXPECT_NE(a, sample_participants(20, 0.4, 6, 99));
}

TEST(Sampling, NestedAcrossRatesForOneKey) {
  const auto small = sample_participants(10, 0.2, 0, 5);
  const auto big = sample_participants(10, 0.6, 0, 5);
  EXPECT_TRUE(std::includes(big.begin(), big.end(), small.begin(), small.end()));
}

TEST(Aggregate, HandCase) {
  const std::vector<ClientUpdate> u{{0, 1, scalar(0.0)}, {1, 3, scalar(4.0)}};
  EXPECT_EQ(federated_average(u)[0], 3.0);
}

TEST(Aggregate, MatchesHighPrecisionOracle) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const auto u = random_updates(2 + trial % 9, rng);
    const auto got = federated_average(u);
    const auto want = oracle::weighted_mean(u);
    for (std::size_t i = 0; i < want.size(); ++i) {
      EXPECT_LE(std::abs(got[i] - want[i]), 1e-12 * std::abs(want[i]) + 1e-300);
    }
  }
}

TEST(Aggregate, BitIdenticalUnderPermutation) {
  std::mt19937_64 rng(2);
  auto u = random_updates(8, rng);
  const auto ref = federated_average(u);
  for (int i = 0; i < 20; ++i) {
    std::shuffle(u.begin(), u.end(), rng);
    EXPECT_EQ(federated_average(u), ref);
  }
}

TEST(Aggregate, ConvexCombinationOfEqualInputsIsExact) {
  std::vector<ClientUpdate> u{{0, 7, scalar(0.1)}, {1, 13, scalar(0.1)}};
  EXPECT_EQ(federated_average(u)[0], 0.1);
}

TEST(Aggregate, Contracts) {
  EXPECT_THROW(federated_average({}), ContractError);
  std::vector<ClientUpdate> zero{{0, 0, scalar(1.0)}};
  EXPECT_THROW(federated_average(zero), ContractError);
  std::vector<ClientUpdate> mixed{{0, 1, scalar(1.0)},
                                  {1, 1, ParamVector(Layout{2, 1})}};
  EXPECT_THROW(federated_average(mixed), ContractError);
}

TEST(Personalize, EndpointsAndMidpoint) {
  std::mt19937_64 rng(3);
  auto u = random_updates(2, rng);
  const auto& g = u[0].params;
  const auto& l = u[1].params;
  EXPECT_EQ(personalize(g, l, 0.0), g);
  EXPECT_EQ(personalize(g, l, 1.0), l);
  EXPECT_EQ(personalize(scalar(2.0), scalar(4.0), 0.5)[0], 3.0);
}

TEST(Personalize, Linear) {
  std::mt19937_64 rng(4);
  auto u = random_updates(2, rng);
  const auto a = personalize(u[0].params, u[1].params, 0.3);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double want = u[0].params[i] + 0.3 * (u[1].params[i] - u[0].params[i]);
    EXPECT_NEAR(a[i], want, 1e-15 * (std::abs(u[0].params[i]) + std::abs(u[1].params[i])));
  }
  EXPECT_THROW(personalize(u[0].params, u[1].params, 1.5), ContractError);
}

TEST(Round, ReportAndPersonalization) {
  auto clients = poison::make_clients<TenantDataset>(corpus(), 0.2);
  auto cfg = fed_config();
  cfg.participation_rate = 0.5;
  cfg.fixed_participants = false;
  const auto g0 = initial_global(5, cfg);
  const auto r = run_round(clients, g0, cfg, 1);
  EXPECT_EQ(r.report.round_index, 1u);
  EXPECT_EQ(r.report.participant_ids.size(), 2u);
  EXPECT_EQ(r.report.global_params_norm, r.new_global.norm());
  for (const auto& c : clients) {
    EXPECT_EQ(c.personalized_params, personalize(r.new_global, c.local_params, c.alpha));
    const bool took_part =
        std::count(r.report.participant_ids.begin(), r.report.participant_ids.end(),
                   c.tenant_id) > 0;
    EXPECT_EQ(took_part, c.local_params != g0);
  }
}

TEST(Round, ParallelAndReorderedMatchSequential) {
  auto cfg = fed_config();
  const auto g0 = initial_global(5, cfg);
  auto a = poison::make_clients<TenantDataset>(corpus(), 0.2);
  auto b = a, c = a;
  const auto ra = run_round(a, g0, cfg, 1);
  RoundOptions par;
  par.parallel = true;
  const auto rb = run_round(b, g0, cfg, 1, par);
  RoundOptions rev;
  rev.training_order = {3, 1, 0, 2};
  const auto rc = run_round(c, g0, cfg, 1, rev);
  EXPECT_EQ(ra.new_global, rb.new_global);
  EXPECT_EQ(ra.new_global, rc.new_global);
  EXPECT_EQ(ra.report.mean_val_loss, rc.report.mean_val_loss);
}

TEST(Round, FixedParticipantsKeepOneSet) {
  auto clients = poison::make_clients<TenantDataset>(corpus(6), 0.2);
  auto cfg = fed_config();
  cfg.participation_rate = 0.5;
  cfg.fixed_participants = true;
  const auto run = run_training(clients, cfg);
  for (const auto& r : run.history) {
    EXPECT_EQ(r.participant_ids, run.history.front().participant_ids);
  }
}

TEST(Round, RejectsUnsortedClients) {
  auto clients = poison::make_clients<TenantDataset>(corpus(), 0.2);
  std::swap(clients[0], clients[1]);
  const auto cfg = fed_config();
  EXPECT_THROW(run_round(clients, initial_global(5, cfg), cfg, 1), ContractError);
}

TEST(Training, HistoryAndDeterminism) {
  auto cfg = fed_config();
  auto a = poison::make_clients<TenantDataset>(corpus(), 0.2);
  auto b = a;
  const auto ra = run_training(a, cfg);
  const auto rb = run_training(b, cfg);
  ASSERT_EQ(ra.history.size(), 3u);
  EXPECT_EQ(ra.final_global, rb.final_global);
  std::ostringstream os;
  write_history_csv(os, ra.history);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')),
            "round,participants,mean_train_loss,mean_val_loss,global_norm");
  EXPECT_NE(os.str().find("\n1,0;1;2;3,"), std::string::npos);
}

TEST(Privacy, AggregationNeverReadsRecords) {
  poison::Disarm guard;
  auto cfg = fed_config();
  cfg.participation_rate = 0.75;
  auto plain = poison::make_clients<TenantDataset>(corpus(), 0.2);
  auto guarded = poison::make_clients<poison::GuardedDataset>(corpus(), 0.2);
  RoundOptions opt;
  opt.hooks = poison::hooks();
  const auto g0 = initial_global(5, cfg);
  const auto a = run_round(plain, g0, cfg, 1);
  const auto b = run_round(guarded, g0, cfg, 1, opt);
  EXPECT_EQ(a.new_global, b.new_global);
  EXPECT_FALSE(poison::armed.load());
}

TEST(Privacy, GateActuallyFires) {
  poison::Disarm guard;
  auto guarded = poison::make_clients<poison::GuardedDataset>(corpus(), 0.2);
  poison::armed = true;
  EXPECT_THROW(guarded[0].train_data.features(0), poison::PoisonedAccess);
  EXPECT_THROW(guarded[0].train_data.size(), poison::PoisonedAccess);
}
