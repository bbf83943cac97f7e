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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "fedad/error.hpp"
#include "fedad/model.hpp"
#include "fedad/rng.hpp"
#include "fedad/scoring.hpp"
#include "fedad/text.hpp"

namespace fedad {

struct FederationConfig {
  std::size_t rounds = 50;
  double participation_rate = 1.0;
  double alpha = 0.25;
  // One participant set for the whole run (nested across rates for a
  // fixed seed). false redraws every round.
  bool fixed_participants = true;
  TrainConfig train;
  std::uint64_t seed = 0;

  void validate() const {
    if (rounds < 1) throw ConfigError("federation.rounds", "must be >= 1");
    if (!(participation_rate > 0.0 && participation_rate <= 1.0)) {
      throw ConfigError("federation.participation_rate",
                        "must lie in (0, 1]");
    }
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
      throw ConfigError("federation.alpha", "must lie in [0, 1]");
    }
    train.validate();
  }
};

/// One tenant node: private partitions, its latest local model, its
/// personalized inference model and its scorer.
template <TrainingData Data>
struct TenantClient {
  std::int64_t tenant_id = 0;
  Data train_data;
  Data eval_data;
  ParamVector local_params;
  ParamVector personalized_params;
  double alpha = 0.25;
  WindowedStats scorer;
};

struct RoundReport {
  std::size_t round_index = 0;
  std::vector<std::int64_t> participant_ids;
  double mean_train_loss = 0.0;
  double mean_val_loss = 0.0;
  double global_params_norm = 0.0;

  bool operator==(const RoundReport&) const = default;
};

/// max(1, round(rate * K)) distinct client positions from [0, K), drawn by
/// a shuffle keyed on (seed, round_index), sorted ascending.
inline std::vector<std::size_t> sample_participants(std::size_t num_clients,
                                                    double rate,
                                                    std::size_t round_index,
                                                    std::uint64_t seed) {
  if (num_clients < 1) {
    throw ContractError("sample_participants: need at least one client");
  }
  if (!(rate > 0.0 && rate <= 1.0)) {
    throw ContractError("sample_participants: rate must lie in (0, 1]");
  }
  const auto wanted = static_cast<std::size_t>(
      std::llround(rate * static_cast<double>(num_clients)));
  const std::size_t count = std::clamp<std::size_t>(wanted, 1, num_clients);
  auto ids = shuffled_indices(num_clients,
                              derive_seed(seed, "participants", round_index));
  ids.resize(count);
  std::sort(ids.begin(), ids.end());
  return ids;
}

/// What a tenant uploads: its sample count and parameters. Nothing else
/// crosses the tenant boundary.
struct ClientUpdate {
  std::int64_t tenant_id = 0;
  std::size_t num_samples = 0;
  ParamVector params;
};

/// Sample-weighted mean sum_i (n_i / n) w_i. Terms are accumulated in
/// ascending tenant-id order with Neumaier compensation, so the result does
/// not depend on the order updates arrive in.
inline ParamVector federated_average(std::span<const ClientUpdate> updates) {
  if (updates.empty()) throw ContractError("federated_average: no updates");
  const Layout layout = updates.front().params.layout();
  std::size_t total = 0;
  for (const auto& u : updates) {
    if (u.params.layout() != layout) {
      throw ContractError("federated_average: parameter layouts differ");
    }
    if (u.num_samples < 1) {
      throw ContractError("federated_average: n_i must be >= 1");
    }
    total += u.num_samples;
  }

  std::vector<std::size_t> order(updates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return updates[a].tenant_id < updates[b].tenant_id;
  });

  const std::size_t m = layout.size();
  std::vector<double> sum(m, 0.0), comp(m, 0.0);
  const double n = static_cast<double>(total);
  for (std::size_t idx : order) {
    const auto& u = updates[idx];
    const double weight = static_cast<double>(u.num_samples) / n;
    const auto v = u.params.values();
    for (std::size_t k = 0; k < m; ++k) {
      const double term = weight * v[k];
      const double t = sum[k] + term;
      if (std::abs(sum[k]) >= std::abs(term)) {
        comp[k] += (sum[k] - t) + term;
      } else {
        comp[k] += (term - t) + sum[k];
      }
      sum[k] = t;
    }
  }
  for (std::size_t k = 0; k < m; ++k) sum[k] += comp[k];
  return ParamVector(layout, std::move(sum));
}

/// w + alpha (w_i - w), exact at both endpoints.
inline ParamVector personalize(const ParamVector& global_w,
                               const ParamVector& local_w, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ContractError("personalize: alpha must lie in [0, 1]");
  }
  require_same_layout(global_w, local_w, "personalize");
  ParamVector out(global_w.layout());
  const auto g = global_w.values();
  const auto l = local_w.values();
  auto o = out.values();
  for (std::size_t k = 0; k < o.size(); ++k) o[k] = std::lerp(g[k], l[k], alpha);
  return out;
}

/// Observation points around the aggregation barrier.
struct RoundHooks {
  std::function<void()> before_aggregation;
  std::function<void()> after_aggregation;
};

struct RoundOptions {
  // Train participants on separate threads.
  bool parallel = false;
  // Sequential execution order over participant positions (a permutation);
  // empty means ascending.
  std::vector<std::size_t> training_order;
  RoundHooks hooks;
};

/// Seed for a participant's local training in a given round.
inline std::uint64_t local_train_seed(std::uint64_t federation_seed,
                                      std::size_t round_index,
                                      std::int64_t tenant_id) {
  return derive_seed(derive_seed(federation_seed, "local", round_index),
                     "tenant", static_cast<std::uint64_t>(tenant_id));
}

template <TrainingData Data>
double eval_loss(const ParamVector& p, const Data& data, double lambda) {
  const auto ex = examples_of(data);
  return loss(p, ex, lambda);
}

struct RoundResult {
  ParamVector new_global;
  RoundReport report;
};

/// One federated round: sample, train locally from `global_w`, aggregate,
/// personalize every client. Clients must be sorted by tenant id.
template <TrainingData Data>
RoundResult run_round(std::vector<TenantClient<Data>>& clients,
                      const ParamVector& global_w, const FederationConfig& cfg,
                      std::size_t round_index, const RoundOptions& options = {}) {
  if (clients.empty()) throw ContractError("run_round: no clients");
  for (std::size_t i = 1; i < clients.size(); ++i) {
    if (clients[i].tenant_id <= clients[i - 1].tenant_id) {
      throw ContractError("run_round: clients must be sorted by tenant id");
    }
  }
  for (auto& c : clients) {
    if (c.local_params.size() == 0) c.local_params = global_w;
    require_same_layout(c.local_params, global_w, "run_round");
  }

  const auto participants = sample_participants(
      clients.size(), cfg.participation_rate,
      cfg.fixed_participants ? 0 : round_index, cfg.seed);

  std::vector<TrainResult> results(participants.size());
  std::vector<std::exception_ptr> errors(participants.size());
  auto train_one = [&](std::size_t slot) {
    auto& c = clients[participants[slot]];
    TrainConfig tc = cfg.train;
    tc.seed = local_train_seed(cfg.seed, round_index, c.tenant_id);
    try {
      results[slot] = local_train(global_w, c.train_data, tc);
    } catch (const TrainingDivergence& e) {
      errors[slot] = std::make_exception_ptr(e.with_tenant(c.tenant_id));
    } catch (...) {
      errors[slot] = std::current_exception();
    }
  };

  if (options.parallel) {
    std::vector<std::jthread> workers;
    workers.reserve(participants.size());
    for (std::size_t s = 0; s < participants.size(); ++s) {
      workers.emplace_back(train_one, s);
    }
  } else if (!options.training_order.empty()) {
    auto check = options.training_order;
    std::sort(check.begin(), check.end());
    for (std::size_t s = 0; s < check.size(); ++s) {
      if (check[s] != s || check.size() != participants.size()) {
        throw ContractError("run_round: training_order is not a permutation");
      }
    }
    for (std::size_t s : options.training_order) train_one(s);
  } else {
    for (std::size_t s = 0; s < participants.size(); ++s) train_one(s);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  // Barrier: only (n_i, params) pairs reach the server.
  std::vector<ClientUpdate> updates;
  updates.reserve(participants.size());
  for (std::size_t s = 0; s < participants.size(); ++s) {
    auto& c = clients[participants[s]];
    updates.push_back({c.tenant_id, c.train_data.size(), results[s].params});
  }
  if (options.hooks.before_aggregation) options.hooks.before_aggregation();
  ParamVector new_global = federated_average(updates);
  if (options.hooks.after_aggregation) options.hooks.after_aggregation();

  RoundReport report;
  report.round_index = round_index;
  double train_sum = 0.0;
  for (std::size_t s = 0; s < participants.size(); ++s) {
    auto& c = clients[participants[s]];
    c.local_params = std::move(results[s].params);
    report.participant_ids.push_back(c.tenant_id);
    train_sum += results[s].final_epoch_loss;
  }
  report.mean_train_loss = train_sum / static_cast<double>(participants.size());

  double val_sum = 0.0;
  for (auto& c : clients) {
    c.personalized_params = personalize(new_global, c.local_params, c.alpha);
    val_sum += eval_loss(c.personalized_params, c.eval_data, cfg.train.lambda);
  }
  report.mean_val_loss = val_sum / static_cast<double>(clients.size());
  report.global_params_norm = new_global.norm();
  return {std::move(new_global), std::move(report)};
}

struct TrainingRun {
  ParamVector final_global;
  std::vector<RoundReport> history;
};

/// Starting point of every run: Glorot init keyed on the federation seed.
inline ParamVector initial_global(std::size_t input_dim,
                                  const FederationConfig& cfg) {
  return init_params(input_dim, cfg.train.hidden_dim,
                     derive_seed(cfg.seed, "init"));
}

/// Rounds 1..T from fresh parameters. Clients' local and personalized
/// models start at the initial global.
template <TrainingData Data>
TrainingRun run_training(std::vector<TenantClient<Data>>& clients,
                         const FederationConfig& cfg,
                         const RoundOptions& options = {}) {
  cfg.validate();
  if (clients.empty()) throw ContractError("run_training: no clients");
  const auto& first = clients.front().train_data;
  if (first.size() == 0) throw ContractError("run_training: empty train data");
  ParamVector global = initial_global(first.features(0).size(), cfg);
  for (auto& c : clients) {
    c.local_params = global;
    c.personalized_params = global;
  }
  TrainingRun run;
  run.history.reserve(cfg.rounds);
  for (std::size_t r = 1; r <= cfg.rounds; ++r) {
    auto result = run_round(clients, global, cfg, r, options);
    global = std::move(result.new_global);
    run.history.push_back(std::move(result.report));
  }
  run.final_global = std::move(global);
  return run;
}

inline constexpr const char* kHistoryHeader =
    "round,participants,mean_train_loss,mean_val_loss,global_norm";

inline void write_history_csv(std::ostream& os,
                              std::span<const RoundReport> history) {
  os << kHistoryHeader << '\n';
  for (const auto& r : history) {
    os << r.round_index << ',';
    for (std::size_t i = 0; i < r.participant_ids.size(); ++i) {
      if (i > 0) os << ';';
      os << r.participant_ids[i];
    }
    os << ',' << format_double(r.mean_train_loss) << ','
       << format_double(r.mean_val_loss) << ','
       << format_double(r.global_params_norm) << '\n';
  }
}

}  // namespace fedad
