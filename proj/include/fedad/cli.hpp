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

#include <cstdint>
#include <exception>
#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fedad/config.hpp"
#include "fedad/error.hpp"
#include "fedad/eval.hpp"
#include "fedad/federation.hpp"
#include "fedad/model.hpp"
#include "fedad/output.hpp"
#include "fedad/telemetry.hpp"

namespace fedad::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Wrong subcommand arguments (unknown sweep kind, missing flag).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Config errors and usage errors map to 2, everything else to 1.
inline int exit_code_for(const std::exception& e) noexcept {
  if (dynamic_cast<const UsageError*>(&e)) return kExitUsage;
  if (dynamic_cast<const ConfigError*>(&e)) return kExitUsage;
  return kExitFailure;
}

/// Default config, or the file at `path`, with an optional seed override.
inline RunConfig resolve_config(const std::optional<fs::path>& path,
                                std::optional<std::uint64_t> seed) {
  RunConfig c = path ? load_config(*path) : RunConfig{};
  if (seed) {
    c.seed = *seed;
    c.seeds = {*seed};
  }
  c.validate();
  return c;
}

inline std::string config_json(const RunConfig& c) { return dump_config(c); }

inline std::string snapshot_name(std::int64_t tenant) {
  return "tenant_" + std::to_string(tenant) + ".txt";
}

inline std::string score_csv(std::span<const ScoreRecord> scores) {
  std::ostringstream os;
  os << "timestamp,tenant_id,score,threshold,decision,label\n";
  for (const auto& s : scores) {
    os << s.timestamp << ',' << s.tenant_id << ',' << format_double(s.score)
       << ',' << format_double(s.threshold) << ',' << s.decision << ','
       << s.label << '\n';
  }
  return os.str();
}

/// Synthetic corpus for `cfg.seed`; the same corpus a sweep builds for that
/// seed.
inline void cmd_generate(const RunConfig& cfg, const fs::path& out_path) {
  const auto data = generate_dataset(cfg.experiment.generator_for(cfg.seed));
  OutputSet out;
  out.add(out_path, to_csv(data));
  out.commit();
}

/// Trains on `data_path`, evaluates on the held-out tail and writes
/// config.json, model.txt, personalized/, history.csv and metrics.csv.
inline ExperimentResult cmd_train(const RunConfig& cfg,
                                  const fs::path& data_path,
                                  const fs::path& out_dir) {
  const auto data = load_csv(data_path, cfg.experiment.generator.feature_dim);
  auto r = run_experiment_on(data, cfg.experiment, cfg.seed);
  r.row.sweep_var = kParticipationVar;
  r.row.value = cfg.experiment.federation.participation_rate;

  OutputSet out;
  out.add(out_dir / "config.json", config_json(cfg));
  out.add(out_dir / "model.txt", to_snapshot(r.training.final_global));
  for (const auto& c : r.clients) {
    out.add(out_dir / "personalized" / snapshot_name(c.tenant_id),
            to_snapshot(c.personalized_params));
  }
  out.add(out_dir / "history.csv", history_csv(r.training.history));
  out.add(out_dir / "metrics.csv",
          metrics_csv(std::span<const MetricRow>(&r.row, 1)));
  out.commit();
  return r;
}

enum class SweepKind { participation, noise };

inline SweepKind parse_sweep_kind(std::string_view s) {
  if (s == "participation") return SweepKind::participation;
  if (s == "noise") return SweepKind::noise;
  throw UsageError("unknown sweep kind '" + std::string(s) +
                   "' (expected participation or noise)");
}

inline SweepResult cmd_sweep(const RunConfig& cfg, SweepKind kind,
                             const fs::path& out_dir) {
  SweepResult result =
      kind == SweepKind::participation
          ? sweep_participation(cfg.experiment, cfg.participation_rates,
                                cfg.seeds, cfg.threads)
          : sweep_noise(cfg.experiment, cfg.noise_rates, cfg.seeds,
                        cfg.threads);
  OutputSet out;
  out.add(out_dir / "config.json", config_json(cfg));
  add_report(out, result, to_json(cfg).dump(), out_dir);
  out.commit();
  return result;
}

/// Scores the held-out tail of `data_path` with the snapshot as the model
/// for every tenant. Split, noise and standardization follow `cmd_train`.
inline Evaluation cmd_score(const fs::path& snapshot_path,
                            const fs::path& data_path, const RunConfig& cfg,
                            const fs::path& out_path) {
  const ParamVector model = load_snapshot(snapshot_path);
  const auto data = load_csv(data_path, cfg.experiment.generator.feature_dim);
  if (model.layout().input_dim != cfg.experiment.generator.feature_dim) {
    throw ContractError("snapshot input dimension " +
                        std::to_string(model.layout().input_dim) +
                        " does not match data dimension " +
                        std::to_string(cfg.experiment.generator.feature_dim));
  }
  ExperimentConfig ec = cfg.experiment;
  ec.scoring.model = EvalModel::global;
  auto clients = prepare_clients(data, ec, cfg.seed);
  Evaluation ev = evaluate(clients, model, ec);
  OutputSet out;
  out.add(out_path, score_csv(ev.scores));
  out.commit();
  return ev;
}

}  // namespace fedad::cli
