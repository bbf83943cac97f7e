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
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <sstream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "fedad/error.hpp"
#include "fedad/federation.hpp"
#include "fedad/model.hpp"
#include "fedad/output.hpp"
#include "fedad/rng.hpp"
#include "fedad/scoring.hpp"
#include "fedad/telemetry.hpp"
#include "fedad/text.hpp"

namespace fedad {

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const noexcept { return tp + fp + tn + fn; }

  ConfusionMatrix& operator+=(const ConfusionMatrix& o) noexcept {
    tp += o.tp;
    fp += o.fp;
    tn += o.tn;
    fn += o.fn;
    return *this;
  }
  bool operator==(const ConfusionMatrix&) const = default;
};

/// Positive class = anomaly = 1.
inline ConfusionMatrix confusion(std::span<const int> decisions,
                                 std::span<const int> labels) {
  if (decisions.size() != labels.size()) {
    throw ContractError("confusion: decisions and labels differ in length");
  }
  if (decisions.empty()) throw ContractError("confusion: empty input");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    const bool d = decisions[i] == 1;
    const bool l = labels[i] == 1;
    if (d && l) {
      ++cm.tp;
    } else if (d) {
      ++cm.fp;
    } else if (l) {
      ++cm.fn;
    } else {
      ++cm.tn;
    }
  }
  return cm;
}

/// Harmonic mean of precision and recall; 0 when both are 0.
inline double f1_score(double precision, double recall) {
  const double s = precision + recall;
  return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

struct MetricRow {
  std::string sweep_var;
  double value = 0.0;
  std::uint64_t seed = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  ConfusionMatrix cm;
  // Some ratio was 0/0 and was reported as 0.
  bool degenerate = false;

  bool operator==(const MetricRow&) const = default;
};

inline MetricRow metrics(const ConfusionMatrix& cm) {
  MetricRow row;
  row.cm = cm;
  const auto ratio = [&](std::size_t num, std::size_t den) {
    if (den == 0) {
      row.degenerate = true;
      return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
  };
  row.precision = ratio(cm.tp, cm.tp + cm.fp);
  row.recall = ratio(cm.tp, cm.tp + cm.fn);
  if (row.precision + row.recall == 0.0) row.degenerate = true;
  row.f1 = f1_score(row.precision, row.recall);
  return row;
}

// ---------------------------------------------------------------------------
// Experiment pipeline
// ---------------------------------------------------------------------------

enum class ScoreSpace { embedding, raw };
enum class EvalModel { personalized, global };

struct ScoringOptions {
  ScoreSpace space = ScoreSpace::embedding;
  std::size_t window = WindowedStats::kDefaultCapacity;
  // Embedding windows are close to rank-deficient; 1e-3 leaves the
  // normal-score tail far above the chi-squared cutoff.
  double epsilon = 0.3;
  double epsilon_abs = WindowedStats::kDefaultEpsilonAbs;
  EvalModel model = EvalModel::personalized;

  void validate() const {
    if (window < 2) throw ConfigError("scoring.window", "must be >= 2");
    if (!(epsilon >= 0.0)) throw ConfigError("scoring.epsilon", "must be >= 0");
    if (!(epsilon_abs > 0.0)) {
      throw ConfigError("scoring.epsilon_abs", "must be > 0");
    }
  }
};

struct NoiseConfig {
  double rate = 0.0;
  double feature_sigma = 1.0;
  double label_flip_prob = 0.5;

  void validate() const {
    if (!(rate >= 0.0 && rate <= 1.0)) {
      throw ConfigError("noise.rate", "must lie in [0, 1]");
    }
    if (!(feature_sigma >= 0.0) || !std::isfinite(feature_sigma)) {
      throw ConfigError("noise.feature_sigma", "must be >= 0");
    }
    if (!(label_flip_prob >= 0.0 && label_flip_prob <= 1.0)) {
      throw ConfigError("noise.label_flip_prob", "must lie in [0, 1]");
    }
  }
};

/// Everything one end-to-end run needs except the top-level seed. Seeds
/// inside the sub-configs are overwritten by keyed derivation.
struct ExperimentConfig {
  GeneratorConfig generator;
  double eval_fraction = 0.2;
  FederationConfig federation;
  ScoringOptions scoring;
  ThresholdPolicy threshold;
  NoiseConfig noise;

  void validate() const {
    generator.validate();
    if (!(eval_fraction > 0.0 && eval_fraction < 1.0)) {
      throw ConfigError("split.eval_fraction", "must lie in (0, 1)");
    }
    federation.validate();
    scoring.validate();
    threshold.validate();
    noise.validate();
  }

  GeneratorConfig generator_for(std::uint64_t seed) const {
    GeneratorConfig g = generator;
    g.seed = derive_seed(seed, "generate");
    return g;
  }

  FederationConfig federation_for(std::uint64_t seed) const {
    FederationConfig f = federation;
    f.seed = derive_seed(seed, "federation");
    f.train.seed = f.seed;
    return f;
  }
};

using Client = TenantClient<TenantDataset>;

/// Builds tenant nodes: chronological split, noise on the training side
/// only, then z-scoring with statistics of the (possibly noisy) training
/// partition.
inline std::vector<Client> prepare_clients(std::span<const TenantDataset> data,
                                           const ExperimentConfig& cfg,
                                           std::uint64_t seed) {
  std::vector<Client> clients;
  clients.reserve(data.size());
  for (const auto& ds : data) {
    if (ds.size() < 2) {
      throw ContractError("tenant " + std::to_string(ds.tenant_id) +
                          " has fewer than 2 records");
    }
    auto [train, eval] = split_train_eval(ds, cfg.eval_fraction);
    if (cfg.noise.rate > 0.0) {
      train = inject_noise(train, cfg.noise.rate, cfg.noise.feature_sigma,
                           cfg.noise.label_flip_prob,
                           derive_seed(seed, "noise",
                                       static_cast<std::uint64_t>(ds.tenant_id)));
    }
    const auto scaler = Standardizer::fit(train);
    Client c;
    c.tenant_id = ds.tenant_id;
    c.train_data = scaler.apply(train);
    c.eval_data = scaler.apply(eval);
    c.alpha = cfg.federation.alpha;
    clients.push_back(std::move(c));
  }
  std::sort(clients.begin(), clients.end(),
            [](const auto& a, const auto& b) { return a.tenant_id < b.tenant_id; });
  return clients;
}

/// One line of the score dump.
struct ScoreRecord {
  std::int64_t timestamp = 0;
  std::int64_t tenant_id = 0;
  double score = 0.0;
  double threshold = 0.0;
  int decision = 0;
  int label = 0;

  bool operator==(const ScoreRecord&) const = default;
};

struct Evaluation {
  ConfusionMatrix cm;
  std::vector<ScoreRecord> scores;
};

namespace detail {

inline std::vector<double> scoring_vector(const ParamVector& model,
                                          std::span<const double> x,
                                          ScoreSpace space) {
  if (space == ScoreSpace::raw) return {x.begin(), x.end()};
  return forward(model, x).embedding;
}

}  // namespace detail

/// Tenant-side inference. Each client's window is filled with the scoring
/// vectors of its normal-labeled training records; the eval stream is then
/// scored in time order and every record judged normal enters the window.
inline Evaluation evaluate(std::vector<Client>& clients,
                           const ParamVector& global,
                           const ExperimentConfig& cfg) {
  cfg.scoring.validate();
  Evaluation ev;
  for (auto& c : clients) {
    const ParamVector& model = cfg.scoring.model == EvalModel::personalized
                                   ? c.personalized_params
                                   : global;
    const auto& train = c.train_data;
    const std::size_t m = cfg.scoring.space == ScoreSpace::raw
                              ? train.dim()
                              : model.layout().hidden_dim;
    WindowedStats window(m, cfg.scoring.window, cfg.scoring.epsilon,
                         cfg.scoring.epsilon_abs);

    std::vector<std::vector<double>> train_vecs;
    train_vecs.reserve(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) {
      train_vecs.push_back(
          detail::scoring_vector(model, train.features(i), cfg.scoring.space));
      if (train.label(i) == 0) window.update(train_vecs.back());
    }

    double tau = 0.0;
    if (cfg.threshold.kind == ThresholdKind::f1_optimal) {
      const MahalanobisScorer scorer(window);
      std::vector<ScoredLabel> labeled;
      labeled.reserve(train.size());
      for (std::size_t i = 0; i < train.size(); ++i) {
        labeled.push_back({scorer(train_vecs[i]), train.label(i)});
      }
      tau = threshold(cfg.threshold, std::span<const ScoredLabel>(labeled), m);
    } else {
      tau = threshold(cfg.threshold, std::nullopt, m);
    }

    const auto& eval = c.eval_data;
    for (std::size_t i = 0; i < eval.size(); ++i) {
      const auto v =
          detail::scoring_vector(model, eval.features(i), cfg.scoring.space);
      const double s = mahalanobis(window, v);
      const int decision = s > tau ? 1 : 0;
      const int label = eval.label(i);
      ev.scores.push_back(
          {eval.records[i].timestamp, c.tenant_id, s, tau, decision, label});
      ev.cm += confusion(std::span<const int>(&decision, 1),
                         std::span<const int>(&label, 1));
      if (decision == 0) window.update(v);
    }
    c.scorer = std::move(window);
  }
  return ev;
}

struct ExperimentResult {
  std::vector<Client> clients;
  TrainingRun training;
  Evaluation evaluation;
  MetricRow row;
};

/// Train and evaluate on an existing corpus.
inline ExperimentResult run_experiment_on(std::span<const TenantDataset> data,
                                          const ExperimentConfig& cfg,
                                          std::uint64_t seed,
                                          const RoundOptions& options = {}) {
  cfg.validate();
  ExperimentResult r;
  r.clients = prepare_clients(data, cfg, seed);
  r.training = run_training(r.clients, cfg.federation_for(seed), options);
  r.evaluation = evaluate(r.clients, r.training.final_global, cfg);
  r.row = metrics(r.evaluation.cm);
  r.row.seed = seed;
  return r;
}

/// Generate, train, evaluate: a pure function of (cfg, seed).
inline ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                       std::uint64_t seed,
                                       const RoundOptions& options = {}) {
  cfg.validate();
  const auto data = generate_dataset(cfg.generator_for(seed));
  return run_experiment_on(data, cfg, seed, options);
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;
};

struct SweepPointSummary {
  double value = 0.0;
  std::size_t runs = 0;
  MetricSummary precision;
  MetricSummary recall;
  MetricSummary f1;
  std::size_t degenerate = 0;
};

struct SweepRun {
  double value = 0.0;
  std::uint64_t seed = 0;
  std::vector<RoundReport> history;
};

struct SweepResult {
  std::string sweep_var;
  std::vector<double> grid;
  std::vector<std::uint64_t> seeds;
  std::vector<MetricRow> rows;  // (value, seed) order
  std::vector<SweepRun> runs;   // parallel to rows
  std::vector<SweepPointSummary> summary;
};

/// Mean and sample standard deviation (n - 1; 0 for a single value),
/// accumulated in the order given.
inline MetricSummary summarize_values(std::span<const double> values) {
  MetricSummary s;
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

inline std::vector<SweepPointSummary> summarize(std::span<const MetricRow> rows,
                                                std::span<const double> grid) {
  std::vector<SweepPointSummary> out;
  for (double value : grid) {
    std::vector<double> p, r, f;
    SweepPointSummary s;
    s.value = value;
    for (const auto& row : rows) {
      if (row.value != value) continue;
      p.push_back(row.precision);
      r.push_back(row.recall);
      f.push_back(row.f1);
      s.degenerate += row.degenerate ? 1 : 0;
    }
    s.runs = p.size();
    s.precision = summarize_values(p);
    s.recall = summarize_values(r);
    s.f1 = summarize_values(f);
    out.push_back(s);
  }
  return out;
}

namespace detail {

/// Runs jobs 0..n-1 on up to `threads` workers; `job(i)` writes slot i.
template <class Job>
void run_indexed(std::size_t n, std::size_t threads, Job&& job) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  {
    std::vector<std::jthread> workers;
    for (std::size_t t = 0; t < threads; ++t) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            job(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

template <class Configure>
SweepResult sweep(std::string sweep_var, const ExperimentConfig& base,
                  std::span<const double> grid,
                  std::span<const std::uint64_t> seeds, std::size_t threads,
                  Configure&& configure) {
  if (grid.empty()) throw ConfigError("sweep", "grid is empty");
  if (seeds.empty()) throw ConfigError("sweep.seeds", "seed list is empty");
  SweepResult out;
  out.sweep_var = std::move(sweep_var);
  out.grid.assign(grid.begin(), grid.end());
  out.seeds.assign(seeds.begin(), seeds.end());

  std::vector<ExperimentConfig> configs;
  for (double v : grid) {
    ExperimentConfig cfg = base;
    configure(cfg, v);
    cfg.validate();
    configs.push_back(std::move(cfg));
  }

  const std::size_t n = grid.size() * seeds.size();
  out.rows.resize(n);
  out.runs.resize(n);
  run_indexed(n, threads, [&](std::size_t i) {
    const std::size_t g = i / seeds.size();
    const std::uint64_t seed = seeds[i % seeds.size()];
    auto result = run_experiment(configs[g], seed);
    result.row.sweep_var = out.sweep_var;
    result.row.value = grid[g];
    out.rows[i] = std::move(result.row);
    out.runs[i] = {grid[g], seed, std::move(result.training.history)};
  });
  out.summary = summarize(out.rows, out.grid);
  return out;
}

}  // namespace detail

inline constexpr const char* kParticipationVar = "participation_rate";
inline constexpr const char* kNoiseVar = "noise_rate";

/// One full run per (rate, seed), rows in grid-then-seed order.
inline SweepResult sweep_participation(const ExperimentConfig& base,
                                       std::span<const double> rates,
                                       std::span<const std::uint64_t> seeds,
                                       std::size_t threads = 1) {
  return detail::sweep(kParticipationVar, base, rates, seeds, threads,
                       [](ExperimentConfig& cfg, double v) {
                         cfg.federation.participation_rate = v;
                       });
}

/// As `sweep_participation`, varying the fraction of corrupted training
/// records. Evaluation partitions stay clean.
inline SweepResult sweep_noise(const ExperimentConfig& base,
                               std::span<const double> noise_rates,
                               std::span<const std::uint64_t> seeds,
                               std::size_t threads = 1) {
  return detail::sweep(kNoiseVar, base, noise_rates, seeds, threads,
                       [](ExperimentConfig& cfg, double v) {
                         cfg.noise.rate = v;
                       });
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

inline constexpr const char* kMetricsHeader =
    "sweep_var,value,seed,precision,recall,f1,tp,fp,tn,fn";

inline std::string metrics_csv(std::span<const MetricRow> rows) {
  std::ostringstream os;
  os << kMetricsHeader << '\n';
  for (const auto& r : rows) {
    os << r.sweep_var << ',' << format_double(r.value) << ',' << r.seed << ','
       << format_double(r.precision) << ',' << format_double(r.recall) << ','
       << format_double(r.f1) << ',' << r.cm.tp << ',' << r.cm.fp << ','
       << r.cm.tn << ',' << r.cm.fn << '\n';
  }
  return os.str();
}

inline std::string history_csv(std::span<const RoundReport> history) {
  std::ostringstream os;
  write_history_csv(os, history);
  return os.str();
}

/// `key = value` lines in a fixed order.
inline std::string summary_text(const SweepResult& result,
                                const std::string& config_echo) {
  std::ostringstream os;
  os << "config = " << config_echo << '\n';
  os << "sweep_var = " << result.sweep_var << '\n';
  os << "grid = ";
  for (std::size_t i = 0; i < result.grid.size(); ++i) {
    os << (i ? ";" : "") << format_double(result.grid[i]);
  }
  os << '\n' << "seeds = ";
  for (std::size_t i = 0; i < result.seeds.size(); ++i) {
    os << (i ? ";" : "") << result.seeds[i];
  }
  os << '\n';
  std::size_t degenerate = 0;
  for (const auto& r : result.rows) degenerate += r.degenerate ? 1 : 0;
  os << "rows = " << result.rows.size() << '\n';
  os << "degenerate_rows = " << degenerate << '\n';
  for (std::size_t i = 0; i < result.summary.size(); ++i) {
    const auto& s = result.summary[i];
    const std::string key = "point." + std::to_string(i) + ".";
    os << key << "value = " << format_double(s.value) << '\n';
    os << key << "runs = " << s.runs << '\n';
    os << key << "precision.mean = " << format_double(s.precision.mean) << '\n';
    os << key << "precision.std = " << format_double(s.precision.std) << '\n';
    os << key << "recall.mean = " << format_double(s.recall.mean) << '\n';
    os << key << "recall.std = " << format_double(s.recall.std) << '\n';
    os << key << "f1.mean = " << format_double(s.f1.mean) << '\n';
    os << key << "f1.std = " << format_double(s.f1.std) << '\n';
    os << key << "degenerate = " << s.degenerate << '\n';
  }
  return os.str();
}

inline std::string history_file_name(const SweepRun& run) {
  return "history_" + format_double(run.value) + "_seed" +
         std::to_string(run.seed) + ".csv";
}

/// Stages metrics.csv, summary.txt and one round-history CSV per run under
/// `dir/histories/`.
inline void add_report(OutputSet& out, const SweepResult& result,
                       const std::string& config_echo,
                       const std::filesystem::path& dir) {
  if (result.rows.empty()) throw ContractError("emit_report: no rows");
  out.add(dir / "metrics.csv", metrics_csv(result.rows));
  out.add(dir / "summary.txt", summary_text(result, config_echo));
  for (const auto& run : result.runs) {
    out.add(dir / "histories" / history_file_name(run), history_csv(run.history));
  }
}

/// Either every report file appears or none does.
inline void emit_report(const SweepResult& result,
                        const std::string& config_echo,
                        const std::filesystem::path& dir) {
  OutputSet out;
  add_report(out, result, config_echo, dir);
  out.commit();
}

}  // namespace fedad
