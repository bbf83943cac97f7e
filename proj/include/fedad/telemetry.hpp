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
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fedad/error.hpp"
#include "fedad/rng.hpp"
#include "fedad/text.hpp"

namespace fedad {

// ---------------------------------------------------------------------------
// Records and partitions
// ---------------------------------------------------------------------------

/// One timestamped observation of a tenant's resource usage.
///
/// Feature layout for d = 5: cpu_util, mem_util, disk_io, net_tx, net_rx.
/// Further columns are generic (f5, f6, ...).
struct TelemetryRecord {
  std::int64_t timestamp = 0;
  std::int64_t tenant_id = 0;
  std::vector<double> features;
  int label = 0;

  bool operator==(const TelemetryRecord&) const = default;
};

/// A tenant's private partition, ordered by timestamp.
struct TenantDataset {
  std::int64_t tenant_id = 0;
  std::vector<TelemetryRecord> records;

  std::size_t size() const noexcept { return records.size(); }
  bool empty() const noexcept { return records.empty(); }
  std::size_t dim() const noexcept {
    return records.empty() ? 0 : records.front().features.size();
  }
  std::span<const double> features(std::size_t i) const {
    return records[i].features;
  }
  int label(std::size_t i) const { return records[i].label; }

  bool operator==(const TenantDataset&) const = default;
};

/// Throws ContractError if `ds` breaks a TenantDataset invariant.
inline void validate(const TenantDataset& ds) {
  const std::size_t d = ds.dim();
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto& r = ds.records[i];
    if (r.tenant_id != ds.tenant_id) {
      throw ContractError("record " + std::to_string(i) +
                          " has a foreign tenant_id");
    }
    if (r.features.size() != d) {
      throw ContractError("record " + std::to_string(i) +
                          " has inconsistent feature dimension");
    }
    if (r.label != 0 && r.label != 1) {
      throw ContractError("record " + std::to_string(i) + " label not in {0,1}");
    }
    if (i > 0 && r.timestamp <= ds.records[i - 1].timestamp) {
      throw ContractError("timestamps not strictly increasing at record " +
                          std::to_string(i));
    }
  }
}

inline std::vector<std::string> feature_names(std::size_t d) {
  static constexpr std::array<std::string_view, 5> kNamed = {
      "cpu_util", "mem_util", "disk_io", "net_tx", "net_rx"};
  std::vector<std::string> names;
  names.reserve(d);
  for (std::size_t k = 0; k < d; ++k) {
    names.push_back(k < kNamed.size() ? std::string(kNamed[k])
                                      : "f" + std::to_string(k));
  }
  return names;
}

// ---------------------------------------------------------------------------
// Synthetic generator
// ---------------------------------------------------------------------------

enum class AnomalyKind { cpu_spike, mem_leak, net_congestion };

/// Fractions of the anomaly budget (in ticks) assigned to each kind.
struct AnomalyMix {
  double cpu_spike = 0.4;
  double mem_leak = 0.3;
  double net_congestion = 0.3;
};

struct GeneratorConfig {
  std::size_t num_tenants = 10;
  std::size_t records_per_tenant = 2000;
  std::size_t feature_dim = 5;
  double anomaly_rate = 0.05;
  AnomalyMix anomaly_mix;
  double per_tenant_baseline_spread = 1.0;
  // Dirichlet dispersion of each tenant's own anomaly mix around
  // `anomaly_mix`; 0 gives every tenant exactly `anomaly_mix`.
  double mix_dispersion = 0.5;
  std::uint64_t seed = 0;

  void validate() const {
    if (num_tenants < 1) throw ConfigError("num_tenants", "must be >= 1");
    if (records_per_tenant < 1) {
      throw ConfigError("records_per_tenant", "must be >= 1");
    }
    if (feature_dim < 5) {
      throw ConfigError("feature_dim", "generator needs at least 5 features");
    }
    if (!(anomaly_rate >= 0.0 && anomaly_rate <= 1.0)) {
      throw ConfigError("anomaly_rate", "must lie in [0, 1]");
    }
    const auto& m = anomaly_mix;
    for (double f : {m.cpu_spike, m.mem_leak, m.net_congestion}) {
      if (!(f >= 0.0) || !std::isfinite(f)) {
        throw ConfigError("anomaly_mix", "fractions must be nonnegative");
      }
    }
    if (std::abs(m.cpu_spike + m.mem_leak + m.net_congestion - 1.0) > 1e-9) {
      throw ConfigError("anomaly_mix", "fractions must sum to 1");
    }
    if (!(mix_dispersion >= 0.0) || !std::isfinite(mix_dispersion)) {
      throw ConfigError("mix_dispersion", "must be >= 0");
    }
    if (!(per_tenant_baseline_spread >= 0.0) ||
        !std::isfinite(per_tenant_baseline_spread)) {
      throw ConfigError("per_tenant_baseline_spread", "must be >= 0");
    }
  }
};

namespace detail {

inline constexpr std::int64_t kTickSeconds = 60;
inline constexpr double kDiurnalPeriodTicks = 1440.0;
inline constexpr std::size_t kMemLeakTicks = 20;
inline constexpr std::size_t kNetCongestionTicks = 5;
inline constexpr double kCpuSpikeSigmas = 4.0;
inline constexpr double kMemLeakPeakSigmas = 8.0;
inline constexpr double kNetCongestionSigmas = 3.0;

/// Per-tenant baseline drawn once from the meta-distribution.
struct TenantProfile {
  std::vector<double> mean;
  std::vector<double> sd;  // innovation scale per feature
  double diurnal_amplitude = 0.0;  // in units of sd, cpu and net only
  double diurnal_phase = 0.0;
  double rho_cpu_net = 0.0;
  double rho_mem_disk = 0.0;
  double rho_tx_rx = 0.0;

  /// Marginal standard deviation of a normal-regime feature.
  double marginal_sd(std::size_t k) const {
    const bool diurnal = k == 0 || k == 3 || k == 4;
    const double a2 = diurnal ? diurnal_amplitude * diurnal_amplitude : 0.0;
    return sd[k] * std::sqrt(1.0 + 0.5 * a2);
  }
};

inline TenantProfile draw_profile(std::size_t d, double spread, Rng& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto jitter = [&](double scale) { return scale * spread * n01(rng); };

  TenantProfile p;
  p.mean.resize(d);
  p.sd.resize(d);
  p.mean[0] = std::clamp(0.35 + jitter(0.08), 0.1, 0.7);
  p.sd[0] = 0.04 * std::exp(jitter(0.25));
  p.mean[1] = std::clamp(0.5 + jitter(0.08), 0.15, 0.75);
  p.sd[1] = 0.03 * std::exp(jitter(0.25));
  p.mean[2] = 40.0 * std::exp(jitter(0.5));
  p.sd[2] = 0.15 * p.mean[2] * std::exp(jitter(0.2));
  p.mean[3] = 80.0 * std::exp(jitter(0.5));
  p.sd[3] = 0.12 * p.mean[3];
  p.mean[4] = p.mean[3] * std::exp(jitter(0.3));
  p.sd[4] = 0.12 * p.mean[4];
  for (std::size_t k = 5; k < d; ++k) {
    p.mean[k] = 10.0 * std::exp(jitter(0.5));
    p.sd[k] = 0.1 * p.mean[k];
  }
  const double mix = std::min(1.0, spread);
  p.diurnal_amplitude = 0.2 + 0.4 * u01(rng);
  p.diurnal_phase = 2.0 * std::numbers::pi * u01(rng);
  p.rho_cpu_net = mix * (1.2 * u01(rng) - 0.6);
  p.rho_mem_disk = mix * (1.2 * u01(rng) - 0.6);
  p.rho_tx_rx = 0.5 + 0.4 * u01(rng);
  return p;
}

inline std::vector<double> normal_features(const TenantProfile& p,
                                           std::size_t tick, Rng& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  const std::size_t d = p.mean.size();
  std::vector<double> z(d);
  for (auto& v : z) v = n01(rng);

  const double diurnal =
      p.diurnal_amplitude *
      std::sin(2.0 * std::numbers::pi * static_cast<double>(tick) /
                   kDiurnalPeriodTicks +
               p.diurnal_phase);
  const auto blend = [](double rho, double a, double b) {
    return rho * a + std::sqrt(1.0 - rho * rho) * b;
  };
  const double net_shock = blend(p.rho_cpu_net, z[0], z[3]);

  std::vector<double> x(d);
  x[0] = p.mean[0] + p.sd[0] * (diurnal + z[0]);
  x[1] = p.mean[1] + p.sd[1] * z[1];
  x[2] = p.mean[2] + p.sd[2] * blend(p.rho_mem_disk, z[1], z[2]);
  x[3] = p.mean[3] + p.sd[3] * (diurnal + net_shock);
  x[4] = p.mean[4] + p.sd[4] * (diurnal + blend(p.rho_tx_rx, net_shock, z[4]));
  for (std::size_t k = 5; k < d; ++k) x[k] = p.mean[k] + p.sd[k] * z[k];
  return x;
}

inline void clamp_ranges(std::vector<double>& x) {
  x[0] = std::clamp(x[0], 0.0, 1.0);
  x[1] = std::clamp(x[1], 0.0, 1.0);
  for (std::size_t k = 2; k < x.size(); ++k) x[k] = std::max(0.0, x[k]);
}

/// Splits `total` ticks across kinds by largest remainder; ties go to the
/// earlier kind.
inline std::array<std::size_t, 3> allocate_budget(const AnomalyMix& mix,
                                                  std::size_t total) {
  const std::array<double, 3> frac = {mix.cpu_spike, mix.mem_leak,
                                      mix.net_congestion};
  std::array<std::size_t, 3> ticks{};
  std::array<double, 3> rem{};
  std::size_t used = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    const double exact = frac[k] * static_cast<double>(total);
    ticks[k] = static_cast<std::size_t>(std::floor(exact));
    rem[k] = exact - static_cast<double>(ticks[k]);
    used += ticks[k];
  }
  while (used < total) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < 3; ++k) {
      if (rem[k] > rem[best]) best = k;
    }
    ++ticks[best];
    rem[best] = -1.0;
    ++used;
  }
  return ticks;
}

/// Tenant-specific anomaly mix ~ Dirichlet(mix / dispersion).
inline AnomalyMix tenant_mix(const AnomalyMix& mix, double dispersion,
                             Rng& rng) {
  if (dispersion == 0.0) return mix;
  std::array<double, 3> base = {mix.cpu_spike, mix.mem_leak,
                                mix.net_congestion};
  std::array<double, 3> g{};
  double total = 0.0;
  for (std::size_t k = 0; k < 3; ++k) {
    if (base[k] > 0.0) {
      std::gamma_distribution<double> gamma(base[k] / dispersion, 1.0);
      g[k] = gamma(rng);
    }
    total += g[k];
  }
  if (!(total > 0.0)) return mix;
  return {g[0] / total, g[1] / total, 1.0 - g[0] / total - g[1] / total};
}

struct Episode {
  AnomalyKind kind;
  std::size_t length;
  std::size_t start = 0;
};

/// Lays anomaly episodes onto [0, n) without overlap. Episode lengths sum
/// to exactly the budget; the last episode of a kind may be truncated.
inline std::vector<Episode> place_episodes(const AnomalyMix& mix,
                                           std::size_t n, std::size_t budget,
                                           Rng& rng) {
  const auto ticks = allocate_budget(mix, budget);
  const std::array<std::size_t, 3> chunk = {1, kMemLeakTicks,
                                            kNetCongestionTicks};
  std::vector<Episode> episodes;
  for (std::size_t k = 0; k < 3; ++k) {
    std::size_t left = ticks[k];
    while (left > 0) {
      const std::size_t len = std::min(left, chunk[k]);
      episodes.push_back({static_cast<AnomalyKind>(k), len});
      left -= len;
    }
  }
  std::shuffle(episodes.begin(), episodes.end(), rng);

  // Gaps: sorted draws from [0, free] give a uniform composition of the
  // free ticks between episodes.
  const std::size_t free = n - budget;
  std::uniform_int_distribution<std::size_t> gap(0, free);
  std::vector<std::size_t> offsets(episodes.size());
  for (auto& o : offsets) o = gap(rng);
  std::sort(offsets.begin(), offsets.end());
  std::size_t consumed = 0;
  for (std::size_t e = 0; e < episodes.size(); ++e) {
    episodes[e].start = offsets[e] + consumed;
    consumed += episodes[e].length;
  }
  return episodes;
}

inline void apply_anomaly(const TenantProfile& p, AnomalyKind kind,
                          std::size_t step, std::vector<double>& x) {
  switch (kind) {
    case AnomalyKind::cpu_spike:
      x[0] += kCpuSpikeSigmas * p.marginal_sd(0);
      break;
    case AnomalyKind::mem_leak:
      x[1] += kMemLeakPeakSigmas * p.marginal_sd(1) *
              static_cast<double>(step + 1) /
              static_cast<double>(kMemLeakTicks);
      break;
    case AnomalyKind::net_congestion:
      x[3] += kNetCongestionSigmas * p.marginal_sd(3);
      x[4] += kNetCongestionSigmas * p.marginal_sd(4);
      break;
  }
}

}  // namespace detail

/// Anomaly kind injected at each record of a generated partition, or none.
/// Exposed for tests and diagnostics; the CSV schema does not carry it.
struct GeneratedTenant {
  TenantDataset data;
  std::vector<std::optional<AnomalyKind>> kinds;
};

inline std::vector<GeneratedTenant> generate_annotated(
    const GeneratorConfig& cfg) {
  cfg.validate();
  const std::size_t n = cfg.records_per_tenant;
  const auto budget = static_cast<std::size_t>(
      std::llround(cfg.anomaly_rate * static_cast<double>(n)));

  std::vector<GeneratedTenant> out;
  out.reserve(cfg.num_tenants);
  for (std::size_t t = 0; t < cfg.num_tenants; ++t) {
    Rng profile_rng(derive_seed(cfg.seed, "profile", t));
    Rng noise_rng(derive_seed(cfg.seed, "normal", t));
    Rng anomaly_rng(derive_seed(cfg.seed, "anomaly", t));
    const auto profile = detail::draw_profile(
        cfg.feature_dim, cfg.per_tenant_baseline_spread, profile_rng);

    GeneratedTenant g;
    g.data.tenant_id = static_cast<std::int64_t>(t);
    g.data.records.reserve(n);
    g.kinds.assign(n, std::nullopt);
    for (std::size_t i = 0; i < n; ++i) {
      g.data.records.push_back(
          {static_cast<std::int64_t>(i) * detail::kTickSeconds,
           static_cast<std::int64_t>(t),
           detail::normal_features(profile, i, noise_rng), 0});
    }
    const AnomalyMix mix =
        detail::tenant_mix(cfg.anomaly_mix, cfg.mix_dispersion, anomaly_rng);
    for (const auto& ep : detail::place_episodes(mix, n, budget, anomaly_rng)) {
      for (std::size_t s = 0; s < ep.length; ++s) {
        auto& rec = g.data.records[ep.start + s];
        detail::apply_anomaly(profile, ep.kind, s, rec.features);
        rec.label = 1;
        g.kinds[ep.start + s] = ep.kind;
      }
    }
    for (auto& rec : g.data.records) detail::clamp_ranges(rec.features);
    out.push_back(std::move(g));
  }
  return out;
}

/// Deterministic synthetic multi-tenant corpus; a pure function of `cfg`.
inline std::vector<TenantDataset> generate_dataset(const GeneratorConfig& cfg) {
  std::vector<TenantDataset> out;
  for (auto& g : generate_annotated(cfg)) out.push_back(std::move(g.data));
  return out;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

inline std::string csv_header(std::size_t feature_dim) {
  std::string h = "timestamp,tenant_id";
  for (const auto& name : feature_names(feature_dim)) h += "," + name;
  h += ",label";
  return h;
}

inline void write_csv(std::ostream& os,
                      std::span<const TenantDataset> datasets) {
  std::size_t d = 0;
  for (const auto& ds : datasets) {
    if (!ds.empty()) {
      d = ds.dim();
      break;
    }
  }
  os << csv_header(d) << '\n';
  for (const auto& ds : datasets) {
    for (const auto& r : ds.records) {
      if (r.features.size() != d) {
        throw ContractError("write_csv: inconsistent feature dimension");
      }
      os << r.timestamp << ',' << r.tenant_id;
      for (double v : r.features) os << ',' << format_double(v);
      os << ',' << r.label << '\n';
    }
  }
}

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return cells;
}

}  // namespace detail

/// Parses the telemetry CSV schema. Partitions come back sorted by
/// tenant_id, records sorted by timestamp within each tenant.
inline std::vector<TenantDataset> read_csv(std::istream& is,
                                           std::size_t feature_dim) {
  std::string line;
  if (!std::getline(is, line)) throw ParseError(1, "missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const std::string expected_line = csv_header(feature_dim);
  const auto expected = detail::split_commas(expected_line);
  const auto header = detail::split_commas(line);
  for (const auto& col : expected) {
    if (std::find(header.begin(), header.end(), col) == header.end()) {
      throw ParseError(1, "missing column '" + std::string(col) + "'");
    }
  }
  if (header.size() != expected.size() ||
      !std::equal(header.begin(), header.end(), expected.begin())) {
    throw ParseError(1, "header does not match schema '" +
                            csv_header(feature_dim) + "'");
  }

  std::map<std::int64_t, std::vector<TelemetryRecord>> by_tenant;
  std::set<std::pair<std::int64_t, std::int64_t>> seen;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = detail::split_commas(line);
    if (cells.size() != feature_dim + 3) {
      throw ParseError(lineno, "expected " + std::to_string(feature_dim + 3) +
                                   " cells, found " +
                                   std::to_string(cells.size()));
    }
    TelemetryRecord rec;
    const auto ts = parse_int(cells[0]);
    const auto tid = parse_int(cells[1]);
    if (!ts || *ts < 0) throw ParseError(lineno, "bad timestamp");
    if (!tid || *tid < 0) throw ParseError(lineno, "bad tenant_id");
    rec.timestamp = *ts;
    rec.tenant_id = *tid;
    rec.features.reserve(feature_dim);
    for (std::size_t k = 0; k < feature_dim; ++k) {
      const auto v = parse_double(cells[2 + k]);
      if (!v || !std::isfinite(*v)) {
        throw ParseError(lineno, "non-numeric value in column '" +
                                     std::string(expected[2 + k]) + "'");
      }
      rec.features.push_back(*v);
    }
    const auto label = parse_int(cells.back());
    if (!label || (*label != 0 && *label != 1)) {
      throw ParseError(lineno, "label must be 0 or 1");
    }
    rec.label = static_cast<int>(*label);
    if (!seen.emplace(rec.tenant_id, rec.timestamp).second) {
      throw ParseError(lineno, "duplicate (tenant_id, timestamp)");
    }
    by_tenant[rec.tenant_id].push_back(std::move(rec));
  }

  std::vector<TenantDataset> out;
  out.reserve(by_tenant.size());
  for (auto& [tid, recs] : by_tenant) {
    std::stable_sort(recs.begin(), recs.end(),
                     [](const auto& a, const auto& b) {
                       return a.timestamp < b.timestamp;
                     });
    out.push_back({tid, std::move(recs)});
  }
  return out;
}

inline std::vector<TenantDataset> load_csv(const std::filesystem::path& path,
                                           std::size_t feature_dim) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_csv(in, feature_dim);
}

inline std::string to_csv(std::span<const TenantDataset> datasets) {
  std::ostringstream os;
  write_csv(os, datasets);
  return os.str();
}

// ---------------------------------------------------------------------------
// Corruption, splitting, standardization
// ---------------------------------------------------------------------------

/// Population standard deviation of each feature column.
inline std::vector<double> feature_std(const TenantDataset& ds) {
  const std::size_t d = ds.dim();
  std::vector<double> mean(d, 0.0), var(d, 0.0);
  if (ds.empty()) return var;
  const double n = static_cast<double>(ds.size());
  for (const auto& r : ds.records) {
    for (std::size_t k = 0; k < d; ++k) mean[k] += r.features[k];
  }
  for (auto& m : mean) m /= n;
  for (const auto& r : ds.records) {
    for (std::size_t k = 0; k < d; ++k) {
      const double c = r.features[k] - mean[k];
      var[k] += c * c;
    }
  }
  for (auto& v : var) v = std::sqrt(v / n);
  return var;
}

/// Indices of the records `inject_noise` corrupts for these arguments.
inline std::vector<std::size_t> noise_selection(std::size_t n, double rate,
                                                std::uint64_t seed) {
  const auto count = static_cast<std::size_t>(
      std::llround(rate * static_cast<double>(n)));
  auto idx = shuffled_indices(n, derive_seed(seed, "select"));
  idx.resize(count);
  return idx;
}

/// Corrupts round(rate * n) seeded-sampled records: Gaussian feature noise
/// of `feature_sigma` per-feature standard deviations and a label flip with
/// probability `label_flip_prob`. All other records are copied bitwise.
inline TenantDataset inject_noise(const TenantDataset& ds, double rate,
                                  double feature_sigma, double label_flip_prob,
                                  std::uint64_t seed) {
  if (!(rate >= 0.0 && rate <= 1.0)) {
    throw ConfigError("noise.rate", "must lie in [0, 1]");
  }
  if (!(label_flip_prob >= 0.0 && label_flip_prob <= 1.0)) {
    throw ConfigError("noise.label_flip_prob", "must lie in [0, 1]");
  }
  if (!(feature_sigma >= 0.0) || !std::isfinite(feature_sigma)) {
    throw ConfigError("noise.feature_sigma", "must be >= 0");
  }
  TenantDataset out = ds;
  const auto chosen = noise_selection(ds.size(), rate, seed);
  if (chosen.empty()) return out;

  const auto scale = feature_std(ds);
  Rng rng(derive_seed(seed, "perturb"));
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (std::size_t i : chosen) {
    auto& rec = out.records[i];
    for (std::size_t k = 0; k < rec.features.size(); ++k) {
      rec.features[k] += feature_sigma * scale[k] * n01(rng);
    }
    if (u01(rng) < label_flip_prob) rec.label = 1 - rec.label;
  }
  return out;
}

/// Chronological split: the latest round(eval_fraction * n) records become
/// the evaluation partition.
inline std::pair<TenantDataset, TenantDataset> split_train_eval(
    const TenantDataset& ds, double eval_fraction) {
  if (!(eval_fraction > 0.0 && eval_fraction < 1.0)) {
    throw ConfigError("eval_fraction", "must lie in (0, 1)");
  }
  const std::size_t n = ds.size();
  const auto n_eval = static_cast<std::size_t>(
      std::llround(eval_fraction * static_cast<double>(n)));
  if (n_eval == 0 || n_eval >= n) {
    throw ConfigError("eval_fraction",
                      "split of " + std::to_string(n) +
                          " records leaves an empty partition");
  }
  const auto cut = static_cast<std::ptrdiff_t>(n - n_eval);
  TenantDataset train{ds.tenant_id,
                      {ds.records.begin(), ds.records.begin() + cut}};
  TenantDataset eval{ds.tenant_id, {ds.records.begin() + cut, ds.records.end()}};
  return {std::move(train), std::move(eval)};
}

/// Per-tenant z-scoring fitted on a training partition.
class Standardizer {
 public:
  Standardizer() = default;

  static Standardizer fit(const TenantDataset& train) {
    Standardizer s;
    const std::size_t d = train.dim();
    s.mean_.assign(d, 0.0);
    const double n = static_cast<double>(train.size());
    for (const auto& r : train.records) {
      for (std::size_t k = 0; k < d; ++k) s.mean_[k] += r.features[k];
    }
    for (auto& m : s.mean_) m /= n;
    s.scale_ = feature_std(train);
    for (auto& v : s.scale_) {
      if (!(v > 0.0)) v = 1.0;
    }
    return s;
  }

  TenantDataset apply(const TenantDataset& ds) const {
    TenantDataset out = ds;
    for (auto& r : out.records) {
      if (r.features.size() != mean_.size()) {
        throw ContractError("Standardizer: dimension mismatch");
      }
      for (std::size_t k = 0; k < mean_.size(); ++k) {
        r.features[k] = (r.features[k] - mean_[k]) / scale_[k];
      }
    }
    return out;
  }

  std::span<const double> mean() const noexcept { return mean_; }
  std::span<const double> scale() const noexcept { return scale_; }

 private:
  std::vector<double> mean_;
  std::vector<double> scale_;
};

}  // namespace fedad
