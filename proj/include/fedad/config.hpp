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
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fedad/error.hpp"
#include "fedad/eval.hpp"

namespace fedad {

/// Full configuration of a CLI invocation.
struct RunConfig {
  std::uint64_t seed = 1;
  ExperimentConfig experiment;
  std::vector<double> participation_rates = {0.2, 0.4, 0.6, 0.8, 1.0};
  std::vector<double> noise_rates = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  std::size_t threads = 1;
  std::string output_dir;

  void validate() const {
    experiment.validate();
    if (participation_rates.empty()) {
      throw ConfigError("sweep.participation_rates", "must not be empty");
    }
    for (double r : participation_rates) {
      if (!(r > 0.0 && r <= 1.0)) {
        throw ConfigError("sweep.participation_rates",
                          "values must lie in (0, 1]");
      }
    }
    if (noise_rates.empty()) {
      throw ConfigError("sweep.noise_rates", "must not be empty");
    }
    for (double r : noise_rates) {
      if (!(r >= 0.0 && r <= 1.0)) {
        throw ConfigError("sweep.noise_rates", "values must lie in [0, 1]");
      }
    }
    if (seeds.empty()) throw ConfigError("sweep.seeds", "must not be empty");
    if (threads < 1) throw ConfigError("sweep.threads", "must be >= 1");
  }
};

namespace detail {

using nlohmann::json;

inline void reject_unknown(const json& obj, std::string_view section,
                           std::initializer_list<std::string_view> allowed) {
  const std::string where = section.empty() ? "config" : std::string(section);
  if (!obj.is_object()) throw ConfigError(where, "must be an object");
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (auto a : allowed) known = known || key == a;
    if (!known) {
      throw ConfigError(section.empty() ? key : where + "." + key,
                        "unknown key");
    }
  }
}

inline std::string qualify(std::string_view section, std::string_view key) {
  return section.empty() ? std::string(key)
                         : std::string(section) + "." + std::string(key);
}

template <class T>
void read_number(const json& obj, std::string_view section,
                 std::string_view key, T& out) {
  const auto it = obj.find(std::string(key));
  if (it == obj.end()) return;
  const std::string name = qualify(section, key);
  if constexpr (std::is_floating_point_v<T>) {
    if (!it->is_number()) throw ConfigError(name, "must be a number");
    out = it->template get<T>();
  } else {
    if (it->is_number_integer() && it->template get<std::int64_t>() < 0) {
      throw ConfigError(name, "must be nonnegative");
    }
    if (!it->is_number_unsigned()) {
      throw ConfigError(name, "must be a nonnegative integer");
    }
    out = it->template get<T>();
  }
}

inline void read_bool(const json& obj, std::string_view section,
                      std::string_view key, bool& out) {
  const auto it = obj.find(std::string(key));
  if (it == obj.end()) return;
  if (!it->is_boolean()) throw ConfigError(qualify(section, key), "must be a boolean");
  out = it->get<bool>();
}

template <class T>
void read_list(const json& obj, std::string_view section, std::string_view key,
               std::vector<T>& out) {
  const auto it = obj.find(std::string(key));
  if (it == obj.end()) return;
  const std::string name = qualify(section, key);
  if (!it->is_array()) throw ConfigError(name, "must be a list");
  std::vector<T> values;
  for (const auto& v : *it) {
    if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(name, "entries must be numbers");
    } else {
      if (!v.is_number_unsigned()) {
        throw ConfigError(name, "entries must be nonnegative integers");
      }
    }
    values.push_back(v.template get<T>());
  }
  out = std::move(values);
}

inline std::string read_choice(const json& obj, std::string_view section,
                               std::string_view key, std::string current,
                               std::initializer_list<std::string_view> choices) {
  const auto it = obj.find(std::string(key));
  if (it == obj.end()) return current;
  const std::string name = qualify(section, key);
  if (!it->is_string()) throw ConfigError(name, "must be a string");
  const auto value = it->get<std::string>();
  for (auto c : choices) {
    if (value == c) return value;
  }
  throw ConfigError(name, "unsupported value '" + value + "'");
}

inline const json* section_of(const json& root, const char* name) {
  const auto it = root.find(name);
  return it == root.end() ? nullptr : &*it;
}

}  // namespace detail

inline const char* to_string(ScoreSpace s) {
  return s == ScoreSpace::raw ? "raw" : "embedding";
}
inline const char* to_string(EvalModel m) {
  return m == EvalModel::global ? "global" : "personalized";
}
inline const char* to_string(ThresholdKind k) {
  return k == ThresholdKind::f1_optimal ? "f1_optimal" : "chi_squared_quantile";
}

inline nlohmann::ordered_json to_json(const RunConfig& c) {
  const auto& e = c.experiment;
  const auto& g = e.generator;
  const auto& f = e.federation;
  const auto& t = f.train;
  nlohmann::ordered_json j;
  j["seed"] = c.seed;
  j["generator"] = {
      {"num_tenants", g.num_tenants},
      {"records_per_tenant", g.records_per_tenant},
      {"feature_dim", g.feature_dim},
      {"anomaly_rate", g.anomaly_rate},
      {"anomaly_mix",
       {{"cpu_spike", g.anomaly_mix.cpu_spike},
        {"mem_leak", g.anomaly_mix.mem_leak},
        {"net_congestion", g.anomaly_mix.net_congestion}}},
      {"per_tenant_baseline_spread", g.per_tenant_baseline_spread},
      {"mix_dispersion", g.mix_dispersion}};
  j["split"] = {{"eval_fraction", e.eval_fraction}};
  j["federation"] = {{"rounds", f.rounds},
                     {"participation_rate", f.participation_rate},
                     {"fixed_participants", f.fixed_participants},
                     {"alpha", f.alpha}};
  j["train"] = {{"learning_rate", t.learning_rate},
                {"local_epochs", t.local_epochs},
                {"batch_size", t.batch_size},
                {"lambda", t.lambda},
                {"hidden_dim", t.hidden_dim}};
  j["scoring"] = {{"space", to_string(e.scoring.space)},
                  {"model", to_string(e.scoring.model)},
                  {"window", e.scoring.window},
                  {"epsilon", e.scoring.epsilon},
                  {"epsilon_abs", e.scoring.epsilon_abs}};
  j["threshold"] = {{"kind", to_string(e.threshold.kind)},
                    {"level", e.threshold.level}};
  j["noise"] = {{"rate", e.noise.rate},
                {"feature_sigma", e.noise.feature_sigma},
                {"label_flip_prob", e.noise.label_flip_prob}};
  j["sweep"] = {{"participation_rates", c.participation_rates},
                {"noise_rates", c.noise_rates},
                {"seeds", c.seeds},
                {"threads", c.threads}};
  j["output_dir"] = c.output_dir;
  return j;
}

/// Parses a config document. Missing keys keep their defaults; unknown keys
/// and out-of-range values raise ConfigError.
inline RunConfig parse_config(std::string_view text) {
  using detail::json;
  json root;
  try {
    root = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError("config", std::string("malformed JSON: ") + e.what());
  }
  detail::reject_unknown(root, "",
                         {"seed", "generator", "split", "federation", "train",
                          "scoring", "threshold", "noise", "sweep",
                          "output_dir"});
  RunConfig c;
  auto& e = c.experiment;
  detail::read_number(root, "", "seed", c.seed);

  if (const auto* s = detail::section_of(root, "generator")) {
    detail::reject_unknown(*s, "generator",
                           {"num_tenants", "records_per_tenant", "feature_dim",
                            "anomaly_rate", "anomaly_mix",
                            "per_tenant_baseline_spread", "mix_dispersion"});
    auto& g = e.generator;
    detail::read_number(*s, "generator", "num_tenants", g.num_tenants);
    detail::read_number(*s, "generator", "records_per_tenant",
                        g.records_per_tenant);
    detail::read_number(*s, "generator", "feature_dim", g.feature_dim);
    detail::read_number(*s, "generator", "anomaly_rate", g.anomaly_rate);
    detail::read_number(*s, "generator", "per_tenant_baseline_spread",
                        g.per_tenant_baseline_spread);
    detail::read_number(*s, "generator", "mix_dispersion", g.mix_dispersion);
    if (const auto* m = detail::section_of(*s, "anomaly_mix")) {
      detail::reject_unknown(*m, "generator.anomaly_mix",
                             {"cpu_spike", "mem_leak", "net_congestion"});
      detail::read_number(*m, "generator.anomaly_mix", "cpu_spike",
                          g.anomaly_mix.cpu_spike);
      detail::read_number(*m, "generator.anomaly_mix", "mem_leak",
                          g.anomaly_mix.mem_leak);
      detail::read_number(*m, "generator.anomaly_mix", "net_congestion",
                          g.anomaly_mix.net_congestion);
    }
  }
  if (const auto* s = detail::section_of(root, "split")) {
    detail::reject_unknown(*s, "split", {"eval_fraction"});
    detail::read_number(*s, "split", "eval_fraction", e.eval_fraction);
  }
  if (const auto* s = detail::section_of(root, "federation")) {
    detail::reject_unknown(*s, "federation",
                           {"rounds", "participation_rate",
                            "fixed_participants", "alpha"});
    auto& f = e.federation;
    detail::read_number(*s, "federation", "rounds", f.rounds);
    detail::read_number(*s, "federation", "participation_rate",
                        f.participation_rate);
    detail::read_bool(*s, "federation", "fixed_participants",
                      f.fixed_participants);
    detail::read_number(*s, "federation", "alpha", f.alpha);
  }
  if (const auto* s = detail::section_of(root, "train")) {
    detail::reject_unknown(*s, "train",
                           {"learning_rate", "local_epochs", "batch_size",
                            "lambda", "hidden_dim"});
    auto& t = e.federation.train;
    detail::read_number(*s, "train", "learning_rate", t.learning_rate);
    detail::read_number(*s, "train", "local_epochs", t.local_epochs);
    detail::read_number(*s, "train", "batch_size", t.batch_size);
    detail::read_number(*s, "train", "lambda", t.lambda);
    detail::read_number(*s, "train", "hidden_dim", t.hidden_dim);
  }
  if (const auto* s = detail::section_of(root, "scoring")) {
    detail::reject_unknown(*s, "scoring",
                           {"space", "model", "window", "epsilon",
                            "epsilon_abs"});
    auto& sc = e.scoring;
    sc.space = detail::read_choice(*s, "scoring", "space", to_string(sc.space),
                                   {"embedding", "raw"}) == "raw"
                   ? ScoreSpace::raw
                   : ScoreSpace::embedding;
    sc.model = detail::read_choice(*s, "scoring", "model", to_string(sc.model),
                                   {"personalized", "global"}) == "global"
                   ? EvalModel::global
                   : EvalModel::personalized;
    detail::read_number(*s, "scoring", "window", sc.window);
    detail::read_number(*s, "scoring", "epsilon", sc.epsilon);
    detail::read_number(*s, "scoring", "epsilon_abs", sc.epsilon_abs);
  }
  if (const auto* s = detail::section_of(root, "threshold")) {
    detail::reject_unknown(*s, "threshold", {"kind", "level"});
    auto& th = e.threshold;
    th.kind = detail::read_choice(*s, "threshold", "kind", to_string(th.kind),
                                  {"chi_squared_quantile", "f1_optimal"}) ==
                      "f1_optimal"
                  ? ThresholdKind::f1_optimal
                  : ThresholdKind::chi_squared_quantile;
    detail::read_number(*s, "threshold", "level", th.level);
  }
  if (const auto* s = detail::section_of(root, "noise")) {
    detail::reject_unknown(*s, "noise",
                           {"rate", "feature_sigma", "label_flip_prob"});
    detail::read_number(*s, "noise", "rate", e.noise.rate);
    detail::read_number(*s, "noise", "feature_sigma", e.noise.feature_sigma);
    detail::read_number(*s, "noise", "label_flip_prob",
                        e.noise.label_flip_prob);
  }
  if (const auto* s = detail::section_of(root, "sweep")) {
    detail::reject_unknown(*s, "sweep",
                           {"participation_rates", "noise_rates", "seeds",
                            "threads"});
    detail::read_list(*s, "sweep", "participation_rates",
                      c.participation_rates);
    detail::read_list(*s, "sweep", "noise_rates", c.noise_rates);
    detail::read_list(*s, "sweep", "seeds", c.seeds);
    detail::read_number(*s, "sweep", "threads", c.threads);
  }
  if (const auto it = root.find("output_dir"); it != root.end()) {
    if (!it->is_string()) throw ConfigError("output_dir", "must be a string");
    c.output_dir = it->get<std::string>();
  }
  c.validate();
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

/// Canonical, fully resolved rendering; what `print-default-config` shows
/// and what every output directory receives as config.json.
inline std::string dump_config(const RunConfig& c) {
  return to_json(c).dump(2) + "\n";
}

}  // namespace fedad
