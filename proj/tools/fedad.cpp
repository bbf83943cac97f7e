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

// fedad: command-line front end.
//
//   fedad print-default-config
//   fedad generate --config c.json --out data.csv
//   fedad train    --config c.json --data data.csv --out run/
//   fedad sweep    --config c.json --kind participation --out sweep/
//   fedad score    --config c.json --model run/model.txt --data data.csv --out scores.csv

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fedad/cli.hpp"

namespace {

namespace fs = std::filesystem;
using namespace fedad;

struct Flags {
  std::optional<std::string> config;
  std::optional<std::string> data;
  std::optional<std::string> out;
  std::optional<std::string> model;
  std::optional<std::uint64_t> seed;
  std::string kind;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON config file (defaults if omitted)");
  cmd->add_option("--seed", f.seed, "Override the top-level seed");
}

fs::path required(const std::optional<std::string>& v, const char* flag) {
  if (!v || v->empty()) {
    throw cli::UsageError(std::string(flag) + " is required");
  }
  return *v;
}

fs::path out_dir(const Flags& f, const RunConfig& cfg) {
  if (f.out && !f.out->empty()) return *f.out;
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  throw cli::UsageError("--out is required (or set output_dir in the config)");
}

std::optional<fs::path> as_path(const std::optional<std::string>& s) {
  if (!s) return std::nullopt;
  return fs::path(*s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated multi-tenant anomaly detection simulator"};
  app.require_subcommand(1);
  Flags f;

  auto* print = app.add_subcommand("print-default-config",
                                   "Print the fully resolved default config");

  auto* gen = app.add_subcommand("generate", "Write a synthetic telemetry CSV");
  add_common(gen, f);
  gen->add_option("--out", f.out, "Output CSV path");

  auto* train = app.add_subcommand("train", "Federated training on a CSV");
  add_common(train, f);
  train->add_option("--data", f.data, "Telemetry CSV");
  train->add_option("--out", f.out, "Output directory");

  auto* sweep = app.add_subcommand("sweep", "Participation or noise sweep");
  add_common(sweep, f);
  sweep->add_option("--kind", f.kind, "participation | noise");
  sweep->add_option("--out", f.out, "Output directory");

  auto* score = app.add_subcommand("score", "Score a CSV with a model snapshot");
  add_common(score, f);
  score->add_option("--model", f.model, "Model snapshot (model.txt)");
  score->add_option("--data", f.data, "Telemetry CSV");
  score->add_option("--out", f.out, "Score dump CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? cli::kExitOk : cli::kExitUsage;
  }

  try {
    if (print->parsed()) {
      std::cout << cli::config_json(RunConfig{});
      return cli::kExitOk;
    }
    const RunConfig cfg = cli::resolve_config(as_path(f.config), f.seed);
    if (gen->parsed()) {
      cli::cmd_generate(cfg, required(f.out, "--out"));
    } else if (train->parsed()) {
      const auto data = required(f.data, "--data");
      const auto r = cli::cmd_train(cfg, data, out_dir(f, cfg));
      std::cout << "precision = " << format_double(r.row.precision) << '\n'
                << "recall = " << format_double(r.row.recall) << '\n'
                << "f1 = " << format_double(r.row.f1) << '\n';
    } else if (sweep->parsed()) {
      if (f.kind.empty()) throw cli::UsageError("--kind is required");
      const auto kind = cli::parse_sweep_kind(f.kind);
      const auto r = cli::cmd_sweep(cfg, kind, out_dir(f, cfg));
      for (const auto& p : r.summary) {
        std::cout << r.sweep_var << '=' << format_double(p.value)
                  << " f1=" << format_double(p.f1.mean) << " +- "
                  << format_double(p.f1.std) << '\n';
      }
    } else if (score->parsed()) {
      const auto model = required(f.model, "--model");
      const auto data = required(f.data, "--data");
      cli::cmd_score(model, data, cfg, required(f.out, "--out"));
    }
  } catch (const std::exception& e) {
    std::cerr << "fedad: " << e.what() << '\n';
    return cli::exit_code_for(e);
  }
  return cli::kExitOk;
}
