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
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "fedad/error.hpp"
#include "fedad/rng.hpp"
#include "fedad/text.hpp"

namespace fedad {

/// Shape of the one-hidden-layer classifier and the offsets of each block
/// inside the flat parameter vector: W1 (h x d, row-major), b1 (h), w2 (h),
/// b2 (1).
struct Layout {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;

  constexpr std::size_t w1_offset() const noexcept { return 0; }
  constexpr std::size_t b1_offset() const noexcept {
    return hidden_dim * input_dim;
  }
  constexpr std::size_t w2_offset() const noexcept {
    return b1_offset() + hidden_dim;
  }
  constexpr std::size_t b2_offset() const noexcept {
    return w2_offset() + hidden_dim;
  }
  constexpr std::size_t size() const noexcept { return b2_offset() + 1; }

  constexpr bool operator==(const Layout&) const = default;
};

/// Flat real-valued model parameters tagged with their layout.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(Layout layout)
      : layout_(layout), values_(layout.size(), 0.0) {}
  ParamVector(Layout layout, std::vector<double> values)
      : layout_(layout), values_(std::move(values)) {
    if (values_.size() != layout_.size()) {
      throw ContractError("ParamVector: value count does not match layout");
    }
  }

  const Layout& layout() const noexcept { return layout_; }
  std::size_t size() const noexcept { return values_.size(); }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  double w1(std::size_t row, std::size_t col) const {
    return values_[layout_.w1_offset() + row * layout_.input_dim + col];
  }
  double b1(std::size_t j) const { return values_[layout_.b1_offset() + j]; }
  double w2(std::size_t j) const { return values_[layout_.w2_offset() + j]; }
  double b2() const { return values_[layout_.b2_offset()]; }

  double squared_norm() const {
    double s = 0.0;
    for (double v : values_) s += v * v;
    return s;
  }
  double norm() const { return std::sqrt(squared_norm()); }

  bool operator==(const ParamVector&) const = default;

 private:
  Layout layout_;
  std::vector<double> values_;
};

inline void require_same_layout(const ParamVector& a, const ParamVector& b,
                                const char* where) {
  if (a.layout() != b.layout()) {
    throw ContractError(std::string(where) + ": parameter layouts differ");
  }
}

struct TrainConfig {
  double learning_rate = 0.05;
  std::size_t local_epochs = 3;
  std::size_t batch_size = 32;
  double lambda = 1e-4;
  std::size_t hidden_dim = 16;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
      throw ConfigError("train.learning_rate", "must be > 0");
    }
    if (local_epochs < 1) throw ConfigError("train.local_epochs", "must be >= 1");
    if (batch_size < 1) throw ConfigError("train.batch_size", "must be >= 1");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
      throw ConfigError("train.lambda", "must be >= 0");
    }
    if (hidden_dim < 1) throw ConfigError("train.hidden_dim", "must be >= 1");
  }
};

/// A labeled input as seen by the model: a feature view and a 0/1 target.
struct Example {
  std::span<const double> features;
  int label = 0;
};

/// Glorot-uniform weights, zero biases.
inline ParamVector init_params(std::size_t d, std::size_t h,
                               std::uint64_t seed) {
  if (d < 1 || h < 1) throw ContractError("init_params: d and h must be >= 1");
  const Layout layout{d, h};
  ParamVector p(layout);
  Rng rng(seed);
  const double lim1 = std::sqrt(6.0 / static_cast<double>(d + h));
  const double lim2 = std::sqrt(6.0 / static_cast<double>(h + 1));
  std::uniform_real_distribution<double> u1(-lim1, lim1);
  std::uniform_real_distribution<double> u2(-lim2, lim2);
  for (std::size_t i = 0; i < h * d; ++i) p[layout.w1_offset() + i] = u1(rng);
  for (std::size_t j = 0; j < h; ++j) p[layout.w2_offset() + j] = u2(rng);
  return p;
}

/// Logistic function via exp(-softplus(-z)); finite for any finite z.
inline double sigmoid(double z) noexcept {
  const double u = -z;
  const double softplus = std::max(u, 0.0) + std::log1p(std::exp(-std::abs(u)));
  return std::exp(-softplus);
}

struct ForwardResult {
  double prob = 0.5;
  std::vector<double> embedding;
};

namespace detail {

struct ForwardTrace {
  std::vector<double> pre;  // W1 x + b1
  std::vector<double> act;  // relu(pre)
  double logit = 0.0;
  double prob = 0.5;
};

inline void forward_into(const ParamVector& p, std::span<const double> x,
                         ForwardTrace& t) {
  const auto& L = p.layout();
  const std::size_t d = L.input_dim, h = L.hidden_dim;
  const auto v = p.values();
  t.pre.resize(h);
  t.act.resize(h);
  double logit = v[L.b2_offset()];
  for (std::size_t j = 0; j < h; ++j) {
    double z = v[L.b1_offset() + j];
    const double* row = v.data() + L.w1_offset() + j * d;
    for (std::size_t k = 0; k < d; ++k) z += row[k] * x[k];
    t.pre[j] = z;
    t.act[j] = z > 0.0 ? z : 0.0;
    logit += v[L.w2_offset() + j] * t.act[j];
  }
  t.logit = logit;
  t.prob = sigmoid(logit);
}

inline void require_input_dim(const ParamVector& p, std::size_t n) {
  if (n != p.layout().input_dim) {
    throw ContractError("input has dimension " + std::to_string(n) +
                        ", model expects " +
                        std::to_string(p.layout().input_dim));
  }
}

inline constexpr double kProbClamp = 1e-12;
// Clamping the logit at +-logit(1 - kProbClamp) is the same as clamping the
// probability to [kProbClamp, 1 - kProbClamp].
inline const double kLogitClamp = std::log((1.0 - kProbClamp) / kProbClamp);

inline double softplus(double z) {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

/// Clamped BCE evaluated from the logit; stays accurate when the
/// probability rounds to 0 or 1.
inline double bce(double logit, int label) {
  const double z = std::clamp(logit, -kLogitClamp, kLogitClamp);
  return label == 1 ? softplus(-z) : softplus(z);
}

}  // namespace detail

/// Class probability and hidden-layer embedding relu(W1 x + b1).
inline ForwardResult forward(const ParamVector& p, std::span<const double> x) {
  detail::require_input_dim(p, x.size());
  detail::ForwardTrace t;
  detail::forward_into(p, x, t);
  return {t.prob, std::move(t.act)};
}

/// Mean binary cross-entropy plus lambda * ||p||^2 (biases included).
inline double loss(const ParamVector& p, std::span<const Example> batch,
                   double lambda) {
  if (batch.empty()) throw ContractError("loss: empty batch");
  detail::ForwardTrace t;
  double sum = 0.0;
  for (const auto& ex : batch) {
    detail::require_input_dim(p, ex.features.size());
    detail::forward_into(p, ex.features, t);
    sum += detail::bce(t.logit, ex.label);
  }
  return sum / static_cast<double>(batch.size()) + lambda * p.squared_norm();
}

/// Exact gradient of `loss`. The relu subgradient at 0 is 0, and samples
/// whose probability sits on the BCE clamp contribute nothing.
inline ParamVector gradient(const ParamVector& p, std::span<const Example> batch,
                            double lambda) {
  if (batch.empty()) throw ContractError("gradient: empty batch");
  const auto& L = p.layout();
  const std::size_t d = L.input_dim, h = L.hidden_dim;
  ParamVector g(L);
  auto gv = g.values();
  const auto pv = p.values();
  const double inv_n = 1.0 / static_cast<double>(batch.size());

  detail::ForwardTrace t;
  for (const auto& ex : batch) {
    detail::require_input_dim(p, ex.features.size());
    detail::forward_into(p, ex.features, t);
    if (std::abs(t.logit) >= detail::kLogitClamp) {
      continue;
    }
    const double dlogit = (t.prob - static_cast<double>(ex.label)) * inv_n;
    gv[L.b2_offset()] += dlogit;
    for (std::size_t j = 0; j < h; ++j) {
      gv[L.w2_offset() + j] += dlogit * t.act[j];
      if (!(t.pre[j] > 0.0)) continue;
      const double dz = dlogit * pv[L.w2_offset() + j];
      gv[L.b1_offset() + j] += dz;
      double* row = gv.data() + L.w1_offset() + j * d;
      for (std::size_t k = 0; k < d; ++k) row[k] += dz * ex.features[k];
    }
  }
  if (lambda != 0.0) {
    for (std::size_t i = 0; i < gv.size(); ++i) gv[i] += 2.0 * lambda * pv[i];
  }
  return g;
}

/// Labeled dataset the trainer can read: `size()`, `features(i)`, `label(i)`.
template <class Data>
concept TrainingData = requires(const Data& d, std::size_t i) {
  { d.size() } -> std::convertible_to<std::size_t>;
  { d.features(i) } -> std::convertible_to<std::span<const double>>;
  { d.label(i) } -> std::convertible_to<int>;
};

template <TrainingData Data>
std::vector<Example> examples_of(const Data& data) {
  std::vector<Example> out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    out.push_back({data.features(i), data.label(i)});
  }
  return out;
}

struct TrainResult {
  ParamVector params;
  double final_epoch_loss = 0.0;
};

/// Mini-batch gradient descent for `cfg.local_epochs` epochs. Each epoch
/// shuffles with a seed keyed on the epoch; members of a batch are visited
/// in ascending index order. The reported loss is the sample-weighted mean
/// of the per-batch losses of the last epoch, each evaluated before its
/// step.
template <TrainingData Data>
TrainResult local_train(const ParamVector& p0, const Data& data,
                        const TrainConfig& cfg) {
  cfg.validate();
  const std::size_t n = data.size();
  if (n == 0) throw ContractError("local_train: empty dataset");
  const auto all = examples_of(data);

  ParamVector p = p0;
  std::vector<Example> batch;
  batch.reserve(cfg.batch_size);
  double epoch_loss = 0.0;
  for (std::size_t epoch = 0; epoch < cfg.local_epochs; ++epoch) {
    const auto order = shuffled_indices(n, derive_seed(cfg.seed, "epoch", epoch));
    epoch_loss = 0.0;
    std::size_t b = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size, ++b) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      std::vector<std::size_t> members(order.begin() + start,
                                       order.begin() + stop);
      std::sort(members.begin(), members.end());
      batch.clear();
      for (std::size_t i : members) batch.push_back(all[i]);

      const double l = loss(p, batch, cfg.lambda);
      if (!std::isfinite(l)) throw TrainingDivergence(epoch, b);
      epoch_loss += l * static_cast<double>(batch.size()) / static_cast<double>(n);

      const auto g = gradient(p, batch, cfg.lambda);
      auto pv = p.values();
      const auto gv = g.values();
      for (std::size_t i = 0; i < pv.size(); ++i) {
        pv[i] -= cfg.learning_rate * gv[i];
      }
      if (!std::all_of(pv.begin(), pv.end(),
                       [](double v) { return std::isfinite(v); })) {
        throw TrainingDivergence(epoch, b);
      }
    }
  }
  return {std::move(p), epoch_loss};
}

// ---------------------------------------------------------------------------
// Snapshot file: "d h" header, then one value per line.
// ---------------------------------------------------------------------------

inline void write_snapshot(std::ostream& os, const ParamVector& p) {
  os << p.layout().input_dim << ' ' << p.layout().hidden_dim << '\n';
  for (double v : p.values()) os << format_double(v) << '\n';
}

inline std::string to_snapshot(const ParamVector& p) {
  std::ostringstream os;
  write_snapshot(os, p);
  return os.str();
}

inline ParamVector read_snapshot(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ParseError(1, "empty snapshot");
  std::istringstream header(line);
  std::int64_t d = 0, h = 0;
  if (!(header >> d >> h) || d < 1 || h < 1) {
    throw ParseError(1, "snapshot header must be 'd h'");
  }
  const Layout layout{static_cast<std::size_t>(d), static_cast<std::size_t>(h)};
  std::vector<double> values;
  values.reserve(layout.size());
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto v = parse_double(line);
    if (!v) throw ParseError(lineno, "not a number: '" + line + "'");
    values.push_back(*v);
  }
  if (values.size() != layout.size()) {
    throw ParseError(lineno, "expected " + std::to_string(layout.size()) +
                                 " values, found " +
                                 std::to_string(values.size()));
  }
  return ParamVector(layout, std::move(values));
}

inline ParamVector load_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_snapshot(in);
}

}  // namespace fedad
