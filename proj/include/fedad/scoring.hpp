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
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "fedad/chi_squared.hpp"
#include "fedad/error.hpp"

namespace fedad {

/// Sliding-window mean and population covariance over the last `capacity`
/// vectors, with trace-scaled shrinkage for scoring.
///
/// Insertions and evictions update the mean and the co-moment matrix
/// incrementally (Welford and its inverse); after `capacity` evictions the
/// statistics are recomputed from the buffer so rounding drift stays
/// bounded.
class WindowedStats {
 public:
  static constexpr std::size_t kDefaultCapacity = 256;
  static constexpr double kDefaultEpsilon = 1e-3;
  static constexpr double kDefaultEpsilonAbs = 1e-9;

  WindowedStats() = default;
  WindowedStats(std::size_t dim, std::size_t capacity = kDefaultCapacity,
                double epsilon = kDefaultEpsilon,
                double epsilon_abs = kDefaultEpsilonAbs)
      : dim_(dim),
        capacity_(capacity),
        epsilon_(epsilon),
        epsilon_abs_(epsilon_abs),
        buffer_(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(capacity)),
        mean_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim))),
        comoment_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim),
                                        static_cast<Eigen::Index>(dim))) {
    if (dim == 0) throw ContractError("WindowedStats: dimension must be >= 1");
    if (capacity == 0) throw ConfigError("scoring.window", "must be >= 1");
    if (!(epsilon >= 0.0)) throw ConfigError("scoring.epsilon", "must be >= 0");
    if (!(epsilon_abs > 0.0)) {
      throw ConfigError("scoring.epsilon_abs", "must be > 0");
    }
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t count() const noexcept { return count_; }
  double epsilon() const noexcept { return epsilon_; }
  double epsilon_abs() const noexcept { return epsilon_abs_; }

  const Eigen::VectorXd& mean() const noexcept { return mean_; }
  Eigen::MatrixXd covariance() const {
    if (count_ == 0) return comoment_;
    return comoment_ / static_cast<double>(count_);
  }

  /// Window contents, oldest first.
  std::vector<Eigen::VectorXd> contents() const {
    std::vector<Eigen::VectorXd> out;
    out.reserve(count_);
    for (std::size_t i = 0; i < count_; ++i) {
      out.emplace_back(buffer_.col(slot(i)));
    }
    return out;
  }

  void update(std::span<const double> v) {
    if (v.size() != dim_) {
      throw ContractError("WindowedStats::update: dimension mismatch");
    }
    if (!std::all_of(v.begin(), v.end(),
                     [](double x) { return std::isfinite(x); })) {
      throw ContractError("WindowedStats::update: non-finite input");
    }
    const Eigen::Map<const Eigen::VectorXd> x(v.data(),
                                              static_cast<Eigen::Index>(dim_));
    if (count_ == capacity_) {
      evict_oldest();
      if (++evictions_ >= capacity_) {
        evictions_ = 0;
        push(x);
        recompute();
        return;
      }
    }
    push(x);
    add(x);
  }

  /// Shrunk covariance: sigma + epsilon * trace(sigma) / m * I, or
  /// sigma + epsilon_abs * I when the trace vanishes.
  Eigen::MatrixXd shrunk_covariance() const {
    Eigen::MatrixXd s = covariance();
    const double tr = s.trace();
    const double shrink = tr > 0.0
                              ? epsilon_ * tr / static_cast<double>(dim_)
                              : epsilon_abs_;
    s.diagonal().array() += shrink;
    return s;
  }

 private:
  Eigen::Index slot(std::size_t age) const {
    return static_cast<Eigen::Index>((head_ + age) % capacity_);
  }

  void push(const Eigen::Ref<const Eigen::VectorXd>& x) {
    buffer_.col(slot(count_)) = x;
  }

  void add(const Eigen::Ref<const Eigen::VectorXd>& x) {
    ++count_;
    const double n = static_cast<double>(count_);
    const Eigen::VectorXd d = x - mean_;
    mean_ += d / n;
    comoment_.noalias() += ((n - 1.0) / n) * d * d.transpose();
  }

  void evict_oldest() {
    const Eigen::VectorXd x = buffer_.col(slot(0));
    head_ = (head_ + 1) % capacity_;
    const double n = static_cast<double>(count_);
    --count_;
    if (count_ == 0) {
      mean_.setZero();
      comoment_.setZero();
      return;
    }
    const Eigen::VectorXd e = x - mean_;
    mean_ -= e / (n - 1.0);
    comoment_.noalias() -= (n / (n - 1.0)) * e * e.transpose();
  }

  void recompute() {
    ++count_;
    mean_.setZero();
    for (std::size_t i = 0; i < count_; ++i) mean_ += buffer_.col(slot(i));
    mean_ /= static_cast<double>(count_);
    comoment_.setZero();
    for (std::size_t i = 0; i < count_; ++i) {
      const Eigen::VectorXd c = buffer_.col(slot(i)) - mean_;
      comoment_.noalias() += c * c.transpose();
    }
  }

  std::size_t dim_ = 0;
  std::size_t capacity_ = 0;
  double epsilon_ = kDefaultEpsilon;
  double epsilon_abs_ = kDefaultEpsilonAbs;
  Eigen::MatrixXd buffer_;  // dim x capacity ring
  std::size_t head_ = 0;
  std::size_t count_ = 0;
  std::size_t evictions_ = 0;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd comoment_;
};

/// Value-returning form of `WindowedStats::update`.
inline WindowedStats update_window(WindowedStats stats,
                                   std::span<const double> v) {
  stats.update(v);
  return stats;
}

/// Squared Mahalanobis distance of `x` from the window under the shrunk
/// covariance, solved through a Cholesky factor.
inline double mahalanobis(const WindowedStats& stats,
                          std::span<const double> x) {
  if (stats.count() < 2) {
    throw InsufficientData("mahalanobis: window holds " +
                           std::to_string(stats.count()) +
                           " vectors, need at least 2");
  }
  if (x.size() != stats.dim()) {
    throw ContractError("mahalanobis: dimension mismatch");
  }
  const Eigen::Map<const Eigen::VectorXd> xv(
      x.data(), static_cast<Eigen::Index>(x.size()));
  const Eigen::VectorXd diff = xv - stats.mean();
  const Eigen::LLT<Eigen::MatrixXd> llt(stats.shrunk_covariance());
  if (llt.info() != Eigen::Success) {
    throw DegenerateCovariance("mahalanobis: covariance is not positive "
                               "definite after shrinkage");
  }
  const Eigen::VectorXd y = llt.matrixL().solve(diff);
  const double s = y.squaredNorm();
  if (!std::isfinite(s)) {
    throw DegenerateCovariance("mahalanobis: non-finite score");
  }
  return s;
}

/// Reusable factorization for scoring many points against a fixed window.
class MahalanobisScorer {
 public:
  explicit MahalanobisScorer(const WindowedStats& stats)
      : mean_(stats.mean()), llt_(stats.shrunk_covariance()) {
    if (stats.count() < 2) {
      throw InsufficientData("MahalanobisScorer: window holds fewer than 2 "
                             "vectors");
    }
    if (llt_.info() != Eigen::Success) {
      throw DegenerateCovariance("MahalanobisScorer: covariance is not "
                                 "positive definite after shrinkage");
    }
  }

  double operator()(std::span<const double> x) const {
    const Eigen::Map<const Eigen::VectorXd> xv(
        x.data(), static_cast<Eigen::Index>(x.size()));
    const Eigen::VectorXd y = llt_.matrixL().solve(xv - mean_);
    return y.squaredNorm();
  }

 private:
  Eigen::VectorXd mean_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

enum class ThresholdKind { chi_squared_quantile, f1_optimal };

struct ThresholdPolicy {
  ThresholdKind kind = ThresholdKind::chi_squared_quantile;
  double level = 0.99;

  void validate() const {
    if (kind == ThresholdKind::chi_squared_quantile &&
        !(level > 0.0 && level < 1.0)) {
      throw ConfigError("threshold.level", "must lie in (0, 1)");
    }
  }
};

struct ScoredLabel {
  double score = 0.0;
  int label = 0;
};

namespace detail {

/// Threshold maximizing F1 for the rule `score > tau`. Candidates are the
/// midpoints between consecutive distinct sorted scores plus one value just
/// below the minimum (flag everything). Ties go to the larger threshold.
inline double f1_optimal_threshold(std::span<const ScoredLabel> data) {
  std::vector<ScoredLabel> sorted(data.begin(), data.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.score < b.score; });
  std::size_t positives = 0;
  for (const auto& s : sorted) positives += s.label == 1 ? 1 : 0;

  // Sweep tau upward; everything at index >= i is flagged.
  std::size_t tp = positives;
  std::size_t fp = sorted.size() - positives;
  auto f1 = [&](std::size_t tp_, std::size_t fp_) {
    const std::size_t fn = positives - tp_;
    const double denom = 2.0 * static_cast<double>(tp_) +
                         static_cast<double>(fp_) + static_cast<double>(fn);
    return denom > 0.0 ? 2.0 * static_cast<double>(tp_) / denom : 0.0;
  };
  double best_tau = std::nextafter(sorted.front().score,
                                   -std::numeric_limits<double>::infinity());
  double best_f1 = f1(tp, fp);
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j].score == sorted[i].score) {
      if (sorted[j].label == 1) {
        --tp;
      } else {
        --fp;
      }
      ++j;
    }
    if (j == sorted.size()) break;
    const double tau = 0.5 * (sorted[i].score + sorted[j].score);
    const double f = f1(tp, fp);
    if (f >= best_f1) {
      best_f1 = f;
      best_tau = tau;
    }
    i = j;
  }
  return best_tau;
}

}  // namespace detail

/// Decision threshold for squared Mahalanobis scores in `m` dimensions.
inline double threshold(const ThresholdPolicy& policy,
                        std::optional<std::span<const ScoredLabel>> labeled,
                        std::size_t m) {
  policy.validate();
  switch (policy.kind) {
    case ThresholdKind::chi_squared_quantile:
      if (m < 1) throw ConfigError("threshold", "dimension must be >= 1");
      return chi_squared_quantile(policy.level, static_cast<double>(m));
    case ThresholdKind::f1_optimal: {
      if (!labeled || labeled->empty()) {
        throw ConfigError("threshold", "f1_optimal needs labeled scores");
      }
      const bool any_positive =
          std::any_of(labeled->begin(), labeled->end(),
                      [](const auto& s) { return s.label == 1; });
      if (!any_positive) {
        throw ConfigError("threshold", "f1_optimal needs a positive label");
      }
      return detail::f1_optimal_threshold(*labeled);
    }
  }
  throw ConfigError("threshold.kind", "unknown policy");
}

/// 1 iff the score strictly exceeds `tau`.
inline int classify(const WindowedStats& stats, std::span<const double> x,
                    double tau) {
  return mahalanobis(stats, x) > tau ? 1 : 0;
}

}  // namespace fedad
