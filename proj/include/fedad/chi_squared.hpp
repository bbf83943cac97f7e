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

#include <cmath>
#include <limits>

#include "fedad/error.hpp"

namespace fedad {

/// Regularized lower incomplete gamma P(a, x): power series below a + 1,
/// Lentz continued fraction for Q = 1 - P above.
inline double regularized_lower_gamma(double a, double x) {
  if (!(a > 0.0)) throw ContractError("regularized_lower_gamma: a must be > 0");
  if (!(x >= 0.0)) throw ContractError("regularized_lower_gamma: x must be >= 0");
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;

  constexpr int kMaxIter = 1000;
  constexpr double kEps = 1e-16;
  const double log_prefix = a * std::log(x) - x - std::lgamma(a);

  if (x < a + 1.0) {
    double term = 1.0 / a;
    double sum = term;
    for (int n = 1; n < kMaxIter; ++n) {
      term *= x / (a + n);
      sum += term;
      if (std::abs(term) < std::abs(sum) * kEps) break;
    }
    return std::min(1.0, sum * std::exp(log_prefix));
  }

  constexpr double kTiny = std::numeric_limits<double>::min() / kEps;
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxIter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) break;
  }
  return std::max(0.0, 1.0 - std::exp(log_prefix) * h);
}

inline double chi_squared_cdf(double x, double dof) {
  if (x <= 0.0) return 0.0;
  return regularized_lower_gamma(0.5 * dof, 0.5 * x);
}

/// Quantile of the chi-squared distribution by bisection on the CDF.
inline double chi_squared_quantile(double level, double dof,
                                   double tolerance = 1e-12) {
  if (!(level > 0.0 && level < 1.0)) {
    throw ConfigError("threshold.level", "must lie in (0, 1)");
  }
  if (!(dof > 0.0)) throw ConfigError("threshold.dof", "must be > 0");
  double lo = 0.0;
  double hi = std::max(1.0, dof);
  while (chi_squared_cdf(hi, dof) < level) {
    lo = hi;
    hi *= 2.0;
  }
  while (hi - lo > 0.5 * tolerance) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (chi_squared_cdf(mid, dof) < level) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace fedad
