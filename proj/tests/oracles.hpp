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

// Independent reference implementations used by the unit and acceptance
// tests. Nothing here calls into the routine it checks.

#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include "fedad/federation.hpp"
#include "fedad/model.hpp"

namespace oracle {

/// Chi-squared quantile by bisection on Boost's regularized gamma P.
inline double chi_squared_quantile(double level, double dof) {
  const auto cdf = [dof](double x) {
    return boost::math::gamma_p(0.5 * dof, 0.5 * x);
  };
  double lo = 0.0, hi = 1.0;
  while (cdf(hi) < level) hi *= 2.0;
  for (int i = 0; i < 200 && hi - lo > 1e-14 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (cdf(mid) < level ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Sample-weighted mean in 50-digit binary floating point.
inline std::vector<double> weighted_mean(
    std::span<const fedad::ClientUpdate> updates) {
  using big = boost::multiprecision::cpp_bin_float_50;
  const std::size_t p = updates.front().params.size();
  big total = 0;
  for (const auto& u : updates) total += big(u.num_samples);
  std::vector<double> out(p);
  for (std::size_t i = 0; i < p; ++i) {
    big acc = 0;
    for (const auto& u : updates) acc += big(u.num_samples) * big(u.params[i]);
    out[i] = static_cast<double>(acc / total);
  }
  return out;
}

using Matrix = std::vector<std::vector<long double>>;

/// Gauss-Jordan inverse with partial pivoting.
inline Matrix inverse(Matrix a) {
  const std::size_t n = a.size();
  Matrix inv(n, std::vector<long double>(n, 0.0L));
  for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1.0L;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r) {
      if (std::fabs(a[r][c]) > std::fabs(a[piv][c])) piv = r;
    }
    if (a[piv][c] == 0.0L) throw std::runtime_error("singular");
    std::swap(a[c], a[piv]);
    std::swap(inv[c], inv[piv]);
    const long double d = a[c][c];
    for (std::size_t k = 0; k < n; ++k) {
      a[c][k] /= d;
      inv[c][k] /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const long double f = a[r][c];
      if (f == 0.0L) continue;
      for (std::size_t k = 0; k < n; ++k) {
        a[r][k] -= f * a[c][k];
        inv[r][k] -= f * inv[c][k];
      }
    }
  }
  return inv;
}

/// (x - mu)^T S^-1 (x - mu) with an explicit inverse.
inline long double quadratic_form(const Matrix& s, std::span<const double> mu,
                                  std::span<const double> x) {
  const Matrix inv = inverse(s);
  const std::size_t n = mu.size();
  long double acc = 0.0L;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      acc += (static_cast<long double>(x[i]) - mu[i]) * inv[i][j] *
             (static_cast<long double>(x[j]) - mu[j]);
    }
  }
  return acc;
}

struct Moments {
  std::vector<long double> mean;
  Matrix cov;  // population divisor
};

/// Two-pass batch mean and covariance.
inline Moments batch_moments(const std::vector<std::vector<double>>& rows) {
  const std::size_t n = rows.size(), m = rows.front().size();
  Moments r;
  r.mean.assign(m, 0.0L);
  for (const auto& x : rows) {
    for (std::size_t k = 0; k < m; ++k) r.mean[k] += x[k];
  }
  for (auto& v : r.mean) v /= static_cast<long double>(n);
  r.cov.assign(m, std::vector<long double>(m, 0.0L));
  for (const auto& x : rows) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        r.cov[i][j] += (x[i] - r.mean[i]) * (x[j] - r.mean[j]);
      }
    }
  }
  for (auto& row : r.cov) {
    for (auto& v : row) v /= static_cast<long double>(n);
  }
  return r;
}

/// S + eps * tr(S) / m * I, or S + eps_abs * I when the trace vanishes.
inline Matrix shrink(Matrix s, double eps, double eps_abs) {
  const std::size_t m = s.size();
  long double tr = 0.0L;
  for (std::size_t i = 0; i < m; ++i) tr += s[i][i];
  const long double add =
      tr > 0.0L ? eps * tr / static_cast<long double>(m) : eps_abs;
  for (std::size_t i = 0; i < m; ++i) s[i][i] += add;
  return s;
}

/// Naive scalar forward pass: probability and hidden activations.
struct Forward {
  double prob;
  std::vector<double> hidden;
  std::vector<double> pre;
};

inline Forward forward(const fedad::ParamVector& p, std::span<const double> x) {
  const auto& L = p.layout();
  Forward f;
  double z = p.b2();
  for (std::size_t j = 0; j < L.hidden_dim; ++j) {
    double a = p.b1(j);
    for (std::size_t k = 0; k < L.input_dim; ++k) a += p.w1(j, k) * x[k];
    f.pre.push_back(a);
    f.hidden.push_back(std::max(0.0, a));
    z += p.w2(j) * f.hidden.back();
  }
  f.prob = 1.0 / (1.0 + std::exp(-z));
  return f;
}

/// Central finite differences of `fedad::loss` in every coordinate.
inline std::vector<double> numeric_gradient(const fedad::ParamVector& p,
                                            std::span<const fedad::Example> b,
                                            double lambda, double h) {
  std::vector<double> g(p.size());
  fedad::ParamVector q = p;
  for (std::size_t i = 0; i < p.size(); ++i) {
    q[i] = p[i] + h;
    const double up = fedad::loss(q, b, lambda);
    q[i] = p[i] - h;
    const double down = fedad::loss(q, b, lambda);
    q[i] = p[i];
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

}  // namespace oracle
