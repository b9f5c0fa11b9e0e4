// Copyright 2026 The hom-indist Authors
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
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hom/errors.hpp"

namespace hom {

enum class CurveRegime { cw_normalized, pulsed_unnormalized };

inline const char* to_string(CurveRegime r) {
  return r == CurveRegime::cw_normalized ? "cw" : "pulsed";
}

/// Real-valued correlation curve on a uniform, strictly increasing tau grid (s).
struct CorrelationCurve {
  std::vector<double> tau;
  std::vector<double> values;
  CurveRegime regime = CurveRegime::cw_normalized;
  std::map<std::string, std::string> labels;

  std::size_t size() const noexcept { return tau.size(); }
  double spacing() const { return tau.size() > 1 ? (tau.back() - tau.front()) / double(tau.size() - 1) : 0.0; }
  double span() const { return tau.empty() ? 0.0 : tau.back() - tau.front(); }

  void validate() const {
    if (tau.size() != values.size()) throw ValidationError("tau and value arrays differ in length");
    if (tau.size() < 2) throw ValidationError("curve needs at least two points");
    const double h = spacing();
    if (!(h > 0.0)) throw ValidationError("tau grid must be strictly increasing");
    for (std::size_t i = 1; i < tau.size(); ++i) {
      const double step = tau[i] - tau[i - 1];
      if (!(step > 0.0)) throw ValidationError("tau grid must be strictly increasing");
      if (std::abs(step - h) > 1e-9 * h + 1e-9 * std::abs(tau[i]))
        throw ValidationError("tau grid is not uniform");
    }
    for (double v : values)
      if (!std::isfinite(v)) throw ValidationError("curve values must be finite");
  }
};

/// n points from lo to hi inclusive.
inline std::vector<double> uniform_grid(double lo, double hi, std::size_t n) {
  if (n < 2 || !(hi > lo)) throw std::invalid_argument("uniform_grid: need n >= 2 and hi > lo");
  std::vector<double> g(n);
  const double h = (hi - lo) / double(n - 1);
  for (std::size_t i = 0; i < n; ++i) g[i] = lo + h * double(i);
  g.back() = hi;
  return g;
}

/// Grid k*spacing for k in [-m, m] with m = round(half_span / spacing);
/// contains tau = 0 exactly.
inline std::vector<double> symmetric_grid(double half_span, double spacing) {
  if (!(half_span > 0.0) || !(spacing > 0.0))
    throw std::invalid_argument("symmetric_grid: half_span and spacing must be > 0");
  const auto m = static_cast<long>(std::llround(half_span / spacing));
  std::vector<double> g;
  g.reserve(std::size_t(2 * m + 1));
  for (long k = -m; k <= m; ++k) g.push_back(double(k) * spacing);
  return g;
}

inline double trapezoid(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("trapezoid: size mismatch");
  double acc = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) acc += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
  return acc;
}

/// Linear interpolation on a sorted grid; clamps outside the range.
inline double interpolate(std::span<const double> x, std::span<const double> y, double at) {
  if (x.empty()) throw std::invalid_argument("interpolate: empty grid");
  if (at <= x.front()) return y.front();
  if (at >= x.back()) return y.back();
  const auto it = std::upper_bound(x.begin(), x.end(), at);
  const std::size_t i = std::size_t(it - x.begin());
  const double w = (at - x[i - 1]) / (x[i] - x[i - 1]);
  return (1.0 - w) * y[i - 1] + w * y[i];
}

inline bool same_grid(const CorrelationCurve& a, const CorrelationCurve& b, double rel = 1e-9) {
  if (a.tau.size() != b.tau.size()) return false;
  const double scale = std::max(a.spacing(), 1e-300);
  for (std::size_t i = 0; i < a.tau.size(); ++i)
    if (std::abs(a.tau[i] - b.tau[i]) > rel * scale) return false;
  return true;
}

}  // namespace hom
