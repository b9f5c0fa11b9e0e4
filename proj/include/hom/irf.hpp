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
#include <numbers>
#include <vector>

#include "hom/curve.hpp"
#include "hom/errors.hpp"

namespace hom {

/// Detector timing response. Gaussian kernels are described by sigma (s);
/// tabulated kernels by a unit-area, nonnegative curve centred near 0.
struct DetectorIRF {
  enum class Shape { none, gaussian, tabulated };

  Shape shape = Shape::none;
  double sigma = 0.0;
  CorrelationCurve table;

  static DetectorIRF gaussian(double sigma) {
    DetectorIRF irf;
    irf.shape = Shape::gaussian;
    irf.sigma = sigma;
    irf.validate();
    return irf;
  }
  static DetectorIRF tabulated(CorrelationCurve table) {
    DetectorIRF irf;
    irf.shape = Shape::tabulated;
    irf.table = std::move(table);
    irf.validate();
    return irf;
  }

  /// Nominal full width (s): +-3 sigma, or the table span.
  double width() const {
    switch (shape) {
      case Shape::gaussian: return 6.0 * sigma;
      case Shape::tabulated: return table.span();
      case Shape::none: break;
    }
    return 0.0;
  }

  void validate() const {
    if (shape == Shape::gaussian) {
      if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ValidationError("must be > 0", "sigma");
    } else if (shape == Shape::tabulated) {
      table.validate();
      for (double v : table.values)
        if (v < 0.0) throw ValidationError("tabulated IRF must be nonnegative", "table");
      const double area = trapezoid(table.tau, table.values);
      if (std::abs(area - 1.0) > 1e-6)
        throw ValidationError("tabulated IRF must have unit area (got " + std::to_string(area) + ")",
                              "table");
    }
  }
};

namespace detail {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Kernel weights w[k + K] for offsets k*h, k in [-K, K], summing to 1.
inline std::vector<double> irf_kernel(const DetectorIRF& irf, double h) {
  std::vector<double> w;
  if (irf.shape == DetectorIRF::Shape::gaussian) {
    const auto k_max = static_cast<long>(std::ceil(6.0 * irf.sigma / h));
    for (long k = -k_max; k <= k_max; ++k) {
      const double lo = (double(k) - 0.5) * h / irf.sigma;
      const double hi = (double(k) + 0.5) * h / irf.sigma;
      w.push_back(normal_cdf(hi) - normal_cdf(lo));
    }
  } else {
    const auto& t = irf.table;
    const double reach = std::max(std::abs(t.tau.front()), std::abs(t.tau.back()));
    const auto k_max = static_cast<long>(std::ceil(reach / h));
    for (long k = -k_max; k <= k_max; ++k) {
      const double at = double(k) * h;
      w.push_back(at < t.tau.front() || at > t.tau.back() ? 0.0 : interpolate(t.tau, t.values, at));
    }
  }
  double sum = 0.0;
  for (double v : w) sum += v;
  if (!(sum > 0.0)) throw ValidationError("IRF kernel is empty on this grid");
  for (double& v : w) v /= sum;
  return w;
}

}  // namespace detail

/// Direct-sum convolution on the curve's own grid; values beyond the grid
/// are taken equal to the nearest edge value.
inline CorrelationCurve convolve_irf(const CorrelationCurve& curve, const DetectorIRF& irf) {
  curve.validate();
  irf.validate();
  if (irf.shape == DetectorIRF::Shape::none) return curve;
  if (irf.width() > 0.2 * curve.span())
    throw ValidationError("IRF width exceeds 20% of the grid span", "detector");

  const std::vector<double> w = detail::irf_kernel(irf, curve.spacing());
  const auto k_max = static_cast<long>(w.size() / 2);
  const auto n = static_cast<long>(curve.size());
  CorrelationCurve out = curve;
  for (long i = 0; i < n; ++i) {
    double acc = 0.0;
    for (long k = -k_max; k <= k_max; ++k) {
      const long j = std::clamp(i - k, 0L, n - 1);
      acc += w[std::size_t(k + k_max)] * curve.values[std::size_t(j)];
    }
    out.values[std::size_t(i)] = acc;
  }
  out.labels["irf"] = irf.shape == DetectorIRF::Shape::gaussian
                          ? "gaussian sigma=" + std::to_string(irf.sigma)
                          : "tabulated";
  return out;
}

}  // namespace hom
