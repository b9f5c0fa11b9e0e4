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

// Every closed-form correlation curve here is a constant plus a sum of
// two-sided exponentials a * exp(-r |tau - c|). Keeping that structure
// explicit gives exact Gaussian-IRF convolution for fitting.

#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

namespace hom {

/// exp(x^2) erfc(x), stable for large positive x.
inline double erfcx(double x) {
  if (x < 25.0) {
    if (x < -26.0) return std::numeric_limits<double>::infinity();
    return std::exp(x * x) * std::erfc(x);
  }
  const double inv2 = 1.0 / (x * x);
  return (1.0 - 0.5 * inv2 * (1.0 - 1.5 * inv2 * (1.0 - 2.5 * inv2))) /
         (x * std::sqrt(std::numbers::pi));
}

struct ExpTerm {
  double amplitude = 0.0;
  double rate = 0.0;    // 1/s, > 0
  double center = 0.0;  // s
};

struct ExpTermSum {
  double constant = 0.0;
  std::vector<ExpTerm> terms;

  double operator()(double tau) const {
    double v = constant;
    for (const auto& t : terms) v += t.amplitude * std::exp(-t.rate * std::abs(tau - t.center));
    return v;
  }

  /// Value of the sum convolved with a unit-area Gaussian of width sigma.
  double gaussian_smoothed(double tau, double sigma) const {
    if (sigma <= 0.0) return (*this)(tau);
    double v = constant;
    for (const auto& t : terms) v += t.amplitude * smoothed_two_sided_exp(tau - t.center, t.rate, sigma);
    return v;
  }

  /// Mean over [lo, hi] of the (optionally smoothed) sum, Simpson rule.
  double bin_average(double lo, double hi, double sigma) const {
    const double mid = 0.5 * (lo + hi);
    return (gaussian_smoothed(lo, sigma) + 4.0 * gaussian_smoothed(mid, sigma) +
            gaussian_smoothed(hi, sigma)) / 6.0;
  }

  /// exp(-r|t|) convolved with N(0, sigma^2).
  static double smoothed_two_sided_exp(double t, double r, double sigma) {
    return 0.5 * (one_sided(t, r, sigma) + one_sided(-t, r, sigma));
  }

 private:
  // exp(r^2 s^2/2 - r t) erfc((r s^2 - t)/(s sqrt2)), rearranged so neither
  // factor overflows.
  static double one_sided(double t, double r, double sigma) {
    const double u = (r * sigma * sigma - t) / (sigma * std::numbers::sqrt2);
    if (u >= 0.0) return std::exp(-t * t / (2.0 * sigma * sigma)) * erfcx(u);
    return std::exp(0.5 * r * r * sigma * sigma - r * t) * std::erfc(u);
  }
};

}  // namespace hom
