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

// Bounded Levenberg-Marquardt and the characterization fits
// (Lorentzian linescans, power broadening, saturation).

#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hom/errors.hpp"

namespace hom {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct FitResult {
  std::vector<std::string> names;
  VectorXd params;
  VectorXd sigmas;
  MatrixXd covariance;
  double residual_norm = 0.0;  // sqrt of the weighted sum of squared residuals
  double chi2 = 0.0;
  double reduced_chi2 = 0.0;
  int n_points = 0;
  int n_iter = 0;
  int rank = 0;
  bool converged = false;
  std::vector<std::string> warnings;
  std::map<std::string, std::string> labels;

  std::size_t index(const std::string& name) const {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw std::out_of_range("no fit parameter named '" + name + "'");
    return std::size_t(it - names.begin());
  }
  bool has(const std::string& name) const {
    return std::find(names.begin(), names.end(), name) != names.end();
  }
  double param(const std::string& name) const { return params(Eigen::Index(index(name))); }
  double sigma(const std::string& name) const { return sigmas(Eigen::Index(index(name))); }

  nlohmann::json to_json() const {
    nlohmann::json j;
    for (std::size_t i = 0; i < names.size(); ++i) {
      j["params"][names[i]] = params(Eigen::Index(i));
      j["sigmas"][names[i]] = sigmas(Eigen::Index(i));
    }
    std::vector<std::vector<double>> cov(std::size_t(covariance.rows()));
    for (Eigen::Index r = 0; r < covariance.rows(); ++r)
      for (Eigen::Index c = 0; c < covariance.cols(); ++c) cov[std::size_t(r)].push_back(covariance(r, c));
    j["covariance"] = cov;
    j["residual_norm"] = residual_norm;
    j["chi2"] = chi2;
    j["reduced_chi2"] = reduced_chi2;
    j["n_points"] = n_points;
    j["n_iter"] = n_iter;
    j["rank"] = rank;
    j["converged"] = converged;
    j["warnings"] = warnings;
    for (const auto& [k, v] : labels) j["labels"][k] = v;
    return j;
  }
};

struct FitOptions {
  int max_iter = 200;
  double xtol = 1e-12;    // relative step
  double ftol = 1e-15;    // relative cost decrease
  double gtol = 1e-14;    // scaled gradient
  double lambda0 = 1e-3;
  bool scale_covariance = true;  // multiply by chi2 / (n - p)
};

struct Bounds {
  VectorXd lower;
  VectorXd upper;

  static Bounds unbounded(Eigen::Index n) {
    const double inf = std::numeric_limits<double>::infinity();
    return {VectorXd::Constant(n, -inf), VectorXd::Constant(n, inf)};
  }
};

/// Model values at every data point for parameters p.
using VectorModel = std::function<VectorXd(const VectorXd&)>;
/// d model / d p, rows = data points.
using JacobianModel = std::function<MatrixXd(const VectorXd&)>;

namespace detail {

inline VectorXd clamp_to(const VectorXd& p, const Bounds& b) {
  return p.cwiseMax(b.lower).cwiseMin(b.upper);
}

}  // namespace detail

/// Central (one-sided at active bounds) finite-difference Jacobian.
inline MatrixXd numeric_jacobian(const VectorModel& f, const VectorXd& p, const Bounds& b,
                                 const VectorXd& typical) {
  const VectorXd f0 = f(p);
  MatrixXd j(f0.size(), p.size());
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    const double h = 1e-6 * std::max(std::abs(p(k)), typical(k));
    VectorXd hi = p, lo = p;
    hi(k) = std::min(p(k) + h, b.upper(k));
    lo(k) = std::max(p(k) - h, b.lower(k));
    const double span = hi(k) - lo(k);
    if (span <= 0.0) {
      j.col(k).setZero();
      continue;
    }
    j.col(k) = (f(hi) - f(lo)) / span;
  }
  return j;
}

/// Weighted least squares: minimise sum_i w_i (y_i - f_i(p))^2 within box
/// bounds. The step solves the column-scaled damped problem by QR; trial
/// points are projected onto the box.
inline FitResult levenberg_marquardt(const VectorModel& model, const VectorXd& y, const VectorXd& w,
                                     const VectorXd& p0, const Bounds& bounds,
                                     const std::vector<std::string>& names,
                                     const JacobianModel& jacobian = nullptr,
                                     const FitOptions& opt = {}) {
  const Eigen::Index n = y.size();
  const Eigen::Index np = p0.size();
  if (w.size() != n) throw std::invalid_argument("fit: weights and data differ in length");
  if (Eigen::Index(names.size()) != np) throw std::invalid_argument("fit: one name per parameter");
  if (bounds.lower.size() != np || bounds.upper.size() != np)
    throw std::invalid_argument("fit: bounds do not match parameter count");
  for (Eigen::Index k = 0; k < np; ++k)
    if (!(p0(k) >= bounds.lower(k) && p0(k) <= bounds.upper(k)))
      throw std::invalid_argument("fit: initial value of '" + names[std::size_t(k)] + "' is outside its bounds");
  if ((w.array() < 0.0).any()) throw std::invalid_argument("fit: weights must be >= 0");

  const VectorXd sw = w.cwiseSqrt();
  // Finite-difference scale: |p0|, or a thousandth of a finite bound span
  // (else 1) for parameters starting at zero.
  VectorXd typical = p0.cwiseAbs();
  for (Eigen::Index k = 0; k < np; ++k)
    if (typical(k) == 0.0) {
      const double span = bounds.upper(k) - bounds.lower(k);
      typical(k) = std::isfinite(span) && span > 0.0 ? 1e-3 * span : 1.0;
    }
  auto residual = [&](const VectorXd& p) -> VectorXd { return sw.cwiseProduct(model(p) - y); };
  auto jac = [&](const VectorXd& p) -> MatrixXd {
    MatrixXd j = jacobian ? jacobian(p) : numeric_jacobian(model, p, bounds, typical);
    return sw.asDiagonal() * j;
  };

  FitResult res;
  res.names = names;
  res.n_points = int(n);
  VectorXd p = p0;
  VectorXd r = residual(p);
  if (!r.allFinite()) throw NumericalError("fit: model is not finite at the initial point");
  double cost = r.squaredNorm();
  double lambda = opt.lambda0;
  MatrixXd j = jac(p);

  for (res.n_iter = 0; res.n_iter < opt.max_iter; ++res.n_iter) {
    VectorXd scale = j.colwise().norm().transpose();
    for (Eigen::Index k = 0; k < np; ++k)
      if (!(scale(k) > 0.0)) scale(k) = 1.0;
    MatrixXd js = j * scale.cwiseInverse().asDiagonal();
    VectorXd grad = js.transpose() * r;
    // Parameters held at a bound by a gradient pointing outward do not move.
    for (Eigen::Index k = 0; k < np; ++k) {
      const bool pinned = (p(k) <= bounds.lower(k) && grad(k) > 0.0) || (p(k) >= bounds.upper(k) && grad(k) < 0.0);
      if (pinned) {
        grad(k) = 0.0;
        js.col(k).setZero();
      }
    }
    if (cost == 0.0 || grad.lpNorm<Eigen::Infinity>() <= opt.gtol * std::max(std::sqrt(cost), 1e-300)) {
      res.converged = true;
      break;
    }

    bool accepted = false;
    bool tiny_step = false;
    for (int attempt = 0; attempt < 40 && !accepted; ++attempt) {
      MatrixXd a(n + np, np);
      a.topRows(n) = js;
      a.bottomRows(np) = std::sqrt(lambda) * MatrixXd::Identity(np, np);
      VectorXd rhs = VectorXd::Zero(n + np);
      rhs.head(n) = -r;
      const VectorXd u = a.colPivHouseholderQr().solve(rhs);
      const VectorXd trial = detail::clamp_to(p + u.cwiseQuotient(scale), bounds);
      const VectorXd step = trial - p;
      const bool small = step.norm() <= opt.xtol * (p.norm() + opt.xtol);
      const VectorXd r_trial = residual(trial);
      const double c_trial = r_trial.allFinite() ? r_trial.squaredNorm() : std::numeric_limits<double>::infinity();
      if (c_trial < cost) {
        const double rel_drop = (cost - c_trial) / cost;
        p = trial;
        r = r_trial;
        cost = c_trial;
        lambda = std::max(lambda / 10.0, 1e-12);
        accepted = true;
        if (small || rel_drop <= opt.ftol) tiny_step = true;
      } else if (small) {
        tiny_step = true;
        break;
      } else {
        lambda *= 10.0;
      }
    }
    if (accepted) j = jac(p);
    if (tiny_step || !accepted) {
      res.converged = tiny_step;
      if (!accepted && !tiny_step) res.warnings.push_back("step rejected at maximum damping");
      break;
    }
  }
  if (res.n_iter >= opt.max_iter) res.warnings.push_back("maximum iterations reached");

  res.params = p;
  res.chi2 = cost;
  res.residual_norm = std::sqrt(cost);
  const int dof = int(n - np);
  res.reduced_chi2 = dof > 0 ? cost / dof : 0.0;

  VectorXd scale = j.colwise().norm().transpose();
  for (Eigen::Index k = 0; k < np; ++k)
    if (!(scale(k) > 0.0)) scale(k) = 1.0;
  const MatrixXd js = j * scale.cwiseInverse().asDiagonal();
  Eigen::JacobiSVD<MatrixXd> svd(js, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VectorXd sv = svd.singularValues();
  const double cut = 1e-10 * (sv.size() ? sv(0) : 0.0);
  VectorXd inv2 = VectorXd::Zero(sv.size());
  res.rank = 0;
  for (Eigen::Index k = 0; k < sv.size(); ++k)
    if (sv(k) > cut) {
      inv2(k) = 1.0 / (sv(k) * sv(k));
      ++res.rank;
    }
  if (res.rank < np) res.warnings.push_back("rank-deficient Jacobian (rank " + std::to_string(res.rank) + " of " + std::to_string(np) + ")");
  MatrixXd cov = svd.matrixV() * inv2.asDiagonal() * svd.matrixV().transpose();
  cov = scale.cwiseInverse().asDiagonal() * cov * scale.cwiseInverse().asDiagonal();
  if (opt.scale_covariance && dof > 0) cov *= res.reduced_chi2;
  res.covariance = 0.5 * (cov + cov.transpose());
  res.sigmas = res.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  return res;
}

/// y = model(x, p) fitted with weights w (defaults to 1).
using CurveModel = std::function<VectorXd(const VectorXd& x, const VectorXd& p)>;
using CurveJacobian = std::function<MatrixXd(const VectorXd& x, const VectorXd& p)>;

inline FitResult fit_curve(const CurveModel& model, std::span<const double> x, std::span<const double> y,
                           std::span<const double> weights, const VectorXd& p0,
                           const std::optional<Bounds>& bounds, const std::vector<std::string>& names,
                           const CurveJacobian& jacobian = nullptr, const FitOptions& opt = {}) {
  if (x.size() != y.size()) throw std::invalid_argument("fit_curve: x and y differ in length");
  if (!weights.empty() && weights.size() != y.size())
    throw std::invalid_argument("fit_curve: weights and y differ in length");
  const VectorXd xv = Eigen::Map<const VectorXd>(x.data(), Eigen::Index(x.size()));
  const VectorXd yv = Eigen::Map<const VectorXd>(y.data(), Eigen::Index(y.size()));
  const VectorXd wv = weights.empty() ? VectorXd::Ones(yv.size())
                                      : VectorXd(Eigen::Map<const VectorXd>(weights.data(), yv.size()));
  JacobianModel jm = nullptr;
  if (jacobian) jm = [&](const VectorXd& p) { return jacobian(xv, p); };
  return levenberg_marquardt([&](const VectorXd& p) { return model(xv, p); }, yv, wv, p0,
                             bounds.value_or(Bounds::unbounded(p0.size())), names, jm, opt);
}

namespace detail {

inline std::vector<double> weights_from_sigma(std::span<const double> sigma, std::size_t n) {
  if (sigma.empty()) return {};
  if (sigma.size() != n) throw std::invalid_argument("sigma and data differ in length");
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(sigma[i] > 0.0)) throw std::invalid_argument("sigma values must be > 0");
    w[i] = 1.0 / (sigma[i] * sigma[i]);
  }
  return w;
}

inline void require_spread(std::span<const double> x, std::size_t min_points, const char* what) {
  if (x.size() < min_points)
    throw ValidationError(std::string(what) + ": need at least " + std::to_string(min_points) + " points");
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  if (!(*hi > *lo)) throw ValidationError(std::string(what) + ": degenerate data (all points at the same abscissa)");
}

/// Ordinary least squares y = c0 + c1 x.
inline std::pair<double, double> linear_regression(std::span<const double> x, std::span<const double> y) {
  const double n = double(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double det = n * sxx - sx * sx;
  if (det == 0.0) throw ValidationError("degenerate regression");
  return {(sxx * sy - sx * sxy) / det, (n * sxy - sx * sy) / det};
}

}  // namespace detail

/// Built-in characterization models and their analytic Jacobians.
namespace models {

/// p = {center, fwhm, amplitude, offset}
inline VectorXd lorentzian(const VectorXd& xv, const VectorXd& p) {
  const double hw2 = 0.25 * p(1) * p(1);
  return (p(2) * hw2 / ((xv.array() - p(0)).square() + hw2) + p(3)).matrix();
}
inline MatrixXd lorentzian_jacobian(const VectorXd& xv, const VectorXd& p) {
  MatrixXd j(xv.size(), 4);
  const double hw2 = 0.25 * p(1) * p(1);
  for (Eigen::Index i = 0; i < xv.size(); ++i) {
    const double d = xv(i) - p(0);
    const double den = d * d + hw2;
    j(i, 0) = p(2) * hw2 * 2.0 * d / (den * den);
    j(i, 1) = p(2) * 0.5 * p(1) * d * d / (den * den);
    j(i, 2) = hw2 / den;
    j(i, 3) = 1.0;
  }
  return j;
}

/// p = {gamma2, p_sat}; x = power
inline VectorXd power_broadening(const VectorXd& x, const VectorXd& p) {
  return (p(0) / std::numbers::pi * (1.0 + x.array() / p(1)).sqrt()).matrix();
}
inline MatrixXd power_broadening_jacobian(const VectorXd& x, const VectorXd& p) {
  MatrixXd j(x.size(), 2);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double root = std::sqrt(1.0 + x(i) / p(1));
    j(i, 0) = root / std::numbers::pi;
    j(i, 1) = -p(0) / std::numbers::pi * x(i) / (2.0 * root * p(1) * p(1));
  }
  return j;
}

/// p = {r_inf, p_sat}; x = power
inline VectorXd saturation(const VectorXd& x, const VectorXd& p) {
  return (p(0) * x.array() / (x.array() + p(1))).matrix();
}
inline MatrixXd saturation_jacobian(const VectorXd& x, const VectorXd& p) {
  MatrixXd j(x.size(), 2);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double d = x(i) + p(1);
    j(i, 0) = x(i) / d;
    j(i, 1) = -p(0) * x(i) / (d * d);
  }
  return j;
}

}  // namespace models

/// L(x) = A (G/2)^2 / ((x - x0)^2 + (G/2)^2) + c; names {center, fwhm, amplitude, offset}.
inline FitResult fit_lorentzian(std::span<const double> x, std::span<const double> y,
                                std::span<const double> sigma = {}, const FitOptions& opt = {}) {
  detail::require_spread(x, 4, "fit_lorentzian");
  if (x.size() != y.size()) throw std::invalid_argument("fit_lorentzian: x and y differ in length");
  std::vector<double> sorted(y.begin(), y.end());
  std::sort(sorted.begin(), sorted.end());
  const double offset = sorted[sorted.size() / 10];
  const auto peak = std::size_t(std::max_element(y.begin(), y.end()) - y.begin());
  const double amp = y[peak] - offset;
  if (!(amp > 0.0)) throw ValidationError("fit_lorentzian: no peak above the baseline");
  std::size_t lo = peak, hi = peak;
  while (lo > 0 && y[lo] - offset > 0.5 * amp) --lo;
  while (hi + 1 < y.size() && y[hi] - offset > 0.5 * amp) ++hi;
  double fwhm = std::abs(x[hi] - x[lo]);
  if (!(fwhm > 0.0)) fwhm = std::abs(x.back() - x.front()) / double(x.size());

  const CurveModel model = models::lorentzian;
  const CurveJacobian jac = models::lorentzian_jacobian;
  const double inf = std::numeric_limits<double>::infinity();
  Bounds b{VectorXd(4), VectorXd(4)};
  b.lower << -inf, 0.0, -inf, -inf;
  b.upper << inf, inf, inf, inf;
  VectorXd p0(4);
  p0 << x[peak], fwhm, amp, offset;
  const auto w = detail::weights_from_sigma(sigma, y.size());
  return fit_curve(model, x, y, w, p0, b, {"center", "fwhm", "amplitude", "offset"}, jac, opt);
}

/// dnu = (Gamma2 / pi) sqrt(1 + P / P_sat); names {gamma2, p_sat}. Gamma2 in
/// rad/s when dnu is in Hz.
inline FitResult fit_linewidth_vs_power(std::span<const double> power, std::span<const double> linewidth,
                                        std::span<const double> sigma = {}, const FitOptions& opt = {}) {
  detail::require_spread(power, 3, "fit_linewidth_vs_power");
  if (power.size() != linewidth.size()) throw std::invalid_argument("fit_linewidth_vs_power: size mismatch");
  std::vector<double> sq(linewidth.size());
  for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = linewidth[i] * linewidth[i];
  auto [c0, c1] = detail::linear_regression(power, sq);
  const double p_max = *std::max_element(power.begin(), power.end());
  if (!(c0 > 0.0)) c0 = 0.25 * sq[std::size_t(std::min_element(power.begin(), power.end()) - power.begin())];
  if (!(c1 > 0.0)) c1 = c0 / p_max;
  VectorXd p0(2);
  p0 << std::numbers::pi * std::sqrt(c0), c0 / c1;

  const CurveModel model = models::power_broadening;
  const CurveJacobian jac = models::power_broadening_jacobian;
  Bounds b{VectorXd::Zero(2), VectorXd::Constant(2, std::numeric_limits<double>::infinity())};
  b.lower << 1e-300, 1e-300;
  const auto w = detail::weights_from_sigma(sigma, power.size());
  return fit_curve(model, power, linewidth, w, p0, b, {"gamma2", "p_sat"}, jac, opt);
}

/// R = R_inf (P / P_sat) / (1 + P / P_sat); names {r_inf, p_sat}.
inline FitResult fit_saturation(std::span<const double> power, std::span<const double> rate,
                                std::span<const double> sigma = {}, const FitOptions& opt = {}) {
  detail::require_spread(power, 3, "fit_saturation");
  if (power.size() != rate.size()) throw std::invalid_argument("fit_saturation: size mismatch");
  VectorXd p0(2);
  std::vector<double> ip, ir;
  for (std::size_t i = 0; i < power.size(); ++i)
    if (power[i] > 0.0 && rate[i] > 0.0) {
      ip.push_back(1.0 / power[i]);
      ir.push_back(1.0 / rate[i]);
    }
  bool seeded = false;
  if (ip.size() >= 2) {
    try {
      const auto [c0, c1] = detail::linear_regression(ip, ir);
      if (c0 > 0.0 && c1 > 0.0) {
        p0 << 1.0 / c0, c1 / c0;
        seeded = true;
      }
    } catch (const ValidationError&) {
    }
  }
  if (!seeded) {
    p0 << *std::max_element(rate.begin(), rate.end()),
        0.5 * *std::max_element(power.begin(), power.end());
  }

  const CurveModel model = models::saturation;
  const CurveJacobian jac = models::saturation_jacobian;
  Bounds b{VectorXd::Constant(2, 1e-300), VectorXd::Constant(2, std::numeric_limits<double>::infinity())};
  const auto w = detail::weights_from_sigma(sigma, power.size());
  return fit_curve(model, power, rate, w, p0, b, {"r_inf", "p_sat"}, jac, opt);
}

}  // namespace hom
