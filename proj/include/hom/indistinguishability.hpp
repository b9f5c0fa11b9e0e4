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

// Indistinguishability extraction: pulsed time-integrated difference, cw
// integral at finite drive, extrapolation to S = 0 and the delay,
// mismatched-drive and sideband corrections.

#pragma once

#include <boost/math/tools/roots.hpp>
#include <nlohmann/json.hpp>

#include <cmath>
#include <complex>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hom/correlation_functions.hpp"
#include "hom/curve.hpp"
#include "hom/emitter_models.hpp"
#include "hom/errors.hpp"
#include "hom/fitting.hpp"

namespace hom {

enum class ExtractionMethod { pulsed_integral, cw_integral, cw_extrapolated, analytic };

inline const char* to_string(ExtractionMethod m) {
  switch (m) {
    case ExtractionMethod::pulsed_integral: return "pulsed_integral";
    case ExtractionMethod::cw_integral: return "cw_integral";
    case ExtractionMethod::cw_extrapolated: return "cw_extrapolated";
    case ExtractionMethod::analytic: return "analytic";
  }
  return "unknown";
}

struct AppliedCorrection {
  std::string name;
  double factor = 1.0;
  std::string note;
};

struct IndistinguishabilityResult {
  double value = 0.0;
  double uncertainty = 0.0;
  ExtractionMethod method = ExtractionMethod::analytic;
  std::optional<double> s_at_measurement;
  std::vector<AppliedCorrection> corrections;
  std::vector<std::string> warnings;
  std::map<std::string, double> details;  // fitted M, gamma, integrals, ...

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["method"] = to_string(method);
    j["value"] = value;
    j["uncertainty"] = uncertainty;
    j["s_at_measurement"] = s_at_measurement ? nlohmann::json(*s_at_measurement) : nlohmann::json(nullptr);
    j["corrections_applied"] = nlohmann::json::array();
    for (const auto& c : corrections)
      j["corrections_applied"].push_back({{"name", c.name}, {"factor", c.factor}, {"note", c.note}});
    j["warnings"] = warnings;
    j["details"] = nlohmann::json::object();
    for (const auto& [k, v] : details) j["details"][k] = v;
    return j;
  }
};

namespace detail {

inline void require_same_grid(const CorrelationCurve& a, const CorrelationCurve& b) {
  a.validate();
  b.validate();
  if (!same_grid(a, b)) throw std::invalid_argument("parallel and perpendicular curves are on different grids");
}

/// Trapezoid weights restricted to |tau| <= half_window (all points when unset).
inline std::vector<double> window_weights(const CorrelationCurve& c, std::optional<double> half_window) {
  const double h = c.spacing();
  std::vector<double> w(c.size(), 0.0);
  std::size_t first = c.size(), last = 0;
  for (std::size_t i = 0; i < c.size(); ++i)
    if (!half_window || std::abs(c.tau[i]) <= *half_window + 1e-9 * h) {
      first = std::min(first, i);
      last = i;
    }
  if (first >= last) throw ValidationError("integration window contains fewer than two grid points", "window");
  for (std::size_t i = first; i <= last; ++i) w[i] = (i == first || i == last) ? 0.5 * h : h;
  return w;
}

inline double weighted_sum(const std::vector<double>& w, const std::vector<double>& v) {
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) acc += w[i] * v[i];
  return acc;
}

inline double label_number(const CorrelationCurve& c, const std::string& key) {
  const auto it = c.labels.find(key);
  if (it == c.labels.end()) return 0.0;
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    return 0.0;
  }
}

}  // namespace detail

struct PulsedExtractOptions {
  std::optional<double> central_window;        // half width (s); full grid when unset
  std::optional<CorrelationCurve> side_model;  // same grid and units as the data
};

/// I = (int G_perp - int G_par) / (int G_perp - int side_model) over the
/// central window. Curves labelled units=counts get Poisson error bars.
inline IndistinguishabilityResult pulsed_extract(const CorrelationCurve& par, const CorrelationCurve& perp,
                                                 const PulsedExtractOptions& opt = {}) {
  detail::require_same_grid(par, perp);
  if (par.regime != CurveRegime::pulsed_unnormalized || perp.regime != CurveRegime::pulsed_unnormalized)
    throw ValidationError("pulsed extraction requires pulsed-regime curves", "regime");
  const auto w = detail::window_weights(perp, opt.central_window);
  const double a_par = detail::weighted_sum(w, par.values);
  const double a_perp = detail::weighted_sum(w, perp.values);
  double a_side = 0.0;
  if (opt.side_model) {
    if (!same_grid(*opt.side_model, perp)) throw std::invalid_argument("side model is on a different grid");
    a_side = detail::weighted_sum(w, opt.side_model->values);
  }
  const double num = a_perp - a_par;
  const double den = a_perp - a_side;
  if (!(den > 0.0)) throw ExtractionError("perpendicular reference integral is not positive after side-feature subtraction");

  IndistinguishabilityResult r;
  r.method = ExtractionMethod::pulsed_integral;
  r.value = num / den;
  r.details = {{"area_parallel", a_par}, {"area_perpendicular", a_perp}, {"area_side_model", a_side}};
  const auto units = perp.labels.find("units");
  if (units != perp.labels.end() && units->second == "counts") {
    // Poisson variances; numerator and denominator share the perpendicular counts.
    double var_num = 0.0, var_den = 0.0, cov = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double w2 = w[i] * w[i];
      var_num += w2 * (std::max(perp.values[i], 0.0) + std::max(par.values[i], 0.0));
      var_den += w2 * std::max(perp.values[i], 0.0);
      cov += w2 * std::max(perp.values[i], 0.0);
    }
    const double v = r.value;
    r.uncertainty = std::sqrt(std::max(0.0, (var_num - 2.0 * v * cov + v * v * var_den) / (den * den)));
  } else {
    r.warnings.push_back("noiseless curve input: uncertainty not estimated");
  }
  if (!opt.central_window) r.warnings.push_back("central window not set: integrated over the full grid");
  return r;
}

struct CwExtractOptions {
  std::optional<double> window;        // half width (s); full grid when unset
  double edge_tolerance = 0.005;       // allowed |g2 - 1| at the window edges
  std::optional<double> s_at_measurement;
};

/// I~ = [int (1 - g_par) - int (1 - g_perp)] / int (1 - g_perp).
inline IndistinguishabilityResult cw_integral_extract(const CorrelationCurve& par, const CorrelationCurve& perp,
                                                      const CwExtractOptions& opt = {}) {
  detail::require_same_grid(par, perp);
  if (par.regime != CurveRegime::cw_normalized || perp.regime != CurveRegime::cw_normalized)
    throw ValidationError("cw extraction requires normalized cw curves", "regime");
  const auto w = detail::window_weights(perp, opt.window);
  std::vector<double> dip_par(par.size()), dip_perp(perp.size());
  for (std::size_t i = 0; i < par.size(); ++i) {
    dip_par[i] = 1.0 - par.values[i];
    dip_perp[i] = 1.0 - perp.values[i];
  }
  const double i_par = detail::weighted_sum(w, dip_par);
  const double i_perp = detail::weighted_sum(w, dip_perp);
  if (!(i_perp > 0.0)) throw ExtractionError("perpendicular dip integral is not positive");

  IndistinguishabilityResult r;
  r.method = ExtractionMethod::cw_integral;
  r.value = (i_par - i_perp) / i_perp;
  r.s_at_measurement = opt.s_at_measurement;
  r.details = {{"integral_parallel", i_par}, {"integral_perpendicular", i_perp}};

  std::size_t first = 0, last = w.size() - 1;
  while (w[first] == 0.0) ++first;
  while (w[last] == 0.0) --last;
  auto off_asymptote = [&](const CorrelationCurve& c) {
    return std::abs(c.values[first] - 1.0) > opt.edge_tolerance ||
           std::abs(c.values[last] - 1.0) > opt.edge_tolerance;
  };
  if (off_asymptote(par) || off_asymptote(perp))
    r.warnings.push_back("curve does not reach its asymptote at the window edge; integral may be truncated");

  // Normalized histograms g = c / B carry the baseline B (mean counts of
  // the k outermost bins per side). First-order propagation over the raw
  // Poisson counts c_j = g_j B, including the shared baseline.
  auto dip_variance = [&](const CorrelationCurve& c) {
    const double base = detail::label_number(c, "baseline_counts");
    const auto k = std::size_t(detail::label_number(c, "baseline_edge_bins"));
    double shared = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) shared += w[i] * c.values[i];
    double var = 0.0;
    for (std::size_t j = 0; j < c.size(); ++j) {
      const bool edge = k > 0 && (j < k || j + k >= c.size());
      const double d = -w[j] / base + (edge ? shared / (base * double(2 * k)) : 0.0);
      var += std::max(c.values[j], 0.0) * base * d * d;
    }
    return var;
  };
  if (detail::label_number(par, "baseline_counts") > 0.0 && detail::label_number(perp, "baseline_counts") > 0.0) {
    // value = i_par / i_perp - 1
    const double q = i_par / i_perp;
    r.uncertainty = std::sqrt(dip_variance(par) + q * q * dip_variance(perp)) / i_perp;
  }
  return r;
}

/// I~(S) = M Gamma1 (1 + S) / (Gamma1 (1 + S) + 2 gamma).
inline double i_tilde_analytic(double s, double gamma1, double gamma_pd, double mode_overlap = 1.0) {
  detail::require_nonnegative_field(s, "s");
  detail::require_positive(gamma1, "gamma1");
  detail::require_nonnegative_field(gamma_pd, "gamma_pd");
  const double a = gamma1 * (1.0 + s);
  return mode_overlap * a / (a + 2.0 * gamma_pd);
}

/// Drive S1 during the parallel and S2 during the perpendicular measurement.
inline double i_tilde_mismatched(double s1, double s2, double gamma1, double gamma_pd) {
  detail::require_nonnegative_field(s1, "s1");
  detail::require_nonnegative_field(s2, "s2");
  detail::require_positive(gamma1, "gamma1");
  detail::require_nonnegative_field(gamma_pd, "gamma_pd");
  return gamma1 * (1.0 + s2) / (gamma1 * (1.0 + s1) + 2.0 * gamma_pd) + (s2 - s1) / (1.0 + s1);
}

struct ITildePoint {
  double s = 0.0;
  double value = 0.0;
  double sigma = 0.0;    // of value
  double sigma_s = 0.0;  // of S
};

struct ExtrapolationOptions {
  bool fit_gamma = false;       // fit gamma alongside M (Gamma2 unmeasured)
  double sigma_gamma1 = 0.0;    // 1/s, propagated
  double sigma_gamma_pd = 0.0;  // 1/s, propagated (ignored when gamma is fitted)
};

namespace detail {

struct ExtrapolationFit {
  double m = 0.0;
  double gamma_pd = 0.0;
  double sigma_m = 0.0;
  double sigma_gamma_pd = 0.0;
  double cov_m_gamma = 0.0;
  double chi2 = 0.0;
};

inline ExtrapolationFit fit_extrapolation(const std::vector<ITildePoint>& pts, double gamma1, double gamma_pd,
                                          bool fit_gamma) {
  const auto shape = [&](double s, double g) {
    const double a = gamma1 * (1.0 + s);
    return a / (a + 2.0 * g);
  };
  auto weight = [](const ITildePoint& p) { return p.sigma > 0.0 ? 1.0 / (p.sigma * p.sigma) : 1.0; };
  ExtrapolationFit out;
  if (!fit_gamma) {
    double sfy = 0.0, sff = 0.0;
    for (const auto& p : pts) {
      const double f = shape(p.s, gamma_pd);
      sfy += weight(p) * f * p.value;
      sff += weight(p) * f * f;
    }
    out.m = sfy / sff;
    out.gamma_pd = gamma_pd;
    out.sigma_m = std::sqrt(1.0 / sff);
    for (const auto& p : pts) out.chi2 += weight(p) * std::pow(p.value - out.m * shape(p.s, gamma_pd), 2);
    return out;
  }

  std::vector<double> s, y, w;
  for (const auto& p : pts) {
    s.push_back(p.s);
    y.push_back(p.value);
    w.push_back(weight(p));
  }
  double m0 = 0.0;
  for (double v : y) m0 = std::max(m0, v);
  VectorXd p0(2);
  p0 << std::max(m0, 1e-3), std::max(gamma_pd, 0.1 * gamma1);
  Bounds b{VectorXd(2), VectorXd(2)};
  b.lower << 0.0, 0.0;
  b.upper << 2.0, 1e3 * gamma1;
  auto model = [&](const VectorXd& x, const VectorXd& p) -> VectorXd {
    VectorXd v(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) v(i) = p(0) * shape(x(i), p(1));
    return v;
  };
  auto jac = [&](const VectorXd& x, const VectorXd& p) -> MatrixXd {
    MatrixXd j(x.size(), 2);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double a = gamma1 * (1.0 + x(i));
      j(i, 0) = a / (a + 2.0 * p(1));
      j(i, 1) = -2.0 * p(0) * a / ((a + 2.0 * p(1)) * (a + 2.0 * p(1)));
    }
    return j;
  };
  FitOptions fo;
  fo.scale_covariance = false;
  const FitResult fr = fit_curve(model, s, y, w, p0, b, {"mode_overlap", "gamma_pd"}, jac, fo);
  if (fr.rank < 2) throw ExtractionError("rank-deficient extrapolation: M and gamma cannot both be fitted from these points");
  out.m = fr.params(0);
  out.gamma_pd = fr.params(1);
  out.sigma_m = fr.sigmas(0);
  out.sigma_gamma_pd = fr.sigmas(1);
  out.cov_m_gamma = fr.covariance(0, 1);
  out.chi2 = fr.chi2;
  return out;
}

}  // namespace detail

/// Fits I~(S) = M a / (a + 2 gamma) to the points and reports I = I~(0).
/// One point: M follows directly. Uncertainty combines the fit covariance
/// with first-order propagation of sigma_S, sigma_Gamma1 and sigma_gamma.
inline IndistinguishabilityResult extrapolate_to_zero(const std::vector<ITildePoint>& points, double gamma1,
                                                      double gamma_pd, const ExtrapolationOptions& opt = {}) {
  if (points.empty()) throw ValidationError("at least one (S, I~) point is required", "points");
  detail::require_positive(gamma1, "gamma1");
  detail::require_nonnegative_field(gamma_pd, "gamma_pd");
  for (const auto& p : points) {
    detail::require_nonnegative_field(p.s, "points.s");
    if (!std::isfinite(p.value)) throw ValidationError("must be finite", "points.value");
    if (p.sigma < 0.0 || p.sigma_s < 0.0) throw ValidationError("uncertainties must be >= 0", "points.sigma");
  }
  if (opt.fit_gamma) {
    bool distinct = false;
    for (const auto& p : points) distinct |= std::abs(p.s - points.front().s) > 1e-12 * (1.0 + p.s);
    if (!distinct) throw ExtractionError("rank-deficient extrapolation: fitting gamma needs points at two or more S values");
  }

  auto estimate = [&](const std::vector<ITildePoint>& pts, double g1, double gpd) {
    const auto fit = detail::fit_extrapolation(pts, g1, gpd, opt.fit_gamma);
    return std::pair{fit, fit.m * g1 / (g1 + 2.0 * fit.gamma_pd)};
  };
  const auto [fit, value] = estimate(points, gamma1, gamma_pd);

  // Fit covariance contribution.
  const double g = fit.gamma_pd;
  const double shape0 = gamma1 / (gamma1 + 2.0 * g);
  const double d_dm = shape0;
  const double d_dg = -2.0 * fit.m * gamma1 / ((gamma1 + 2.0 * g) * (gamma1 + 2.0 * g));
  double var = 0.0;
  const bool have_sigmas = std::any_of(points.begin(), points.end(), [](const auto& p) { return p.sigma > 0.0; });
  if (have_sigmas) {
    var += d_dm * d_dm * fit.sigma_m * fit.sigma_m;
    if (opt.fit_gamma)
      var += d_dg * d_dg * fit.sigma_gamma_pd * fit.sigma_gamma_pd + 2.0 * d_dm * d_dg * fit.cov_m_gamma;
  }

  // First-order propagation of S, Gamma1 and (fixed) gamma: derivative by a
  // central difference of 1e-3 sigma, times sigma.
  constexpr double kStep = 1e-3;
  auto derivative_times_sigma = [&](auto mutate) {
    auto pts = points;
    double g1 = gamma1, gpd = gamma_pd;
    mutate(pts, g1, gpd, +kStep);
    const double up = estimate(pts, g1, gpd).second;
    pts = points;
    g1 = gamma1;
    gpd = gamma_pd;
    mutate(pts, g1, gpd, -kStep);
    return 0.5 * (up - estimate(pts, g1, gpd).second) / kStep;
  };
  for (std::size_t k = 0; k < points.size(); ++k)
    if (points[k].sigma_s > 0.0) {
      const double d =
          derivative_times_sigma([&](auto& pts, double&, double&, double f) { pts[k].s += f * pts[k].sigma_s; });
      var += d * d;
    }
  if (opt.sigma_gamma1 > 0.0) {
    const double d = derivative_times_sigma([&](auto&, double& g1, double&, double f) { g1 += f * opt.sigma_gamma1; });
    var += d * d;
  }
  if (!opt.fit_gamma && opt.sigma_gamma_pd > 0.0) {
    // At gamma = 0 the central difference would cross the bound; use the
    // forward difference there.
    const double step = kStep * opt.sigma_gamma_pd;
    double d;
    if (gamma_pd >= step) {
      d = derivative_times_sigma([&](auto&, double&, double& gpd, double f) { gpd += f * opt.sigma_gamma_pd; });
    } else {
      d = (estimate(points, gamma1, gamma_pd + step).second - value) / kStep;
    }
    var += d * d;
  }

  IndistinguishabilityResult r;
  r.method = ExtractionMethod::cw_extrapolated;
  r.value = value;
  r.uncertainty = std::sqrt(std::max(var, 0.0));
  r.s_at_measurement = 0.0;
  r.details = {{"mode_overlap", fit.m},
               {"mode_overlap_sigma", fit.sigma_m},
               {"gamma_pd", fit.gamma_pd},
               {"gamma2", 0.5 * gamma1 + fit.gamma_pd},
               {"chi2", fit.chi2},
               {"n_points", double(points.size())}};
  if (opt.fit_gamma) r.details["gamma_pd_sigma"] = fit.sigma_gamma_pd;
  if (points.size() == 1) r.warnings.push_back("single-point mode: M solved directly, no residual check");
  return r;
}

struct DelayCorrection {
  double factor = 1.0;
  double corrected = 0.0;
  std::optional<std::string> warning;
};

/// factor = exp(-Gamma1 dtau); corrected = raw / factor.
inline DelayCorrection delay_mismatch_correction(double raw, double gamma1, double delta_tau) {
  detail::require_positive(gamma1, "gamma1");
  detail::require_nonnegative_field(delta_tau, "delta_tau");
  DelayCorrection c;
  c.factor = std::exp(-gamma1 * delta_tau);
  c.corrected = raw / c.factor;
  if (c.factor < 0.5) c.warning = "delay-mismatch factor below 0.5: correction regime questionable";
  return c;
}

inline IndistinguishabilityResult apply_delay_correction(IndistinguishabilityResult r, double gamma1,
                                                         double delta_tau) {
  const auto c = delay_mismatch_correction(r.value, gamma1, delta_tau);
  r.value = c.corrected;
  r.uncertainty /= c.factor;
  r.corrections.push_back({"delay_mismatch", c.factor, "divided by exp(-Gamma1 * dtau)"});
  if (c.warning) r.warnings.push_back(*c.warning);
  return r;
}

struct SidebandSpec {
  enum class Mode { debye_waller_scalar, tabulated_phonon_correlator };
  Mode mode = Mode::debye_waller_scalar;
  double dw = 1.0;
  std::vector<double> tau;                 // s, increasing from 0
  std::vector<std::complex<double>> g_tau;  // phonon correlator samples

  void validate() const {
    if (mode == Mode::debye_waller_scalar) {
      if (!(dw > 0.0 && dw <= 1.0)) throw ValidationError("must lie in (0, 1]", "dw");
      return;
    }
    if (tau.size() != g_tau.size() || tau.size() < 2)
      throw ValidationError("tabulated correlator needs matching tau and value arrays", "g_tau");
    if (std::abs(tau.front()) > 1e-15) throw ValidationError("tabulated correlator must start at tau = 0", "g_tau");
    for (std::size_t i = 1; i < tau.size(); ++i)
      if (!(tau[i] > tau[i - 1])) throw ValidationError("tau must be strictly increasing", "g_tau");
    const double g0 = std::abs(g_tau.front());
    for (const auto& v : g_tau)
      if (std::abs(v) > g0 * (1.0 + 1e-12)) throw ValidationError("|G(tau)| must not exceed |G(0)|", "g_tau");
  }
};

/// Removes a Debye-Waller scaling dw^2 of the interference term.
inline IndistinguishabilityResult apply_sideband_correction(IndistinguishabilityResult r, double dw) {
  SidebandSpec sb;
  sb.dw = dw;
  sb.validate();
  const double f = dw * dw;
  r.value /= f;
  r.uncertainty /= f;
  r.corrections.push_back({"sideband", f, "divided by Debye-Waller factor squared"});
  return r;
}

/// Sideband-modified I~(S) of the two-level emitter (M = 1). The scalar
/// mode scales by dw^2; the tabulated mode integrates |G|^2 |g1|^2 / Pe^2.
inline double i_tilde_sideband(double s, double gamma1, double gamma_pd, const SidebandSpec& sb) {
  sb.validate();
  const double base = i_tilde_analytic(s, gamma1, gamma_pd, 1.0);
  if (sb.mode == SidebandSpec::Mode::debye_waller_scalar) return sb.dw * sb.dw * base;

  const double a = gamma1 * (1.0 + s);
  const double b = a + 2.0 * gamma_pd;  // decay rate of |g1|^2
  const double coherence_time = 2.0 / b;
  if (sb.tau.back() < 10.0 * coherence_time)
    throw ValidationError("tabulated correlator covers less than 10 coherence times", "g_tau");
  // Exact integral of (piecewise-linear |G|^2) * exp(-b tau).
  double num = 0.0;
  for (std::size_t i = 1; i < sb.tau.size(); ++i) {
    const double x0 = sb.tau[i - 1], x1 = sb.tau[i];
    const double f0 = std::norm(sb.g_tau[i - 1]), f1 = std::norm(sb.g_tau[i]);
    const double slope = (f1 - f0) / (x1 - x0);
    const double e0 = std::exp(-b * x0), e1 = std::exp(-b * x1);
    // int (f0 + slope (x - x0)) e^{-b x} dx over [x0, x1]
    num += f0 * (e0 - e1) / b + slope * ((e0 - e1) / (b * b) - (x1 - x0) * e1 / b);
  }
  // Both integrands are even: numerator 2 num, denominator 2 / a.
  return num * a;
}

enum class NumericITildeMethod { resolvent, quadrature };

/// I~ of an arbitrary emitter (V = 1, M = 1) from its stationary correlators.
inline double i_tilde_numeric(const Emitter& em, NumericITildeMethod method = NumericITildeMethod::resolvent,
                              double window_rates = 40.0) {
  const Superoperator l = build_superoperator(em.spec);
  const DensityMatrix rho = steady_state(l);
  const double pe = rho.expectation(em.excited_projector());
  if (!(pe > 1e-14)) throw ValidationError("no steady-state emission (Pe = 0)", "s");
  if (method == NumericITildeMethod::resolvent) {
    const double coh = correlator_abs2_excess_integral(l, rho, em.raising(), em.lowering,
                                                       CMatrix::Identity(em.spec.dim, em.spec.dim));
    const double dip = -correlator_excess_integral(l, rho, em.excited_projector(), em.lowering, em.raising()).real();
    if (!(dip > 0.0)) throw ExtractionError("perpendicular dip integral is not positive");
    return coh / dip;
  }
  // Slowest correlation decay sets the window.
  Eigen::ComplexEigenSolver<CMatrix> eig(l.matrix);
  double slowest = std::numeric_limits<double>::infinity();
  for (const auto& ev : eig.eigenvalues())
    if (-ev.real() > 1e-9 * detail::max_abs(l.matrix)) slowest = std::min(slowest, -ev.real());
  const double half = window_rates / slowest;
  const auto tau = uniform_grid(-half, half, 40001);
  const auto curves = cw_g2_numeric(em, tau, 1.0, 1.0);
  CwExtractOptions opt;
  opt.edge_tolerance = 1e-6;
  return cw_integral_extract(curves.parallel, curves.perpendicular, opt).value;
}

struct BreakdownResult {
  double s = 0.0;              // drive at which the relative deviation hits the target
  double deviation = 0.0;      // relative deviation reached there
  double i_tilde_three_level = 0.0;
  double i_tilde_two_level = 0.0;
};

/// Relative deviation (I~_2LS - I~_3LS) / I~_2LS as a function of S.
inline double two_vs_three_level_deviation(double s, double gamma1, double gamma_pd, double beta) {
  const auto p = ThreeLevelParams::from_saturation(gamma1, gamma_pd, beta, s);
  const double i3 = i_tilde_numeric(three_level_liouvillian(p));
  const double i2 = i_tilde_analytic(s, gamma1, gamma_pd, 1.0);
  return std::abs(i2 - i3) / i2;
}

/// Smallest S in [s_lo, s_hi] where the deviation reaches `target` (scan then
/// bracketed root refinement).
inline BreakdownResult find_breakdown_saturation(double gamma1, double gamma_pd, double beta, double target = 0.005,
                                                 double s_lo = 0.1, double s_hi = 1000.0, int scan_points = 120) {
  auto dev = [&](double s) { return two_vs_three_level_deviation(s, gamma1, gamma_pd, beta) - target; };
  double prev_s = s_lo, prev = dev(s_lo);
  if (prev >= 0.0) throw ExtractionError("deviation already exceeds the target at the lower scan bound");
  for (int k = 1; k <= scan_points; ++k) {
    const double s = s_lo * std::pow(s_hi / s_lo, double(k) / scan_points);
    const double v = dev(s);
    if (v >= 0.0) {
      boost::uintmax_t iters = 100;
      const auto [a, b] = boost::math::tools::toms748_solve(
          dev, prev_s, s, prev, v, boost::math::tools::eps_tolerance<double>(40), iters);
      BreakdownResult r;
      r.s = 0.5 * (a + b);
      const auto p = ThreeLevelParams::from_saturation(gamma1, gamma_pd, beta, r.s);
      r.i_tilde_three_level = i_tilde_numeric(three_level_liouvillian(p));
      r.i_tilde_two_level = i_tilde_analytic(r.s, gamma1, gamma_pd, 1.0);
      r.deviation = std::abs(r.i_tilde_two_level - r.i_tilde_three_level) / r.i_tilde_two_level;
      return r;
    }
    prev_s = s;
    prev = v;
  }
  throw ExtractionError("deviation never reaches the target within the scan range");
}

}  // namespace hom
