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

// Closed-form and quantum-regression correlation curves: HBT g2, cw HOM
// g2 parallel/perpendicular, pulsed G2 and the unbalanced-interferometer
// models.

#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hom/curve.hpp"
#include "hom/emitter_models.hpp"
#include "hom/errors.hpp"
#include "hom/exp_terms.hpp"
#include "hom/irf.hpp"
#include "hom/lindblad.hpp"

namespace hom {

enum class Polarization { parallel, perpendicular };

inline const char* to_string(Polarization p) {
  return p == Polarization::parallel ? "parallel" : "perpendicular";
}

struct CurvePair {
  CorrelationCurve parallel;
  CorrelationCurve perpendicular;
};

namespace detail {

inline void require_unit_interval(double v, const char* field) {
  if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("must lie in [0, 1]", field);
}
inline void require_positive(double v, const char* field) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError("must be > 0", field);
}
inline void require_nonnegative_field(double v, const char* field) {
  if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("must be >= 0", field);
}

inline CorrelationCurve sample(const ExpTermSum& f, std::span<const double> tau, CurveRegime regime) {
  CorrelationCurve c;
  c.tau.assign(tau.begin(), tau.end());
  c.values.reserve(tau.size());
  for (double t : tau) c.values.push_back(f(t));
  c.regime = regime;
  return c;
}

}  // namespace detail

/// g2(tau) = 1 - V exp(-Gamma1 (1 + S) |tau|).
inline ExpTermSum hbt_terms(double gamma1, double s, double visibility) {
  detail::require_positive(gamma1, "gamma1");
  detail::require_nonnegative_field(s, "s");
  detail::require_unit_interval(visibility, "visibility");
  return {1.0, {{-visibility, gamma1 * (1.0 + s), 0.0}}};
}

inline CorrelationCurve hbt_g2_analytic(std::span<const double> tau, double gamma1, double s,
                                        double visibility) {
  auto c = detail::sample(hbt_terms(gamma1, s, visibility), tau, CurveRegime::cw_normalized);
  c.labels["model"] = "hbt";
  return c;
}

/// g2(tau) = 1 - (V/2) e^{-a|tau|} (1 + M e^{-2 gamma |tau|}), a = Gamma1 (1 + S).
/// M = 0 gives the perpendicular curve.
inline ExpTermSum cw_g2_terms(double gamma1, double gamma_pd, double s, double visibility,
                              double mode_overlap) {
  detail::require_positive(gamma1, "gamma1");
  detail::require_nonnegative_field(gamma_pd, "gamma_pd");
  detail::require_nonnegative_field(s, "s");
  detail::require_unit_interval(visibility, "visibility");
  detail::require_unit_interval(mode_overlap, "mode_overlap");
  const double a = gamma1 * (1.0 + s);
  return {1.0,
          {{-0.5 * visibility, a, 0.0},
           {-0.5 * visibility * mode_overlap, a + 2.0 * gamma_pd, 0.0}}};
}

inline CorrelationCurve cw_g2_analytic(std::span<const double> tau, double gamma1, double gamma_pd,
                                       double s, double visibility, double mode_overlap) {
  auto c = detail::sample(cw_g2_terms(gamma1, gamma_pd, s, visibility, mode_overlap), tau,
                          CurveRegime::cw_normalized);
  c.labels["model"] = "cw";
  return c;
}

/// Stationary cw HOM curves of an arbitrary emitter by quantum regression:
///   bracket = 1/2 + (g2(tau) - M |g1(tau)|^2) / (2 Pe^2),  g = 1 - V (1 - bracket),
/// with g1 = <sigma^dag(tau) sigma(0)> and g2 = <sigma^dag sigma^dag(tau) sigma(tau) sigma>.
inline CurvePair cw_g2_numeric(const Emitter& em, std::span<const double> tau, double visibility,
                               double mode_overlap) {
  detail::require_unit_interval(visibility, "visibility");
  detail::require_unit_interval(mode_overlap, "mode_overlap");
  const Superoperator l = build_superoperator(em.spec);
  const DensityMatrix rho = steady_state(l);
  const CMatrix sig = em.lowering;
  const CMatrix sig_d = em.raising();
  const double pe = rho.expectation(sig_d * sig);
  if (!(pe > 1e-14)) throw ValidationError("no steady-state emission (Pe = 0)", "s");

  std::vector<double> abs_tau(tau.size());
  for (std::size_t i = 0; i < tau.size(); ++i) abs_tau[i] = std::abs(tau[i]);
  const CMatrix id = CMatrix::Identity(em.spec.dim, em.spec.dim);
  const auto g1 = two_time_correlator(l, rho, sig_d, sig, id, abs_tau);
  const auto g2 = two_time_correlator(l, rho, sig_d * sig, sig, sig_d, abs_tau);

  CurvePair out;
  for (auto* c : {&out.parallel, &out.perpendicular}) {
    c->tau.assign(tau.begin(), tau.end());
    c->values.resize(tau.size());
    c->regime = CurveRegime::cw_normalized;
    c->labels["model"] = "cw_numeric";
  }
  out.parallel.labels["polarization"] = "parallel";
  out.perpendicular.labels["polarization"] = "perpendicular";
  const double norm = 2.0 * pe * pe;
  for (std::size_t i = 0; i < tau.size(); ++i) {
    const double corr = g2[i].real();
    const double coh = std::norm(g1[i]);
    const double par = 0.5 + (corr - mode_overlap * coh) / norm;
    const double perp = 0.5 + corr / norm;
    out.parallel.values[i] = 1.0 - visibility * (1.0 - par);
    out.perpendicular.values[i] = 1.0 - visibility * (1.0 - perp);
  }
  return out;
}

enum class PulsedMethod { analytic, numeric };

/// Per-pulse coincidence densities of an emitter prepared in |e>:
///   G_par(tau) = int dt [Pe(t) Pe(t+tau) - |g1(t+tau, t)|^2],
///   G_perp(tau) = int dt Pe(t) Pe(t+tau).
inline CurvePair pulsed_g2(double gamma1, double gamma_pd, std::span<const double> tau,
                           PulsedMethod method = PulsedMethod::analytic) {
  detail::require_positive(gamma1, "gamma1");
  detail::require_nonnegative_field(gamma_pd, "gamma_pd");
  CurvePair out;
  for (auto* c : {&out.parallel, &out.perpendicular}) {
    c->tau.assign(tau.begin(), tau.end());
    c->values.resize(tau.size());
    c->regime = CurveRegime::pulsed_unnormalized;
    c->labels["model"] = method == PulsedMethod::analytic ? "pulsed" : "pulsed_numeric";
  }
  out.parallel.labels["polarization"] = "parallel";
  out.perpendicular.labels["polarization"] = "perpendicular";

  if (method == PulsedMethod::analytic) {
    for (std::size_t i = 0; i < tau.size(); ++i) {
      const double t = std::abs(tau[i]);
      const double perp = std::exp(-gamma1 * t) / (2.0 * gamma1);
      out.perpendicular.values[i] = perp;
      out.parallel.values[i] = perp - std::exp(-(gamma1 + 2.0 * gamma_pd) * t) / (2.0 * gamma1);
    }
    return out;
  }

  const Emitter em = two_level_liouvillian({gamma1, gamma_pd, 0.0});
  const Superoperator l = build_superoperator(em.spec);
  const Eigen::Index d = l.matrix.rows();
  const CRowVector pop = trace_functional(em.excited_projector());
  const CRowVector coh = trace_functional(em.raising());
  const CVector x0 = stack(DensityMatrix::basis_state(2, basis::kTwoLevelExcited).matrix());
  // rho -> sigma rho as a superoperator.
  CMatrix left(d, d);
  for (Eigen::Index k = 0; k < d; ++k) {
    CVector e = CVector::Zero(d);
    e(k) = 1.0;
    left.col(k) = stack(em.lowering * unstack(e, 2));
  }

  // x(t) = V e^{D t} V^{-1} x0 when L is diagonalisable, else expm per node.
  Eigen::ComplexEigenSolver<CMatrix> eig(l.matrix);
  const CMatrix vecs = eig.eigenvectors();
  const CVector lam = eig.eigenvalues();
  const Eigen::PartialPivLU<CMatrix> lu(vecs);
  const CVector c0 = lu.solve(x0);
  const bool diagonal = (vecs * lam.asDiagonal() * lu.inverse() - l.matrix).norm() <= 1e-10 * l.matrix.norm() &&
                        (vecs * c0 - x0).norm() <= 1e-10;
  auto project = [&](const CRowVector& row, double t) -> cplx {
    if (!diagonal) return (row * ((l.matrix * t).exp() * x0))(0);
    return ((row * vecs).transpose().cwiseProduct((lam * t).array().exp().matrix()).cwiseProduct(c0)).sum();
  };

  const double upper = 40.0 / gamma1;
  using Quad = boost::math::quadrature::gauss_kronrod<double, 31>;
  for (std::size_t i = 0; i < tau.size(); ++i) {
    const double t_delay = std::abs(tau[i]);
    const CMatrix step = (l.matrix * t_delay).exp();
    const CRowVector pop_later = pop * step;
    const CRowVector coh_later = coh * step * left;
    const double perp = Quad::integrate(
        [&](double t) { return project(pop, t).real() * project(pop_later, t).real(); }, 0.0, upper, 15, 1e-9);
    // Subtracting the |g1|^2 integral separately keeps G_par accurate when
    // it is a small difference.
    const double interference =
        Quad::integrate([&](double t) { return std::norm(project(coh_later, t)); }, 0.0, upper, 15, 1e-9);
    out.perpendicular.values[i] = perp;
    out.parallel.values[i] = perp - interference;
  }
  return out;
}

/// Intensity coefficients of the two fibre beam splitters, delay-line
/// length and the visibility/overlap factors.
struct InterferometerParams {
  double r0sq = 0.5, t0sq = 0.5, r1sq = 0.5, t1sq = 0.5;
  double delay = 0.0;  // s
  double visibility = 1.0;
  double mode_overlap = 1.0;       // used for the parallel curve
  double mode_overlap_perp = 0.0;  // used for the perpendicular curve

  double overlap(Polarization p) const {
    return p == Polarization::parallel ? mode_overlap : mode_overlap_perp;
  }

  void validate() const {
    for (auto [v, name] : {std::pair{r0sq, "r0sq"}, {t0sq, "t0sq"}, {r1sq, "r1sq"}, {t1sq, "t1sq"}})
      detail::require_unit_interval(v, name);
    if (std::abs(r0sq + t0sq - 1.0) > 1e-6) throw ValidationError("r0sq + t0sq must equal 1", "t0sq");
    if (std::abs(r1sq + t1sq - 1.0) > 1e-6) throw ValidationError("r1sq + t1sq must equal 1", "t1sq");
    detail::require_positive(delay, "delay");
    detail::require_unit_interval(visibility, "visibility");
    detail::require_unit_interval(mode_overlap, "mode_overlap");
    detail::require_unit_interval(mode_overlap_perp, "mode_overlap_perp");
  }

  /// Weights of the central antibunching, central interference, and the
  /// dips at +delay and -delay, including the common prefactor.
  std::array<double, 4> weights() const {
    const double pref = 1.0 / ((r1sq * t0sq + r0sq * t1sq) * (r0sq * r1sq + t0sq * t1sq));
    return {pref * r1sq * t1sq * (r0sq * r0sq + t0sq * t0sq),
            pref * 2.0 * r0sq * r1sq * t0sq * t1sq,
            pref * r0sq * r1sq * r1sq * t0sq,
            pref * r0sq * t1sq * t1sq * t0sq};
  }
};

/// Four-exponential cw interferometer curve with decay a = Gamma1 (1 + S).
inline ExpTermSum interferometer_cw_terms(double gamma1, double gamma_pd, double s,
                                          const InterferometerParams& ifp, Polarization pol) {
  detail::require_positive(gamma1, "gamma1");
  detail::require_nonnegative_field(gamma_pd, "gamma_pd");
  detail::require_nonnegative_field(s, "s");
  ifp.validate();
  const auto w = ifp.weights();
  const double a = gamma1 * (1.0 + s);
  const double v = ifp.visibility;
  return {1.0,
          {{-v * w[0], a, 0.0},
           {-v * ifp.overlap(pol) * w[1], a + 2.0 * gamma_pd, 0.0},
           {-v * w[2], a, ifp.delay},
           {-v * w[3], a, -ifp.delay}}};
}

inline CorrelationCurve interferometer_g2_cw(std::span<const double> tau, double gamma1,
                                             double gamma_pd, double s,
                                             const InterferometerParams& ifp, Polarization pol) {
  auto c = detail::sample(interferometer_cw_terms(gamma1, gamma_pd, s, ifp, pol), tau,
                          CurveRegime::cw_normalized);
  c.labels["model"] = "interferometer_cw";
  c.labels["polarization"] = to_string(pol);
  return c;
}

enum class PulsedComponent { all, central, side };

/// Pulse train sum_{|i| <= n} e^{-Gamma1 |tau - i T|} minus the four
/// interferometer terms at rate Gamma1. `central` keeps the i = 0 peak and
/// the two central terms; `side` keeps everything else.
inline ExpTermSum interferometer_pulsed_terms(double gamma1, double gamma_pd,
                                              const InterferometerParams& ifp, double rep_period,
                                              int n_side_peaks, Polarization pol,
                                              PulsedComponent part = PulsedComponent::all) {
  detail::require_positive(gamma1, "gamma1");
  detail::require_nonnegative_field(gamma_pd, "gamma_pd");
  detail::require_positive(rep_period, "rep_period");
  if (n_side_peaks < 0) throw ValidationError("must be >= 0", "n_side_peaks");
  ifp.validate();
  const bool central = part != PulsedComponent::side;
  const bool side = part != PulsedComponent::central;
  const auto w = ifp.weights();
  const double v = ifp.visibility;

  ExpTermSum f;
  for (int i = -n_side_peaks; i <= n_side_peaks; ++i)
    if ((i == 0 && central) || (i != 0 && side)) f.terms.push_back({1.0, gamma1, i * rep_period});
  if (central) {
    f.terms.push_back({-v * w[0], gamma1, 0.0});
    f.terms.push_back({-v * ifp.overlap(pol) * w[1], gamma1 + 2.0 * gamma_pd, 0.0});
  }
  if (side) {
    f.terms.push_back({-v * w[2], gamma1, ifp.delay});
    f.terms.push_back({-v * w[3], gamma1, -ifp.delay});
  }
  return f;
}

inline CorrelationCurve interferometer_g2_pulsed(std::span<const double> tau, double gamma1,
                                                 double gamma_pd, const InterferometerParams& ifp,
                                                 double rep_period, int n_side_peaks,
                                                 Polarization pol) {
  auto c = detail::sample(
      interferometer_pulsed_terms(gamma1, gamma_pd, ifp, rep_period, n_side_peaks, pol), tau,
      CurveRegime::pulsed_unnormalized);
  c.labels["model"] = "interferometer_pulsed";
  c.labels["polarization"] = to_string(pol);
  return c;
}

/// Upper bound on the contribution of peaks beyond the truncated train.
inline double peak_truncation_bound(double gamma1, double rep_period, int n_side_peaks) {
  return std::exp(-gamma1 * double(n_side_peaks) * rep_period);
}

}  // namespace hom
