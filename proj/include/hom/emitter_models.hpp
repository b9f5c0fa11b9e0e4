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

#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "hom/errors.hpp"
#include "hom/lindblad.hpp"

namespace hom {

/// Effective incoherently pumped two-level emitter. Rates in 1/s.
struct TwoLevelParams {
  double gamma1 = 0.0;    // population decay
  double gamma_pd = 0.0;  // excess pure dephasing
  double s = 0.0;         // saturation parameter

  double gamma2() const noexcept { return 0.5 * gamma1 + gamma_pd; }

  void validate() const {
    if (!(gamma1 > 0.0) || !std::isfinite(gamma1)) throw ValidationError("must be > 0", "gamma1");
    if (!(gamma_pd >= 0.0) || !std::isfinite(gamma_pd))
      throw ValidationError("must be >= 0", "gamma_pd");
    if (!(s >= 0.0) || !std::isfinite(s)) throw ValidationError("must be >= 0", "s");
  }
};

/// Coherently driven ground -> pump level, fast pump -> excited decay.
/// The drive is given either as a Rabi frequency or a saturation
/// parameter; the other is derived from S = Omega^2 / (beta * gamma1).
class ThreeLevelParams {
 public:
  enum class Drive { rabi, saturation };

  static ThreeLevelParams from_saturation(double gamma1, double gamma_pd, double beta, double s) {
    return ThreeLevelParams(gamma1, gamma_pd, beta, Drive::saturation, s);
  }
  static ThreeLevelParams from_rabi(double gamma1, double gamma_pd, double beta, double rabi) {
    return ThreeLevelParams(gamma1, gamma_pd, beta, Drive::rabi, rabi);
  }

  double gamma1() const noexcept { return gamma1_; }
  double gamma_pd() const noexcept { return gamma_pd_; }
  double beta() const noexcept { return beta_; }
  double gamma2() const noexcept { return 0.5 * gamma1_ + gamma_pd_; }
  Drive drive() const noexcept { return drive_; }

  double s() const {
    return drive_ == Drive::saturation ? value_ : value_ * value_ / (beta_ * gamma1_);
  }
  double rabi() const {
    return drive_ == Drive::rabi ? value_ : std::sqrt(value_ * beta_ * gamma1_);
  }

  void validate() const {
    if (!(gamma1_ > 0.0) || !std::isfinite(gamma1_)) throw ValidationError("must be > 0", "gamma1");
    if (!(gamma_pd_ >= 0.0) || !std::isfinite(gamma_pd_))
      throw ValidationError("must be >= 0", "gamma_pd");
    if (!(beta_ > 0.0) || !std::isfinite(beta_)) throw ValidationError("must be > 0", "beta");
    if (!(value_ >= 0.0) || !std::isfinite(value_))
      throw ValidationError("must be >= 0", drive_ == Drive::rabi ? "rabi" : "s");
  }

 private:
  ThreeLevelParams(double g1, double gpd, double beta, Drive drive, double value)
      : gamma1_(g1), gamma_pd_(gpd), beta_(beta), drive_(drive), value_(value) {
    validate();
  }

  double gamma1_, gamma_pd_, beta_;
  Drive drive_;
  double value_;
};

/// A Liouvillian together with the emitter's optical lowering operator
/// sigma = |g><e| in the same basis.
struct Emitter {
  LiouvillianSpec spec;
  CMatrix lowering;

  CMatrix raising() const { return lowering.adjoint(); }
  CMatrix excited_projector() const { return lowering.adjoint() * lowering; }
};

namespace basis {
// Two-level ordering |e> = 0, |g> = 1.
inline constexpr Eigen::Index kTwoLevelExcited = 0;
inline constexpr Eigen::Index kTwoLevelGround = 1;
// Three-level ordering |v> = 0, |e> = 1, |g> = 2.
inline constexpr Eigen::Index kPump = 0;
inline constexpr Eigen::Index kExcited = 1;
inline constexpr Eigen::Index kGround = 2;

inline CMatrix ket_bra(Eigen::Index dim, Eigen::Index row, Eigen::Index col) {
  CMatrix m = CMatrix::Zero(dim, dim);
  m(row, col) = 1.0;
  return m;
}
}  // namespace basis

/// Gamma1 (L_sigma + S L_sigma^dag) + 2 gamma L_{sigma^dag sigma}.
inline Emitter two_level_liouvillian(const TwoLevelParams& p) {
  p.validate();
  using namespace basis;
  const CMatrix sigma = ket_bra(2, kTwoLevelGround, kTwoLevelExcited);
  Emitter em;
  em.spec.dim = 2;
  em.spec.hamiltonian = CMatrix::Zero(2, 2);
  em.spec.dissipators = {{sigma, p.gamma1},
                         {sigma.adjoint(), p.s * p.gamma1},
                         {sigma.adjoint() * sigma, 2.0 * p.gamma_pd}};
  em.lowering = sigma;
  return em;
}

/// H = (Omega/2)(sigma_vg + h.c.), dissipators (sigma, Gamma1),
/// (sigma_ev, beta), (sigma^dag sigma, 2 gamma).
inline Emitter three_level_liouvillian(const ThreeLevelParams& p) {
  p.validate();
  using namespace basis;
  const CMatrix sigma = ket_bra(3, kGround, kExcited);
  const CMatrix sigma_vg = ket_bra(3, kPump, kGround);
  const CMatrix sigma_ev = ket_bra(3, kExcited, kPump);
  Emitter em;
  em.spec.dim = 3;
  em.spec.hamiltonian = 0.5 * p.rabi() * (sigma_vg + sigma_vg.adjoint());
  em.spec.dissipators = {{sigma, p.gamma1()},
                         {sigma_ev, p.beta()},
                         {sigma.adjoint() * sigma, 2.0 * p.gamma_pd()}};
  em.lowering = sigma;
  return em;
}

/// Exact stationary excited population of the three-level model.
inline double three_level_excited_population(const ThreeLevelParams& p) {
  const double s = p.s();
  return s / (1.0 + s * (1.0 + 2.0 * p.gamma1() / p.beta()));
}

struct DriveStrength {
  double s = 0.0;
  std::optional<double> rabi;  // rad/s, present when beta and gamma1 are known
};

struct RateContext {
  double gamma1 = 0.0;
  double beta = 0.0;
};

struct RabiInput {
  double value;
};
struct SaturationInput {
  double value;
};
struct PowerRatioInput {
  double power;
  double power_sat;
};

namespace detail {
inline void require_nonnegative(double v, const char* what) {
  if (!(v >= 0.0) || !std::isfinite(v))
    throw std::invalid_argument(std::string(what) + " must be finite and >= 0");
}
inline std::optional<double> rabi_from_s(double s, const std::optional<RateContext>& ctx) {
  if (!ctx) return std::nullopt;
  if (!(ctx->gamma1 > 0.0) || !(ctx->beta > 0.0))
    throw std::invalid_argument("saturation_convert: gamma1 and beta must be > 0");
  return std::sqrt(s * ctx->beta * ctx->gamma1);
}
}  // namespace detail

inline DriveStrength saturation_convert(SaturationInput in,
                                        std::optional<RateContext> ctx = std::nullopt) {
  detail::require_nonnegative(in.value, "S");
  return {in.value, detail::rabi_from_s(in.value, ctx)};
}

inline DriveStrength saturation_convert(PowerRatioInput in,
                                        std::optional<RateContext> ctx = std::nullopt) {
  detail::require_nonnegative(in.power, "power");
  if (!(in.power_sat > 0.0)) throw std::invalid_argument("saturation power must be > 0");
  const double s = in.power / in.power_sat;
  return {s, detail::rabi_from_s(s, ctx)};
}

inline DriveStrength saturation_convert(RabiInput in, RateContext ctx) {
  detail::require_nonnegative(in.value, "Rabi frequency");
  if (!(ctx.gamma1 > 0.0) || !(ctx.beta > 0.0))
    throw std::invalid_argument("saturation_convert: gamma1 and beta must be > 0");
  return {in.value * in.value / (ctx.beta * ctx.gamma1), in.value};
}

struct AdiabaticValidity {
  double ratio_drive = 0.0;    // beta / (S Gamma1)
  double ratio_dephase = 0.0;  // beta / Gamma2
  bool valid = false;          // both ratios >= threshold
  bool warn = false;           // smallest ratio in [warn_floor, threshold)
  bool near_breakdown = false; // valid but smallest ratio < near_breakdown_ratio
};

struct ValidityThresholds {
  double threshold = 50.0;
  double warn_floor = 10.0;
  // I~(S) deviations of order 0.5% appear for beta/(S Gamma1) of roughly
  // 60-110 at beta = 2500 Gamma1.
  double near_breakdown_ratio = 120.0;
};

inline AdiabaticValidity adiabatic_validity(const ThreeLevelParams& p,
                                            const ValidityThresholds& th = {}) {
  p.validate();
  AdiabaticValidity r;
  const double s = p.s();
  r.ratio_drive = s > 0.0 ? p.beta() / (s * p.gamma1()) : std::numeric_limits<double>::infinity();
  r.ratio_dephase = p.beta() / p.gamma2();
  const double worst = std::min(r.ratio_drive, r.ratio_dephase);
  r.valid = worst >= th.threshold;
  r.warn = !r.valid && worst >= th.warn_floor;
  r.near_breakdown = r.valid && worst < th.near_breakdown_ratio;
  return r;
}

}  // namespace hom
