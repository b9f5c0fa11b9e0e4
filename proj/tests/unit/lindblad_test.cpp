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

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "../support/test_util.hpp"
#include "hom/curve.hpp"
#include "hom/emitter_models.hpp"
#include "hom/lindblad.hpp"

namespace hom {
namespace {

using test::kGamma1;
using test::kGammaPd;

LiouvillianSpec decay_spec(double rate) {
  LiouvillianSpec spec;
  spec.dim = 2;
  spec.hamiltonian = CMatrix::Zero(2, 2);
  spec.dissipators = {{basis::ket_bra(2, 1, 0), rate}};
  return spec;
}

TEST(DensityMatrix, RejectsBadTrace) {
  CMatrix m = CMatrix::Identity(2, 2);
  EXPECT_THROW(DensityMatrix{m}, ValidationError);
}

TEST(DensityMatrix, RejectsNonHermitian) {
  CMatrix m(2, 2);
  m << 0.5, 0.1, 0.3, 0.5;
  EXPECT_THROW(DensityMatrix{m}, ValidationError);
}

TEST(DensityMatrix, ClampsRoundoffNegativity) {
  CMatrix m(2, 2);
  m << 1.0 + 5e-11, 0.0, 0.0, -5e-11;
  DensityMatrix rho(m, 1e-9);
  EXPECT_TRUE(rho.clamped());
  EXPECT_GE(rho.population(1), 0.0);
}

TEST(DensityMatrix, RejectsRealNegativity) {
  CMatrix m(2, 2);
  m << 1.001, 0.0, 0.0, -0.001;
  EXPECT_THROW(DensityMatrix{m}, ValidationError);
}

TEST(Superoperator, SpontaneousDecayRate) {
  const Superoperator l = build_superoperator(decay_spec(kGamma1));
  const CMatrix drho = l.apply(DensityMatrix::basis_state(2, 0).matrix());
  EXPECT_NEAR(drho(0, 0).real() / kGamma1, -1.0, 1e-15);
  EXPECT_NEAR(drho(1, 1).real() / kGamma1, 1.0, 1e-15);
}

TEST(Superoperator, EmptySpecIsZero) {
  LiouvillianSpec spec{2, CMatrix::Zero(2, 2), {}};
  EXPECT_EQ(build_superoperator(spec).matrix.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Superoperator, ThreeLevelUndrivenExcitedDecay) {
  const auto em = three_level_liouvillian(
      ThreeLevelParams::from_rabi(kGamma1, kGammaPd, 2500 * kGamma1, 0.0));
  const Superoperator l = build_superoperator(em.spec);
  const CMatrix drho = l.apply(DensityMatrix::basis_state(3, basis::kExcited).matrix());
  EXPECT_EQ(drho(basis::kExcited, basis::kExcited).real(), -kGamma1);
}

TEST(Superoperator, RejectsNonHermitianHamiltonian) {
  LiouvillianSpec spec = decay_spec(1.0);
  spec.hamiltonian(0, 1) = 1.0;
  EXPECT_THROW(build_superoperator(spec), ValidationError);
}

TEST(Superoperator, RejectsNegativeRate) {
  EXPECT_THROW(build_superoperator(decay_spec(-1.0)), ValidationError);
}

TEST(Superoperator, MatchesDirectLindbladAction) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    LiouvillianSpec spec;
    spec.dim = 3;
    const CMatrix h = test::random_matrix(rng, 3);
    spec.hamiltonian = h + h.adjoint();
    spec.dissipators = {{test::random_matrix(rng, 3), 0.7}, {test::random_matrix(rng, 3), 2.5}};
    const Superoperator l = build_superoperator(spec);
    const CMatrix rho = test::random_state(rng, 3).matrix();
    const CMatrix expected = test::lindblad_rhs(spec, rho);
    EXPECT_LT((l.apply(rho) - expected).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT(std::abs(l.apply(rho).trace()), 1e-10);
  }
}

TEST(Propagate, ZeroTimeIsIdentity) {
  const Superoperator l = build_superoperator(decay_spec(kGamma1));
  std::mt19937_64 rng(1);
  const DensityMatrix rho = test::random_state(rng, 2);
  EXPECT_EQ((propagate(l, rho, 0.0).matrix() - rho.matrix()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Propagate, ExponentialDecay) {
  const Superoperator l = build_superoperator(decay_spec(kGamma1));
  const auto rho = propagate(l, DensityMatrix::basis_state(2, 0), 1.0 / kGamma1);
  EXPECT_NEAR(rho.population(0), std::exp(-1.0), 1e-8);
}

TEST(Propagate, DrivenSaturation) {
  const auto em = two_level_liouvillian({kGamma1, 0.0, 1.0});
  const Superoperator l = build_superoperator(em.spec);
  const auto rho = propagate(l, DensityMatrix::basis_state(2, 1), 50.0 / kGamma1);
  EXPECT_NEAR(rho.population(0), 0.5, 1e-8);
}

TEST(Propagate, NegativeTimeThrows) {
  const Superoperator l = build_superoperator(decay_spec(kGamma1));
  EXPECT_THROW(propagate(l, DensityMatrix::basis_state(2, 0), -1e-9), std::invalid_argument);
}

TEST(Propagate, PreservesTraceAndHermiticity) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> time(0.0, 30.0 / kGamma1);
  const auto em = three_level_liouvillian(
      ThreeLevelParams::from_saturation(kGamma1, kGammaPd, 2500 * kGamma1, 3.0));
  const Superoperator l = build_superoperator(em.spec);
  for (int i = 0; i < 100; ++i) {
    const DensityMatrix rho0 = test::random_state(rng, 3);
    const double t = time(rng);
    const CMatrix raw = unstack((l.matrix * t).exp() * stack(rho0.matrix()), 3);
    EXPECT_LT(std::abs(raw.trace() - cplx(1.0)), 1e-10);
    EXPECT_LT(hermiticity_defect(raw), 1e-10);
    EXPECT_NO_THROW(propagate(l, rho0, t));
  }
}

TEST(Propagate, Composition) {
  std::mt19937_64 rng(3);
  const auto em = two_level_liouvillian({kGamma1, kGammaPd, 0.7});
  const Superoperator l = build_superoperator(em.spec);
  for (int i = 0; i < 10; ++i) {
    const DensityMatrix rho0 = test::random_state(rng, 2);
    const double t1 = 0.3 * (i + 1) / kGamma1;
    const double t2 = 0.17 * (i + 2) / kGamma1;
    const auto direct = propagate(l, rho0, t1 + t2);
    const auto stepped = propagate(l, propagate(l, rho0, t1), t2);
    EXPECT_LT((direct.matrix() - stepped.matrix()).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(SteadyState, Undriven) {
  const auto em = two_level_liouvillian({kGamma1, kGammaPd, 0.0});
  const auto rho = steady_state(build_superoperator(em.spec));
  EXPECT_NEAR(rho.population(basis::kTwoLevelGround), 1.0, 1e-12);
}

TEST(SteadyState, HalfSaturated) {
  const auto em = two_level_liouvillian({kGamma1, kGammaPd, 1.0});
  const Superoperator l = build_superoperator(em.spec);
  const auto rho = steady_state(l);
  EXPECT_NEAR(rho.population(basis::kTwoLevelExcited), 0.5, 1e-12);
  EXPECT_LT((l.matrix * stack(rho.matrix())).cwiseAbs().maxCoeff() / kGamma1, 1e-10);
}

TEST(SteadyState, ThreeLevelExactPopulation) {
  const auto p = ThreeLevelParams::from_saturation(kGamma1, kGammaPd, 2500 * kGamma1, 1.0);
  const auto rho = steady_state(build_superoperator(three_level_liouvillian(p).spec));
  EXPECT_NEAR(rho.population(basis::kExcited), 1.0 / (2.0 + 2.0 / 2500.0), 1e-10);
  EXPECT_NEAR(rho.population(basis::kExcited), 0.49980, 1e-5);
}

TEST(SteadyState, DegenerateKernelReportsDimension) {
  LiouvillianSpec spec{2, CMatrix::Zero(2, 2), {{CMatrix::Identity(2, 2), 1.0}}};
  try {
    steady_state(build_superoperator(spec));
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("dimension 4"), std::string::npos);
  }
}

TEST(SteadyState, PureDephasingIsDegenerate) {
  LiouvillianSpec spec{2, CMatrix::Zero(2, 2), {{basis::ket_bra(2, 0, 0), 1.0}}};
  EXPECT_THROW(steady_state(build_superoperator(spec)), NumericalError);
}

TEST(SteadyState, FixedPointOfPropagation) {
  for (double s : {0.1, 1.3, 10.0}) {
    const auto em = two_level_liouvillian({kGamma1, kGammaPd, s});
    const Superoperator l = build_superoperator(em.spec);
    const auto rho = steady_state(l);
    for (double t : {1.0, 10.0, 100.0}) {
      const auto later = propagate(l, rho, t / kGamma1);
      EXPECT_LT((later.matrix() - rho.matrix()).cwiseAbs().maxCoeff(), 1e-9);
    }
  }
}

TEST(TwoTimeCorrelator, ZeroDelayValues) {
  const auto em = two_level_liouvillian({kGamma1, kGammaPd, 0.8});
  const Superoperator l = build_superoperator(em.spec);
  const auto rho = steady_state(l);
  const std::vector<double> zero{0.0};
  const CMatrix id = CMatrix::Identity(2, 2);
  const auto g1 = two_time_correlator(l, rho, em.raising(), em.lowering, id, zero);
  EXPECT_NEAR(g1[0].real(), rho.population(0), 1e-15);
  const auto g2 =
      two_time_correlator(l, rho, em.excited_projector(), em.lowering, em.raising(), zero);
  EXPECT_EQ(std::abs(g2[0]), 0.0);
}

TEST(TwoTimeCorrelator, DimensionMismatch) {
  const auto em = two_level_liouvillian({kGamma1, kGammaPd, 0.8});
  const Superoperator l = build_superoperator(em.spec);
  const auto rho = steady_state(l);
  const std::vector<double> tau{0.0};
  EXPECT_THROW(two_time_correlator(l, rho, CMatrix::Identity(3, 3), em.lowering, em.raising(), tau),
               std::invalid_argument);
}

TEST(TwoTimeCorrelator, NegativeDelayThrows) {
  const auto em = two_level_liouvillian({kGamma1, kGammaPd, 0.8});
  const Superoperator l = build_superoperator(em.spec);
  const std::vector<double> tau{1e-9, -1e-9};
  EXPECT_THROW(two_time_correlator(l, steady_state(l), em.raising(), em.lowering,
                                   CMatrix::Identity(2, 2), tau),
               std::invalid_argument);
}

TEST(TwoTimeCorrelator, UnsortedGridMatchesSorted) {
  const auto em = two_level_liouvillian({kGamma1, kGammaPd, 1.3});
  const Superoperator l = build_superoperator(em.spec);
  const auto rho = steady_state(l);
  const std::vector<double> tau{3e-9, 0.0, 1e-9, 7e-9, 2e-9};
  const auto out = two_time_correlator(l, rho, em.raising(), em.lowering, CMatrix::Identity(2, 2), tau);
  for (std::size_t i = 0; i < tau.size(); ++i) {
    const std::vector<double> one{tau[i]};
    const auto ref = two_time_correlator(l, rho, em.raising(), em.lowering, CMatrix::Identity(2, 2), one);
    EXPECT_LT(std::abs(out[i] - ref[0]), 1e-12);
  }
}

// Closed forms for the effective two-level emitter:
//   Pe = S/(1+S), g1 = Pe e^{-(a + 2 gamma) tau / 2}, g2 = Pe^2 (1 - e^{-a tau}), a = Gamma1 (1+S).
TEST(TwoTimeCorrelator, TwoLevelClosedForms) {
  for (double s : {0.01, 0.5, 1.3, 4.4}) {
    for (double ratio : {0.0, 0.375, 2.0}) {
      const double gpd = ratio * kGamma1;
      const auto em = two_level_liouvillian({kGamma1, gpd, s});
      const Superoperator l = build_superoperator(em.spec);
      const auto rho = steady_state(l);
      const double pe = s / (1.0 + s);
      const double a = kGamma1 * (1.0 + s);
      EXPECT_NEAR(rho.population(0), pe, 1e-7);
      const auto tau = uniform_grid(0.0, 20.0 / kGamma1, 401);
      const CMatrix id = CMatrix::Identity(2, 2);
      const auto g1 = two_time_correlator(l, rho, em.raising(), em.lowering, id, tau);
      const auto g2 = two_time_correlator(l, rho, em.excited_projector(), em.lowering, em.raising(), tau);
      for (std::size_t i = 0; i < tau.size(); ++i) {
        EXPECT_NEAR(std::abs(g1[i]), pe * std::exp(-0.5 * (a + 2.0 * gpd) * tau[i]), 1e-8);
        EXPECT_NEAR(g2[i].real(), pe * pe * (1.0 - std::exp(-a * tau[i])), 1e-7);
      }
    }
  }
}

TEST(ResolventIntegrals, MatchClosedForms) {
  for (double s : {0.2, 1.3, 4.4}) {
    const auto em = two_level_liouvillian({kGamma1, kGammaPd, s});
    const Superoperator l = build_superoperator(em.spec);
    const auto rho = steady_state(l);
    const double pe = s / (1.0 + s);
    const double a = kGamma1 * (1.0 + s);
    const cplx excess = correlator_excess_integral(l, rho, em.excited_projector(), em.lowering, em.raising());
    EXPECT_NEAR(excess.real() * a / (pe * pe), -1.0, 1e-9);
    const double coh = correlator_abs2_excess_integral(l, rho, em.raising(), em.lowering,
                                                       CMatrix::Identity(2, 2));
    EXPECT_NEAR(coh * (a + 2.0 * kGammaPd) / (pe * pe), 1.0, 1e-9);
  }
}

}  // namespace
}  // namespace hom
