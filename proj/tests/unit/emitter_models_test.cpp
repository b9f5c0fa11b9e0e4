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

#include "../support/test_util.hpp"
#include "hom/correlation_functions.hpp"
#include "hom/emitter_models.hpp"

namespace hom {
namespace {

using test::kGamma1;
using test::kGammaPd;
using test::kTwoPi;

double excited_population(const Emitter& em) {
  const auto rho = steady_state(build_superoperator(em.spec));
  return rho.expectation(em.excited_projector());
}

TEST(TwoLevel, ParamsValidation) {
  EXPECT_THROW(TwoLevelParams({0.0, 0.0, 0.0}).validate(), ValidationError);
  EXPECT_THROW(TwoLevelParams({1.0, -1.0, 0.0}).validate(), ValidationError);
  try {
    TwoLevelParams{1.0, 0.0, -2.0}.validate();
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.field(), "s");
  }
}

TEST(TwoLevel, DissipatorLayout) {
  const auto em = two_level_liouvillian({kGamma1, kGammaPd, 1.3});
  ASSERT_EQ(em.spec.dissipators.size(), 3u);
  EXPECT_EQ(em.spec.dissipators[0].rate, kGamma1);
  EXPECT_DOUBLE_EQ(em.spec.dissipators[1].rate, 1.3 * kGamma1);
  EXPECT_DOUBLE_EQ(em.spec.dissipators[2].rate, 2.0 * kGammaPd);
  EXPECT_EQ(em.spec.hamiltonian.cwiseAbs().maxCoeff(), 0.0);
}

TEST(TwoLevel, PureDecayRelaxesToGround) {
  const auto em = two_level_liouvillian({kGamma1, 0.0, 0.0});
  EXPECT_NEAR(excited_population(em), 0.0, 1e-14);
}

TEST(TwoLevel, LinewidthFromRates) {
  const TwoLevelParams p{kGamma1, kGammaPd, 0.0};
  EXPECT_NEAR(p.gamma2() / kTwoPi, 35e6, 1e-6);
}

TEST(TwoLevel, SaturatedPopulation) {
  EXPECT_NEAR(excited_population(two_level_liouvillian({kGamma1, kGammaPd, 1.3})), 1.3 / 2.3, 1e-12);
  EXPECT_NEAR(1.3 / 2.3, 0.5652, 1e-4);
}

TEST(ThreeLevel, UndrivenRelaxesToGround) {
  const auto em = three_level_liouvillian(
      ThreeLevelParams::from_rabi(kGamma1, kGammaPd, 2500 * kGamma1, 0.0));
  const auto rho = steady_state(build_superoperator(em.spec));
  EXPECT_NEAR(rho.population(basis::kGround), 1.0, 1e-12);
  EXPECT_NEAR(rho.population(basis::kPump), 0.0, 1e-14);
}

TEST(ThreeLevel, HamiltonianAndDissipators) {
  const auto p = ThreeLevelParams::from_saturation(kGamma1, kGammaPd, 2500 * kGamma1, 4.4);
  const auto em = three_level_liouvillian(p);
  EXPECT_NEAR(em.spec.hamiltonian(basis::kPump, basis::kGround).real(), 0.5 * p.rabi(), 1e-6);
  EXPECT_EQ(em.spec.hamiltonian(basis::kExcited, basis::kExcited), cplx(0.0));
  ASSERT_EQ(em.spec.dissipators.size(), 3u);
  EXPECT_EQ(em.spec.dissipators[1].op(basis::kExcited, basis::kPump), cplx(1.0));
  EXPECT_EQ(em.spec.dissipators[1].rate, 2500 * kGamma1);
}

TEST(ThreeLevel, NearTwoLevelAtModerateDrive) {
  const auto p = ThreeLevelParams::from_saturation(kGamma1, kGammaPd, 2500 * kGamma1, 1.0);
  const double pe = excited_population(three_level_liouvillian(p));
  EXPECT_NEAR(pe, 0.49980, 1e-5);
  EXPECT_NEAR(pe, 0.5, 1e-3);
}

TEST(ThreeLevel, ExactPopulationFormula) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> log_s(-2.0, 3.0), log_beta(1.0, 4.0), gpd(0.0, 3.0);
  for (int i = 0; i < 50; ++i) {
    const auto p = ThreeLevelParams::from_saturation(kGamma1, gpd(rng) * kGamma1,
                                                     std::pow(10.0, log_beta(rng)) * kGamma1,
                                                     std::pow(10.0, log_s(rng)));
    EXPECT_NEAR(excited_population(three_level_liouvillian(p)), three_level_excited_population(p), 1e-10);
  }
}

TEST(ThreeLevel, RabiSaturationConsistency) {
  const auto p = ThreeLevelParams::from_rabi(kGamma1, kGammaPd, 2500 * kGamma1, 30 * kGamma1);
  const double s = p.s();
  const auto q = ThreeLevelParams::from_saturation(kGamma1, kGammaPd, 2500 * kGamma1, s);
  EXPECT_NEAR(q.rabi() / p.rabi(), 1.0, 1e-12);
  EXPECT_NEAR(s, 900.0 / 2500.0, 1e-12);
}

TEST(ThreeLevel, InvalidBeta) {
  EXPECT_THROW(ThreeLevelParams::from_saturation(kGamma1, 0.0, 0.0, 1.0), ValidationError);
  EXPECT_THROW(ThreeLevelParams::from_rabi(kGamma1, 0.0, kGamma1, -1.0), ValidationError);
}

// For beta/(S Gamma1) >= 100 and beta/Gamma2 >= 100 the two models should
// agree: populations within 1% and g2 curves within 1% pointwise.
class AdiabaticAgreement : public ::testing::TestWithParam<std::pair<double, double>> {};

TEST_P(AdiabaticAgreement, PopulationsWithinOnePercent) {
  const auto [s, gpd_ratio] = GetParam();
  const auto p3 = ThreeLevelParams::from_saturation(kGamma1, gpd_ratio * kGamma1, 2500 * kGamma1, s);
  ASSERT_TRUE(adiabatic_validity(p3, {100.0, 10.0, 120.0}).valid);
  const double pe3 = excited_population(three_level_liouvillian(p3));
  const double pe2 = s / (1.0 + s);
  EXPECT_LT(std::abs(pe3 - pe2) / pe2, 0.01);
}

TEST_P(AdiabaticAgreement, CurvesWithinOnePercent) {
  const auto [s, gpd_ratio] = GetParam();
  const double gpd = gpd_ratio * kGamma1;
  const auto p3 = ThreeLevelParams::from_saturation(kGamma1, gpd, 2500 * kGamma1, s);
  const auto tau = uniform_grid(0.0, 20.0 / (kGamma1 * (1.0 + s)), 401);
  const auto c3 = cw_g2_numeric(three_level_liouvillian(p3), tau, 1.0, 1.0);
  const auto c2 = cw_g2_numeric(two_level_liouvillian({kGamma1, gpd, s}), tau, 1.0, 1.0);
  double worst = 0.0;
  for (std::size_t i = 0; i < tau.size(); ++i) {
    worst = std::max(worst, std::abs(c3.parallel.values[i] - c2.parallel.values[i]));
    worst = std::max(worst, std::abs(c3.perpendicular.values[i] - c2.perpendicular.values[i]));
  }
  EXPECT_LT(worst, 0.01);
}

INSTANTIATE_TEST_SUITE_P(Grid, AdiabaticAgreement,
                         ::testing::Values(std::pair{0.5, 0.0}, std::pair{1.0, 0.375},
                                           std::pair{5.0, 0.375}, std::pair{25.0, 0.0},
                                           std::pair{25.0, 0.375}));

TEST(SaturationConvert, RabiAtSaturation) {
  const RateContext ctx{kGamma1, 2500 * kGamma1};
  const auto d = saturation_convert(RabiInput{std::sqrt(ctx.beta * ctx.gamma1)}, ctx);
  EXPECT_NEAR(d.s, 1.0, 1e-12);
}

TEST(SaturationConvert, PowerRatio) {
  EXPECT_DOUBLE_EQ(saturation_convert(PowerRatioInput{27e-9, 27e-9}).s, 1.0);
  EXPECT_DOUBLE_EQ(saturation_convert(PowerRatioInput{0.33e-3, 0.33e-3}).s, 1.0);
}

TEST(SaturationConvert, RabiFromSaturation) {
  const auto d = saturation_convert(SaturationInput{4.4}, RateContext{kGamma1, 2500 * kGamma1});
  ASSERT_TRUE(d.rabi.has_value());
  EXPECT_NEAR(*d.rabi / kGamma1, std::sqrt(4.4 * 2500.0), 1e-12);
  EXPECT_NEAR(*d.rabi / kGamma1, 104.88, 5e-3);
}

TEST(SaturationConvert, NegativeInputs) {
  EXPECT_THROW(saturation_convert(SaturationInput{-1.0}), std::invalid_argument);
  EXPECT_THROW(saturation_convert(PowerRatioInput{-1.0, 1.0}), std::invalid_argument);
  EXPECT_THROW(saturation_convert(RabiInput{-1.0}, RateContext{1.0, 1.0}), std::invalid_argument);
}

TEST(SaturationConvert, RoundTrip) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 1000; ++i) {
    const RateContext ctx{kGamma1 * std::pow(10.0, u(rng) / 3.0), kGamma1 * std::pow(10.0, 2.0 + u(rng))};
    const double s = std::pow(10.0, u(rng));
    const auto fwd = saturation_convert(SaturationInput{s}, ctx);
    const auto back = saturation_convert(RabiInput{*fwd.rabi}, ctx);
    EXPECT_NEAR(back.s / s, 1.0, 1e-12);
    EXPECT_NEAR(*back.rabi / *fwd.rabi, 1.0, 1e-12);
  }
}

TEST(AdiabaticValidity, ComfortablyValid) {
  const auto p = ThreeLevelParams::from_saturation(kGamma1, 0.5 * kGamma1, 2500 * kGamma1, 1.0);
  const auto r = adiabatic_validity(p);
  EXPECT_DOUBLE_EQ(r.ratio_drive, 2500.0);
  EXPECT_DOUBLE_EQ(r.ratio_dephase, 2500.0);
  EXPECT_TRUE(r.valid);
  EXPECT_FALSE(r.near_breakdown);
}

TEST(AdiabaticValidity, StrongDriveInvalid) {
  const auto p = ThreeLevelParams::from_saturation(kGamma1, kGammaPd, 2500 * kGamma1, 500.0);
  const auto r = adiabatic_validity(p);
  EXPECT_DOUBLE_EQ(r.ratio_drive, 5.0);
  EXPECT_FALSE(r.valid);
  EXPECT_FALSE(r.warn);
}

TEST(AdiabaticValidity, NearBreakdownFlag) {
  const auto p = ThreeLevelParams::from_saturation(kGamma1, 0.0, 2500 * kGamma1, 23.3);
  const auto r = adiabatic_validity(p);
  EXPECT_NEAR(r.ratio_drive, 107.3, 0.1);
  EXPECT_TRUE(r.valid);
  EXPECT_TRUE(r.near_breakdown);
}

TEST(AdiabaticValidity, WarnBand) {
  const auto p = ThreeLevelParams::from_saturation(kGamma1, 0.0, 2500 * kGamma1, 100.0);
  const auto r = adiabatic_validity(p);
  EXPECT_FALSE(r.valid);
  EXPECT_TRUE(r.warn);
}

}  // namespace
}  // namespace hom
