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
#include <filesystem>
#include <string>

#include "hom/config.hpp"
#include "hom/indistinguishability.hpp"
#include "hom/io.hpp"
#include "hom/pipeline.hpp"
#include "../support/test_util.hpp"

namespace hom {
namespace {

namespace fs = std::filesystem;
using test::kGamma1;
using test::kGammaPd;

RunConfig shipped(const char* name) { return load_run_config(fs::path(HOM_CONFIG_DIR) / name); }

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("hom_pipeline_test_" + std::to_string(::getpid())) / name;
  fs::create_directories(d);
  return d;
}

TEST(Pipeline, HbtFitMatchesConfiguredVisibilityAndRate) {
  const RunConfig cfg = shipped("dbt_hbt.json");
  const auto rep = pipeline::run(cfg, cfg.acquisition->seed);
  ASSERT_TRUE(rep.hbt_fit);
  const auto& f = *rep.hbt_fit;
  EXPECT_TRUE(f.converged);
  const double v = f.param("visibility"), sv = f.sigmas(Eigen::Index(f.index("visibility")));
  EXPECT_LE(std::abs(v - 1.0), 3.0 * sv + 1e-12);
  const double s = f.param("s"), ss = f.sigmas(Eigen::Index(f.index("s")));
  const double rate = kGamma1 * (1.0 + s);
  EXPECT_LE(std::abs(rate - kGamma1 * 1.5), 3.0 * kGamma1 * ss);
}

TEST(Pipeline, CwPairFeedsIntegralExtraction) {
  RunConfig cfg = shipped("dbt_cw.json");
  cfg.extraction.s_values = {1.3};
  const auto pts = pipeline::simulate(cfg, 11);
  ASSERT_EQ(pts.size(), 1u);
  ASSERT_TRUE(pts[0].par && pts[0].perp);
  const auto r = cw_integral_extract(normalize_to_asymptote(*pts[0].par), normalize_to_asymptote(*pts[0].perp));
  const double truth = i_tilde_analytic(1.3, kGamma1, kGammaPd, 0.96);
  EXPECT_LE(std::abs(r.value - truth), 3.0 * r.uncertainty);
  // Noiseless model curves carry the IRF but integrate to the same value.
  const auto m = cw_integral_extract(pts[0].model.parallel, pts[0].model.perpendicular);
  EXPECT_NEAR(m.value, truth, 5e-3 * truth);
  EXPECT_GT(pts[0].model.parallel.values[pts[0].model.parallel.size() / 2], 0.05);
}

TEST(Pipeline, DefaultConfigReproducesExtrapolatedValue) {
  const RunConfig cfg = shipped("dbt_cw.json");
  const double truth = 0.96 * kGamma1 / (kGamma1 + 2.0 * kGammaPd);
  const auto a = pipeline::run(cfg, 1);
  const auto b = pipeline::run(cfg, 2);
  ASSERT_TRUE(a.result && b.result);
  for (const auto* r : {&*a.result, &*b.result}) {
    EXPECT_NEAR(r->value, 0.53, 0.03);
    EXPECT_LE(std::abs(r->value - truth), 3.0 * r->uncertainty);
  }
  EXPECT_NE(a.simulated[0].par->counts, b.simulated[0].par->counts);
  EXPECT_NE(a.result->value, b.result->value);
  EXPECT_EQ(a.band.size(), 101u);
  EXPECT_NEAR(a.band.front()[1], a.result->value, 1e-12);
}

TEST(Pipeline, IntegralRouteAgreesWithinErrors) {
  RunConfig cfg = shipped("dbt_cw.json");
  cfg.extraction.route = "integral";
  const auto rep = pipeline::run(cfg, 5);
  const double truth = 0.96 * kGamma1 / (kGamma1 + 2.0 * kGammaPd);
  ASSERT_TRUE(rep.result);
  EXPECT_LE(std::abs(rep.result->value - truth), 3.0 * rep.result->uncertainty);
  EXPECT_GT(rep.result->uncertainty, 0.0);
}

TEST(Pipeline, PulsedDelayCorrection) {
  const RunConfig cfg = shipped("dbt_pulsed.json");
  const auto rep = pipeline::run(cfg, cfg.acquisition->seed);
  ASSERT_TRUE(rep.result);
  ASSERT_EQ(rep.result->corrections.size(), 1u);
  const double f = rep.result->corrections[0].factor;
  EXPECT_NEAR(f, std::exp(-kGamma1 * 0.4e-9), 1e-12);
  const double raw = rep.result->value * f;
  EXPECT_NEAR(raw, 0.5714 * 0.9405 * f, 3.0 * rep.result->uncertainty * f);
  EXPECT_NEAR(rep.result->value, kGamma1 / (kGamma1 + 2.0 * kGammaPd) * 0.9405, 3.0 * rep.result->uncertainty);
}

TEST(Pipeline, ReportFilesAreByteIdenticalForSameSeed) {
  const RunConfig cfg = shipped("dbt_cw.json");
  const io::Metadata prov{{"seed", "1"}, {"tool_version", "test"}};
  const fs::path a = scratch("a"), b = scratch("b");
  pipeline::write_report(pipeline::run(cfg, 1), cfg, a, prov);
  pipeline::write_report(pipeline::run(cfg, 1), cfg, b, prov);
  int n = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    ++n;
    EXPECT_EQ(io::read_text(e.path()), io::read_text(b / e.path().filename())) << e.path();
    if (e.path().extension() == ".csv") {
      EXPECT_EQ(io::read_text(e.path()).rfind("# ", 0), 0u);
    }
  }
  EXPECT_EQ(n, 11);
}

TEST(Pipeline, StageErrorsNameTheStage) {
  RunConfig cfg = shipped("dbt_cw.json");
  cfg.fit_fixed["bogus"] = 1.0;
  try {
    pipeline::run(cfg, 1);
    FAIL() << "expected a validation error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("fit stage"), std::string::npos) << e.what();
  }
  cfg = shipped("dbt_cw.json");
  cfg.extraction.s_values.clear();
  EXPECT_THROW(pipeline::run(cfg, 1), ValidationError);
  cfg = shipped("dbt_cw.json");
  cfg.acquisition.reset();
  EXPECT_THROW(pipeline::run(cfg, 1), ValidationError);
}

TEST(Pipeline, ThreeLevelCurvesApproachTwoLevel) {
  RunConfig cfg = shipped("dbt_cw.json");
  cfg.acquisition.reset();
  const auto two = pipeline::model_curves(cfg, 0.2);
  cfg.emitter.kind = EmitterConfig::Kind::three_level;
  cfg.emitter.beta = 2500.0 * kGamma1;
  const auto three = pipeline::model_curves(cfg, 0.2);
  double worst = 0.0;
  for (std::size_t i = 0; i < two.parallel.size(); ++i)
    worst = std::max(worst, std::abs(two.parallel.values[i] - three.parallel.values[i]));
  EXPECT_LT(worst, 1e-2);
}

}  // namespace
}  // namespace hom
