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

// Simulate, fit and extract stages driven by a RunConfig, and the
// end-to-end pipeline that chains them over the configured S values.

#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hom/config.hpp"
#include "hom/correlation_functions.hpp"
#include "hom/emitter_models.hpp"
#include "hom/errors.hpp"
#include "hom/experiment_sim.hpp"
#include "hom/fitting.hpp"
#include "hom/g2_fit.hpp"
#include "hom/indistinguishability.hpp"
#include "hom/io.hpp"
#include "hom/irf.hpp"

namespace hom::pipeline {

/// Model curves and (when acquisition is configured) histograms for one S.
struct SimulatedPoint {
  double s = 0.0;
  CurvePair model;  // hbt: parallel only
  std::optional<CoincidenceHistogram> par, perp;
};

struct ITildeEstimate {
  ITildePoint point;
  double s_nominal = 0.0;
  double mode_overlap = 0.0;  // fit route
  std::optional<FitResult> fit;
  std::optional<IndistinguishabilityResult> integral;
};

struct PipelineReport {
  std::vector<SimulatedPoint> simulated;
  std::vector<ITildeEstimate> estimates;
  std::optional<IndistinguishabilityResult> result;
  std::optional<FitResult> hbt_fit;
  std::vector<std::vector<double>> band;  // s, model, lo, hi
};

namespace detail {

/// Runs fn, prefixing any error message with the stage name.
template <class F>
auto stage(const char* name, F&& fn) -> decltype(fn()) {
  const std::string p = std::string(name) + " stage: ";
  try {
    return fn();
  } catch (const ValidationError& e) {
    throw ValidationError(p + e.what());
  } catch (const std::invalid_argument& e) {
    throw ValidationError(p + e.what());
  } catch (const ParseError& e) {
    throw ValidationError(p + e.what());
  } catch (const IoError& e) {
    throw IoError(p + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(p + e.what());
  } catch (const ExtractionError& e) {
    throw NumericalError(p + e.what());
  }
}

inline std::string s_tag(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "s%.6g", s);
  return buf;
}

inline std::vector<double> model_grid(const RunConfig& cfg) {
  if (cfg.acquisition) return symmetric_grid(cfg.acquisition->half_span, cfg.acquisition->bin_width / 10.0);
  const double g1 = cfg.emitter.gamma1;
  const double half = cfg.unbalanced ? 2.0 * cfg.interferometer.delay + 20.0 / g1 : 40.0 / g1;
  return symmetric_grid(half, 0.01 / g1);
}

inline CorrelationCurve smoothed(const ExpTermSum& f, const std::vector<double>& tau, const DetectorIRF& irf) {
  CorrelationCurve c;
  c.tau = tau;
  const double sigma = irf.shape == DetectorIRF::Shape::gaussian ? irf.sigma : 0.0;
  for (double t : tau) c.values.push_back(f.gaussian_smoothed(t, sigma));
  return c;
}

/// Mode overlap the source shows after sideband and delay-mismatch losses.
inline double effective_overlap(const RunConfig& cfg) {
  double m = cfg.interferometer.mode_overlap;
  if (cfg.extraction.debye_waller) m *= *cfg.extraction.debye_waller * *cfg.extraction.debye_waller;
  if (cfg.regime == Regime::pulsed) m *= std::exp(-cfg.emitter.gamma1 * cfg.delay_mismatch);
  return m;
}

inline std::uint64_t stream_seed(std::uint64_t seed, std::size_t point, int pol) {
  return hom::detail::splitmix64(seed ^ hom::detail::splitmix64(std::uint64_t(2 * point + std::size_t(pol) + 1)));
}

}  // namespace detail

inline CurvePair model_curves(const RunConfig& cfg, double s) {
  const auto tau = detail::model_grid(cfg);
  const auto& em = cfg.emitter;
  const auto& ifp = cfg.interferometer;
  const double m = detail::effective_overlap(cfg);
  CurvePair out;
  auto tag = [&](CorrelationCurve& c, const char* pol, CurveRegime regime) {
    c.regime = regime;
    c.labels["polarization"] = pol;
    c.labels["s"] = io::format_double(s);
  };
  switch (cfg.regime) {
    case Regime::hbt:
      out.parallel = detail::smoothed(hbt_terms(em.gamma1, s, ifp.visibility), tau, cfg.detector);
      tag(out.parallel, "none", CurveRegime::cw_normalized);
      out.parallel.labels["model"] = "hbt";
      return out;
    case Regime::pulsed: {
      CurvePair raw = pulsed_g2(em.gamma1, em.gamma_pd, tau);
      for (std::size_t i = 0; i < tau.size(); ++i) {
        const double perp = raw.perpendicular.values[i];
        raw.parallel.values[i] = perp - m * (perp - raw.parallel.values[i]);
      }
      out.parallel = convolve_irf(raw.parallel, cfg.detector);
      out.perpendicular = convolve_irf(raw.perpendicular, cfg.detector);
      tag(out.parallel, "parallel", CurveRegime::pulsed_unnormalized);
      tag(out.perpendicular, "perpendicular", CurveRegime::pulsed_unnormalized);
      return out;
    }
    case Regime::cw: break;
  }
  if (em.kind == EmitterConfig::Kind::three_level) {
    if (cfg.unbalanced) throw ValidationError("three_level emitter supports the hom model only", "interferometer.model");
    const auto p = ThreeLevelParams::from_saturation(em.gamma1, em.gamma_pd, em.beta, s);
    CurvePair raw = cw_g2_numeric(three_level_liouvillian(p), tau, ifp.visibility, m);
    out.parallel = convolve_irf(raw.parallel, cfg.detector);
    out.perpendicular = convolve_irf(raw.perpendicular, cfg.detector);
    if (ifp.mode_overlap_perp > 0.0) {
      CurvePair perp = cw_g2_numeric(three_level_liouvillian(p), tau, ifp.visibility, ifp.mode_overlap_perp);
      out.perpendicular = convolve_irf(perp.parallel, cfg.detector);
    }
  } else if (cfg.unbalanced) {
    InterferometerParams q = ifp;
    q.mode_overlap = m;
    q.validate();
    out.parallel = detail::smoothed(interferometer_cw_terms(em.gamma1, em.gamma_pd, s, q, Polarization::parallel),
                                    tau, cfg.detector);
    out.perpendicular = detail::smoothed(
        interferometer_cw_terms(em.gamma1, em.gamma_pd, s, q, Polarization::perpendicular), tau, cfg.detector);
  } else {
    out.parallel = detail::smoothed(cw_g2_terms(em.gamma1, em.gamma_pd, s, ifp.visibility, m), tau, cfg.detector);
    out.perpendicular = detail::smoothed(
        cw_g2_terms(em.gamma1, em.gamma_pd, s, ifp.visibility, ifp.mode_overlap_perp), tau, cfg.detector);
  }
  tag(out.parallel, "parallel", CurveRegime::cw_normalized);
  tag(out.perpendicular, "perpendicular", CurveRegime::cw_normalized);
  return out;
}

/// Poisson histograms of both polarizations. Pulsed pairs keep their
/// relative area: the perpendicular histogram receives total_counts and
/// the parallel one the same exposure.
inline std::pair<CoincidenceHistogram, CoincidenceHistogram> simulate_histograms(const RunConfig& cfg,
                                                                                 const CurvePair& model,
                                                                                 std::size_t index,
                                                                                 std::uint64_t seed) {
  if (!cfg.acquisition) throw ValidationError("required for histograms", "acquisition");
  const auto& a = *cfg.acquisition;
  SynthOptions opt;
  opt.regime = model.parallel.regime;
  double total_par = a.total_counts;
  if (cfg.regime == Regime::pulsed)
    total_par *= trapezoid(model.parallel.tau, model.parallel.values) /
                 trapezoid(model.perpendicular.tau, model.perpendicular.values);
  auto par = synth_histogram(model.parallel, std::round(total_par), a.bin_width, detail::stream_seed(seed, index, 0), opt);
  auto perp = synth_histogram(model.perpendicular, a.total_counts, a.bin_width, detail::stream_seed(seed, index, 1), opt);
  for (auto* h : {&par, &perp}) {
    h->labels["s"] = model.parallel.labels.at("s");
  }
  par.labels["polarization"] = "parallel";
  perp.labels["polarization"] = "perpendicular";
  return {std::move(par), std::move(perp)};
}

inline SimulatedPoint simulate_point(const RunConfig& cfg, double s, std::size_t index, std::uint64_t seed) {
  SimulatedPoint p;
  p.s = s;
  p.model = model_curves(cfg, s);
  if (cfg.acquisition) {
    if (cfg.regime == Regime::hbt) {
      SynthOptions opt;
      p.par = synth_histogram(p.model.parallel, cfg.acquisition->total_counts, cfg.acquisition->bin_width,
                              detail::stream_seed(seed, index, 0), opt);
      p.par->labels["s"] = io::format_double(s);
    } else {
      auto [a, b] = simulate_histograms(cfg, p.model, index, seed);
      p.par = std::move(a);
      p.perp = std::move(b);
    }
  }
  return p;
}

inline std::vector<SimulatedPoint> simulate(const RunConfig& cfg, std::uint64_t seed) {
  const auto svals = cfg.simulation_s();
  if (svals.empty()) throw ValidationError("no S value configured", "extraction.s_values");
  std::vector<SimulatedPoint> out;
  for (std::size_t i = 0; i < svals.size(); ++i) out.push_back(simulate_point(cfg, svals[i], i, seed));
  return out;
}

// ---- fitting -----------------------------------------------------------

/// Fit specification for one family seeded from the config: known rates,
/// splitter coefficients and overlaps fixed, shape parameters free.
inline G2FitSpec fit_spec(const RunConfig& cfg, G2Family family, std::size_t n_datasets = 1) {
  G2FitSpec spec;
  spec.family = family;
  spec.irf = cfg.detector;
  const auto names = g2_family_parameters(family);
  auto has = [&](const char* n) { return std::find(names.begin(), names.end(), n) != names.end(); };
  spec.fixed["gamma1"] = cfg.emitter.gamma1;
  spec.fixed["background"] = 0.0;
  if (has("gamma_pd")) spec.fixed["gamma_pd"] = cfg.emitter.gamma_pd;
  if (has("r0sq")) {
    spec.fixed["r0sq"] = cfg.interferometer.r0sq;
    spec.fixed["r1sq"] = cfg.interferometer.r1sq;
    spec.fixed["delay"] = cfg.interferometer.delay;
  }
  if (has("s")) spec.free["s"] = cfg.emitter.s.value_or(1.0);
  spec.free["visibility"] = 0.9;
  if (has("mode_overlap")) {
    spec.free[n_datasets > 1 ? "mode_overlap@0" : "mode_overlap"] = 0.8;
    if (n_datasets > 1) spec.fixed["mode_overlap@1"] = cfg.interferometer.mode_overlap_perp;
  }
  if (cfg.fit_max_iter) spec.options.max_iter = *cfg.fit_max_iter;
  for (const auto& [k, v] : cfg.fit_fixed) {
    spec.free.erase(k);
    spec.fixed[k] = v;
  }
  for (const auto& [k, v] : cfg.fit_free) {
    spec.fixed.erase(k);
    spec.free[k] = v;
  }
  return spec;
}

inline G2Family family_for(const RunConfig& cfg) {
  if (cfg.regime == Regime::hbt) return G2Family::hbt_eq9;
  return cfg.unbalanced ? G2Family::interferometer_cw : G2Family::cw_eq7;
}

inline void require_converged(const FitResult& r, bool allow_nonconverged) {
  if (!r.converged && !allow_nonconverged)
    throw NumericalError("fit did not converge after " + std::to_string(r.n_iter) + " iterations");
}

/// Ĩ at the fitted S from a joint fit of the parallel/perpendicular pair:
/// Ĩ = M a / (a + 2 gamma), a = Gamma1 (1 + S).
inline ITildeEstimate i_tilde_from_fit(const RunConfig& cfg, const CoincidenceHistogram& par,
                                       const CoincidenceHistogram& perp, double s_nominal, bool allow_nonconverged) {
  RunConfig local = cfg;
  local.emitter.s = s_nominal;
  const G2FitSpec spec = fit_spec(local, family_for(cfg), 2);
  FitResult fit = fit_g2_joint(std::vector<CoincidenceHistogram>{par, perp}, spec);
  require_converged(fit, allow_nonconverged);
  const auto params = g2_fit_parameters(to_g2_data({par, perp}), spec, fit, 0);
  const double g1 = params.at("gamma1"), gpd = params.at("gamma_pd");
  const double s = params.at("s"), m = params.at("mode_overlap");
  const double a = g1 * (1.0 + s);
  const double f = a / (a + 2.0 * gpd);
  const double d_m = f;
  const double d_s = m * g1 * 2.0 * gpd / ((a + 2.0 * gpd) * (a + 2.0 * gpd));
  auto index = [&](const std::string& n) -> std::optional<Eigen::Index> {
    for (std::size_t i = 0; i < fit.names.size(); ++i)
      if (fit.names[i] == n || fit.names[i] == n + "@0") return Eigen::Index(i);
    return std::nullopt;
  };
  const auto im = index("mode_overlap"), is = index("s");
  double var = 0.0;
  if (im) var += d_m * d_m * fit.covariance(*im, *im);
  if (is) var += d_s * d_s * fit.covariance(*is, *is);
  if (im && is) var += 2.0 * d_m * d_s * fit.covariance(*im, *is);
  ITildeEstimate e;
  e.s_nominal = s_nominal;
  e.mode_overlap = m;
  e.point = {s, m * f, std::sqrt(std::max(var, 0.0)), is ? fit.sigmas(*is) : 0.0};
  e.fit = std::move(fit);
  return e;
}

/// Ĩ from the windowed integral of the asymptote-normalized pair, at the
/// nominal S.
inline ITildeEstimate i_tilde_from_integral(const RunConfig& cfg, const CorrelationCurve& par,
                                            const CorrelationCurve& perp, double s_nominal) {
  CwExtractOptions opt;
  opt.window = cfg.extraction.window;
  opt.s_at_measurement = s_nominal;
  auto r = cw_integral_extract(par, perp, opt);
  ITildeEstimate e;
  e.s_nominal = s_nominal;
  e.point = {s_nominal, r.value, r.uncertainty, 0.0};
  e.integral = std::move(r);
  return e;
}

inline IndistinguishabilityResult apply_configured_corrections(IndistinguishabilityResult r, const RunConfig& cfg) {
  if (cfg.extraction.correct_delay_mismatch && cfg.regime == Regime::pulsed)
    r = apply_delay_correction(std::move(r), cfg.emitter.gamma1, cfg.delay_mismatch);
  if (cfg.extraction.debye_waller) r = apply_sideband_correction(std::move(r), *cfg.extraction.debye_waller);
  return r;
}

/// Fig. 2(d)-style band: Ĩ(S) = M a / (a + 2 gamma) with the 1-sigma
/// envelope from the (M, gamma) covariance of the extrapolation fit.
inline std::vector<std::vector<double>> extrapolation_band(const RunConfig& cfg,
                                                           const std::vector<ITildePoint>& pts,
                                                           std::size_t n = 101) {
  const double g1 = cfg.emitter.gamma1;
  const auto fit = hom::detail::fit_extrapolation(pts, g1, cfg.emitter.gamma_pd, cfg.extraction.fit_gamma);
  double s_max = 0.0;
  for (const auto& p : pts) s_max = std::max(s_max, p.s);
  s_max = 1.25 * std::max(s_max, 1.0);
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = s_max * double(i) / double(n - 1);
    const double a = g1 * (1.0 + s);
    const double den = a + 2.0 * fit.gamma_pd;
    const double v = fit.m * a / den;
    const double dm = a / den, dg = -2.0 * fit.m * a / (den * den);
    const double var = dm * dm * fit.sigma_m * fit.sigma_m + dg * dg * fit.sigma_gamma_pd * fit.sigma_gamma_pd +
                       2.0 * dm * dg * fit.cov_m_gamma;
    const double sd = std::sqrt(std::max(var, 0.0));
    rows.push_back({s, v, v - sd, v + sd});
  }
  return rows;
}

inline IndistinguishabilityResult extrapolate(const RunConfig& cfg, const std::vector<ITildePoint>& pts) {
  ExtrapolationOptions opt;
  opt.fit_gamma = cfg.extraction.fit_gamma;
  return apply_configured_corrections(extrapolate_to_zero(pts, cfg.emitter.gamma1, cfg.emitter.gamma_pd, opt), cfg);
}

/// End-to-end run: simulate every configured S, estimate Ĩ per point and
/// extract 𝓘. hbt configs fit the first histogram instead.
inline PipelineReport run(const RunConfig& cfg, std::uint64_t seed, bool allow_nonconverged = false) {
  if (cfg.simulation_s().empty()) throw ValidationError("must not be empty", "extraction.s_values");
  if (!cfg.acquisition) throw ValidationError("required by the pipeline", "acquisition");
  PipelineReport rep;
  rep.simulated = detail::stage("simulate", [&] { return simulate(cfg, seed); });

  if (cfg.regime == Regime::hbt) {
    rep.hbt_fit = detail::stage("fit", [&] {
      RunConfig local = cfg;
      local.emitter.s = rep.simulated.front().s;
      FitResult r = fit_g2_dataset(*rep.simulated.front().par, fit_spec(local, G2Family::hbt_eq9));
      require_converged(r, allow_nonconverged);
      return r;
    });
    return rep;
  }

  if (cfg.regime == Regime::pulsed) {
    rep.result = detail::stage("extract", [&] {
      const auto& p = rep.simulated.front();
      PulsedExtractOptions opt;
      opt.central_window = cfg.extraction.window;
      auto r = pulsed_extract(p.par->to_curve(), p.perp->to_curve(), opt);
      return apply_configured_corrections(std::move(r), cfg);
    });
    return rep;
  }

  detail::stage("fit", [&] {
    for (const auto& p : rep.simulated) {
      if (cfg.extraction.route == "fit") {
        rep.estimates.push_back(i_tilde_from_fit(cfg, *p.par, *p.perp, p.s, allow_nonconverged));
      } else {
        rep.estimates.push_back(
            i_tilde_from_integral(cfg, normalize_to_asymptote(*p.par), normalize_to_asymptote(*p.perp), p.s));
      }
    }
    return 0;
  });
  rep.result = detail::stage("extract", [&] {
    std::vector<ITildePoint> pts;
    for (const auto& e : rep.estimates) pts.push_back(e.point);
    if (cfg.extraction.method == "cw") {
      const auto& e = rep.estimates.front();
      if (e.integral) return apply_configured_corrections(*e.integral, cfg);
      IndistinguishabilityResult r;
      r.method = ExtractionMethod::cw_integral;
      r.value = e.point.value;
      r.uncertainty = e.point.sigma;
      r.s_at_measurement = e.point.s;
      r.details = {{"mode_overlap", e.mode_overlap}, {"s_sigma", e.point.sigma_s}};
      return apply_configured_corrections(std::move(r), cfg);
    }
    rep.band = extrapolation_band(cfg, pts);
    return extrapolate(cfg, pts);
  });
  return rep;
}

// ---- report files --------------------------------------------------------

inline nlohmann::json fit_json(const FitResult& r, const io::Metadata& prov) {
  nlohmann::json j = r.to_json();
  j["provenance"] = prov;
  return j;
}

inline void make_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

/// model_<tag>[_par|_perp].csv and hist_<tag>[_par|_perp].csv per S.
inline std::vector<std::filesystem::path> write_simulation(const std::vector<SimulatedPoint>& pts, const RunConfig& cfg,
                                                           const std::filesystem::path& dir, const io::Metadata& prov) {
  make_directory(dir);
  std::vector<std::filesystem::path> files;
  auto curve = [&](const std::string& name, const CorrelationCurve& c) {
    files.push_back(dir / name);
    io::write_curve(files.back(), c, prov);
  };
  auto hist = [&](const std::string& name, const CoincidenceHistogram& h) {
    files.push_back(dir / name);
    io::write_histogram(files.back(), h, prov);
  };
  for (const auto& p : pts) {
    const std::string tag = detail::s_tag(p.s);
    if (cfg.regime == Regime::hbt) {
      curve("model_" + tag + ".csv", p.model.parallel);
      if (p.par) hist("hist_" + tag + ".csv", *p.par);
      continue;
    }
    curve("model_" + tag + "_par.csv", p.model.parallel);
    curve("model_" + tag + "_perp.csv", p.model.perpendicular);
    if (p.par) hist("hist_" + tag + "_par.csv", *p.par);
    if (p.perp) hist("hist_" + tag + "_perp.csv", *p.perp);
  }
  return files;
}

inline void write_report(const PipelineReport& rep, const RunConfig& cfg, const std::filesystem::path& dir,
                         const io::Metadata& prov) {
  write_simulation(rep.simulated, cfg, dir, prov);
  nlohmann::json j;
  j["provenance"] = prov;
  j["regime"] = to_string(cfg.regime);
  if (rep.hbt_fit) {
    j["fit"] = rep.hbt_fit->to_json();
    const double s = rep.hbt_fit->param("s");
    j["visibility"] = rep.hbt_fit->param("visibility");
    j["rate"] = cfg.emitter.gamma1 * (1.0 + s);
  }
  if (!rep.estimates.empty()) {
    std::vector<std::vector<double>> rows;
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& e : rep.estimates) {
      rows.push_back({e.s_nominal, e.point.s, e.point.sigma_s, e.point.value, e.point.sigma});
      pts.push_back({{"s_nominal", e.s_nominal}, {"s", e.point.s}, {"s_sigma", e.point.sigma_s},
                     {"i_tilde", e.point.value}, {"i_tilde_sigma", e.point.sigma}});
    }
    j["points"] = pts;
    io::atomic_write(dir / "summary.csv",
                     io::table_to_csv({"s_nominal", "s", "s_sigma", "i_tilde", "i_tilde_sigma"}, rows, prov));
  }
  if (!rep.band.empty())
    io::atomic_write(dir / "extrapolation.csv", io::table_to_csv({"s", "i_tilde", "band_lo", "band_hi"}, rep.band, prov));
  if (rep.result) j["result"] = rep.result->to_json();
  io::atomic_write(dir / "result.json", j.dump(2) + "\n");
}

}  // namespace hom::pipeline
