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

// Fits of closed-form g2 families to coincidence histograms, including
// detector-response convolution, joint multi-histogram fits and the staged
// side-dips-then-centre protocol.
//
// Parameter names: amplitude, background, gamma1, gamma_pd, s, visibility,
// mode_overlap, r0sq, r1sq, delay, rep_period. A key "name@k" in `fixed` or
// `free` applies to dataset k only and overrides the shared "name".

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hom/correlation_functions.hpp"
#include "hom/errors.hpp"
#include "hom/experiment_sim.hpp"
#include "hom/exp_terms.hpp"
#include "hom/fitting.hpp"
#include "hom/irf.hpp"

namespace hom {

enum class G2Family { hbt_eq9, cw_eq7, interferometer_cw, interferometer_pulsed };

inline const char* to_string(G2Family f) {
  switch (f) {
    case G2Family::hbt_eq9: return "hbt";
    case G2Family::cw_eq7: return "cw";
    case G2Family::interferometer_cw: return "interferometer_cw";
    case G2Family::interferometer_pulsed: return "interferometer_pulsed";
  }
  return "unknown";
}

inline G2Family g2_family_from_string(const std::string& s) {
  if (s == "hbt" || s == "hbt_eq9") return G2Family::hbt_eq9;
  if (s == "cw" || s == "cw_eq7") return G2Family::cw_eq7;
  if (s == "interferometer_cw") return G2Family::interferometer_cw;
  if (s == "interferometer_pulsed") return G2Family::interferometer_pulsed;
  throw ValidationError("unknown model family '" + s + "'", "model");
}

inline std::vector<std::string> g2_family_parameters(G2Family f) {
  switch (f) {
    case G2Family::hbt_eq9: return {"amplitude", "background", "gamma1", "s", "visibility"};
    case G2Family::cw_eq7:
      return {"amplitude", "background", "gamma1", "gamma_pd", "s", "visibility", "mode_overlap"};
    case G2Family::interferometer_cw:
      return {"amplitude", "background", "gamma1", "gamma_pd", "s", "visibility", "mode_overlap", "r0sq", "r1sq", "delay"};
    case G2Family::interferometer_pulsed:
      return {"amplitude", "background", "gamma1", "gamma_pd", "visibility", "mode_overlap", "r0sq", "r1sq", "delay", "rep_period"};
  }
  return {};
}

struct G2FitSpec {
  G2Family family = G2Family::cw_eq7;
  DetectorIRF irf;
  std::map<std::string, double> fixed;
  std::map<std::string, double> free;  // initial values
  std::map<std::string, std::pair<double, double>> bounds;
  int n_side_peaks = 12;
  // Refits with weights 1 / max(model, 1) after the data-weighted pass;
  // removes the low-count bias of 1 / counts weighting.
  int reweight_passes = 2;
  FitOptions options;
};

/// Curve of one family for fully resolved parameters (amplitude and
/// background excluded).
inline ExpTermSum g2_family_terms(G2Family f, const std::map<std::string, double>& p, int n_side_peaks = 12) {
  auto get = [&](const char* k) {
    const auto it = p.find(k);
    if (it == p.end()) throw std::invalid_argument(std::string("missing parameter '") + k + "'");
    return it->second;
  };
  switch (f) {
    case G2Family::hbt_eq9: return hbt_terms(get("gamma1"), get("s"), get("visibility"));
    case G2Family::cw_eq7:
      return cw_g2_terms(get("gamma1"), get("gamma_pd"), get("s"), get("visibility"), get("mode_overlap"));
    case G2Family::interferometer_cw:
    case G2Family::interferometer_pulsed: {
      InterferometerParams ifp;
      ifp.r0sq = get("r0sq");
      ifp.t0sq = 1.0 - ifp.r0sq;
      ifp.r1sq = get("r1sq");
      ifp.t1sq = 1.0 - ifp.r1sq;
      ifp.delay = get("delay");
      ifp.visibility = get("visibility");
      ifp.mode_overlap = get("mode_overlap");
      if (f == G2Family::interferometer_cw)
        return interferometer_cw_terms(get("gamma1"), get("gamma_pd"), get("s"), ifp, Polarization::parallel);
      return interferometer_pulsed_terms(get("gamma1"), get("gamma_pd"), ifp, get("rep_period"), n_side_peaks,
                                         Polarization::parallel);
    }
  }
  throw std::invalid_argument("unknown family");
}

/// Expected counts per bin: amplitude * (bin-averaged, IRF-smoothed curve) + background.
inline std::vector<double> g2_expected_counts(const ExpTermSum& terms, const std::vector<double>& edges,
                                              const DetectorIRF& irf, double amplitude, double background) {
  const std::size_t n = edges.size() - 1;
  std::vector<double> out(n);
  if (irf.shape == DetectorIRF::Shape::tabulated) {
    CorrelationCurve c;
    for (std::size_t i = 0; i < n; ++i) {
      c.tau.push_back(0.5 * (edges[i] + edges[i + 1]));
      c.values.push_back(terms.bin_average(edges[i], edges[i + 1], 0.0));
    }
    c = convolve_irf(c, irf);
    for (std::size_t i = 0; i < n; ++i) out[i] = amplitude * c.values[i] + background;
    return out;
  }
  const double sigma = irf.shape == DetectorIRF::Shape::gaussian ? irf.sigma : 0.0;
  for (std::size_t i = 0; i < n; ++i)
    out[i] = amplitude * terms.bin_average(edges[i], edges[i + 1], sigma) + background;
  return out;
}

/// Binned data a g2 family is fitted to: histogram counts, or expected
/// (noiseless) counts.
struct G2Data {
  std::vector<double> bin_edges;
  std::vector<double> counts;
  CurveRegime regime = CurveRegime::cw_normalized;

  static G2Data from(const CoincidenceHistogram& h) {
    h.validate();
    return {h.bin_edges, std::vector<double>(h.counts.begin(), h.counts.end()), h.regime};
  }
  std::size_t size() const noexcept { return counts.size(); }
  std::vector<double> centers() const {
    std::vector<double> c(counts.size());
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = 0.5 * (bin_edges[i] + bin_edges[i + 1]);
    return c;
  }
  void validate() const {
    if (counts.size() < 2 || bin_edges.size() != counts.size() + 1)
      throw ValidationError("need at least two bins and one more edge than bins", "bin_edges");
    for (double c : counts)
      if (!(c >= 0.0)) throw ValidationError("counts must be >= 0", "counts");
  }
};

inline std::vector<G2Data> to_g2_data(const std::vector<CoincidenceHistogram>& hs) {
  std::vector<G2Data> out;
  for (const auto& h : hs) out.push_back(G2Data::from(h));
  return out;
}

namespace detail {

inline std::pair<double, double> default_bounds(const std::string& name) {
  const double inf = std::numeric_limits<double>::infinity();
  if (name == "visibility" || name == "mode_overlap" || name == "r0sq" || name == "r1sq") return {0.0, 1.0};
  if (name == "gamma_pd" || name == "s" || name == "background") return {0.0, inf};
  return {1e-300, inf};  // amplitude, gamma1, delay, rep_period
}

inline std::pair<std::string, std::optional<std::size_t>> split_key(const std::string& key) {
  const auto at = key.find('@');
  if (at == std::string::npos) return {key, std::nullopt};
  const std::string idx = key.substr(at + 1);
  if (idx.empty() || idx.find_first_not_of("0123456789") != std::string::npos)
    throw std::invalid_argument("malformed per-dataset parameter key '" + key + "'");
  return {key.substr(0, at), std::size_t(std::stoul(idx))};
}

inline double estimate_amplitude(const G2Data& h, G2Family f) {
  if (f == G2Family::interferometer_pulsed) {
    return std::max(*std::max_element(h.counts.begin(), h.counts.end()), 1.0);
  }
  const std::size_t k = std::max<std::size_t>(1, h.size() / 10);
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) sum += h.counts[i] + h.counts[h.size() - 1 - i];
  return std::max(sum / double(2 * k), 1.0);
}

/// Where each (dataset, parameter) value comes from.
struct Slot {
  bool is_free = false;
  std::size_t index = 0;  // into the free vector
  double value = 0.0;     // when fixed
};

struct Layout {
  std::vector<std::string> free_names;
  VectorXd p0;
  Bounds bounds;
  std::vector<std::map<std::string, Slot>> slots;  // per dataset
};

inline Layout build_layout(const std::vector<G2Data>& data, const G2FitSpec& spec) {
  const auto params = g2_family_parameters(spec.family);
  const std::set<std::string> known(params.begin(), params.end());
  for (const auto& [k, v] : spec.fixed)
    if (spec.free.count(k)) throw std::invalid_argument("parameter '" + k + "' is both fixed and free");
  auto check_key = [&](const std::string& key) {
    const auto [base, idx] = split_key(key);
    if (!known.count(base))
      throw std::invalid_argument("parameter '" + base + "' is not part of the " + to_string(spec.family) + " model");
    if (idx && *idx >= data.size())
      throw std::invalid_argument("parameter key '" + key + "' refers to a missing dataset");
  };
  for (const auto& [k, v] : spec.fixed) check_key(k);
  for (const auto& [k, v] : spec.free) check_key(k);

  Layout lay;
  lay.slots.resize(data.size());
  std::vector<double> lo, hi, init;
  std::map<std::string, std::size_t> index_of;
  auto add_free = [&](const std::string& key, const std::string& base, double p0) {
    if (auto it = index_of.find(key); it != index_of.end()) return it->second;
    auto [b_lo, b_hi] = default_bounds(base);
    if (auto it = spec.bounds.find(key); it != spec.bounds.end()) std::tie(b_lo, b_hi) = it->second;
    else if (auto jt = spec.bounds.find(base); jt != spec.bounds.end()) std::tie(b_lo, b_hi) = jt->second;
    const std::size_t idx = lay.free_names.size();
    lay.free_names.push_back(key);
    lo.push_back(b_lo);
    hi.push_back(b_hi);
    init.push_back(std::clamp(p0, b_lo, b_hi));
    index_of[key] = idx;
    return idx;
  };

  for (std::size_t k = 0; k < data.size(); ++k) {
    for (const auto& base : params) {
      const std::string local = base + "@" + std::to_string(k);
      Slot slot;
      if (auto it = spec.free.find(local); it != spec.free.end()) {
        slot = {true, add_free(local, base, it->second), 0.0};
      } else if (auto it2 = spec.fixed.find(local); it2 != spec.fixed.end()) {
        slot.value = it2->second;
      } else if (auto it3 = spec.free.find(base); it3 != spec.free.end()) {
        slot = {true, add_free(base, base, it3->second), 0.0};
      } else if (auto it4 = spec.fixed.find(base); it4 != spec.fixed.end()) {
        slot.value = it4->second;
      } else if (base == "background") {
        slot.value = 0.0;
      } else if (base == "amplitude") {
        slot = {true, add_free(local, base, estimate_amplitude(data[k], spec.family)), 0.0};
      } else {
        throw std::invalid_argument("parameter '" + base + "' for dataset " + std::to_string(k) +
                                    " is neither fixed nor free");
      }
      lay.slots[k][base] = slot;
    }
  }
  const auto np = Eigen::Index(lay.free_names.size());
  if (np == 0) throw std::invalid_argument("no free parameters");
  lay.p0 = Eigen::Map<VectorXd>(init.data(), np);
  lay.bounds = {Eigen::Map<VectorXd>(lo.data(), np), Eigen::Map<VectorXd>(hi.data(), np)};
  return lay;
}

inline std::map<std::string, double> resolve(const Layout& lay, std::size_t k, const VectorXd& p) {
  std::map<std::string, double> out;
  for (const auto& [name, slot] : lay.slots[k]) out[name] = slot.is_free ? p(Eigen::Index(slot.index)) : slot.value;
  return out;
}

}  // namespace detail

/// Joint weighted fit of one model family to several histograms (Poisson
/// weights 1 / max(counts, 1)). `masks[k]`, when given, selects the bins of
/// dataset k that enter the fit.
inline FitResult fit_g2_joint(const std::vector<G2Data>& data, const G2FitSpec& spec,
                              const std::vector<std::vector<bool>>& masks = {}) {
  if (data.empty()) throw std::invalid_argument("fit_g2: no datasets");
  for (const auto& h : data) h.validate();
  spec.irf.validate();
  if (spec.family == G2Family::interferometer_pulsed) {
    for (const auto& h : data)
      if (h.regime != CurveRegime::pulsed_unnormalized)
        throw ValidationError("pulsed model family needs pulsed-regime histograms", "model");
  } else {
    for (const auto& h : data)
      if (h.regime != CurveRegime::cw_normalized)
        throw ValidationError("cw model family needs cw-regime histograms", "model");
  }
  const detail::Layout lay = detail::build_layout(data, spec);

  std::vector<std::vector<std::size_t>> used(data.size());
  std::vector<double> y, w;
  for (std::size_t k = 0; k < data.size(); ++k)
    for (std::size_t i = 0; i < data[k].size(); ++i) {
      if (!masks.empty() && !masks[k].empty() && !masks[k][i]) continue;
      used[k].push_back(i);
      y.push_back(data[k].counts[i]);
      w.push_back(1.0 / std::max(1.0, data[k].counts[i]));
    }
  const VectorXd yv = Eigen::Map<VectorXd>(y.data(), Eigen::Index(y.size()));
  const VectorXd wv = Eigen::Map<VectorXd>(w.data(), Eigen::Index(w.size()));

  auto model = [&](const VectorXd& p) -> VectorXd {
    VectorXd out(yv.size());
    Eigen::Index row = 0;
    for (std::size_t k = 0; k < data.size(); ++k) {
      const auto vals = detail::resolve(lay, k, p);
      const auto terms = g2_family_terms(spec.family, vals, spec.n_side_peaks);
      const auto counts = g2_expected_counts(terms, data[k].bin_edges, spec.irf, vals.at("amplitude"), vals.at("background"));
      for (std::size_t i : used[k]) out(row++) = counts[i];
    }
    return out;
  };
  FitResult r = levenberg_marquardt(model, yv, wv, lay.p0, lay.bounds, lay.free_names, nullptr, spec.options);
  for (int pass = 0; pass < spec.reweight_passes; ++pass) {
    const VectorXd expected = model(r.params);
    const VectorXd wm = expected.cwiseMax(1.0).cwiseInverse();
    r = levenberg_marquardt(model, yv, wm, r.params, lay.bounds, lay.free_names, nullptr, spec.options);
  }
  r.labels["weights"] = spec.reweight_passes > 0 ? "model_poisson" : "data_poisson";
  r.labels["model"] = to_string(spec.family);
  r.labels["datasets"] = std::to_string(data.size());
  return r;
}

inline FitResult fit_g2_joint(const std::vector<CoincidenceHistogram>& data, const G2FitSpec& spec,
                              const std::vector<std::vector<bool>>& masks = {}) {
  return fit_g2_joint(to_g2_data(data), spec, masks);
}

inline FitResult fit_g2_dataset(const CoincidenceHistogram& hist, const G2FitSpec& spec) {
  return fit_g2_joint(std::vector<G2Data>{G2Data::from(hist)}, spec);
}

/// Fully resolved parameters of dataset k after a fit (fixed and fitted).
inline std::map<std::string, double> g2_fit_parameters(const std::vector<G2Data>& data,
                                                       const G2FitSpec& spec, const FitResult& fit, std::size_t k) {
  const detail::Layout lay = detail::build_layout(data, spec);
  return detail::resolve(lay, k, fit.params);
}

/// Side dips first (S, V and amplitudes over |tau| > delay / 2), then the
/// central feature (remaining free parameters over |tau| < delay / 2) with
/// the stage-one values held fixed. When r1 ~ t1 both side-dip labelings are
/// tried and the lower residual is kept.
inline FitResult fit_g2_staged(const std::vector<G2Data>& data, G2FitSpec spec) {
  if (spec.family != G2Family::interferometer_cw)
    throw std::invalid_argument("staged protocol applies to the interferometer_cw family");
  auto value_of = [&](const std::string& base) -> std::optional<double> {
    if (auto it = spec.fixed.find(base); it != spec.fixed.end()) return it->second;
    if (auto it = spec.free.find(base); it != spec.free.end()) return it->second;
    return std::nullopt;
  };
  const auto delay = value_of("delay");
  if (!delay) throw std::invalid_argument("staged fit needs a shared 'delay' value");
  const std::set<std::string> side_params{"s", "visibility", "amplitude", "background", "r0sq", "r1sq", "delay", "gamma1"};

  auto masks_for = [&](bool side) {
    std::vector<std::vector<bool>> m(data.size());
    for (std::size_t k = 0; k < data.size(); ++k) {
      const auto c = data[k].centers();
      for (double t : c) m[k].push_back(side == (std::abs(t) > 0.5 * *delay));
    }
    return m;
  };

  // Stage 1: central parameters frozen at their initial values.
  G2FitSpec side = spec;
  for (const auto& [key, v] : spec.free) {
    const auto base = detail::split_key(key).first;
    if (!side_params.count(base)) {
      side.free.erase(key);
      side.fixed[key] = v;
    }
  }
  FitResult stage1 = fit_g2_joint(data, side, masks_for(true));
  std::string labeling = "as_given";
  bool degenerate = false;
  if (const auto r1 = value_of("r1sq"); r1 && std::abs(*r1 - 0.5) < 0.02) {
    G2FitSpec swapped = side;
    (swapped.fixed.count("r1sq") ? swapped.fixed["r1sq"] : swapped.free["r1sq"]) = 1.0 - *r1;
    const FitResult alt = fit_g2_joint(data, swapped, masks_for(true));
    degenerate = std::abs(alt.chi2 - stage1.chi2) <= 1e-6 * std::max(stage1.chi2, 1e-300);
    if (alt.chi2 < stage1.chi2) {
      stage1 = alt;
      side = swapped;
      labeling = "swapped";
    }
  }

  // Stage 2: stage-one results fixed, central parameters free.
  G2FitSpec centre = spec;
  for (const auto& [k, v] : side.fixed)
    if (!spec.free.count(k)) centre.fixed[k] = v;
  for (std::size_t i = 0; i < stage1.names.size(); ++i) {
    centre.free.erase(stage1.names[i]);
    centre.fixed[stage1.names[i]] = stage1.params(Eigen::Index(i));
  }
  if (side.fixed.count("r1sq")) centre.fixed["r1sq"] = side.fixed.at("r1sq");
  for (const auto& [key, v] : spec.free) {
    const auto base = detail::split_key(key).first;
    if (!side_params.count(base)) {
      centre.fixed.erase(key);
      centre.free[key] = v;
    }
  }
  FitResult stage2 = fit_g2_joint(data, centre, masks_for(false));

  FitResult out = stage2;
  const auto np1 = stage1.names.size(), np2 = stage2.names.size();
  out.names = stage1.names;
  out.names.insert(out.names.end(), stage2.names.begin(), stage2.names.end());
  out.params = VectorXd(Eigen::Index(np1 + np2));
  out.params << stage1.params, stage2.params;
  out.sigmas = VectorXd(Eigen::Index(np1 + np2));
  out.sigmas << stage1.sigmas, stage2.sigmas;
  out.covariance = MatrixXd::Zero(Eigen::Index(np1 + np2), Eigen::Index(np1 + np2));
  out.covariance.topLeftCorner(Eigen::Index(np1), Eigen::Index(np1)) = stage1.covariance;
  out.covariance.bottomRightCorner(Eigen::Index(np2), Eigen::Index(np2)) = stage2.covariance;
  out.converged = stage1.converged && stage2.converged;
  out.n_iter = stage1.n_iter + stage2.n_iter;
  out.chi2 = stage1.chi2 + stage2.chi2;
  out.residual_norm = std::sqrt(out.chi2);
  out.n_points = stage1.n_points + stage2.n_points;
  out.warnings.insert(out.warnings.begin(), stage1.warnings.begin(), stage1.warnings.end());
  out.labels["protocol"] = "staged";
  out.labels["side_dip_labeling"] = labeling;
  if (degenerate) out.warnings.push_back("side-dip labeling is degenerate (r1 ~ t1): both assignments fit equally well");
  return out;
}

inline FitResult fit_g2_staged(const std::vector<CoincidenceHistogram>& data, const G2FitSpec& spec) {
  return fit_g2_staged(to_g2_data(data), spec);
}

}  // namespace hom
