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

// Synthetic coincidence histograms and instrument-physics formulas:
// power broadening, saturation, spectral filtering.

#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "hom/curve.hpp"
#include "hom/errors.hpp"

namespace hom {

/// Binned coincidence counts versus delay.
struct CoincidenceHistogram {
  enum class Normalization { raw, asymptote_normalized };

  std::vector<double> bin_edges;  // s, uniform, size = counts.size() + 1
  std::vector<std::int64_t> counts;
  std::int64_t total_counts = 0;
  Normalization normalization = Normalization::raw;
  std::uint64_t seed = 0;
  CurveRegime regime = CurveRegime::cw_normalized;
  std::map<std::string, std::string> labels;

  std::size_t size() const noexcept { return counts.size(); }
  double bin_width() const {
    return counts.empty() ? 0.0 : (bin_edges.back() - bin_edges.front()) / double(counts.size());
  }
  std::vector<double> centers() const {
    std::vector<double> c(counts.size());
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = 0.5 * (bin_edges[i] + bin_edges[i + 1]);
    return c;
  }

  void validate() const {
    if (counts.size() < 2) throw ValidationError("histogram needs at least two bins", "counts");
    if (bin_edges.size() != counts.size() + 1) throw ValidationError("need one more edge than bins", "bin_edges");
    const double w = bin_width();
    if (!(w > 0.0)) throw ValidationError("bin edges must increase", "bin_edges");
    for (std::size_t i = 1; i < bin_edges.size(); ++i)
      if (std::abs(bin_edges[i] - bin_edges[i - 1] - w) > 1e-6 * w)
        throw ValidationError("bins must be uniform", "bin_edges");
    std::int64_t sum = 0;
    for (auto c : counts) {
      if (c < 0) throw ValidationError("counts must be >= 0", "counts");
      sum += c;
    }
    if (sum != total_counts) throw ValidationError("total_counts does not equal the sum of counts", "total_counts");
  }

  /// Raw counts per bin as a curve on the bin centres (units=counts).
  CorrelationCurve to_curve() const {
    validate();
    CorrelationCurve c;
    c.tau = centers();
    c.values.assign(counts.begin(), counts.end());
    c.regime = regime;
    c.labels = labels;
    c.labels["units"] = "counts";
    c.labels["bin_width"] = std::to_string(bin_width());
    return c;
  }
};

/// Counts divided by the mean of the outermost `edge_fraction` of bins on
/// each side. The baseline and the number of bins per side that formed it
/// are recorded as labels baseline_counts and baseline_edge_bins.
inline CorrelationCurve normalize_to_asymptote(const CoincidenceHistogram& h, double edge_fraction = 0.1) {
  h.validate();
  if (!(edge_fraction > 0.0 && edge_fraction <= 0.5)) throw std::invalid_argument("edge_fraction must lie in (0, 0.5]");
  const std::size_t k = std::max<std::size_t>(1, std::size_t(edge_fraction * double(h.size())));
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) sum += double(h.counts[i]) + double(h.counts[h.size() - 1 - i]);
  const double baseline = sum / double(2 * k);
  if (!(baseline > 0.0)) throw ExtractionError("histogram asymptote is empty; cannot normalize");
  CorrelationCurve c = h.to_curve();
  for (double& v : c.values) v /= baseline;
  c.regime = CurveRegime::cw_normalized;
  c.labels["units"] = "normalized";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", baseline);
  c.labels["baseline_counts"] = buf;
  c.labels["baseline_edge_bins"] = std::to_string(k);
  return c;
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline double unit_uniform(std::mt19937_64& eng) {
  return double(eng() >> 11) * 0x1.0p-53;
}

}  // namespace detail

/// Poisson variate for one (seed, bin) pair. Inversion below mean 1e3 (the
/// mean is split into chunks of at most 500 so exp(-mean) stays
/// representable); normal approximation with continuity correction above.
inline std::int64_t poisson_sample(double mean, std::uint64_t seed, std::uint64_t bin) {
  if (!(mean >= 0.0) || !std::isfinite(mean)) throw std::invalid_argument("poisson_sample: mean must be finite and >= 0");
  if (mean == 0.0) return 0;
  std::mt19937_64 eng(detail::splitmix64(seed ^ detail::splitmix64(bin)));
  if (mean >= 1e3) {
    double u1 = detail::unit_uniform(eng);
    const double u2 = detail::unit_uniform(eng);
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    return std::max<std::int64_t>(0, std::int64_t(std::floor(mean + std::sqrt(mean) * z + 0.5)));
  }
  std::int64_t total = 0;
  double remaining = mean;
  while (remaining > 0.0) {
    const double chunk = std::min(remaining, 500.0);
    remaining -= chunk;
    const double u = detail::unit_uniform(eng);
    double p = std::exp(-chunk);
    double cdf = p;
    std::int64_t k = 0;
    while (u > cdf && k < 100000) {
      ++k;
      p *= chunk / double(k);
      cdf += p;
      if (p == 0.0) break;
    }
    total += k;
  }
  return total;
}

struct SynthOptions {
  double background_fraction = 0.0;  // flat background share of the expected total
  CurveRegime regime = CurveRegime::cw_normalized;
};

/// Poisson histogram whose bin means are the model integrated over each bin
/// (piecewise-linear interpolation), scaled so the means sum to
/// `total_counts`. Bins are centred on the midpoint of the model grid.
inline CoincidenceHistogram synth_histogram(const CorrelationCurve& model, double total_counts, double bin_width,
                                            std::uint64_t seed, const SynthOptions& opt = {}) {
  model.validate();
  if (!(total_counts > 0.0)) throw ValidationError("must be > 0", "acquisition.total_counts");
  if (!(bin_width >= model.spacing() * (1.0 - 1e-9)))
    throw ValidationError("bin width must be at least the model grid spacing", "acquisition.bin_width");
  for (double v : model.values)
    if (v < 0.0) throw ValidationError("model curve has negative values", "model");
  if (!(opt.background_fraction >= 0.0 && opt.background_fraction < 1.0))
    throw ValidationError("must lie in [0, 1)", "acquisition.background_fraction");

  auto n_bins = std::size_t(std::floor(model.span() / bin_width * (1.0 + 1e-12)));
  if (n_bins % 2 == 0) --n_bins;
  if (n_bins < 3) throw ValidationError("model grid is shorter than three bins", "acquisition.bin_width");
  const double mid = 0.5 * (model.tau.front() + model.tau.back());
  const double start = mid - 0.5 * double(n_bins) * bin_width;

  // Cumulative integral of the linear interpolant.
  std::vector<double> cum(model.size(), 0.0);
  for (std::size_t i = 1; i < model.size(); ++i)
    cum[i] = cum[i - 1] + 0.5 * (model.tau[i] - model.tau[i - 1]) * (model.values[i] + model.values[i - 1]);
  auto integral_to = [&](double x) {
    if (x <= model.tau.front()) return 0.0;
    if (x >= model.tau.back()) return cum.back();
    const auto it = std::upper_bound(model.tau.begin(), model.tau.end(), x);
    const std::size_t i = std::size_t(it - model.tau.begin()) - 1;
    const double dx = x - model.tau[i];
    const double slope = (model.values[i + 1] - model.values[i]) / (model.tau[i + 1] - model.tau[i]);
    return cum[i] + dx * (model.values[i] + 0.5 * slope * dx);
  };

  CoincidenceHistogram h;
  h.seed = seed;
  h.regime = opt.regime;
  h.bin_edges.resize(n_bins + 1);
  for (std::size_t i = 0; i <= n_bins; ++i) h.bin_edges[i] = start + double(i) * bin_width;
  std::vector<double> means(n_bins);
  for (std::size_t i = 0; i < n_bins; ++i) means[i] = integral_to(h.bin_edges[i + 1]) - integral_to(h.bin_edges[i]);
  const double sum = std::accumulate(means.begin(), means.end(), 0.0);
  if (!(sum > 0.0)) throw ValidationError("model integrates to zero over the histogram range", "model");
  const double signal = (1.0 - opt.background_fraction) * total_counts;
  const double flat = opt.background_fraction * total_counts / double(n_bins);
  h.counts.resize(n_bins);
  for (std::size_t i = 0; i < n_bins; ++i) {
    h.counts[i] = poisson_sample(means[i] * signal / sum + flat, seed, i);
    h.total_counts += h.counts[i];
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", total_counts);
  h.labels["expected_total_counts"] = buf;
  return h;
}

/// FWHM linewidth (Hz) dnu = (Gamma2 / pi) sqrt(1 + S), Gamma2 in rad/s.
inline double power_broadened_linewidth(double gamma2, double s) {
  if (!(gamma2 > 0.0)) throw ValidationError("must be > 0", "gamma2");
  if (!(s >= 0.0)) throw ValidationError("must be >= 0", "s");
  return gamma2 / std::numbers::pi * std::sqrt(1.0 + s);
}

/// Detected rate R = R_inf S / (1 + S).
inline double saturation_rate(double r_inf, double s) {
  if (!(r_inf >= 0.0)) throw ValidationError("must be >= 0", "r_inf");
  if (!(s >= 0.0)) throw ValidationError("must be >= 0", "s");
  if (std::isinf(s)) return r_inf;
  return r_inf * s / (1.0 + s);
}

/// Emission spectrum in wavelength (nm): Lorentzian ZPL, a red-shifted
/// phonon sideband as Poisson-weighted Gaussian lines, and vibronic lines.
struct SpectrumModel {
  struct Line {
    double center_nm = 0.0;
    double fwhm_nm = 0.0;
    double weight = 0.0;
  };
  struct Sideband {
    double mean = 1.0;          // Poisson mean of the phonon-number distribution
    double spacing_nm = 0.5;    // red shift per phonon
    double line_fwhm_nm = 0.6;  // Gaussian width of each phonon replica
    double weight = 0.0;
    int max_order = 30;
  };

  Line zpl;                   // Lorentzian
  Sideband sideband;
  std::vector<Line> vibronic;  // Gaussian

  /// Weights (ZPL, sideband, vibronic) from ZPL share and sideband share of
  /// the 0-0 band; the remainder goes to the vibronic lines.
  static SpectrumModel dbt_like(double zpl_center_nm = 784.45) {
    SpectrumModel m;
    // Homogeneous 70 MHz line at 784.45 nm is ~1.4e-7 nm wide.
    m.zpl = {zpl_center_nm, 1.4e-7, 0.30};
    m.sideband = {0.8, 0.9, 0.8, 0.20, 30};
    m.vibronic = {{zpl_center_nm + 13.5, 0.4, 0.20},
                  {zpl_center_nm + 18.7, 0.4, 0.15},
                  {zpl_center_nm + 35.0, 0.6, 0.15}};
    return m;
  }

  void validate() const {
    double total = zpl.weight + sideband.weight;
    for (const auto& v : vibronic) total += v.weight;
    if (zpl.weight < 0.0 || sideband.weight < 0.0) throw ValidationError("weights must be >= 0", "spectrum");
    for (const auto& v : vibronic)
      if (v.weight < 0.0 || !(v.fwhm_nm > 0.0)) throw ValidationError("vibronic lines need weight >= 0 and fwhm > 0", "spectrum.vibronic");
    if (std::abs(total - 1.0) > 1e-9) throw ValidationError("weights must sum to 1", "spectrum");
    if (!(zpl.fwhm_nm > 0.0)) throw ValidationError("must be > 0", "spectrum.zpl.fwhm_nm");
    if (sideband.weight > 0.0 && (!(sideband.mean > 0.0) || !(sideband.spacing_nm > 0.0) || !(sideband.line_fwhm_nm > 0.0)))
      throw ValidationError("sideband needs positive mean, spacing and width", "spectrum.sideband");
  }

  /// Sideband replicas k >= 1 with Poisson weights renormalised to the sideband weight.
  std::vector<Line> sideband_lines() const {
    std::vector<Line> out;
    if (sideband.weight <= 0.0) return out;
    double norm = 0.0;
    std::vector<double> p;
    double pk = std::exp(-sideband.mean);
    for (int k = 1; k <= sideband.max_order; ++k) {
      pk *= sideband.mean / double(k);
      p.push_back(pk);
      norm += pk;
    }
    for (int k = 1; k <= sideband.max_order; ++k)
      out.push_back({zpl.center_nm + k * sideband.spacing_nm, sideband.line_fwhm_nm,
                     sideband.weight * p[std::size_t(k - 1)] / norm});
    return out;
  }
};

/// Filter transmission versus wavelength (nm), values in [0, 1].
struct FilterModel {
  enum class Shape { all_pass, notch, band, tabulated };

  Shape shape = Shape::all_pass;
  double center_nm = 0.0;
  double width_nm = 0.15;  // notch FWHM, or band full width
  double depth = 1.0;      // peak transmission into the detection path
  std::vector<double> table_nm;
  std::vector<double> table_t;

  static FilterModel all_pass() { return {}; }
  static FilterModel notch(double center_nm, double width_nm = 0.15, double depth = 1.0) {
    FilterModel f;
    f.shape = Shape::notch;
    f.center_nm = center_nm;
    f.width_nm = width_nm;
    f.depth = depth;
    return f;
  }
  static FilterModel band(double lo_nm, double hi_nm) {
    FilterModel f;
    f.shape = Shape::band;
    f.center_nm = 0.5 * (lo_nm + hi_nm);
    f.width_nm = hi_nm - lo_nm;
    return f;
  }

  void validate() const {
    if (!(depth >= 0.0 && depth <= 1.0)) throw ValidationError("must lie in [0, 1]", "filter.depth");
    if ((shape == Shape::notch || shape == Shape::band) && !(width_nm > 0.0))
      throw ValidationError("must be > 0", "filter.width_nm");
    if (shape == Shape::tabulated) {
      if (table_nm.size() != table_t.size() || table_nm.size() < 2)
        throw ValidationError("tabulated filter needs matching wavelength and transmission arrays", "filter.table");
      for (std::size_t i = 1; i < table_nm.size(); ++i)
        if (!(table_nm[i] > table_nm[i - 1])) throw ValidationError("wavelengths must increase", "filter.table");
      for (double t : table_t)
        if (!(t >= 0.0 && t <= 1.0)) throw ValidationError("transmission must lie in [0, 1]", "filter.table");
    }
  }

  double transmission(double nm) const {
    switch (shape) {
      case Shape::all_pass: return 1.0;
      case Shape::notch: {
        const double x = (nm - center_nm) / width_nm;
        return depth * std::exp(-4.0 * std::numbers::ln2 * x * x);
      }
      case Shape::band: return std::abs(nm - center_nm) <= 0.5 * width_nm ? depth : 0.0;
      case Shape::tabulated:
        if (nm < table_nm.front() || nm > table_nm.back()) return 0.0;
        return interpolate(table_nm, table_t, nm);
    }
    return 0.0;
  }
};

struct CoherentFraction {
  double alpha = 0.0;
  double alpha_squared = 0.0;
};

namespace detail {

/// Transmitted weight of a Lorentzian line; tan substitution makes the
/// integrand bounded however narrow the line is.
inline double transmitted_lorentzian(const SpectrumModel::Line& l, const FilterModel& f) {
  const double hw = 0.5 * l.fwhm_nm;
  auto g = [&](double theta) { return f.transmission(l.center_nm + hw * std::tan(theta)); };
  const double h = 0.5 * std::numbers::pi;
  const double v = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(g, -h, h, 25, 1e-12);
  return l.weight * v / std::numbers::pi;
}

inline double transmitted_gaussian(const SpectrumModel::Line& l, const FilterModel& f) {
  const double s = l.fwhm_nm / (2.0 * std::sqrt(2.0 * std::numbers::ln2));
  auto g = [&](double z) { return f.transmission(l.center_nm + s * z) * std::exp(-0.5 * z * z); };
  const double v = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(g, -10.0, 10.0, 25, 1e-12);
  return l.weight * v / std::sqrt(2.0 * std::numbers::pi);
}

}  // namespace detail

/// alpha = transmitted ZPL weight / total transmitted weight.
inline CoherentFraction coherent_fraction(const SpectrumModel& spec, const FilterModel& filt) {
  spec.validate();
  filt.validate();
  const double zpl = detail::transmitted_lorentzian(spec.zpl, filt);
  double other = 0.0;
  for (const auto& l : spec.sideband_lines()) other += detail::transmitted_gaussian(l, filt);
  for (const auto& l : spec.vibronic) other += detail::transmitted_gaussian(l, filt);
  const double total = zpl + other;
  if (!(total > 0.0)) throw ValidationError("filter transmits none of the spectrum", "filter");
  CoherentFraction c;
  c.alpha = zpl / total;
  c.alpha_squared = c.alpha * c.alpha;
  return c;
}

}  // namespace hom
