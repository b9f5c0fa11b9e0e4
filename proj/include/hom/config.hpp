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

// Run configuration: a JSON document describing the emitter, the
// interferometer, the detector, acquisition and extraction settings.
//
// Rates are objects {"value": x, "unit": "MHz_over_2pi" | "per_second"};
// durations are {"value": x, "unit": "s" | "ns" | "ps"}. The unit key is
// mandatory. Validation errors carry the dotted field path.

#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "hom/correlation_functions.hpp"
#include "hom/emitter_models.hpp"
#include "hom/errors.hpp"
#include "hom/io.hpp"
#include "hom/irf.hpp"

namespace hom {

enum class Regime { cw, pulsed, hbt };

inline const char* to_string(Regime r) {
  switch (r) {
    case Regime::cw: return "cw";
    case Regime::pulsed: return "pulsed";
    case Regime::hbt: return "hbt";
  }
  return "?";
}

struct EmitterConfig {
  enum class Kind { two_level, three_level };
  Kind kind = Kind::two_level;
  double gamma1 = 0.0;    // 1/s
  double gamma_pd = 0.0;  // 1/s
  double beta = 0.0;      // 1/s, three-level only
  std::optional<double> s;
};

struct AcquisitionConfig {
  double total_counts = 0.0;  // per histogram
  double bin_width = 0.0;     // s
  double half_span = 0.0;     // s
  std::uint64_t seed = 0;
};

struct ExtractionConfig {
  std::string method = "extrapolate";  // pulsed | cw | extrapolate
  std::string route = "fit";           // fit | integral, for cw Ĩ points
  std::optional<double> window;        // half width, s
  std::vector<double> s_values;
  bool fit_gamma = false;
  bool correct_delay_mismatch = false;
  std::optional<double> debye_waller;
};

struct RunConfig {
  Regime regime = Regime::cw;
  EmitterConfig emitter;
  InterferometerParams interferometer;
  bool unbalanced = false;     // side-dip interferometer curves instead of the plain HOM pair
  double delay_mismatch = 0.0; // s, pulsed two-photon path mismatch
  DetectorIRF detector;
  std::optional<AcquisitionConfig> acquisition;
  ExtractionConfig extraction;
  std::map<std::string, double> fit_fixed;
  std::map<std::string, double> fit_free;
  std::optional<int> fit_max_iter;
  nlohmann::json source;

  /// S values to simulate: extraction.s_values, else emitter.s.
  std::vector<double> simulation_s() const {
    if (!extraction.s_values.empty()) return extraction.s_values;
    if (emitter.s) return {*emitter.s};
    return {};
  }
};

namespace config_detail {

using nlohmann::json;

inline std::string join(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

inline const json* child(const json& j, const std::string& key) {
  if (!j.is_object()) return nullptr;
  const auto it = j.find(key);
  return it == j.end() || it->is_null() ? nullptr : &*it;
}

inline const json& require(const json& j, const std::string& key, const std::string& base) {
  const json* c = child(j, key);
  if (!c) throw ValidationError("required field missing", join(base, key));
  return *c;
}

inline double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ValidationError("must be a number", path);
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ValidationError("must be finite", path);
  return v;
}

inline double unit_value(const json& j, const std::string& path, const std::map<std::string, double>& units,
                         const char* kind) {
  if (!j.is_object())
    throw ValidationError(std::string("must be an object {\"value\", \"unit\"} (") + kind + ")", path);
  const double v = number(require(j, "value", path), join(path, "value"));
  const json& u = require(j, "unit", path);
  if (!u.is_string()) throw ValidationError("must be a string", join(path, "unit"));
  const auto it = units.find(u.get<std::string>());
  if (it == units.end()) {
    std::string allowed;
    for (const auto& [k, f] : units) allowed += (allowed.empty() ? "" : ", ") + k;
    throw ValidationError("unknown unit '" + u.get<std::string>() + "' (allowed: " + allowed + ")",
                          join(path, "unit"));
  }
  return v * it->second;
}

inline double rate(const json& j, const std::string& path) {
  static const std::map<std::string, double> units{{"MHz_over_2pi", 2.0 * std::numbers::pi * 1e6},
                                                   {"per_second", 1.0}};
  return unit_value(j, path, units, "rate");
}

inline double duration(const json& j, const std::string& path) {
  static const std::map<std::string, double> units{{"s", 1.0}, {"ns", 1e-9}, {"ps", 1e-12}};
  return unit_value(j, path, units, "duration");
}

inline std::string text(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_string()) throw ValidationError("must be a string", path);
  const auto v = j.get<std::string>();
  std::string list;
  for (const char* a : allowed) {
    if (v == a) return v;
    list += (list.empty() ? "" : ", ") + std::string(a);
  }
  throw ValidationError("unknown value '" + v + "' (allowed: " + list + ")", path);
}

inline void check_keys(const json& j, const std::string& base, std::initializer_list<const char*> known) {
  if (!j.is_object()) throw ValidationError("must be an object", base.empty() ? "<root>" : base);
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* n : known) ok = ok || k == n;
    if (!ok) throw ValidationError("unknown field", join(base, k));
  }
}

inline std::map<std::string, double> number_map(const json& j, const std::string& path) {
  if (!j.is_object()) throw ValidationError("must be an object of numbers", path);
  std::map<std::string, double> out;
  for (const auto& [k, v] : j.items()) out[k] = number(v, join(path, k));
  return out;
}

inline void rethrow_with_prefix(const ValidationError& e, const std::string& prefix) {
  const std::string msg = e.what();
  const std::string& f = e.field();
  const std::string bare = f.empty() ? msg : msg.substr(f.size() + 2);
  throw ValidationError(bare, join(prefix, f.empty() ? "" : f));
}

}  // namespace config_detail

inline RunConfig parse_run_config(const nlohmann::json& j) {
  using namespace config_detail;
  RunConfig c;
  c.source = j;
  check_keys(j, "", {"regime", "emitter", "interferometer", "detector", "acquisition", "extraction", "fit"});

  const std::string regime = text(require(j, "regime", ""), "regime", {"cw", "pulsed", "hbt"});
  c.regime = regime == "cw" ? Regime::cw : regime == "pulsed" ? Regime::pulsed : Regime::hbt;

  const json& em = require(j, "emitter", "");
  check_keys(em, "emitter", {"model", "gamma1", "gamma_pd", "beta", "s"});
  if (const json* m = child(em, "model"))
    c.emitter.kind = text(*m, "emitter.model", {"two_level", "three_level"}) == "two_level"
                         ? EmitterConfig::Kind::two_level
                         : EmitterConfig::Kind::three_level;
  c.emitter.gamma1 = rate(require(em, "gamma1", "emitter"), "emitter.gamma1");
  if (!(c.emitter.gamma1 > 0.0)) throw ValidationError("must be > 0", "emitter.gamma1");
  if (const json* g = child(em, "gamma_pd")) c.emitter.gamma_pd = rate(*g, "emitter.gamma_pd");
  if (c.emitter.gamma_pd < 0.0) throw ValidationError("must be >= 0", "emitter.gamma_pd");
  if (c.emitter.kind == EmitterConfig::Kind::three_level) {
    c.emitter.beta = rate(require(em, "beta", "emitter"), "emitter.beta");
    if (!(c.emitter.beta > 0.0)) throw ValidationError("must be > 0", "emitter.beta");
  } else if (child(em, "beta")) {
    throw ValidationError("only valid for the three_level model", "emitter.beta");
  }
  if (const json* s = child(em, "s")) {
    c.emitter.s = number(*s, "emitter.s");
    if (*c.emitter.s < 0.0) throw ValidationError("must be >= 0", "emitter.s");
  }

  if (const json* ifp = child(j, "interferometer")) {
    check_keys(*ifp, "interferometer", {"model", "r0sq", "r1sq", "delay", "visibility", "mode_overlap",
                                        "mode_overlap_perp", "delay_mismatch"});
    auto& p = c.interferometer;
    if (const json* m = child(*ifp, "model"))
      c.unbalanced = text(*m, "interferometer.model", {"hom", "unbalanced"}) == "unbalanced";
    if (const json* v = child(*ifp, "r0sq")) p.r0sq = number(*v, "interferometer.r0sq");
    if (const json* v = child(*ifp, "r1sq")) p.r1sq = number(*v, "interferometer.r1sq");
    p.t0sq = 1.0 - p.r0sq;
    p.t1sq = 1.0 - p.r1sq;
    if (const json* v = child(*ifp, "visibility")) p.visibility = number(*v, "interferometer.visibility");
    if (const json* v = child(*ifp, "mode_overlap")) p.mode_overlap = number(*v, "interferometer.mode_overlap");
    if (const json* v = child(*ifp, "mode_overlap_perp"))
      p.mode_overlap_perp = number(*v, "interferometer.mode_overlap_perp");
    if (const json* v = child(*ifp, "delay_mismatch"))
      c.delay_mismatch = duration(*v, "interferometer.delay_mismatch");
    if (c.unbalanced) p.delay = duration(require(*ifp, "delay", "interferometer"), "interferometer.delay");
    else if (const json* v = child(*ifp, "delay")) p.delay = duration(*v, "interferometer.delay");
    if (c.delay_mismatch < 0.0) throw ValidationError("must be >= 0", "interferometer.delay_mismatch");
    try {
      InterferometerParams probe = p;
      if (!(probe.delay > 0.0)) probe.delay = 1.0;  // only required for the unbalanced model
      probe.validate();
    } catch (const ValidationError& e) {
      rethrow_with_prefix(e, "interferometer");
    }
  }

  const json& det = require(j, "detector", "");
  check_keys(det, "detector", {"irf", "sigma"});
  const std::string shape = text(require(det, "irf", "detector"), "detector.irf", {"none", "gaussian"});
  if (shape == "gaussian") {
    const double sigma = duration(require(det, "sigma", "detector"), "detector.sigma");
    if (!(sigma > 0.0)) throw ValidationError("must be > 0", "detector.sigma");
    c.detector = DetectorIRF::gaussian(sigma);
  } else if (child(det, "sigma")) {
    throw ValidationError("only valid with irf = gaussian", "detector.sigma");
  }

  if (const json* acq = child(j, "acquisition")) {
    check_keys(*acq, "acquisition", {"total_counts", "bin_width", "half_span", "seed"});
    AcquisitionConfig a;
    a.total_counts = number(require(*acq, "total_counts", "acquisition"), "acquisition.total_counts");
    if (!(a.total_counts > 0.0)) throw ValidationError("must be > 0", "acquisition.total_counts");
    a.bin_width = duration(require(*acq, "bin_width", "acquisition"), "acquisition.bin_width");
    a.half_span = duration(require(*acq, "half_span", "acquisition"), "acquisition.half_span");
    if (!(a.bin_width > 0.0)) throw ValidationError("must be > 0", "acquisition.bin_width");
    if (!(a.half_span > 2.0 * a.bin_width)) throw ValidationError("must exceed two bins", "acquisition.half_span");
    const json& seed = require(*acq, "seed", "acquisition");
    if (!seed.is_number_unsigned())
      throw ValidationError("must be a non-negative integer", "acquisition.seed");
    a.seed = seed.get<std::uint64_t>();
    c.acquisition = a;
  }

  if (const json* ex = child(j, "extraction")) {
    check_keys(*ex, "extraction", {"method", "route", "window", "s_values", "fit_gamma", "corrections"});
    auto& e = c.extraction;
    if (const json* m = child(*ex, "method")) e.method = text(*m, "extraction.method", {"pulsed", "cw", "extrapolate"});
    if (const json* r = child(*ex, "route")) e.route = text(*r, "extraction.route", {"fit", "integral"});
    if (const json* w = child(*ex, "window")) {
      e.window = duration(*w, "extraction.window");
      if (!(*e.window > 0.0)) throw ValidationError("must be > 0", "extraction.window");
    }
    if (const json* sv = child(*ex, "s_values")) {
      if (!sv->is_array()) throw ValidationError("must be a list of numbers", "extraction.s_values");
      for (std::size_t i = 0; i < sv->size(); ++i) {
        const std::string path = "extraction.s_values[" + std::to_string(i) + "]";
        const double s = number((*sv)[i], path);
        if (s < 0.0) throw ValidationError("must be >= 0", path);
        e.s_values.push_back(s);
      }
      if (e.s_values.empty()) throw ValidationError("must not be empty", "extraction.s_values");
    }
    if (const json* fg = child(*ex, "fit_gamma")) {
      if (!fg->is_boolean()) throw ValidationError("must be true or false", "extraction.fit_gamma");
      e.fit_gamma = fg->get<bool>();
    }
    if (const json* corr = child(*ex, "corrections")) {
      check_keys(*corr, "extraction.corrections", {"delay_mismatch", "debye_waller"});
      if (const json* d = child(*corr, "delay_mismatch")) {
        if (!d->is_boolean()) throw ValidationError("must be true or false", "extraction.corrections.delay_mismatch");
        e.correct_delay_mismatch = d->get<bool>();
      }
      if (const json* dw = child(*corr, "debye_waller")) {
        e.debye_waller = number(*dw, "extraction.corrections.debye_waller");
        if (!(*e.debye_waller > 0.0 && *e.debye_waller <= 1.0))
          throw ValidationError("must lie in (0, 1]", "extraction.corrections.debye_waller");
      }
    }
  }

  if (const json* fit = child(j, "fit")) {
    check_keys(*fit, "fit", {"fixed", "free", "max_iter"});
    if (const json* m = child(*fit, "max_iter")) {
      if (!m->is_number_unsigned() || m->get<std::uint64_t>() < 1)
        throw ValidationError("must be a positive integer", "fit.max_iter");
      c.fit_max_iter = int(std::min<std::uint64_t>(m->get<std::uint64_t>(), 100000));
    }
    if (const json* f = child(*fit, "fixed")) c.fit_fixed = number_map(*f, "fit.fixed");
    if (const json* f = child(*fit, "free")) c.fit_free = number_map(*f, "fit.free");
  }

  if (c.regime == Regime::pulsed && c.unbalanced)
    throw ValidationError("the unbalanced model is cw-only in the pipeline", "interferometer.model");
  if (c.regime != Regime::pulsed && c.extraction.method == "pulsed")
    throw ValidationError("method pulsed requires regime pulsed", "extraction.method");
  if (c.regime == Regime::pulsed && c.extraction.method != "pulsed" && child(j, "extraction") &&
      child(*child(j, "extraction"), "method"))
    throw ValidationError("regime pulsed requires method pulsed", "extraction.method");
  if (c.regime == Regime::pulsed) c.extraction.method = "pulsed";
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  const std::string text = io::read_text(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("malformed JSON: ") + e.what(), "<root>");
  }
  return parse_run_config(j);
}

}  // namespace hom
