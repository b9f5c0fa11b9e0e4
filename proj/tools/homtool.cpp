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

// homtool: simulate, fit, extract and pipeline subcommands.
// Exit codes: 0 success, 2 validation, 3 I/O, 4 numerical failure.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "hom/config.hpp"
#include "hom/errors.hpp"
#include "hom/g2_fit.hpp"
#include "hom/indistinguishability.hpp"
#include "hom/io.hpp"
#include "hom/pipeline.hpp"

namespace {

namespace fs = std::filesystem;
using hom::RunConfig;

constexpr int kOk = 0;
constexpr int kValidation = 2;
constexpr int kIo = 3;
constexpr int kNumerical = 4;

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 failed");
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

struct Loaded {
  RunConfig cfg;
  std::string hash;
};

Loaded load(const std::string& path, std::optional<std::uint64_t> seed) {
  const std::string text = hom::io::read_text(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw hom::ValidationError(std::string("malformed JSON: ") + e.what(), "<root>");
  }
  Loaded l{hom::parse_run_config(j), sha256_hex(text)};
  if (seed && l.cfg.acquisition) l.cfg.acquisition->seed = *seed;
  return l;
}

hom::io::Metadata provenance(const Loaded& l) {
  hom::io::Metadata m;
  m["tool"] = "homtool";
  m["tool_version"] = HOM_VERSION;
  m["config_sha256"] = l.hash;
  m["seed"] = l.cfg.acquisition ? std::to_string(l.cfg.acquisition->seed) : "none";
  return m;
}

void write_json(const fs::path& out, nlohmann::json j, const hom::io::Metadata& prov) {
  j["provenance"] = prov;
  hom::io::atomic_write(out, j.dump(2) + "\n");
}

/// A data file as a histogram or a curve, plus its digest.
struct Input {
  std::string path;
  std::string sha256;
  std::optional<hom::CoincidenceHistogram> hist;
  hom::CorrelationCurve curve;  // normalized (cw) or counts (pulsed)
  hom::CurveRegime regime = hom::CurveRegime::cw_normalized;
  std::optional<double> s;
};

Input read_input(const std::string& path) {
  Input in;
  in.path = path;
  const std::string text = hom::io::read_text(path);
  in.sha256 = sha256_hex(text);
  try {
    if (hom::io::is_histogram_csv(text)) {
      in.hist = hom::io::histogram_from_csv(text);
      in.regime = in.hist->regime;
      in.curve = in.regime == hom::CurveRegime::cw_normalized ? hom::normalize_to_asymptote(*in.hist)
                                                              : in.hist->to_curve();
    } else {
      in.curve = hom::io::curve_from_csv(text);
      in.regime = in.curve.regime;
    }
  } catch (const hom::ParseError& e) {
    throw hom::ParseError(path + ": " + e.what());
  }
  const auto& labels = in.hist ? in.hist->labels : in.curve.labels;
  if (auto it = labels.find("s"); it != labels.end()) in.s = std::stod(it->second);
  return in;
}

int cmd_simulate(const std::string& config, const std::string& out, std::optional<std::uint64_t> seed) {
  const Loaded l = load(config, seed);
  const std::uint64_t sd = l.cfg.acquisition ? l.cfg.acquisition->seed : 0;
  const auto pts = hom::pipeline::simulate(l.cfg, sd);
  for (const auto& f : hom::pipeline::write_simulation(pts, l.cfg, out, provenance(l))) std::cout << f.string() << "\n";
  return kOk;
}

int cmd_fit(const std::string& data, const std::string& model, const std::string& config, const std::string& out,
            bool allow_nonconverged) {
  const Loaded l = load(config, std::nullopt);
  const hom::G2Family family = hom::g2_family_from_string(model);
  const Input in = read_input(data);
  if (!in.hist) throw hom::ValidationError("fit needs a histogram file (header tau_s,counts)", "data");
  RunConfig cfg = l.cfg;
  if (!cfg.emitter.s && in.s) cfg.emitter.s = in.s;
  const auto spec = hom::pipeline::fit_spec(cfg, family);
  const hom::FitResult r = hom::fit_g2_dataset(*in.hist, spec);
  nlohmann::json j = r.to_json();
  j["model"] = hom::to_string(family);
  j["inputs"] = {{"data", {{"path", in.path}, {"sha256", in.sha256}}}};
  if (family == hom::G2Family::hbt_eq9 || family == hom::G2Family::cw_eq7 ||
      family == hom::G2Family::interferometer_cw) {
    const auto p = hom::g2_fit_parameters({hom::G2Data::from(*in.hist)}, spec, r, 0);
    j["rate"] = p.at("gamma1") * (1.0 + p.at("s"));
  }
  write_json(out, j, provenance(l));
  if (!r.converged && !allow_nonconverged) {
    std::cerr << "fit did not converge (use --allow-nonconverged to accept)\n";
    return kNumerical;
  }
  return kOk;
}

int cmd_extract(const std::vector<std::string>& par_paths, const std::vector<std::string>& perp_paths,
                const std::string& method, const std::string& config, const std::string& out,
                bool allow_nonconverged) {
  const Loaded l = load(config, std::nullopt);
  const RunConfig& cfg = l.cfg;
  if (par_paths.empty() || par_paths.size() != perp_paths.size())
    throw hom::ValidationError("need matching --par and --perp lists", "perp");
  if (method != "extrapolate" && par_paths.size() != 1)
    throw hom::ValidationError("method " + method + " takes one --par/--perp pair", "par");

  std::vector<Input> par, perp;
  for (std::size_t i = 0; i < par_paths.size(); ++i) {
    par.push_back(read_input(par_paths[i]));
    perp.push_back(read_input(perp_paths[i]));
  }
  const auto want = method == "pulsed" ? hom::CurveRegime::pulsed_unnormalized : hom::CurveRegime::cw_normalized;
  for (const auto* set : {&par, &perp})
    for (const auto& in : *set)
      if (in.regime != want)
        throw hom::ValidationError(in.path + " is a " + hom::to_string(in.regime) + "-regime file; method " + method +
                                       " needs " + hom::to_string(want),
                                   "method");
  for (std::size_t i = 0; i < par.size(); ++i) {
    if (par[i].hist.has_value() != perp[i].hist.has_value())
      throw hom::ValidationError("parallel and perpendicular files are of different kinds", "perp");
    if (!hom::same_grid(par[i].curve, perp[i].curve))
      throw hom::ValidationError("parallel and perpendicular grids differ", "perp");
  }

  auto nominal_s = [&](std::size_t i) -> double {
    if (par[i].s) return *par[i].s;
    if (i < cfg.extraction.s_values.size()) return cfg.extraction.s_values[i];
    if (cfg.emitter.s && par.size() == 1) return *cfg.emitter.s;
    throw hom::ValidationError("no S for input " + std::to_string(i) + " (label or extraction.s_values)",
                               "extraction.s_values");
  };

  hom::IndistinguishabilityResult result;
  nlohmann::json points = nlohmann::json::array();
  if (method == "pulsed") {
    hom::PulsedExtractOptions opt;
    opt.central_window = cfg.extraction.window;
    result = hom::pipeline::apply_configured_corrections(hom::pulsed_extract(par[0].curve, perp[0].curve, opt), cfg);
  } else {
    std::vector<hom::pipeline::ITildeEstimate> est;
    for (std::size_t i = 0; i < par.size(); ++i) {
      const double s = nominal_s(i);
      if (cfg.extraction.route == "fit" && par[i].hist)
        est.push_back(hom::pipeline::i_tilde_from_fit(cfg, *par[i].hist, *perp[i].hist, s, allow_nonconverged));
      else
        est.push_back(hom::pipeline::i_tilde_from_integral(cfg, par[i].curve, perp[i].curve, s));
      const auto& p = est.back().point;
      points.push_back({{"s_nominal", s}, {"s", p.s}, {"s_sigma", p.sigma_s}, {"i_tilde", p.value},
                        {"i_tilde_sigma", p.sigma}});
    }
    if (method == "cw") {
      const auto& e = est.front();
      if (e.integral) {
        result = *e.integral;
      } else {
        result.method = hom::ExtractionMethod::cw_integral;
        result.value = e.point.value;
        result.uncertainty = e.point.sigma;
        result.s_at_measurement = e.point.s;
        result.details = {{"mode_overlap", e.mode_overlap}, {"s_sigma", e.point.sigma_s}};
      }
      result = hom::pipeline::apply_configured_corrections(std::move(result), cfg);
    } else {
      std::vector<hom::ITildePoint> pts;
      for (const auto& e : est) pts.push_back(e.point);
      result = hom::pipeline::extrapolate(cfg, pts);
    }
  }

  nlohmann::json j = result.to_json();
  if (!points.empty()) j["points"] = points;
  nlohmann::json inputs = nlohmann::json::array();
  for (std::size_t i = 0; i < par.size(); ++i)
    inputs.push_back({{"par", {{"path", par[i].path}, {"sha256", par[i].sha256}}},
                      {"perp", {{"path", perp[i].path}, {"sha256", perp[i].sha256}}}});
  j["inputs"] = inputs;
  write_json(out, j, provenance(l));
  return kOk;
}

int cmd_pipeline(const std::string& config, const std::string& out, std::optional<std::uint64_t> seed,
                 bool allow_nonconverged) {
  const Loaded l = load(config, seed);
  if (!l.cfg.acquisition) throw hom::ValidationError("required by the pipeline", "acquisition");
  const auto rep = hom::pipeline::run(l.cfg, l.cfg.acquisition->seed, allow_nonconverged);
  hom::pipeline::write_report(rep, l.cfg, out, provenance(l));
  if (rep.result) {
    std::printf("I = %.4f +- %.4f (%s)\n", rep.result->value, rep.result->uncertainty,
                hom::to_string(rep.result->method));
  }
  if (rep.hbt_fit) {
    std::printf("visibility = %.4f, s = %.4f\n", rep.hbt_fit->param("visibility"), rep.hbt_fit->param("s"));
  }
  return kOk;
}

template <class F>
int guarded(F&& fn) {
  try {
    return fn();
  } catch (const hom::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const hom::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const hom::IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const hom::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const hom::ExtractionError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-photon interference simulation and indistinguishability extraction"};
  app.set_version_flag("--version", std::string("homtool ") + HOM_VERSION);
  app.require_subcommand(1);

  std::string config, out, data, model, method = "extrapolate";
  std::vector<std::string> par, perp;
  std::optional<std::uint64_t> seed;
  bool allow_nonconverged = false;

  auto* sim = app.add_subcommand("simulate", "Write model curves and synthetic histograms");
  sim->add_option("--config", config, "Run configuration (JSON)")->required();
  sim->add_option("--out", out, "Output directory")->required();
  sim->add_option("--seed", seed, "Override acquisition.seed");

  auto* fit = app.add_subcommand("fit", "Fit a g2 family to a histogram");
  fit->add_option("--data", data, "Histogram CSV (tau_s,counts)")->required();
  fit->add_option("--model", model, "hbt | cw | interferometer_cw | interferometer_pulsed")->required();
  fit->add_option("--config", config, "Run configuration (JSON)")->required();
  fit->add_option("--out", out, "Output JSON")->required();
  fit->add_flag("--allow-nonconverged", allow_nonconverged, "Exit 0 even if the fit did not converge");

  auto* ext = app.add_subcommand("extract", "Extract the indistinguishability from parallel/perpendicular data");
  ext->add_option("--par", par, "Parallel CSV (repeat for extrapolate)")->required();
  ext->add_option("--perp", perp, "Perpendicular CSV (repeat for extrapolate)")->required();
  ext->add_option("--method", method, "pulsed | cw | extrapolate")
      ->check(CLI::IsMember({"pulsed", "cw", "extrapolate"}));
  ext->add_option("--config", config, "Run configuration (JSON)")->required();
  ext->add_option("--out", out, "Output JSON")->required();
  ext->add_flag("--allow-nonconverged", allow_nonconverged, "Accept non-converged point fits");

  auto* pipe = app.add_subcommand("pipeline", "Simulate, fit and extract for every configured S");
  pipe->add_option("--config", config, "Run configuration (JSON)")->required();
  pipe->add_option("--out", out, "Output directory")->required();
  pipe->add_option("--seed", seed, "Override acquisition.seed");
  pipe->add_flag("--allow-nonconverged", allow_nonconverged, "Accept non-converged fits");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kValidation;
  }

  if (*sim) return guarded([&] { return cmd_simulate(config, out, seed); });
  if (*fit) return guarded([&] { return cmd_fit(data, model, config, out, allow_nonconverged); });
  if (*ext) return guarded([&] { return cmd_extract(par, perp, method, config, out, allow_nonconverged); });
  return guarded([&] { return cmd_pipeline(config, out, seed, allow_nonconverged); });
}
