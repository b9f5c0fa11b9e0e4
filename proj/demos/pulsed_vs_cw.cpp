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

// Same emitter, two measurements: pulsed peak areas against the cw dip
// integral. Also shows that g2(0) depends on the detector while the
// integral does not.

#include <cstdio>
#include <numbers>

#include "hom/correlation_functions.hpp"
#include "hom/curve.hpp"
#include "hom/indistinguishability.hpp"
#include "hom/irf.hpp"

int main() {
  using namespace hom;
  const double two_pi = 2.0 * std::numbers::pi;
  const double g1 = two_pi * 40e6, gpd = two_pi * 15e6;

  const auto tp = symmetric_grid(80e-9, 0.02e-9);
  const auto pulsed = pulsed_g2(g1, gpd, tp);
  const auto rp = pulsed_extract(pulsed.parallel, pulsed.perpendicular);
  std::printf("pulsed      I = %.4f   (Gamma1 / 2 Gamma2 = %.4f)\n", rp.value, g1 / (g1 + 2.0 * gpd));

  std::printf("\n%6s %12s %10s %10s\n", "S", "sigma_irf/ns", "g2par(0)", "I~");
  for (double s : {0.1, 1.3, 4.4}) {
    const auto tau = symmetric_grid(40.0 / (g1 * (1.0 + s)) + 3e-9, 0.005e-9);
    const auto par = cw_g2_analytic(tau, g1, gpd, s, 1.0, 1.0);
    const auto perp = cw_g2_analytic(tau, g1, gpd, s, 1.0, 0.0);
    const std::size_t mid = tau.size() / 2;
    std::printf("%6.2f %12s %10.4f %10.4f\n", s, "-", par.values[mid], cw_integral_extract(par, perp).value);
    for (double sigma : {0.1e-9, 0.35e-9, 0.5e-9}) {
      const auto irf = DetectorIRF::gaussian(sigma);
      const auto cpar = convolve_irf(par, irf);
      const auto cperp = convolve_irf(perp, irf);
      std::printf("%6s %12.2f %10.4f %10.4f\n", "", sigma * 1e9, cpar.values[mid],
                  cw_integral_extract(cpar, cperp).value);
    }
  }
  std::printf("\ncw I~ at S -> 0 approaches %.4f\n", i_tilde_analytic(0.0, g1, gpd));
  return 0;
}
