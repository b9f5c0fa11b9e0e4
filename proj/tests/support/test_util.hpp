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
#include <numbers>
#include <random>

#include "hom/lindblad.hpp"

namespace hom::test {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kGamma1 = kTwoPi * 40e6;
inline constexpr double kGammaPd = kTwoPi * 15e6;

inline CMatrix random_matrix(std::mt19937_64& rng, Eigen::Index d) {
  std::normal_distribution<double> n(0.0, 1.0);
  CMatrix m(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = cplx(n(rng), n(rng));
  return m;
}

inline DensityMatrix random_state(std::mt19937_64& rng, Eigen::Index d) {
  const CMatrix a = random_matrix(rng, d);
  CMatrix rho = a * a.adjoint();
  rho /= rho.trace().real();
  rho = 0.5 * (rho + rho.adjoint()).eval();
  return DensityMatrix(rho);
}

/// -i[H, rho] + sum rate (X rho X^dag - 1/2 {X^dag X, rho}) by plain products.
inline CMatrix lindblad_rhs(const LiouvillianSpec& spec, const CMatrix& rho) {
  const cplx i_unit(0.0, 1.0);
  CMatrix out = -i_unit * (spec.hamiltonian * rho - rho * spec.hamiltonian);
  for (const auto& d : spec.dissipators) {
    const CMatrix xdx = d.op.adjoint() * d.op;
    out += d.rate * (d.op * rho * d.op.adjoint() - 0.5 * (xdx * rho + rho * xdx));
  }
  return out;
}

}  // namespace hom::test
