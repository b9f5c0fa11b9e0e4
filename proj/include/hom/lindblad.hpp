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

// Small dense Lindblad engine: superoperator assembly, propagation,
// steady states and quantum-regression two-time correlators.
//
// Density matrices are stacked column-major: vec(rho)[i + d*j] = rho(i, j),
// so vec(A rho B) = (B^T kron A) vec(rho).

#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "hom/errors.hpp"

namespace hom {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using CRowVector = Eigen::RowVectorXcd;

namespace tolerance {
inline constexpr double kTrace = 1e-12;
inline constexpr double kHermitian = 1e-12;
inline constexpr double kPositivity = 1e-10;
inline constexpr double kPropagation = 1e-10;
}  // namespace tolerance

inline CVector stack(const CMatrix& m) {
  return Eigen::Map<const CVector>(m.data(), m.size());
}

inline CMatrix unstack(const CVector& v, Eigen::Index dim) {
  if (v.size() != dim * dim) throw std::invalid_argument("unstack: size is not dim^2");
  return Eigen::Map<const CMatrix>(v.data(), dim, dim);
}

/// Row vector r with r * vec(X) == Tr[a X].
inline CRowVector trace_functional(const CMatrix& a) {
  return stack(a.transpose()).transpose();
}

inline double hermiticity_defect(const CMatrix& m) {
  return m.size() == 0 ? 0.0 : (m - m.adjoint()).cwiseAbs().maxCoeff();
}

class DensityMatrix {
 public:
  /// Validates trace, Hermiticity and positivity. Eigenvalues in
  /// [-kPositivity, 0) are clamped to zero (see clamped()); anything more
  /// negative is rejected.
  explicit DensityMatrix(CMatrix entries, double trace_tol = tolerance::kTrace,
                         double hermitian_tol = tolerance::kHermitian)
      : rho_(std::move(entries)) {
    if (rho_.rows() != rho_.cols() || rho_.rows() == 0)
      throw ValidationError("density matrix must be square and non-empty");
    if (!rho_.allFinite()) throw ValidationError("density matrix has non-finite entries");
    if (std::abs(rho_.trace() - cplx(1.0)) > trace_tol)
      throw ValidationError("density matrix trace " + std::to_string(rho_.trace().real()) +
                            " differs from 1");
    if (hermiticity_defect(rho_) > hermitian_tol)
      throw ValidationError("density matrix is not Hermitian");
    rho_ = 0.5 * (rho_ + rho_.adjoint()).eval();

    Eigen::SelfAdjointEigenSolver<CMatrix> eig(rho_);
    const double lowest = eig.eigenvalues().minCoeff();
    if (lowest < -tolerance::kPositivity)
      throw ValidationError("density matrix has eigenvalue " + std::to_string(lowest));
    if (lowest < 0.0) {
      Eigen::VectorXd clipped = eig.eigenvalues().cwiseMax(0.0);
      clipped /= clipped.sum();
      rho_ = eig.eigenvectors() * clipped.cast<cplx>().asDiagonal() * eig.eigenvectors().adjoint();
      clamped_ = true;
    }
  }

  static DensityMatrix basis_state(Eigen::Index dim, Eigen::Index level) {
    if (level < 0 || level >= dim) throw std::invalid_argument("basis_state: level out of range");
    CMatrix m = CMatrix::Zero(dim, dim);
    m(level, level) = 1.0;
    return DensityMatrix(std::move(m));
  }

  const CMatrix& matrix() const noexcept { return rho_; }
  Eigen::Index dim() const noexcept { return rho_.rows(); }
  double population(Eigen::Index level) const { return rho_(level, level).real(); }
  double expectation(const CMatrix& op) const { return (op * rho_).trace().real(); }
  /// True when roundoff-level negative eigenvalues were clipped on construction.
  bool clamped() const noexcept { return clamped_; }

 private:
  CMatrix rho_;
  bool clamped_ = false;
};

struct Dissipator {
  CMatrix op;
  double rate = 0.0;  // 1/s
};

/// Hamiltonian (rad/s) plus rate-weighted Lindblad dissipators.
struct LiouvillianSpec {
  Eigen::Index dim = 0;
  CMatrix hamiltonian;
  std::vector<Dissipator> dissipators;

  void validate() const {
    if (dim <= 0) throw ValidationError("Liouvillian dimension must be positive");
    if (hamiltonian.rows() != dim || hamiltonian.cols() != dim)
      throw ValidationError("Hamiltonian shape does not match dimension");
    const double scale = std::max(1.0, hamiltonian.cwiseAbs().maxCoeff());
    if (hermiticity_defect(hamiltonian) > tolerance::kHermitian * scale)
      throw ValidationError("Hamiltonian is not Hermitian");
    for (const auto& d : dissipators) {
      if (d.op.rows() != dim || d.op.cols() != dim)
        throw ValidationError("collapse operator shape does not match dimension");
      if (!(d.rate >= 0.0) || !std::isfinite(d.rate))
        throw ValidationError("dissipator rate must be finite and >= 0");
    }
  }
};

struct Superoperator {
  Eigen::Index dim = 0;
  CMatrix matrix;  // dim^2 x dim^2, acts on column-stacked rho

  CMatrix apply(const CMatrix& rho) const { return unstack(matrix * stack(rho), dim); }
};

inline Superoperator build_superoperator(const LiouvillianSpec& spec) {
  spec.validate();
  const Eigen::Index d = spec.dim;
  const CMatrix id = CMatrix::Identity(d, d);
  const cplx i_unit(0.0, 1.0);

  CMatrix l = -i_unit * (Eigen::kroneckerProduct(id, spec.hamiltonian).eval() -
                         Eigen::kroneckerProduct(spec.hamiltonian.transpose(), id).eval());
  for (const auto& [x, rate] : spec.dissipators) {
    if (rate == 0.0) continue;
    const CMatrix xdx = x.adjoint() * x;
    l += rate * (Eigen::kroneckerProduct(x.conjugate(), x).eval() -
                 0.5 * Eigen::kroneckerProduct(id, xdx).eval() -
                 0.5 * Eigen::kroneckerProduct(xdx.transpose(), id).eval());
  }
  return {d, std::move(l)};
}

/// exp(L t) with one cached step; repeated calls at the same t reuse it.
class Propagator {
 public:
  explicit Propagator(const Superoperator& l) : l_(&l) {}

  const CMatrix& matrix(double t) {
    if (t < 0.0) throw std::invalid_argument("propagation time must be >= 0");
    if (!cached_ || t != cached_t_) {
      cached_exp_ = (l_->matrix * t).exp();
      cached_t_ = t;
      cached_ = true;
    }
    return cached_exp_;
  }

  CVector evolve(const CVector& x, double t) { return matrix(t) * x; }

 private:
  const Superoperator* l_;
  CMatrix cached_exp_;
  double cached_t_ = 0.0;
  bool cached_ = false;
};

inline DensityMatrix propagate(const Superoperator& l, const DensityMatrix& rho0, double t) {
  if (!(t >= 0.0)) throw std::invalid_argument("propagate: t must be >= 0");
  if (rho0.dim() != l.dim) throw std::invalid_argument("propagate: dimension mismatch");
  if (t == 0.0) return rho0;
  CMatrix rho = unstack((l.matrix * t).exp() * stack(rho0.matrix()), l.dim);
  const double drift = std::abs(rho.trace() - cplx(1.0));
  if (drift > tolerance::kPropagation || hermiticity_defect(rho) > tolerance::kPropagation)
    throw NumericalError("propagation lost trace/Hermiticity beyond 1e-10");
  rho = 0.5 * (rho + rho.adjoint()).eval();
  rho /= rho.trace().real();
  return DensityMatrix(std::move(rho));
}

namespace detail {

inline double max_abs(const CMatrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

/// Number of singular values of `g` below `rel_tol * sigma_max`.
inline Eigen::Index kernel_dimension(const CMatrix& g, double rel_tol = 1e-10) {
  Eigen::JacobiSVD<CMatrix> svd(g);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return g.cols();
  return static_cast<Eigen::Index>((s.array() <= rel_tol * s(0)).count());
}

/// Solves G z = y subject to t.z = 0 via the bordered system [G; t] z = [y; 0].
inline CVector bordered_solve(const CMatrix& g, const CRowVector& t, const CVector& y) {
  const double scale = std::max(max_abs(g), 1e-300);
  CMatrix a(g.rows() + 1, g.cols());
  a.topRows(g.rows()) = g / scale;
  a.bottomRows(1) = t;
  CVector b(g.rows() + 1);
  b.head(g.rows()) = y / scale;
  b(g.rows()) = 0.0;
  return a.colPivHouseholderQr().solve(b);
}

}  // namespace detail

/// Unique steady state from the trace-bordered null-space system.
inline DensityMatrix steady_state(const Superoperator& l) {
  const Eigen::Index n = l.matrix.rows();
  const double scale = detail::max_abs(l.matrix);
  if (scale == 0.0)
    throw NumericalError("steady_state: degenerate kernel (dimension " + std::to_string(n) + ")");
  const CMatrix g = l.matrix / scale;
  const Eigen::Index kernel = detail::kernel_dimension(g);
  if (kernel > 1)
    throw NumericalError("steady_state: degenerate kernel (dimension " + std::to_string(kernel) +
                         ")");
  if (kernel == 0) throw NumericalError("steady_state: generator has no stationary state");

  CMatrix a(n + 1, n);
  a.topRows(n) = g;
  a.bottomRows(1) = trace_functional(CMatrix::Identity(l.dim, l.dim));
  CVector b = CVector::Zero(n + 1);
  b(n) = 1.0;
  const CVector x = a.colPivHouseholderQr().solve(b);
  if ((g * x).cwiseAbs().maxCoeff() > tolerance::kPropagation)
    throw NumericalError("steady_state: residual exceeds 1e-10");

  CMatrix rho = unstack(x, l.dim);
  rho = 0.5 * (rho + rho.adjoint()).eval();
  rho /= rho.trace().real();
  return DensityMatrix(std::move(rho), 1e-10, 1e-10);
}

/// Tr[left exp(L tau) (mid rho right)] for each tau (quantum regression).
/// Sorted tau values are reached by incremental steps; uniform grids
/// cost a single matrix exponential.
inline std::vector<cplx> two_time_correlator(const Superoperator& l, const DensityMatrix& rho,
                                             const CMatrix& left, const CMatrix& mid,
                                             const CMatrix& right, std::span<const double> tau) {
  const Eigen::Index d = l.dim;
  for (const CMatrix* op : {&left, &mid, &right})
    if (op->rows() != d || op->cols() != d)
      throw std::invalid_argument("two_time_correlator: operator dimension mismatch");
  if (rho.dim() != d) throw std::invalid_argument("two_time_correlator: state dimension mismatch");

  std::vector<std::size_t> order(tau.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return tau[a] < tau[b]; });
  if (!order.empty() && !(tau[order.front()] >= 0.0))
    throw std::invalid_argument("two_time_correlator: tau must be >= 0");

  const CRowVector probe = trace_functional(left);
  CVector x = stack(mid * rho.matrix() * right);
  Propagator prop(l);
  std::vector<cplx> out(tau.size());
  double now = 0.0;
  double last_step = -1.0;
  for (auto idx : order) {
    double step = tau[idx] - now;
    if (step > 0.0) {
      // Snap near-identical steps so a uniform grid reuses one exponential.
      if (last_step > 0.0 && std::abs(step - last_step) <= 1e-9 * last_step) step = last_step;
      last_step = step;
      x = prop.evolve(x, step);
      now = tau[idx];
    }
    out[idx] = probe * x;
  }
  return out;
}

/// Integral over tau in [0, inf) of Tr[left e^{L tau} x] minus its
/// stationary limit Tr[left rho_ss] Tr[x], with x = mid rho right.
/// Exact (resolvent) route: no quadrature.
inline cplx correlator_excess_integral(const Superoperator& l, const DensityMatrix& rho_ss,
                                       const CMatrix& left, const CMatrix& mid,
                                       const CMatrix& right) {
  const CRowVector tr = trace_functional(CMatrix::Identity(l.dim, l.dim));
  const CVector k = stack(rho_ss.matrix());
  const CVector x = stack(mid * rho_ss.matrix() * right);
  const CVector y = x - (tr * x)(0) * k;
  const CVector z = detail::bordered_solve(l.matrix, tr, y);
  return -(trace_functional(left) * z)(0);
}

/// Integral over tau in [0, inf) of |Tr[left e^{L tau} x]|^2 minus its
/// stationary limit, via the doubled generator conj(L) (+) L.
inline double correlator_abs2_excess_integral(const Superoperator& l, const DensityMatrix& rho_ss,
                                              const CMatrix& left, const CMatrix& mid,
                                              const CMatrix& right) {
  const Eigen::Index n = l.matrix.rows();
  const CMatrix id = CMatrix::Identity(n, n);
  const CMatrix g = Eigen::kroneckerProduct(l.matrix.conjugate(), id).eval() +
                    Eigen::kroneckerProduct(id, l.matrix).eval();
  const CRowVector tr = trace_functional(CMatrix::Identity(l.dim, l.dim));
  const CRowVector tr2 = Eigen::kroneckerProduct(tr.conjugate(), tr).eval();
  const CVector k = stack(rho_ss.matrix());
  const CVector k2 = Eigen::kroneckerProduct(k.conjugate(), k).eval();
  const CVector x = stack(mid * rho_ss.matrix() * right);
  const CVector w = Eigen::kroneckerProduct(x.conjugate(), x).eval();
  const CVector y = w - (tr2 * w)(0) * k2;
  const CVector z = detail::bordered_solve(g, tr2, y);
  const CRowVector a = trace_functional(left);
  const CRowVector a2 = Eigen::kroneckerProduct(a.conjugate(), a).eval();
  return -(a2 * z)(0).real();
}

}  // namespace hom
