// Copyright 2026 The icqse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/**
 * @file
 * Three-body spin chain
 *
 *   H = sum_i ( -g_zz Z_i Z_{i+1} - g_x X_i + g_zxz Z_i X_{i+1} Z_{i+2} )
 *
 * on the trajectory (g_zz, g_x, g_zxz) = (2(1-g^2), (1+g)^2, (g-1)^2), its
 * order parameters and an exact-diagonalization reference.
 */

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "icqse/errors.hpp"
#include "icqse/pauli.hpp"
#include "icqse/rng.hpp"
#include "icqse/statevector.hpp"

namespace icqse {

struct ModelParams {
  int n_qubits = 0;
  double g = 0.0;
  double g_zz = 0.0;
  double g_x = 0.0;
  double g_zxz = 0.0;
  bool pbc = true;

  static ModelParams from_g(int n_qubits, double g, bool pbc = true) {
    if (!(g >= -1.0 && g <= 1.0)) throw ArgumentError("ModelParams: g must be in [-1, 1]");
    return ModelParams{n_qubits, g, 2.0 * (1.0 - g * g), (1.0 + g) * (1.0 + g), (g - 1.0) * (g - 1.0), pbc};
  }
};

inline PauliSum build_hamiltonian(const ModelParams& p) {
  const int n = p.n_qubits;
  if (n < 3) throw ArgumentError("build_hamiltonian: need at least 3 qubits for the ZXZ term");
  if (n > kMaxQubits) throw ArgumentError("build_hamiltonian: too many qubits");
  PauliSumBuilder h(n);
  const auto site = [&](int i) { return i % n; };
  for (int i = 0; i < n; ++i) {
    if (p.pbc || i + 1 < n)
      h.add(PauliString::from_letters(n, {{i, Letter::Z}, {site(i + 1), Letter::Z}}), -p.g_zz);
    h.add(PauliString::single(n, i, Letter::X), -p.g_x);
    if (p.pbc || i + 2 < n)
      h.add(PauliString::from_letters(n, {{i, Letter::Z}, {site(i + 1), Letter::X}, {site(i + 2), Letter::Z}}),
            p.g_zxz);
  }
  return std::move(h).build();
}

/// Ground-state energy per site along the trajectory, -2(g^2 + 1).
constexpr double exact_gs_density(double g) { return -2.0 * (g * g + 1.0); }

/// Thermodynamic-limit order parameters along the trajectory.
constexpr double sx_theory(double g) { return g > 0 ? 4.0 * g / ((1.0 + g) * (1.0 + g)) : 0.0; }
constexpr double szy_theory(double g) { return g < 0 ? -4.0 * g / ((1.0 - g) * (1.0 - g)) : 0.0; }

struct OrderParameters {
  PauliSum sx;
  PauliSum szy;
};

/// S^X = sum_j X_j / N and S^ZY = sum_j Z_j Y_{j+1} X_{j+2} Y_{j+3} Z_{j+4} / N (periodic).
inline OrderParameters order_parameter_ops(int n) {
  if (n < 5) throw ArgumentError("order_parameter_ops: S^ZY needs at least 5 qubits");
  PauliSumBuilder sx(n), szy(n);
  const double w = 1.0 / n;
  for (int j = 0; j < n; ++j) {
    sx.add(PauliString::single(n, j, Letter::X), w);
    szy.add(PauliString::from_letters(n, {{j, Letter::Z},
                                          {(j + 1) % n, Letter::Y},
                                          {(j + 2) % n, Letter::X},
                                          {(j + 3) % n, Letter::Y},
                                          {(j + 4) % n, Letter::Z}}),
            w);
  }
  return {std::move(sx).build(), std::move(szy).build()};
}

// ---------------------------------------------------------------------------
// Exact diagonalization

struct SpectrumResult {
  std::vector<double> eigenvalues;  // ascending
  std::vector<cplx> ground_vector;
  double energy_density = 0.0;
  int n_qubits = 0;
  std::string method;
  int iterations = 0;

  Statevector ground_state() const { return Statevector(n_qubits, ground_vector); }
};

inline constexpr int kEdMaxQubits = 14;
inline constexpr int kEdDenseMaxQubits = 10;

struct LanczosOptions {
  int max_krylov_dim = 200;
  double tol = 1e-10;
  std::uint64_t seed = 0x5eed;
};

namespace detail {

/// Makes the first amplitude with |a| > 1e-12 real and positive.
inline void fix_global_phase(std::vector<cplx>& v) {
  double nrm = 0;
  for (const auto& a : v) nrm += std::norm(a);
  nrm = std::sqrt(nrm);
  for (auto& a : v) a /= nrm;
  for (const auto& a : v) {
    if (std::abs(a) > 1e-12) {
      const cplx ph = std::conj(a) / std::abs(a);
      for (auto& b : v) b *= ph;
      break;
    }
  }
}

inline bool is_real_operator(const PauliSum& h) {
  for (const auto& [k, c] : h.terms()) {
    const cplx eff = c * i_pow((k.x & k.z).popcount());
    if (std::abs(eff.imag()) > 1e-14) return false;
  }
  return true;
}

inline SpectrumResult dense_spectrum(const PauliSum& h, int k) {
  const int n = h.n_qubits();
  const std::size_t dim = std::size_t{1} << n;
  SpectrumResult r;
  r.n_qubits = n;
  r.method = "dense";
  std::vector<cplx> basis(dim), col(dim);
  if (is_real_operator(h)) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim, dim);
    for (std::size_t b = 0; b < dim; ++b) {
      std::fill(basis.begin(), basis.end(), cplx{});
      std::fill(col.begin(), col.end(), cplx{});
      basis[b] = 1.0;
      for (const auto& [key, c] : h.terms()) apply_pauli_add(key, c, basis, col);
      for (std::size_t a = 0; a < dim; ++a) m(a, b) = col[a].real();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    if (es.info() != Eigen::Success) throw NumericalError("dense eigensolver failed");
    for (int i = 0; i < k && i < static_cast<int>(dim); ++i) r.eigenvalues.push_back(es.eigenvalues()(i));
    r.ground_vector.resize(dim);
    for (std::size_t a = 0; a < dim; ++a) r.ground_vector[a] = es.eigenvectors()(a, 0);
  } else {
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(dim, dim);
    for (std::size_t b = 0; b < dim; ++b) {
      std::fill(basis.begin(), basis.end(), cplx{});
      std::fill(col.begin(), col.end(), cplx{});
      basis[b] = 1.0;
      for (const auto& [key, c] : h.terms()) apply_pauli_add(key, c, basis, col);
      for (std::size_t a = 0; a < dim; ++a) m(a, b) = col[a];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m);
    if (es.info() != Eigen::Success) throw NumericalError("dense eigensolver failed");
    for (int i = 0; i < k && i < static_cast<int>(dim); ++i) r.eigenvalues.push_back(es.eigenvalues()(i));
    r.ground_vector.resize(dim);
    for (std::size_t a = 0; a < dim; ++a) r.ground_vector[a] = es.eigenvectors()(a, 0);
  }
  return r;
}

/// Lanczos with full reorthogonalization. Reports distinct Ritz values, so
/// exactly degenerate levels appear once.
inline SpectrumResult lanczos_spectrum(const PauliSum& h, int k, const LanczosOptions& opt) {
  const int n = h.n_qubits();
  const std::size_t dim = std::size_t{1} << n;
  const int max_m = static_cast<int>(std::min<std::size_t>(opt.max_krylov_dim, dim));
  std::vector<std::vector<cplx>> basis;
  basis.reserve(max_m);
  std::vector<double> alpha, beta;

  std::vector<cplx> v(dim);
  Rng rng(opt.seed);
  double nrm = 0;
  for (auto& a : v) {
    a = cplx(rng.uniform() - 0.5, rng.uniform() - 0.5);
    nrm += std::norm(a);
  }
  nrm = std::sqrt(nrm);
  for (auto& a : v) a /= nrm;

  SpectrumResult r;
  r.n_qubits = n;
  r.method = "lanczos";
  Eigen::VectorXd evals;
  Eigen::MatrixXd evecs;
  bool converged = false;
  for (int m = 0; m < max_m; ++m) {
    basis.push_back(v);
    std::vector<cplx> w = apply_operator(h, basis.back());
    cplx a = 0;
    for (std::size_t i = 0; i < dim; ++i) a += std::conj(basis.back()[i]) * w[i];
    alpha.push_back(a.real());
    // Full reorthogonalization, applied twice.
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& q : basis) {
        cplx ov = 0;
        for (std::size_t i = 0; i < dim; ++i) ov += std::conj(q[i]) * w[i];
        for (std::size_t i = 0; i < dim; ++i) w[i] -= ov * q[i];
      }
    }
    double b = 0;
    for (const auto& x : w) b += std::norm(x);
    b = std::sqrt(b);

    const int msz = m + 1;
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(msz, msz);
    for (int i = 0; i < msz; ++i) {
      t(i, i) = alpha[i];
      if (i + 1 < msz) t(i, i + 1) = t(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
    evals = es.eigenvalues();
    evecs = es.eigenvectors();
    const int want = std::min(k, msz);
    bool ok = msz >= std::min<int>(k, static_cast<int>(dim));
    for (int i = 0; i < want && ok; ++i)
      if (std::abs(b * evecs(msz - 1, i)) > opt.tol * std::max(1.0, std::abs(evals(i)))) ok = false;
    r.iterations = msz;
    if (ok || b < 1e-13) {
      converged = true;
      break;
    }
    beta.push_back(b);
    for (std::size_t i = 0; i < dim; ++i) v[i] = w[i] / b;
  }
  if (!converged)
    throw NumericalError("lanczos: not converged after " + std::to_string(r.iterations) + " iterations");

  const int msz = static_cast<int>(basis.size());
  for (int i = 0; i < k && i < msz; ++i) r.eigenvalues.push_back(evals(i));
  r.ground_vector.assign(dim, cplx{});
  for (int j = 0; j < msz; ++j)
    for (std::size_t i = 0; i < dim; ++i) r.ground_vector[i] += evecs(j, 0) * basis[j][i];
  return r;
}

}  // namespace detail

/// k lowest eigenvalues and the ground vector of an arbitrary Hermitian sum.
inline SpectrumResult exact_diag(const PauliSum& h, int k, const LanczosOptions& opt = {}) {
  const int n = h.n_qubits();
  if (n > kEdMaxQubits)
    throw ResourceError("exact_diag: " + std::to_string(n) + " qubits exceeds cap of " + std::to_string(kEdMaxQubits));
  if (k < 1) throw ArgumentError("exact_diag: k must be positive");
  SpectrumResult r = n <= kEdDenseMaxQubits ? detail::dense_spectrum(h, k) : detail::lanczos_spectrum(h, k, opt);
  detail::fix_global_phase(r.ground_vector);
  r.energy_density = r.eigenvalues.front() / n;
  return r;
}

inline SpectrumResult exact_diag(const ModelParams& p, int k, const LanczosOptions& opt = {}) {
  return exact_diag(build_hamiltonian(p), k, opt);
}

}  // namespace icqse
