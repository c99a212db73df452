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

#pragma once

#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "icqse/errors.hpp"
#include "icqse/pauli.hpp"

namespace icqse {

inline constexpr int kStateMaxQubits = 26;

/// Pure state on n qubits; amplitude index bit q is qubit q.
class Statevector {
 public:
  Statevector(int n_qubits, std::vector<cplx> amplitudes) : n_(n_qubits), amp_(std::move(amplitudes)) {
    if (n_qubits < 1 || n_qubits > kStateMaxQubits)
      throw ResourceError("Statevector: " + std::to_string(n_qubits) + " qubits exceeds cap");
    if (amp_.size() != (std::size_t{1} << n_qubits)) throw DimensionError("Statevector: amplitude count != 2^n");
  }

  /// Computational basis state |bits>.
  static Statevector basis(int n_qubits, std::uint64_t bits = 0) {
    std::vector<cplx> a(std::size_t{1} << n_qubits);
    a.at(bits) = 1.0;
    return Statevector(n_qubits, std::move(a));
  }

  /// |+>^n.
  static Statevector plus(int n_qubits) {
    const std::size_t dim = std::size_t{1} << n_qubits;
    return Statevector(n_qubits, std::vector<cplx>(dim, 1.0 / std::sqrt(static_cast<double>(dim))));
  }

  int n_qubits() const { return n_; }
  std::size_t dim() const { return amp_.size(); }
  std::span<const cplx> amplitudes() const { return amp_; }
  const cplx& operator[](std::size_t i) const { return amp_[i]; }

  double norm() const {
    double s = 0;
    for (const auto& a : amp_) s += std::norm(a);
    return std::sqrt(s);
  }

 private:
  int n_;
  std::vector<cplx> amp_;
};

/// out += coeff * P |in> for the Hermitian Pauli selected by key.
/// P|b> = i^{|x&z|} (-1)^{|b&z|} |b^x>.
inline void apply_pauli_add(const PauliKey& key, cplx coeff, std::span<const cplx> in, std::span<cplx> out) {
  const std::uint64_t x = key.x.w[0], z = key.z.w[0];
  const cplx c = coeff * i_pow(std::popcount(x & z));
  for (std::size_t b = 0; b < in.size(); ++b) {
    const double s = (std::popcount(b & z) & 1) ? -1.0 : 1.0;
    out[b ^ x] += c * s * in[b];
  }
}

inline std::vector<cplx> apply_operator(const PauliSum& op, std::span<const cplx> in) {
  std::vector<cplx> out(in.size());
  for (const auto& [k, c] : op.terms()) apply_pauli_add(k, c, in, out);
  return out;
}

inline Statevector apply_pauli(const PauliString& p, const Statevector& s) {
  if (p.n_qubits() != s.n_qubits()) throw DimensionError("apply_pauli: qubit count mismatch");
  std::vector<cplx> out(s.dim());
  apply_pauli_add(p.key(), i_pow(p.phase_exp()), s.amplitudes(), out);
  return Statevector(s.n_qubits(), std::move(out));
}

/// <psi|O|psi>.
inline cplx expectation(const Statevector& s, const PauliSum& op) {
  if (op.n_qubits() != s.n_qubits()) throw DimensionError("expectation: qubit count mismatch");
  const auto out = apply_operator(op, s.amplitudes());
  cplx acc = 0;
  for (std::size_t i = 0; i < s.dim(); ++i) acc += std::conj(s[i]) * out[i];
  return acc;
}

}  // namespace icqse
