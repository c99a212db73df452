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
 * Imperfect root states and randomized single-qubit X/Y/Z measurements.
 *
 * A root state is the exact ground state of a detuned Hamiltonian H(g + delta).
 * Noise is applied per shot while sampling: a global depolarizing event
 * replaces the outcome with uniform bits, then an independent local Pauli
 * error per qubit flips the recorded bit when it anticommutes with the
 * measured basis.
 */

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "icqse/errors.hpp"
#include "icqse/model.hpp"
#include "icqse/parallel.hpp"
#include "icqse/pauli.hpp"
#include "icqse/rng.hpp"
#include "icqse/statevector.hpp"

namespace icqse {

/// Measurement basis codes as stored on disk.
enum class Basis : std::uint8_t { Z = 0, X = 1, Y = 2 };

constexpr Letter basis_letter(Basis b) {
  switch (b) {
    case Basis::X: return Letter::X;
    case Basis::Y: return Letter::Y;
    default: return Letter::Z;
  }
}

struct NoiseSpec {
  double global_depolarizing_p = 0.0;
  double local_pauli_q = 0.0;

  void validate() const {
    if (!(global_depolarizing_p >= 0.0 && global_depolarizing_p <= 1.0) ||
        !(local_pauli_q >= 0.0 && local_pauli_q <= 1.0))
      throw ArgumentError("NoiseSpec: rates must lie in [0, 1]");
  }
  bool ideal() const { return global_depolarizing_p == 0.0 && local_pauli_q == 0.0; }
};

struct RootSpec {
  ModelParams params;
  double detune = 0.0;
  NoiseSpec noise;
};

/// N_c measurement configurations with N_s shots each.
class ShadowDataset {
 public:
  ShadowDataset(int n_qubits, std::uint32_t n_configs, std::uint16_t shots, std::uint64_t seed,
                std::uint16_t rng_id, std::vector<std::uint8_t> bases, std::vector<Bits> outcomes)
      : n_(n_qubits),
        n_configs_(n_configs),
        shots_(shots),
        seed_(seed),
        rng_id_(rng_id),
        bases_(std::move(bases)),
        outcomes_(std::move(outcomes)) {
    if (n_ < 1 || n_ > kMaxQubits) throw DimensionError("ShadowDataset: bad qubit count");
    if (n_configs_ < 1 || shots_ < 1) throw ArgumentError("ShadowDataset: need at least one configuration and shot");
    if (bases_.size() != std::size_t{n_configs_} * n_) throw DimensionError("ShadowDataset: basis table size");
    if (outcomes_.size() != std::size_t{n_configs_} * shots_) throw DimensionError("ShadowDataset: outcome table size");
    const Bits valid = Bits::low(n_);
    basis_keys_.resize(n_configs_);
    for (std::uint32_t k = 0; k < n_configs_; ++k) {
      for (int q = 0; q < n_; ++q) {
        const auto code = bases_[std::size_t{k} * n_ + q];
        if (code > 2) throw ConfigError("ShadowDataset: basis code out of range");
        basis_keys_[k].set_letter(q, basis_letter(static_cast<Basis>(code)));
      }
    }
    for (const auto& o : outcomes_)
      if ((o & ~valid).any()) throw DimensionError("ShadowDataset: outcome bit beyond n_qubits");
  }

  int n_qubits() const { return n_; }
  std::uint32_t n_configs() const { return n_configs_; }
  std::uint16_t shots() const { return shots_; }
  std::uint64_t seed() const { return seed_; }
  std::uint16_t rng_id() const { return rng_id_; }

  Basis basis(std::uint32_t k, int q) const { return static_cast<Basis>(bases_[std::size_t{k} * n_ + q]); }
  /// Basis of configuration k as a Pauli key (letter per qubit).
  const PauliKey& basis_key(std::uint32_t k) const { return basis_keys_[k]; }
  const Bits& outcome(std::uint32_t k, std::uint32_t s) const { return outcomes_[std::size_t{k} * shots_ + s]; }
  std::span<const Bits> outcomes(std::uint32_t k) const {
    return {outcomes_.data() + std::size_t{k} * shots_, shots_};
  }
  const std::vector<std::uint8_t>& raw_bases() const { return bases_; }
  const std::vector<Bits>& raw_outcomes() const { return outcomes_; }

  friend bool operator==(const ShadowDataset& a, const ShadowDataset& b) {
    return a.n_ == b.n_ && a.n_configs_ == b.n_configs_ && a.shots_ == b.shots_ && a.seed_ == b.seed_ &&
           a.rng_id_ == b.rng_id_ && a.bases_ == b.bases_ && a.outcomes_ == b.outcomes_;
  }

 private:
  int n_;
  std::uint32_t n_configs_;
  std::uint16_t shots_;
  std::uint64_t seed_;
  std::uint16_t rng_id_;
  std::vector<std::uint8_t> bases_;
  std::vector<Bits> outcomes_;
  std::vector<PauliKey> basis_keys_;
};

// ---------------------------------------------------------------------------
// Binary format (little-endian):
//   "ICQS" | u16 version | u16 n_qubits | u32 N_c | u16 N_s | u16 rng id | u64 seed
//   per configuration: ceil(N/4) bytes of 2-bit basis codes (qubit 0 in the
//   low bits), then N_s records of ceil(N/8) outcome bytes (bit q = qubit q).

inline constexpr std::uint16_t kShadowFormatVersion = 1;

namespace detail {

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF));
}

template <typename T>
T get_le(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return static_cast<T>(v);
}

}  // namespace detail

inline std::vector<std::uint8_t> serialize(const ShadowDataset& d) {
  const int n = d.n_qubits();
  const std::size_t basis_bytes = (n + 3) / 4, outcome_bytes = (n + 7) / 8;
  std::vector<std::uint8_t> out;
  out.reserve(24 + std::size_t{d.n_configs()} * (basis_bytes + std::size_t{d.shots()} * outcome_bytes));
  for (char c : {'I', 'C', 'Q', 'S'}) out.push_back(static_cast<std::uint8_t>(c));
  detail::put_le<std::uint16_t>(out, kShadowFormatVersion);
  detail::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(n));
  detail::put_le<std::uint32_t>(out, d.n_configs());
  detail::put_le<std::uint16_t>(out, d.shots());
  detail::put_le<std::uint16_t>(out, d.rng_id());
  detail::put_le<std::uint64_t>(out, d.seed());
  for (std::uint32_t k = 0; k < d.n_configs(); ++k) {
    for (std::size_t b = 0; b < basis_bytes; ++b) {
      std::uint8_t byte = 0;
      for (int j = 0; j < 4; ++j) {
        const int q = static_cast<int>(b * 4) + j;
        if (q < n) byte |= static_cast<std::uint8_t>(static_cast<std::uint8_t>(d.basis(k, q)) << (2 * j));
      }
      out.push_back(byte);
    }
    for (std::uint32_t s = 0; s < d.shots(); ++s) {
      const Bits& o = d.outcome(k, s);
      for (std::size_t b = 0; b < outcome_bytes; ++b)
        out.push_back(static_cast<std::uint8_t>((o.w[b / 8] >> (8 * (b % 8))) & 0xFF));
    }
  }
  return out;
}

inline ShadowDataset deserialize(std::span<const std::uint8_t> buf) {
  if (buf.size() < 24 || buf[0] != 'I' || buf[1] != 'C' || buf[2] != 'Q' || buf[3] != 'S')
    throw ConfigError("shadow file: bad magic");
  const auto* p = buf.data();
  const auto version = detail::get_le<std::uint16_t>(p + 4);
  if (version != kShadowFormatVersion) throw ConfigError("shadow file: unsupported version " + std::to_string(version));
  const int n = detail::get_le<std::uint16_t>(p + 6);
  const auto nc = detail::get_le<std::uint32_t>(p + 8);
  const auto ns = detail::get_le<std::uint16_t>(p + 12);
  const auto rng_id = detail::get_le<std::uint16_t>(p + 14);
  const auto seed = detail::get_le<std::uint64_t>(p + 16);
  if (n < 1 || n > kMaxQubits) throw ConfigError("shadow file: bad qubit count");
  const std::size_t basis_bytes = (n + 3) / 4, outcome_bytes = (n + 7) / 8;
  const std::size_t need = 24 + std::size_t{nc} * (basis_bytes + std::size_t{ns} * outcome_bytes);
  if (buf.size() != need) throw ConfigError("shadow file: size mismatch with header");
  std::vector<std::uint8_t> bases(std::size_t{nc} * n);
  std::vector<Bits> outcomes(std::size_t{nc} * ns);
  std::size_t pos = 24;
  for (std::uint32_t k = 0; k < nc; ++k) {
    for (int q = 0; q < n; ++q) bases[std::size_t{k} * n + q] = (buf[pos + q / 4] >> (2 * (q % 4))) & 0x3;
    pos += basis_bytes;
    for (std::uint32_t s = 0; s < ns; ++s) {
      Bits& o = outcomes[std::size_t{k} * ns + s];
      for (std::size_t b = 0; b < outcome_bytes; ++b) o.w[b / 8] |= std::uint64_t{buf[pos + b]} << (8 * (b % 8));
      pos += outcome_bytes;
    }
  }
  return ShadowDataset(n, nc, ns, seed, rng_id, std::move(bases), std::move(outcomes));
}

inline void write_shadow_file(const ShadowDataset& d, const std::string& path) {
  const auto bytes = serialize(d);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open '" + path + "' for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw ConfigError("write failed for '" + path + "'");
}

inline ShadowDataset read_shadow_file(const std::string& path) {
  if (!std::filesystem::is_regular_file(path)) throw ConfigError("not a shadow file: '" + path + "'");
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open shadow file '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

// ---------------------------------------------------------------------------
// State preparation and sampling

inline Statevector prepare_root(const RootSpec& spec) {
  const double g = spec.params.g + spec.detune;
  if (!(g >= -1.0 && g <= 1.0)) throw ArgumentError("prepare_root: |g + detune| must be <= 1");
  if (spec.params.n_qubits > kEdMaxQubits) throw ResourceError("prepare_root: too many qubits");
  ModelParams p = ModelParams::from_g(spec.params.n_qubits, g, spec.params.pbc);
  return exact_diag(p, 1).ground_state();
}

/// Outcome-bit probabilities after rotating each qubit into its basis
/// (X: H, Y: H S^dagger). Index bit q = 0 is the +1 eigenvalue of the letter.
inline std::vector<double> rotated_probabilities(const Statevector& s, std::span<const std::uint8_t> bases) {
  std::vector<cplx> a(s.amplitudes().begin(), s.amplitudes().end());
  const double r = 1.0 / std::sqrt(2.0);
  for (int q = 0; q < s.n_qubits(); ++q) {
    const auto b = static_cast<Basis>(bases[q]);
    if (b == Basis::Z) continue;
    const std::size_t bit = std::size_t{1} << q;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (i & bit) continue;
      cplx lo = a[i], hi = a[i | bit];
      if (b == Basis::Y) hi *= cplx(0.0, -1.0);
      a[i] = r * (lo + hi);
      a[i | bit] = r * (lo - hi);
    }
  }
  std::vector<double> p(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) p[i] = std::norm(a[i]);
  return p;
}

/// Draws bases and shots; configuration k uses RNG stream k, so the result
/// does not depend on the thread count.
inline ShadowDataset sample_shadows(const Statevector& state, const NoiseSpec& noise, std::uint32_t n_configs,
                                    std::uint16_t shots, std::uint64_t seed, unsigned threads = 0) {
  noise.validate();
  if (n_configs < 1 || shots < 1) throw ArgumentError("sample_shadows: N_c and N_s must be positive");
  const int n = state.n_qubits();
  std::vector<std::uint8_t> bases(std::size_t{n_configs} * n);
  std::vector<Bits> outcomes(std::size_t{n_configs} * shots);
  const std::uint64_t all_bits = n >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << n) - 1;

  parallel_blocks(n_configs, threads, [&](std::size_t begin, std::size_t end) {
    std::vector<double> cdf;
    for (std::size_t k = begin; k < end; ++k) {
      Rng rng(seed, k);
      std::span<std::uint8_t> cb(bases.data() + k * n, n);
      for (int q = 0; q < n; ++q) cb[q] = static_cast<std::uint8_t>(rng.below(3));
      const auto prob = rotated_probabilities(state, cb);
      cdf.resize(prob.size());
      double acc = 0;
      for (std::size_t i = 0; i < prob.size(); ++i) cdf[i] = (acc += prob[i]);
      for (std::uint32_t s = 0; s < shots; ++s) {
        std::uint64_t bits;
        if (noise.global_depolarizing_p > 0 && rng.bernoulli(noise.global_depolarizing_p)) {
          bits = rng.next() & all_bits;
        } else {
          const double u = rng.uniform() * acc;
          auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
          bits = static_cast<std::uint64_t>(std::min<std::ptrdiff_t>(it - cdf.begin(), cdf.size() - 1));
        }
        if (noise.local_pauli_q > 0) {
          for (int q = 0; q < n; ++q) {
            if (!rng.bernoulli(noise.local_pauli_q)) continue;
            const auto err = static_cast<Letter>(1 + rng.below(3));
            if (err != basis_letter(static_cast<Basis>(cb[q]))) bits ^= std::uint64_t{1} << q;
          }
        }
        outcomes[k * shots + s].w[0] = bits;
      }
    }
  });
  return ShadowDataset(n, n_configs, shots, seed, kRngId, std::move(bases), std::move(outcomes));
}

/// Single-shot estimator omega = Tr[O D] for a basis key and outcome bits.
inline double single_shot_value(const PauliSum& op, const PauliKey& basis, const Bits& bits) {
  double w = 0;
  for (const auto& [k, c] : op.terms()) {
    const Bits supp = k.support();
    if ((((k.x ^ basis.x) | (k.z ^ basis.z)) & supp).any()) continue;
    const double sign = ((bits & supp).popcount() & 1) ? -1.0 : 1.0;
    w += c.real() * std::pow(3.0, supp.popcount()) * sign;
  }
  return w;
}

struct PovmMoments {
  double mean = 0.0;
  double variance = 0.0;
};

inline constexpr int kEnumerateMaxQubits = 4;

/// Exact mean and variance of the single-shot estimator over all 6^N outcomes.
inline PovmMoments enumerate_povm_distribution(const Statevector& state, const PauliSum& op) {
  const int n = state.n_qubits();
  if (n > kEnumerateMaxQubits) throw ResourceError("enumerate_povm_distribution: at most 4 qubits");
  if (op.n_qubits() != n) throw DimensionError("enumerate_povm_distribution: qubit count mismatch");
  if (!op.hermitian()) throw ArgumentError("enumerate_povm_distribution: observable must be Hermitian");
  int n_bases = 1;
  for (int q = 0; q < n; ++q) n_bases *= 3;
  const double w_basis = 1.0 / n_bases;
  double m1 = 0, m2 = 0;
  std::vector<std::uint8_t> codes(n);
  for (int t = 0; t < n_bases; ++t) {
    PauliKey key{};
    for (int q = 0, r = t; q < n; ++q, r /= 3) {
      codes[q] = static_cast<std::uint8_t>(r % 3);
      key.set_letter(q, basis_letter(static_cast<Basis>(codes[q])));
    }
    const auto prob = rotated_probabilities(state, codes);
    for (std::size_t b = 0; b < prob.size(); ++b) {
      Bits bits;
      bits.w[0] = b;
      const double w = single_shot_value(op, key, bits);
      m1 += w_basis * prob[b] * w;
      m2 += w_basis * prob[b] * w * w;
    }
  }
  return {m1, m2 - m1 * m1};
}

}  // namespace icqse
