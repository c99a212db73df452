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
 * Symplectic N-qubit Pauli algebra.
 *
 * A Pauli string is stored as two bit masks (x, z) plus a global phase
 * i^phase_exp. Qubit q lives in bit q of both masks. A set bit pair selects the
 * Hermitian letter: (1,0)=X, (1,1)=Y, (0,1)=Z. Sums are kept as key-sorted
 * vectors of phase-free keys with complex coefficients.
 */

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <bit>
#include <complex>
#include <cstdint>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "icqse/errors.hpp"
#include "icqse/rng.hpp"

namespace icqse {

using cplx = std::complex<double>;

inline constexpr int kMaxQubits = 128;
inline constexpr int kBitWords = kMaxQubits / 64;

/// Coefficients below this magnitude are dropped after every product.
inline constexpr double kCollectThreshold = 1e-12;

/// Fixed-capacity qubit bit vector; bit q <-> qubit q.
struct Bits {
  std::array<std::uint64_t, kBitWords> w{};

  constexpr bool test(int q) const { return (w[q >> 6] >> (q & 63)) & 1U; }
  constexpr void set(int q) { w[q >> 6] |= std::uint64_t{1} << (q & 63); }
  constexpr void reset(int q) { w[q >> 6] &= ~(std::uint64_t{1} << (q & 63)); }
  constexpr void flip(int q) { w[q >> 6] ^= std::uint64_t{1} << (q & 63); }

  constexpr int popcount() const {
    int c = 0;
    for (auto v : w) c += std::popcount(v);
    return c;
  }
  constexpr bool any() const {
    for (auto v : w)
      if (v) return true;
    return false;
  }
  constexpr bool none() const { return !any(); }

  /// Mask with the low n bits set.
  static constexpr Bits low(int n) {
    Bits b;
    for (int i = 0; i < kBitWords; ++i) {
      const int lo = i * 64;
      if (n >= lo + 64)
        b.w[i] = ~std::uint64_t{0};
      else if (n > lo)
        b.w[i] = (std::uint64_t{1} << (n - lo)) - 1;
    }
    return b;
  }

  friend constexpr Bits operator^(Bits a, const Bits& b) {
    for (int i = 0; i < kBitWords; ++i) a.w[i] ^= b.w[i];
    return a;
  }
  friend constexpr Bits operator&(Bits a, const Bits& b) {
    for (int i = 0; i < kBitWords; ++i) a.w[i] &= b.w[i];
    return a;
  }
  friend constexpr Bits operator|(Bits a, const Bits& b) {
    for (int i = 0; i < kBitWords; ++i) a.w[i] |= b.w[i];
    return a;
  }
  friend constexpr Bits operator~(Bits a) {
    for (auto& v : a.w) v = ~v;
    return a;
  }
  friend constexpr bool operator==(const Bits&, const Bits&) = default;
  friend constexpr auto operator<=>(const Bits& a, const Bits& b) {
    // Most significant word first so the order is numeric.
    for (int i = kBitWords - 1; i >= 0; --i)
      if (a.w[i] != b.w[i]) return a.w[i] <=> b.w[i];
    return std::strong_ordering::equal;
  }
};

enum class Letter : std::uint8_t { I = 0, X = 1, Y = 2, Z = 3 };

constexpr char letter_char(Letter l) { return "IXYZ"[static_cast<int>(l)]; }

/// Phase-free Pauli: the Hermitian tensor product selected by (x, z).
struct PauliKey {
  Bits x;
  Bits z;

  constexpr Letter letter(int q) const {
    const bool xb = x.test(q), zb = z.test(q);
    if (xb) return zb ? Letter::Y : Letter::X;
    return zb ? Letter::Z : Letter::I;
  }
  constexpr void set_letter(int q, Letter l) {
    x.reset(q);
    z.reset(q);
    if (l == Letter::X || l == Letter::Y) x.set(q);
    if (l == Letter::Z || l == Letter::Y) z.set(q);
  }
  constexpr Bits support() const { return x | z; }
  constexpr int weight() const { return support().popcount(); }
  constexpr bool is_identity() const { return x.none() && z.none(); }

  friend constexpr bool operator==(const PauliKey&, const PauliKey&) = default;
  friend constexpr auto operator<=>(const PauliKey& a, const PauliKey& b) {
    if (auto c = a.x <=> b.x; c != 0) return c;
    return a.z <=> b.z;
  }
};

struct PauliKeyHash {
  std::size_t operator()(const PauliKey& k) const noexcept {
    std::uint64_t h = 0x243F6A8885A308D3ULL;
    for (auto v : k.x.w) h = splitmix64(h ^ v);
    for (auto v : k.z.w) h = splitmix64(h ^ (v + 0x13198A2E03707344ULL));
    return static_cast<std::size_t>(h);
  }
};

/// Exponent k (mod 4) with P*Q = i^k R for Hermitian P, Q and R = key(P^Q).
constexpr int product_phase(const PauliKey& p, const PauliKey& q) {
  int plus = 0, minus = 0;
  for (int i = 0; i < kBitWords; ++i) {
    const std::uint64_t x1 = p.x.w[i], z1 = p.z.w[i], x2 = q.x.w[i], z2 = q.z.w[i];
    const std::uint64_t X1 = x1 & ~z1, Y1 = x1 & z1, Z1 = ~x1 & z1;
    const std::uint64_t X2 = x2 & ~z2, Y2 = x2 & z2, Z2 = ~x2 & z2;
    plus += std::popcount((X1 & Y2) | (Y1 & Z2) | (Z1 & X2));
    minus += std::popcount((Y1 & X2) | (Z1 & Y2) | (X1 & Z2));
  }
  return ((plus - minus) % 4 + 4) % 4;
}

/// True iff the symplectic form <x_P,z_Q> + <x_Q,z_P> vanishes mod 2.
constexpr bool commutes(const PauliKey& p, const PauliKey& q) {
  return (((p.x & q.z) ^ (q.x & p.z)).popcount() & 1) == 0;
}

constexpr cplx i_pow(int k) {
  switch (((k % 4) + 4) % 4) {
    case 0: return {1.0, 0.0};
    case 1: return {0.0, 1.0};
    case 2: return {-1.0, 0.0};
    default: return {0.0, -1.0};
  }
}

class PauliString {
 public:
  explicit PauliString(int n_qubits) : n_(n_qubits) {
    if (n_qubits < 1 || n_qubits > kMaxQubits)
      throw ArgumentError("PauliString: n_qubits must be in [1, " + std::to_string(kMaxQubits) + "]");
  }
  PauliString(int n_qubits, const PauliKey& key, int phase_exp = 0) : PauliString(n_qubits) {
    if (((key.x | key.z) & ~Bits::low(n_qubits)).any())
      throw DimensionError("PauliString: mask bits beyond n_qubits");
    key_ = key;
    phase_ = ((phase_exp % 4) + 4) % 4;
  }

  /// Single-letter string, e.g. single(5, 2, Letter::Z) = Z on qubit 2.
  static PauliString single(int n_qubits, int qubit, Letter l) {
    PauliString p(n_qubits);
    p.check_qubit(qubit);
    p.key_.set_letter(qubit, l);
    return p;
  }

  static PauliString from_letters(int n_qubits, const std::vector<std::pair<int, Letter>>& letters) {
    PauliString p(n_qubits);
    for (auto [q, l] : letters) {
      p.check_qubit(q);
      p.key_.set_letter(q, l);
    }
    return p;
  }

  int n_qubits() const { return n_; }
  const Bits& x_mask() const { return key_.x; }
  const Bits& z_mask() const { return key_.z; }
  int phase_exp() const { return phase_; }
  const PauliKey& key() const { return key_; }
  Letter letter(int q) const { return key_.letter(q); }
  int weight() const { return key_.weight(); }
  bool is_identity() const { return key_.is_identity() && phase_ == 0; }
  bool hermitian() const { return phase_ % 2 == 0; }

  friend bool operator==(const PauliString&, const PauliString&) = default;

  friend PauliString mul(const PauliString& p, const PauliString& q) {
    if (p.n_ != q.n_)
      throw DimensionError("mul: qubit count mismatch (" + std::to_string(p.n_) + " vs " +
                           std::to_string(q.n_) + ")");
    PauliString r(p.n_);
    r.key_ = PauliKey{p.key_.x ^ q.key_.x, p.key_.z ^ q.key_.z};
    r.phase_ = (p.phase_ + q.phase_ + product_phase(p.key_, q.key_)) % 4;
    return r;
  }
  friend PauliString operator*(const PauliString& p, const PauliString& q) { return mul(p, q); }

 private:
  void check_qubit(int q) const {
    if (q < 0 || q >= n_) throw DimensionError("qubit index " + std::to_string(q) + " out of range");
  }

  int n_;
  PauliKey key_{};
  int phase_ = 0;
};

class PauliSum;
PauliSum sum_mul(const PauliSum& a, const PauliSum& b);

/// Accumulates terms by key; build() drops debris and sorts by key.
class PauliSumBuilder {
 public:
  explicit PauliSumBuilder(int n_qubits) : n_(n_qubits) {}

  void reserve(std::size_t n) { map_.reserve(n); }
  void add(const PauliKey& key, cplx coeff) { map_[key] += coeff; }
  void add(const PauliString& p, cplx coeff = 1.0) {
    if (p.n_qubits() != n_) throw DimensionError("PauliSumBuilder: qubit count mismatch");
    map_[p.key()] += coeff * i_pow(p.phase_exp());
  }
  std::size_t size() const { return map_.size(); }

  PauliSum build(double threshold = kCollectThreshold) &&;

 private:
  int n_;
  std::unordered_map<PauliKey, cplx, PauliKeyHash> map_;
};

class PauliSum {
 public:
  using Term = std::pair<PauliKey, cplx>;

  explicit PauliSum(int n_qubits) : n_(n_qubits) {
    if (n_qubits < 1 || n_qubits > kMaxQubits) throw ArgumentError("PauliSum: bad n_qubits");
  }
  explicit PauliSum(const PauliString& p, cplx coeff = 1.0) : PauliSum(p.n_qubits()) {
    const cplx c = coeff * i_pow(p.phase_exp());
    if (std::abs(c) >= kCollectThreshold) terms_.emplace_back(p.key(), c);
  }

  static PauliSum identity(int n_qubits, cplx coeff = 1.0) { return PauliSum(PauliString(n_qubits), coeff); }

  /// Takes ownership of already-collected terms; sorts and merges duplicates.
  static PauliSum from_terms(int n_qubits, std::vector<Term> terms, double threshold = kCollectThreshold) {
    PauliSum s(n_qubits);
    std::sort(terms.begin(), terms.end(), [](const Term& a, const Term& b) { return a.first < b.first; });
    for (auto& t : terms) {
      if (!s.terms_.empty() && s.terms_.back().first == t.first)
        s.terms_.back().second += t.second;
      else
        s.terms_.push_back(t);
    }
    std::erase_if(s.terms_, [&](const Term& t) { return std::abs(t.second) < threshold; });
    return s;
  }

  int n_qubits() const { return n_; }
  const std::vector<Term>& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool empty() const { return terms_.empty(); }

  cplx coefficient(const PauliKey& key) const {
    auto it = std::lower_bound(terms_.begin(), terms_.end(), key,
                               [](const Term& t, const PauliKey& k) { return t.first < k; });
    return (it != terms_.end() && it->first == key) ? it->second : cplx{};
  }

  bool hermitian(double tol = 1e-9) const {
    return std::all_of(terms_.begin(), terms_.end(),
                       [&](const Term& t) { return std::abs(t.second.imag()) <= tol; });
  }

  bool is_identity(double tol = 1e-12) const {
    return terms_.size() == 1 && terms_[0].first.is_identity() && std::abs(terms_[0].second - 1.0) <= tol;
  }

  int max_weight() const {
    int w = 0;
    for (const auto& t : terms_) w = std::max(w, t.first.weight());
    return w;
  }

  PauliSum scaled(cplx c) const {
    PauliSum s(n_);
    for (const auto& [k, v] : terms_)
      if (std::abs(v * c) >= kCollectThreshold) s.terms_.emplace_back(k, v * c);
    return s;
  }

  PauliSum adjoint() const {
    PauliSum s = *this;
    for (auto& t : s.terms_) t.second = std::conj(t.second);
    return s;
  }

  friend PauliSum operator+(const PauliSum& a, const PauliSum& b) {
    if (a.n_ != b.n_) throw DimensionError("PauliSum +: qubit count mismatch");
    std::vector<Term> all(a.terms_);
    all.insert(all.end(), b.terms_.begin(), b.terms_.end());
    return from_terms(a.n_, std::move(all));
  }
  friend PauliSum operator-(const PauliSum& a, const PauliSum& b) { return a + b.scaled(-1.0); }
  friend PauliSum operator*(const PauliSum& a, const PauliSum& b) { return sum_mul(a, b); }

  /// Same keys and coefficients within tol.
  bool approx_equal(const PauliSum& o, double tol = 1e-12) const {
    if (n_ != o.n_) return false;
    const PauliSum d = *this - o;
    return std::all_of(d.terms_.begin(), d.terms_.end(), [&](const Term& t) { return std::abs(t.second) <= tol; });
  }

 private:
  friend class PauliSumBuilder;
  int n_;
  std::vector<Term> terms_;
};

inline PauliSum PauliSumBuilder::build(double threshold) && {
  PauliSum s(n_);
  s.terms_.reserve(map_.size());
  for (const auto& [k, v] : map_)
    if (std::abs(v) >= threshold) s.terms_.emplace_back(k, v);
  map_.clear();
  std::sort(s.terms_.begin(), s.terms_.end(),
            [](const PauliSum::Term& a, const PauliSum::Term& b) { return a.first < b.first; });
  return s;
}

/// Distributes the product over all term pairs and collects by key.
inline PauliSum sum_mul(const PauliSum& a, const PauliSum& b) {
  if (a.n_qubits() != b.n_qubits())
    throw DimensionError("sum_mul: qubit count mismatch (" + std::to_string(a.n_qubits()) + " vs " +
                         std::to_string(b.n_qubits()) + ")");
  PauliSumBuilder acc(a.n_qubits());
  acc.reserve(std::min<std::size_t>(a.size() * b.size(), std::size_t{1} << 24));
  for (const auto& [ka, ca] : a.terms()) {
    for (const auto& [kb, cb] : b.terms()) {
      const PauliKey k{ka.x ^ kb.x, ka.z ^ kb.z};
      acc.add(k, ca * cb * i_pow(product_phase(ka, kb)));
    }
  }
  return std::move(acc).build();
}

inline PauliSum pow(const PauliSum& a, int p) {
  if (p < 0) throw ArgumentError("pow: negative exponent");
  if (p == 0) return PauliSum::identity(a.n_qubits());
  PauliSum r = a;
  for (int i = 1; i < p; ++i) r = sum_mul(r, a);
  return r;
}

/// Uniform choice of `weight` distinct sites with an independent uniform
/// letter from {X, Y, Z} on each.
inline PauliString random_pauli(int n_qubits, int weight, Rng& rng) {
  if (weight < 1 || weight > n_qubits)
    throw ArgumentError("random_pauli: weight " + std::to_string(weight) + " outside [1, " +
                        std::to_string(n_qubits) + "]");
  std::vector<int> sites(n_qubits);
  for (int i = 0; i < n_qubits; ++i) sites[i] = i;
  PauliString p(n_qubits);
  PauliKey key{};
  for (int i = 0; i < weight; ++i) {
    const auto j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(n_qubits - i)));
    std::swap(sites[i], sites[j]);
    key.set_letter(sites[i], static_cast<Letter>(1 + rng.below(3)));
  }
  return PauliString(n_qubits, key);
}

inline PauliString random_pauli(int n_qubits, int weight, std::uint64_t seed) {
  Rng rng(seed);
  return random_pauli(n_qubits, weight, rng);
}

/// Relabels qubit q as perm[q].
inline PauliSum permute_qubits(const PauliSum& a, const std::vector<int>& perm) {
  if (static_cast<int>(perm.size()) != a.n_qubits()) throw DimensionError("permute_qubits: bad permutation size");
  std::vector<PauliSum::Term> out;
  out.reserve(a.size());
  for (const auto& [k, c] : a.terms()) {
    PauliKey nk{};
    for (int q = 0; q < a.n_qubits(); ++q) nk.set_letter(perm[q], k.letter(q));
    out.emplace_back(nk, c);
  }
  return PauliSum::from_terms(a.n_qubits(), std::move(out));
}

// ---------------------------------------------------------------------------
// Text format: whitespace-separated letter+index tokens with 1-based qubits,
// e.g. "Z5 X6 Z7". "I" (or an empty string) is the identity.

inline PauliString parse_pauli(std::string_view text, int n_qubits) {
  PauliString p(n_qubits);
  PauliKey key{};
  std::istringstream in{std::string(text)};
  std::string tok;
  while (in >> tok) {
    if (tok == "I") continue;
    const char c = tok[0];
    Letter l;
    switch (c) {
      case 'X': l = Letter::X; break;
      case 'Y': l = Letter::Y; break;
      case 'Z': l = Letter::Z; break;
      default: throw ConfigError("bad Pauli token '" + tok + "'");
    }
    if (tok.size() < 2 || !std::all_of(tok.begin() + 1, tok.end(), [](char ch) { return ch >= '0' && ch <= '9'; }))
      throw ConfigError("bad Pauli token '" + tok + "'");
    const int q = std::stoi(tok.substr(1)) - 1;
    if (q < 0 || q >= n_qubits) throw ConfigError("Pauli token '" + tok + "' outside 1.." + std::to_string(n_qubits));
    if (key.letter(q) != Letter::I) throw ConfigError("qubit repeated in '" + std::string(text) + "'");
    key.set_letter(q, l);
  }
  return PauliString(n_qubits, key);
}

inline std::string format_pauli(const PauliKey& key, int n_qubits) {
  std::string s;
  for (int q = 0; q < n_qubits; ++q) {
    const Letter l = key.letter(q);
    if (l == Letter::I) continue;
    if (!s.empty()) s += ' ';
    s += letter_char(l);
    s += std::to_string(q + 1);
  }
  return s.empty() ? "I" : s;
}

// ---------------------------------------------------------------------------
// Dense matrices, built from Kronecker products of 2x2 Pauli matrices. Only
// used as a test oracle, hence the small qubit cap.

inline constexpr int kDenseMaxQubits = 12;

inline Eigen::Matrix2cd pauli_matrix(Letter l) {
  using namespace std::complex_literals;
  Eigen::Matrix2cd m;
  switch (l) {
    case Letter::I: m << 1, 0, 0, 1; break;
    case Letter::X: m << 0, 1, 1, 0; break;
    case Letter::Y: m << 0, -1i, 1i, 0; break;
    case Letter::Z: m << 1, 0, 0, -1; break;
  }
  return m;
}

inline Eigen::MatrixXcd kron(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  Eigen::MatrixXcd r(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) r.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return r;
}

inline Eigen::MatrixXcd dense(const PauliKey& key, int n_qubits) {
  // Basis index bit q is qubit q, so qubit n-1 is the leftmost factor.
  Eigen::MatrixXcd m = pauli_matrix(key.letter(n_qubits - 1));
  for (int q = n_qubits - 2; q >= 0; --q) m = kron(m, pauli_matrix(key.letter(q)));
  return m;
}

inline Eigen::MatrixXcd dense(const PauliString& p) {
  return i_pow(p.phase_exp()) * dense(p.key(), p.n_qubits());
}

inline Eigen::MatrixXcd dense(const PauliSum& a) {
  if (a.n_qubits() > kDenseMaxQubits)
    throw ResourceError("dense: " + std::to_string(a.n_qubits()) + " qubits exceeds cap of " +
                        std::to_string(kDenseMaxQubits));
  const Eigen::Index dim = Eigen::Index{1} << a.n_qubits();
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(dim, dim);
  for (const auto& [k, c] : a.terms()) m += c * dense(k, a.n_qubits());
  return m;
}

}  // namespace icqse
