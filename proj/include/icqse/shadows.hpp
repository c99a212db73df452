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
 * Pauli traces against classical-shadow duals.
 *
 * For a single qubit measured in basis b with outcome bit m the canonical dual
 * is D = 3|j><j| - I, so Tr[P D] is 1 for P = I, 3(-1)^m when P is the basis
 * letter and 0 otherwise. A Pauli string therefore has a nonzero trace only
 * when every support qubit was measured in its letter, which is independent of
 * the shot. The kernel tests that with a few mask operations, and for matching
 * configurations averages 3^w (-1)^{popcount(outcome & support)} over shots.
 */

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "icqse/errors.hpp"
#include "icqse/estimate.hpp"
#include "icqse/parallel.hpp"
#include "icqse/pauli.hpp"
#include "icqse/statesim.hpp"

namespace icqse {

/// Tr[P D] for a single-qubit letter P and the dual of outcome bit m in basis b.
constexpr double trace_factor(Letter p, Basis b, int m) {
  if (p == Letter::I) return 1.0;
  return p == basis_letter(b) ? (m ? -3.0 : 3.0) : 0.0;
}

/// Heavier Paulis are evaluated, but with a warning: their shadow variance
/// grows as 3^w.
inline constexpr int kWeightWarnThreshold = 12;

/**
 * Shot-averaged Pauli traces for every configuration.
 *
 * Conceptually an N_c x |paulis| matrix. Entries vanish unless the
 * configuration's basis matches the Pauli on its whole support (probability
 * 3^-w), so each column is stored sparsely as (configuration, value) pairs in
 * increasing configuration order.
 */
class PauliEvalTable {
 public:
  PauliEvalTable() = default;

  int n_qubits() const { return n_; }
  std::uint32_t n_configs() const { return n_configs_; }
  std::size_t n_paulis() const { return paulis_.size(); }
  const std::vector<PauliKey>& paulis() const { return paulis_; }

  /// Evaluated single-qubit traces: letter comparisons up to the first
  /// mismatch, plus one sign lookup per support qubit per shot on matches.
  std::uint64_t trace_counter() const { return trace_counter_; }
  /// (configuration, Pauli) basis checks performed.
  std::uint64_t checks() const { return std::uint64_t{n_configs_} * paulis_.size(); }

  bool contains(const PauliKey& k) const { return index_.count(k) != 0; }
  std::size_t index_of(const PauliKey& k) const {
    auto it = index_.find(k);
    if (it == index_.end()) throw ConsistencyError("PauliEvalTable: Pauli missing from table");
    return it->second;
  }

  std::span<const std::uint32_t> column_rows(std::size_t p) const {
    return {rows_.data() + col_ptr_[p], col_ptr_[p + 1] - col_ptr_[p]};
  }
  std::span<const double> column_values(std::size_t p) const {
    return {vals_.data() + col_ptr_[p], col_ptr_[p + 1] - col_ptr_[p]};
  }

  double value(std::uint32_t k, std::size_t p) const {
    auto rows = column_rows(p);
    auto it = std::lower_bound(rows.begin(), rows.end(), k);
    if (it == rows.end() || *it != k) return 0.0;
    return column_values(p)[static_cast<std::size_t>(it - rows.begin())];
  }

  std::size_t nonzeros() const { return vals_.size(); }

  Eigen::MatrixXd dense() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n_configs_, static_cast<Eigen::Index>(paulis_.size()));
    for (std::size_t p = 0; p < paulis_.size(); ++p) {
      auto rows = column_rows(p);
      auto vals = column_values(p);
      for (std::size_t i = 0; i < rows.size(); ++i) m(rows[i], static_cast<Eigen::Index>(p)) = vals[i];
    }
    return m;
  }

  /// Builds from a dense row-major matrix (zeros dropped).
  static PauliEvalTable from_dense(int n_qubits, std::uint32_t n_configs, std::vector<PauliKey> paulis,
                                   std::span<const double> row_major, std::uint64_t trace_counter) {
    if (row_major.size() != std::size_t{n_configs} * paulis.size())
      throw DimensionError("PauliEvalTable: matrix size mismatch");
    PauliEvalTable t;
    t.n_ = n_qubits;
    t.n_configs_ = n_configs;
    t.paulis_ = std::move(paulis);
    t.trace_counter_ = trace_counter;
    t.col_ptr_.assign(t.paulis_.size() + 1, 0);
    for (std::size_t p = 0; p < t.paulis_.size(); ++p) {
      for (std::uint32_t k = 0; k < n_configs; ++k) {
        const double v = row_major[std::size_t{k} * t.paulis_.size() + p];
        if (v != 0.0) {
          t.rows_.push_back(k);
          t.vals_.push_back(v);
        }
      }
      t.col_ptr_[p + 1] = t.rows_.size();
    }
    t.rebuild_index();
    return t;
  }

 private:
  friend PauliEvalTable evaluate_paulis(const ShadowDataset&, std::span<const PauliKey>, unsigned);

  void rebuild_index() {
    index_.clear();
    index_.reserve(paulis_.size());
    for (std::size_t i = 0; i < paulis_.size(); ++i) index_.emplace(paulis_[i], i);
  }

  int n_ = 0;
  std::uint32_t n_configs_ = 0;
  std::vector<PauliKey> paulis_;
  std::unordered_map<PauliKey, std::size_t, PauliKeyHash> index_;
  std::vector<std::size_t> col_ptr_{0};
  std::vector<std::uint32_t> rows_;
  std::vector<double> vals_;
  std::uint64_t trace_counter_ = 0;
};

namespace detail {

struct ColumnResult {
  std::vector<std::uint32_t> rows;
  std::vector<double> vals;
};

template <int Words>
inline std::uint64_t eval_column(const ShadowDataset& d, const PauliKey& p, ColumnResult& out) {
  const int w = p.weight();
  const double scale = std::pow(3.0, w) / d.shots();
  const std::uint32_t shots = d.shots();
  const Bits supp = p.support();
  std::uint64_t count = 0;
  for (std::uint32_t k = 0; k < d.n_configs(); ++k) {
    const PauliKey& b = d.basis_key(k);
    bool mismatch = false;
    for (int i = 0; i < Words; ++i) {
      const std::uint64_t mm = ((p.x.w[i] ^ b.x.w[i]) | (p.z.w[i] ^ b.z.w[i])) & supp.w[i];
      if (mm) {
        // Support qubits compared in qubit order up to and including the first mismatch.
        const std::uint64_t upto = mm ^ (mm - 1);
        count += std::popcount(supp.w[i] & upto);
        for (int j = 0; j < i; ++j) count += std::popcount(supp.w[j]);
        mismatch = true;
        break;
      }
    }
    if (mismatch) continue;
    std::int64_t odd = 0;
    for (const Bits& o : d.outcomes(k)) {
      int par = 0;
      for (int i = 0; i < Words; ++i) par += std::popcount(o.w[i] & supp.w[i]);
      odd += par & 1;
    }
    count += static_cast<std::uint64_t>(w) * (1 + shots);
    out.rows.push_back(k);
    out.vals.push_back(scale * static_cast<double>(static_cast<std::int64_t>(shots) - 2 * odd));
  }
  return count;
}

}  // namespace detail

/// Shot-averaged traces of each Pauli against every configuration's dual.
/// Input keys are deduplicated and sorted. Work is split into contiguous
/// Pauli blocks with disjoint outputs, so the table is identical for any
/// thread count.
inline PauliEvalTable evaluate_paulis(const ShadowDataset& d, std::span<const PauliKey> keys, unsigned threads = 0) {
  PauliEvalTable t;
  t.n_ = d.n_qubits();
  t.n_configs_ = d.n_configs();
  t.paulis_.assign(keys.begin(), keys.end());
  std::sort(t.paulis_.begin(), t.paulis_.end());
  t.paulis_.erase(std::unique(t.paulis_.begin(), t.paulis_.end()), t.paulis_.end());
  const Bits outside = ~Bits::low(d.n_qubits());
  int heavy = 0;
  for (const auto& p : t.paulis_) {
    if (((p.x | p.z) & outside).any()) throw DimensionError("evaluate_paulis: Pauli acts beyond the dataset's qubits");
    if (p.weight() > kWeightWarnThreshold) ++heavy;
  }
  if (heavy > 0)
    log::warn(std::to_string(heavy) + " Pauli(s) above weight " + std::to_string(kWeightWarnThreshold) +
              " evaluated; shadow variance grows as 3^w");

  const std::size_t np = t.paulis_.size();
  std::vector<detail::ColumnResult> cols(np);
  std::vector<std::uint64_t> counts(np, 0);
  const bool one_word = d.n_qubits() <= 64;
  parallel_blocks(np, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p)
      counts[p] = one_word ? detail::eval_column<1>(d, t.paulis_[p], cols[p])
                           : detail::eval_column<kBitWords>(d, t.paulis_[p], cols[p]);
  });

  std::size_t nnz = 0;
  for (const auto& c : cols) nnz += c.rows.size();
  t.rows_.reserve(nnz);
  t.vals_.reserve(nnz);
  t.col_ptr_.assign(np + 1, 0);
  for (std::size_t p = 0; p < np; ++p) {
    t.rows_.insert(t.rows_.end(), cols[p].rows.begin(), cols[p].rows.end());
    t.vals_.insert(t.vals_.end(), cols[p].vals.begin(), cols[p].vals.end());
    t.col_ptr_[p + 1] = t.rows_.size();
    t.trace_counter_ += counts[p];
  }
  t.rebuild_index();
  return t;
}

inline PauliEvalTable evaluate_paulis(const ShadowDataset& d, const PauliSum& op, unsigned threads = 0) {
  std::vector<PauliKey> keys;
  keys.reserve(op.size());
  for (const auto& t : op.terms()) keys.push_back(t.first);
  return evaluate_paulis(d, keys, threads);
}

/// Per-configuration values sum_P Re(c_P) value[k][P].
inline std::vector<double> observable_rows(const PauliEvalTable& t, const PauliSum& op) {
  std::vector<double> rows(t.n_configs(), 0.0);
  for (const auto& [k, c] : op.terms()) {
    const std::size_t p = t.index_of(k);
    auto r = t.column_rows(p);
    auto v = t.column_values(p);
    for (std::size_t i = 0; i < r.size(); ++i) rows[r[i]] += c.real() * v[i];
  }
  return rows;
}

/// Unmitigated estimate of <O>: mean over configurations with its SEM.
inline EnergyEstimate estimate_observable(const PauliEvalTable& t, const PauliSum& op) {
  if (!op.hermitian()) throw ArgumentError("estimate_observable: observable must be Hermitian");
  const auto rows = observable_rows(t, op);
  return mean_and_sem(rows);
}

inline EnergyEstimate estimate_observable(const ShadowDataset& d, const PauliSum& op, unsigned threads = 0) {
  if (!op.hermitian()) throw ArgumentError("estimate_observable: observable must be Hermitian");
  if (op.n_qubits() != d.n_qubits()) throw DimensionError("estimate_observable: qubit count mismatch");
  return estimate_observable(evaluate_paulis(d, op, threads), op);
}

// ---------------------------------------------------------------------------
// Cache file: "ICQT" | u16 version | u16 n_qubits | u32 n_configs | u32 n_paulis
// | u64 trace_counter | per Pauli: x words then z words (u64 each)
// | row-major f64 matrix (n_configs x n_paulis). All little-endian.

inline constexpr std::uint16_t kEvalCacheVersion = 1;

inline void write_eval_cache(const PauliEvalTable& t, const std::string& path) {
  std::vector<std::uint8_t> out;
  for (char c : {'I', 'C', 'Q', 'T'}) out.push_back(static_cast<std::uint8_t>(c));
  detail::put_le<std::uint16_t>(out, kEvalCacheVersion);
  detail::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(t.n_qubits()));
  detail::put_le<std::uint32_t>(out, t.n_configs());
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.n_paulis()));
  detail::put_le<std::uint64_t>(out, t.trace_counter());
  for (const auto& k : t.paulis()) {
    for (auto w : k.x.w) detail::put_le<std::uint64_t>(out, w);
    for (auto w : k.z.w) detail::put_le<std::uint64_t>(out, w);
  }
  const Eigen::MatrixXd m = t.dense();
  for (Eigen::Index k = 0; k < m.rows(); ++k)
    for (Eigen::Index p = 0; p < m.cols(); ++p) detail::put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(m(k, p)));
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open '" + path + "' for writing");
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
}

inline PauliEvalTable read_eval_cache(const std::string& path) {
  if (!std::filesystem::is_regular_file(path)) throw ConfigError("not a cache file: '" + path + "'");
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open cache file '" + path + "'");
  std::vector<std::uint8_t> b((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (b.size() < 24 || b[0] != 'I' || b[1] != 'C' || b[2] != 'Q' || b[3] != 'T') throw ConfigError("cache: bad magic");
  if (detail::get_le<std::uint16_t>(&b[4]) != kEvalCacheVersion) throw ConfigError("cache: unsupported version");
  const int n = detail::get_le<std::uint16_t>(&b[6]);
  const auto nc = detail::get_le<std::uint32_t>(&b[8]);
  const auto np = detail::get_le<std::uint32_t>(&b[12]);
  const auto counter = detail::get_le<std::uint64_t>(&b[16]);
  const std::size_t key_bytes = 16 * kBitWords;
  if (b.size() != 24 + np * key_bytes + std::size_t{nc} * np * 8) throw ConfigError("cache: size mismatch");
  std::vector<PauliKey> keys(np);
  std::size_t pos = 24;
  for (auto& k : keys) {
    for (auto& w : k.x.w) w = detail::get_le<std::uint64_t>(&b[pos]), pos += 8;
    for (auto& w : k.z.w) w = detail::get_le<std::uint64_t>(&b[pos]), pos += 8;
  }
  std::vector<double> m(std::size_t{nc} * np);
  for (auto& v : m) v = std::bit_cast<double>(detail::get_le<std::uint64_t>(&b[pos])), pos += 8;
  return PauliEvalTable::from_dense(n, nc, std::move(keys), m, counter);
}

}  // namespace icqse
