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

#include <gtest/gtest.h>

#include <filesystem>

#include "icqse/shadows.hpp"

using namespace icqse;

namespace {

ShadowDataset synthetic(int n, std::uint32_t nc, std::uint16_t ns, std::uint64_t seed) {
  // Uniform random bases and outcomes; enough to exercise the kernel at any n.
  Rng rng(seed);
  std::vector<std::uint8_t> bases(std::size_t{nc} * n);
  for (auto& b : bases) b = static_cast<std::uint8_t>(rng.below(3));
  std::vector<Bits> outs(std::size_t{nc} * ns);
  const Bits mask = Bits::low(n);
  for (auto& o : outs) {
    for (auto& w : o.w) w = rng.next();
    o = o & mask;
  }
  return ShadowDataset(n, nc, ns, seed, kRngId, std::move(bases), std::move(outs));
}

std::vector<PauliKey> random_keys(int n, int count, std::uint64_t seed, int max_w = 4) {
  Rng rng(seed);
  std::vector<PauliKey> keys;
  for (int i = 0; i < count; ++i) keys.push_back(random_pauli(n, 1 + static_cast<int>(rng.below(max_w)), rng).key());
  return keys;
}

// Direct per-shot dual traces averaged over shots.
double oracle_value(const ShadowDataset& d, std::uint32_t k, const PauliKey& p) {
  const PauliSum op(PauliString(d.n_qubits(), p));
  double s = 0;
  for (std::uint32_t j = 0; j < d.shots(); ++j) s += single_shot_value(op, d.basis_key(k), d.outcome(k, j));
  return s / d.shots();
}

// Trace counting rule restated qubit by qubit.
std::uint64_t oracle_count(const ShadowDataset& d, const PauliKey& p) {
  std::uint64_t c = 0;
  for (std::uint32_t k = 0; k < d.n_configs(); ++k) {
    std::uint64_t seen = 0;
    bool mismatch = false;
    for (int q = 0; q < d.n_qubits(); ++q) {
      if (p.letter(q) == Letter::I) continue;
      ++seen;
      if (p.letter(q) != d.basis_key(k).letter(q)) {
        mismatch = true;
        break;
      }
    }
    c += mismatch ? seen : static_cast<std::uint64_t>(p.weight()) * (1 + d.shots());
  }
  return c;
}

}  // namespace

TEST(TraceFactor, SingleQubitTable) {
  // Tr[P (3|j><j| - I)] for letter P and basis letter B.
  EXPECT_EQ(trace_factor(Letter::I, Basis::X, 0), 1.0);
  EXPECT_EQ(trace_factor(Letter::Z, Basis::Z, 0), 3.0);
  EXPECT_EQ(trace_factor(Letter::Z, Basis::Z, 1), -3.0);
  EXPECT_EQ(trace_factor(Letter::X, Basis::Z, 0), 0.0);
  EXPECT_EQ(trace_factor(Letter::Y, Basis::Y, 1), -3.0);
}

TEST(Shadows, TableMatchesDirectOracle) {
  for (int n : {5, 70}) {
    const auto d = synthetic(n, 400, 3, 17);
    const auto keys = random_keys(n, 40, 5, n > 64 ? 3 : 2);
    const auto t = evaluate_paulis(d, keys, 1);
    std::uint64_t want_count = 0;
    for (std::size_t p = 0; p < t.n_paulis(); ++p) {
      want_count += oracle_count(d, t.paulis()[p]);
      for (std::uint32_t k = 0; k < d.n_configs(); ++k)
        ASSERT_NEAR(t.value(k, p), oracle_value(d, k, t.paulis()[p]), 1e-12) << n << " " << k << " " << p;
    }
    EXPECT_EQ(t.trace_counter(), want_count);
  }
}

TEST(Shadows, KeysAreDedupedAndSorted) {
  const auto d = synthetic(6, 10, 1, 1);
  auto keys = random_keys(6, 20, 2);
  keys.insert(keys.end(), keys.begin(), keys.begin() + 5);
  const auto t = evaluate_paulis(d, keys, 1);
  EXPECT_TRUE(std::is_sorted(t.paulis().begin(), t.paulis().end()));
  EXPECT_TRUE(std::adjacent_find(t.paulis().begin(), t.paulis().end()) == t.paulis().end());
  const auto absent = PauliString::from_letters(6, {{0, Letter::X}, {1, Letter::X}, {2, Letter::X},
                                                   {3, Letter::X}, {4, Letter::X}, {5, Letter::X}});
  EXPECT_FALSE(t.contains(absent.key()));
  EXPECT_THROW(t.index_of(absent.key()), ConsistencyError);
}

TEST(Shadows, DeterministicAcrossThreads) {
  const auto d = synthetic(12, 3000, 4, 9);
  const auto keys = random_keys(12, 300, 3, 5);
  const auto a = evaluate_paulis(d, keys, 1);
  for (unsigned th : {2u, 3u, 8u}) {
    const auto b = evaluate_paulis(d, keys, th);
    EXPECT_EQ(a.trace_counter(), b.trace_counter());
    EXPECT_TRUE((a.dense().array() == b.dense().array()).all());
  }
}

TEST(Shadows, EstimateEqualsMeanAndSem) {
  const auto d = synthetic(6, 500, 2, 4);
  const auto h = build_hamiltonian(ModelParams::from_g(6, 0.2));
  const auto t = evaluate_paulis(d, h, 1);
  const auto rows = observable_rows(t, h);
  double m = 0;
  for (double r : rows) m += r;
  m /= rows.size();
  double v = 0;
  for (double r : rows) v += (r - m) * (r - m);
  v /= rows.size() - 1;
  const auto e = estimate_observable(t, h);
  EXPECT_NEAR(e.value, m, 1e-12);
  EXPECT_NEAR(e.std_error, std::sqrt(v / rows.size()), 1e-12);
  EXPECT_EQ(e.n_samples, 500u);
}

TEST(Shadows, Errors) {
  const auto d = synthetic(4, 10, 1, 1);
  const std::vector<PauliKey> wide{PauliString::single(8, 6, Letter::Z).key()};
  EXPECT_THROW(evaluate_paulis(d, wide, 1), DimensionError);
  const PauliSum anti(PauliString::single(4, 0, Letter::Z), cplx(0, 1));
  EXPECT_THROW(estimate_observable(d, anti), ArgumentError);
  EXPECT_THROW(estimate_observable(d, PauliSum::identity(5)), DimensionError);
}

TEST(Shadows, IdentityIsOneEverywhere) {
  const auto d = synthetic(7, 50, 3, 2);
  const auto e = estimate_observable(d, PauliSum::identity(7, 2.5));
  EXPECT_DOUBLE_EQ(e.value, 2.5);
  EXPECT_DOUBLE_EQ(e.std_error, 0.0);
}

TEST(Shadows, UnbiasedOnSimulatedState) {
  const int n = 6;
  const auto st = exact_diag(ModelParams::from_g(n, -0.3), 1).ground_state();
  const auto h = build_hamiltonian(ModelParams::from_g(n, -0.3));
  const auto d = sample_shadows(st, {}, 20000, 4, 31, 1);
  const auto e = estimate_observable(d, h, 1);
  EXPECT_NEAR(e.value, expectation(st, h).real(), 4 * e.std_error);
}

TEST(Shadows, CacheRoundTrip) {
  const auto d = synthetic(9, 120, 2, 6);
  const auto t = evaluate_paulis(d, random_keys(9, 30, 8), 1);
  const auto path = (std::filesystem::temp_directory_path() / "icqse_cache_test.icqt").string();
  write_eval_cache(t, path);
  const auto r = read_eval_cache(path);
  std::filesystem::remove(path);
  EXPECT_EQ(r.paulis(), t.paulis());
  EXPECT_EQ(r.trace_counter(), t.trace_counter());
  EXPECT_TRUE((r.dense().array() == t.dense().array()).all());
}
