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
 * Subspace expansion from shadow data.
 *
 * For expansion operators sigma_1..sigma_L and a real coefficient vector c,
 * every configuration k gives a numerator x_k = c^T A^H_k c and a denominator
 * y_k = c^T A^S_k c. The subspace energy is estimated by the ratio of their
 * sample means, with a second-order (delta method) error that keeps the x/y
 * covariance. The optimizer minimizes that ratio subject to an error budget.
 *
 * Per-configuration matrices are symmetric, so only the upper triangle is
 * stored: column pair_index(i, j) of an N_c x L(L+1)/2 matrix.
 */

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "icqse/cobyla.hpp"
#include "icqse/errors.hpp"
#include "icqse/estimate.hpp"
#include "icqse/parallel.hpp"
#include "icqse/pauli.hpp"
#include "icqse/rng.hpp"
#include "icqse/shadows.hpp"

namespace icqse {

// ---------------------------------------------------------------------------
// Subspace specification and symbolic expansion

struct SubspaceSpec {
  std::vector<PauliSum> operators;
  std::string label = "custom";  ///< "krylov", "krylov+" or "custom"

  int size() const { return static_cast<int>(operators.size()); }
  int n_qubits() const { return operators.empty() ? 0 : operators.front().n_qubits(); }

  void validate() const {
    if (operators.empty()) throw ArgumentError("subspace: at least one operator required");
    if (!operators.front().is_identity()) throw ArgumentError("subspace: first operator must be the identity");
    const int n = n_qubits();
    for (std::size_t i = 0; i < operators.size(); ++i) {
      if (operators[i].n_qubits() != n) throw DimensionError("subspace: qubit count mismatch");
      if (!operators[i].hermitian()) throw ArgumentError("subspace: operator " + std::to_string(i) + " is not Hermitian");
      for (std::size_t j = 0; j < i; ++j)
        if (operators[i].approx_equal(operators[j])) throw ArgumentError("subspace: duplicate operators");
    }
  }

  static SubspaceSpec krylov(const PauliSum& h) {
    SubspaceSpec s{{PauliSum::identity(h.n_qubits()), h}, "krylov"};
    s.validate();
    return s;
  }
};

inline constexpr std::size_t pair_count(int L) { return static_cast<std::size_t>(L) * (L + 1) / 2; }

/// Row-major index of (i, j), i <= j, in the packed upper triangle.
inline constexpr std::size_t pair_index(int i, int j, int L) {
  if (i > j) std::swap(i, j);
  return static_cast<std::size_t>(i) * L - static_cast<std::size_t>(i) * (i - 1) / 2 + (j - i);
}

/// Sparse real coefficients of one matrix element over the unique Pauli list.
using CoeffList = std::vector<std::pair<std::uint32_t, double>>;

struct SubspaceExpansion {
  int n_qubits = 0;
  int L = 0;
  std::vector<PauliKey> paulis;  ///< sorted, unique
  std::vector<CoeffList> op;     ///< per packed pair: sigma_j O sigma_i
  std::vector<CoeffList> overlap;  ///< per packed pair: sigma_j sigma_i
};

/**
 * Expands sigma_j O sigma_i and sigma_j sigma_i for all i <= j.
 *
 * The quadratic forms only see the symmetric part, and for Hermitian sigma and
 * O, Tr[D G_ij] + Tr[D G_ji] = 2 Re Tr[D G_ij], so the real part of each
 * coefficient is exactly what the symmetrized tensors need. Diagonal elements
 * are Hermitian, so their imaginary parts must vanish.
 */
inline SubspaceExpansion expand_subspace(const SubspaceSpec& spec, const PauliSum& op) {
  spec.validate();
  if (op.n_qubits() != spec.n_qubits()) throw DimensionError("expand_subspace: qubit count mismatch");
  if (!op.hermitian()) throw ArgumentError("expand_subspace: operator must be Hermitian");
  const int L = spec.size();
  const std::size_t np = pair_count(L);
  std::vector<PauliSum> g_op, g_s;
  g_op.reserve(np);
  g_s.reserve(np);
  for (int i = 0; i < L; ++i) {
    for (int j = i; j < L; ++j) {
      const auto& si = spec.operators[static_cast<std::size_t>(i)];
      const auto& sj = spec.operators[static_cast<std::size_t>(j)];
      g_op.push_back(sum_mul(sum_mul(sj, op), si));
      g_s.push_back(sum_mul(sj, si));
      if (i == j) {
        for (const auto* g : {&g_op.back(), &g_s.back()})
          for (const auto& [k, c] : g->terms())
            if (std::abs(c.imag()) > 1e-9 * std::max(1.0, std::abs(c)))
              throw ConsistencyError("expand_subspace: diagonal element has a non-real coefficient");
      }
    }
  }

  SubspaceExpansion e;
  e.n_qubits = spec.n_qubits();
  e.L = L;
  for (const auto* list : {&g_op, &g_s})
    for (const auto& g : *list)
      for (const auto& t : g.terms()) e.paulis.push_back(t.first);
  std::sort(e.paulis.begin(), e.paulis.end());
  e.paulis.erase(std::unique(e.paulis.begin(), e.paulis.end()), e.paulis.end());
  auto index_of = [&](const PauliKey& k) {
    return static_cast<std::uint32_t>(std::lower_bound(e.paulis.begin(), e.paulis.end(), k) - e.paulis.begin());
  };
  auto to_list = [&](const PauliSum& g) {
    CoeffList l;
    l.reserve(g.size());
    for (const auto& [k, c] : g.terms())
      if (c.real() != 0.0) l.emplace_back(index_of(k), c.real());
    return l;
  };
  e.op.reserve(np);
  e.overlap.reserve(np);
  for (std::size_t p = 0; p < np; ++p) {
    e.op.push_back(to_list(g_op[p]));
    e.overlap.push_back(to_list(g_s[p]));
  }
  return e;
}

// ---------------------------------------------------------------------------
// Per-configuration tensors

struct SampleTensors {
  int L = 0;
  std::uint32_t n_configs = 0;
  Eigen::MatrixXd aH;  ///< N_c x pair_count(L)
  Eigen::MatrixXd aS;

  double h(std::uint32_t k, int i, int j) const { return aH(k, static_cast<Eigen::Index>(pair_index(i, j, L))); }
  double s(std::uint32_t k, int i, int j) const { return aS(k, static_cast<Eigen::Index>(pair_index(i, j, L))); }

  static Eigen::MatrixXd unpack(const Eigen::RowVectorXd& packed, int L) {
    Eigen::MatrixXd m(L, L);
    for (int i = 0; i < L; ++i)
      for (int j = i; j < L; ++j) m(i, j) = m(j, i) = packed(static_cast<Eigen::Index>(pair_index(i, j, L)));
    return m;
  }
  Eigen::MatrixXd mean_h() const { return unpack(aH.colwise().mean(), L); }
  Eigen::MatrixXd mean_s() const { return unpack(aS.colwise().mean(), L); }
};

/// aH[k](i,j) = sum_P Re(coeff_ij(P)) value[k][P]; likewise aS. Pairs are
/// filled independently, so the result does not depend on the thread count.
inline SampleTensors assemble_tensors(const PauliEvalTable& table, const SubspaceExpansion& e, unsigned threads = 0) {
  if (table.n_qubits() != e.n_qubits) throw DimensionError("assemble_tensors: qubit count mismatch");
  std::vector<std::size_t> col(e.paulis.size());
  for (std::size_t i = 0; i < e.paulis.size(); ++i) col[i] = table.index_of(e.paulis[i]);
  SampleTensors t;
  t.L = e.L;
  t.n_configs = table.n_configs();
  const auto np = static_cast<Eigen::Index>(pair_count(e.L));
  t.aH = Eigen::MatrixXd::Zero(t.n_configs, np);
  t.aS = Eigen::MatrixXd::Zero(t.n_configs, np);
  parallel_blocks(static_cast<std::size_t>(np), threads, [&](std::size_t b, std::size_t end) {
    for (std::size_t p = b; p < end; ++p) {
      for (auto [list, out] : {std::pair{&e.op[p], &t.aH}, std::pair{&e.overlap[p], &t.aS}}) {
        double* dst = out->col(static_cast<Eigen::Index>(p)).data();
        for (const auto& [u, c] : *list) {
          auto rows = table.column_rows(col[u]);
          auto vals = table.column_values(col[u]);
          for (std::size_t r = 0; r < rows.size(); ++r) dst[rows[r]] += c * vals[r];
        }
      }
    }
  });
  return t;
}

/// Packed weights u with x_k = aH.row(k) . u, so that c^T A c = A_packed . u.
inline Eigen::VectorXd pair_weights(std::span<const double> c) {
  const int L = static_cast<int>(c.size());
  Eigen::VectorXd u(static_cast<Eigen::Index>(pair_count(L)));
  for (int i = 0; i < L; ++i)
    for (int j = i; j < L; ++j)
      u(static_cast<Eigen::Index>(pair_index(i, j, L))) = (i == j ? 1.0 : 2.0) * c[static_cast<std::size_t>(i)] * c[static_cast<std::size_t>(j)];
  return u;
}

// ---------------------------------------------------------------------------
// Ratio estimator

namespace detail {

inline EnergyEstimate ratio_from_moments(double xbar, double ybar, double vx, double vy, double cxy, double y_rms,
                                         std::int64_t n) {
  if (!(std::abs(ybar) >= 1e-10 * y_rms) || y_rms == 0.0)
    throw NumericalError("ratio estimate: normalization vanishes (state outside the resolvable subspace)");
  EnergyEstimate e;
  e.n_samples = n;
  e.value = xbar / ybar;
  const double y2 = ybar * ybar;
  const double var = (vx / y2 + xbar * xbar * vy / (y2 * y2) - 2.0 * xbar * cxy / (y2 * ybar)) / static_cast<double>(n);
  e.std_error = std::sqrt(std::max(var, 0.0));
  return e;
}

}  // namespace detail

/// x-bar / y-bar with the delta-method error including Cov[x, y] (n-1 moments).
inline EnergyEstimate ratio_estimate(const SampleTensors& t, std::span<const double> c) {
  if (static_cast<int>(c.size()) != t.L) throw DimensionError("ratio_estimate: coefficient length != L");
  if (t.n_configs < 2) throw ArgumentError("ratio_estimate: need at least two configurations");
  const Eigen::VectorXd u = pair_weights(c);
  const Eigen::VectorXd x = t.aH * u;
  const Eigen::VectorXd y = t.aS * u;
  const double n = static_cast<double>(t.n_configs);
  const double xbar = x.mean(), ybar = y.mean();
  const Eigen::ArrayXd dx = x.array() - xbar, dy = y.array() - ybar;
  const double vx = dx.square().sum() / (n - 1), vy = dy.square().sum() / (n - 1), cxy = (dx * dy).sum() / (n - 1);
  const double y_rms = std::sqrt(y.squaredNorm() / n);
  return detail::ratio_from_moments(xbar, ybar, vx, vy, cxy, y_rms, t.n_configs);
}

/// Same estimate from precomputed means and covariances of the packed tensor
/// columns. Each call is O(pairs^2) instead of O(N_c * pairs), which is what
/// makes thousands of optimizer evaluations cheap.
class RatioModel {
 public:
  explicit RatioModel(const SampleTensors& t) : L_(t.L), n_(t.n_configs) {
    if (t.n_configs < 2) throw ArgumentError("RatioModel: need at least two configurations");
    mh_ = t.aH.colwise().mean().transpose();
    ms_ = t.aS.colwise().mean().transpose();
    const Eigen::MatrixXd ch = t.aH.rowwise() - mh_.transpose();
    const Eigen::MatrixXd cs = t.aS.rowwise() - ms_.transpose();
    const double d = static_cast<double>(n_) - 1.0;
    cxx_ = (ch.transpose() * ch) / d;
    cyy_ = (cs.transpose() * cs) / d;
    cxy_ = (ch.transpose() * cs) / d;
  }

  int L() const { return L_; }
  std::uint32_t n_configs() const { return n_; }
  const Eigen::VectorXd& mean_h_packed() const { return mh_; }
  const Eigen::VectorXd& mean_s_packed() const { return ms_; }

  EnergyEstimate operator()(std::span<const double> c) const {
    if (static_cast<int>(c.size()) != L_) throw DimensionError("RatioModel: coefficient length != L");
    const Eigen::VectorXd u = pair_weights(c);
    const double xbar = mh_.dot(u), ybar = ms_.dot(u);
    const double vx = u.dot(cxx_ * u), vy = u.dot(cyy_ * u), cxy = u.dot(cxy_ * u);
    const double n = static_cast<double>(n_);
    const double y_rms = std::sqrt(std::max(ybar * ybar + std::max(vy, 0.0) * (n - 1) / n, 0.0));
    return detail::ratio_from_moments(xbar, ybar, vx, vy, cxy, y_rms, n_);
  }

 private:
  int L_;
  std::uint32_t n_;
  Eigen::VectorXd mh_, ms_;
  Eigen::MatrixXd cxx_, cyy_, cxy_;
};

// ---------------------------------------------------------------------------
// Constrained minimization

struct SolveOptions {
  CobylaOptions cobyla{};
  std::vector<std::vector<double>> warm_starts;
  bool record_history = false;
};

struct SolveResult {
  std::vector<double> c_opt;
  EnergyEstimate energy;
  int iterations = 0;  ///< objective evaluations over all starts
  double eps_max = 0.0;
  bool hit_eval_cap = false;
  std::string diagnostic;
  std::vector<std::pair<double, double>> history;  ///< (value, error) per evaluation
};

/// Relative slack for the post-hoc feasibility check.
inline constexpr double kFeasibilitySlack = 1e-9;

/**
 * argmin_c H(c) subject to eps(c) <= eps_max, started from e_1 and any warm
 * starts. Every evaluated point is re-checked, and the best feasible one is
 * returned, so the result can never be worse than e_1 (or any feasible warm
 * start). Variables are internally rescaled by 1/sqrt(S_ii) so the trust
 * region sees comparable directions.
 */
inline SolveResult constrained_minimize(const RatioModel& model, double eps_max, const SolveOptions& opt = {}) {
  if (!(eps_max > 0)) throw ArgumentError("constrained_minimize: eps_max must be positive");
  const int L = model.L();
  SolveResult res;
  res.eps_max = eps_max;
  std::vector<double> e1(static_cast<std::size_t>(L), 0.0);
  e1[0] = 1.0;
  const EnergyEstimate at_e1 = model(e1);
  const double limit = eps_max * (1.0 + kFeasibilitySlack);
  res.c_opt = e1;
  res.energy = at_e1;
  res.iterations = 1;
  if (at_e1.std_error > limit) {
    res.energy.feasible = false;
    res.diagnostic = "start point e_1 violates the error budget";
    return res;
  }
  res.energy.feasible = true;
  if (L == 1) return res;

  std::vector<double> scale(static_cast<std::size_t>(L), 1.0);
  for (int i = 1; i < L; ++i) {
    const double sii = model.mean_s_packed()(static_cast<Eigen::Index>(pair_index(i, i, L)));
    if (sii > 1e-300) scale[static_cast<std::size_t>(i)] = 1.0 / std::sqrt(sii);
  }
  const double penalty = std::abs(at_e1.value) * 10.0 + 1e3;
  std::vector<double> c(static_cast<std::size_t>(L));
  auto consider = [&](std::span<const double> cc, const EnergyEstimate& e) {
    if (opt.record_history) res.history.emplace_back(e.value, e.std_error);
    if (e.std_error <= limit && e.value < res.energy.value) {
      res.c_opt.assign(cc.begin(), cc.end());
      res.energy = e;
      res.energy.feasible = true;
    }
  };
  auto calcfc = [&](std::span<const double> z, std::span<double> con) {
    for (int i = 0; i < L; ++i) c[static_cast<std::size_t>(i)] = z[static_cast<std::size_t>(i)] * scale[static_cast<std::size_t>(i)];
    ++res.iterations;
    try {
      const EnergyEstimate e = model(c);
      consider(c, e);
      con[0] = eps_max - e.std_error;
      return e.value;
    } catch (const NumericalError&) {
      con[0] = -1e3 * eps_max;
      return penalty;
    }
  };

  std::vector<std::vector<double>> starts{e1};
  for (const auto& w : opt.warm_starts) {
    if (static_cast<int>(w.size()) != L) throw DimensionError("constrained_minimize: warm start length != L");
    try {
      consider(w, model(w));
    } catch (const NumericalError&) {
      continue;
    }
    ++res.iterations;
    starts.push_back(w);
  }
  for (const auto& s : starts) {
    std::vector<double> z(static_cast<std::size_t>(L));
    for (int i = 0; i < L; ++i) z[static_cast<std::size_t>(i)] = s[static_cast<std::size_t>(i)] / scale[static_cast<std::size_t>(i)];
    const CobylaResult r = cobyla_minimize(calcfc, z, 1, opt.cobyla);
    if (r.status == CobylaStatus::MaxEvals) res.hit_eval_cap = true;
  }
  if (res.hit_eval_cap) {
    res.diagnostic = "evaluation cap reached; best feasible iterate returned";
    log::warn("constrained_minimize: " + res.diagnostic);
  }
  return res;
}

/// Unconstrained argmin of H(c) + eps(c) from e_1; used to rank candidates.
inline std::pair<std::vector<double>, EnergyEstimate> minimize_upper_error(const RatioModel& model,
                                                                          const CobylaOptions& copt = {}) {
  const int L = model.L();
  std::vector<double> best(static_cast<std::size_t>(L), 0.0);
  best[0] = 1.0;
  EnergyEstimate best_e = model(best);
  double best_f = best_e.value + best_e.std_error;
  const double penalty = std::abs(best_f) * 10.0 + 1e3;
  auto f = [&](std::span<const double> c, std::span<double>) {
    try {
      const EnergyEstimate e = model(c);
      const double v = e.value + e.std_error;
      if (v < best_f) {
        best_f = v;
        best_e = e;
        best.assign(c.begin(), c.end());
      }
      return v;
    } catch (const NumericalError&) {
      return penalty;
    }
  };
  cobyla_minimize(f, best, 0, copt);
  return {best, best_e};
}

/// Another observable at fixed coefficients: the ratio with O in place of H.
inline EnergyEstimate observable_at(const SampleTensors& t_obs, std::span<const double> c) {
  EnergyEstimate e = ratio_estimate(t_obs, c);
  e.feasible = true;
  return e;
}

// ---------------------------------------------------------------------------
// Error budget

/// Budget ratio r in eps_max = r |H_unmit|, interpolated linearly in N
/// between the tabulated sizes and clamped outside them.
inline double default_eps_ratio(int n_qubits) {
  static constexpr std::pair<int, double> table[] = {{16, 0.05}, {32, 0.075}, {48, 0.1}, {64, 0.125}, {80, 0.15}};
  if (n_qubits <= table[0].first) return table[0].second;
  for (std::size_t i = 1; i < std::size(table); ++i) {
    if (n_qubits <= table[i].first) {
      const double t = static_cast<double>(n_qubits - table[i - 1].first) / (table[i].first - table[i - 1].first);
      return table[i - 1].second + t * (table[i].second - table[i - 1].second);
    }
  }
  return std::end(table)[-1].second;
}

// ---------------------------------------------------------------------------
// Pauli selection

struct SelectionOptions {
  std::map<int, int> pools{{1, 150}, {2, 150}, {3, 150}, {4, 150}, {5, 150}};  ///< weight -> pool size
  int top_k = 5;
  std::uint64_t seed = 1;
  bool score_energy_only = false;  ///< rank on H(c*) instead of H(c*) + eps(c*)
  double max_condition = 1e8;
  CobylaOptions cobyla{};
  unsigned threads = 0;
};

struct CandidateScore {
  PauliKey key;
  int weight = 0;
  double score = 0.0;
  bool skipped = false;
};

struct SelectionResult {
  SubspaceSpec spec;
  std::vector<PauliKey> selected;
  std::vector<CandidateScore> candidates;
  EnergyEstimate unmitigated;
  std::uint64_t trace_counter = 0;
};

/// Draws the candidate pools: for weight w, stream w of the seed, deduplicated.
inline std::vector<std::pair<int, PauliKey>> draw_pools(int n_qubits, const SelectionOptions& opt) {
  std::vector<std::pair<int, PauliKey>> out;
  for (const auto& [w, size] : opt.pools) {
    if (w < 1 || w > 5) throw ArgumentError("select_paulis: pool weights must lie in 1..5");
    if (w > n_qubits) throw ArgumentError("select_paulis: pool weight exceeds qubit count");
    if (size < 1) throw ArgumentError("select_paulis: pool size must be positive");
    Rng rng(opt.seed, static_cast<std::uint64_t>(w));
    std::vector<PauliKey> pool;
    for (int i = 0; i < size; ++i) pool.push_back(random_pauli(n_qubits, w, rng).key());
    std::sort(pool.begin(), pool.end());
    pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
    for (const auto& k : pool) out.emplace_back(w, k);
  }
  return out;
}

/**
 * Ranks random Paulis by how much the two-operator subspace {I, P} lowers the
 * upper error H(c*) + eps(c*) below the unmitigated energy, keeps the best
 * top_k with positive score per weight (ties by key), and returns
 * {I, H} plus the selection.
 */
inline SelectionResult select_paulis(const ShadowDataset& data, const PauliSum& h, const SelectionOptions& opt = {}) {
  const int n = data.n_qubits();
  if (h.n_qubits() != n) throw DimensionError("select_paulis: qubit count mismatch");
  if (opt.top_k < 0) throw ArgumentError("select_paulis: top_k must be non-negative");
  const auto pool = draw_pools(n, opt);

  SelectionResult out;
  std::vector<SubspaceExpansion> expansions;
  expansions.reserve(pool.size());
  std::vector<PauliKey> keys;
  for (const auto& t : h.terms()) keys.push_back(t.first);
  for (const auto& [w, k] : pool) {
    SubspaceSpec s;
    s.operators = {PauliSum::identity(n), PauliSum(PauliString(n, k))};
    if (k.is_identity()) {
      expansions.emplace_back();
      continue;
    }
    expansions.push_back(expand_subspace(s, h));
    keys.insert(keys.end(), expansions.back().paulis.begin(), expansions.back().paulis.end());
  }
  const PauliEvalTable table = evaluate_paulis(data, keys, opt.threads);
  out.trace_counter = table.trace_counter();
  out.unmitigated = estimate_observable(table, h);
  const double base = out.unmitigated.value;

  out.candidates.resize(pool.size());
  parallel_blocks(pool.size(), opt.threads, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      auto& cs = out.candidates[i];
      cs.weight = pool[i].first;
      cs.key = pool[i].second;
      if (expansions[i].L == 0) {
        cs.skipped = true;
        continue;
      }
      const SampleTensors t = assemble_tensors(table, expansions[i], 1);
      const Eigen::MatrixXd sbar = t.mean_s();
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(sbar);
      const auto& sv = svd.singularValues();
      if (!(sv(sv.size() - 1) > 0) || sv(0) / sv(sv.size() - 1) > opt.max_condition) {
        cs.skipped = true;
        continue;
      }
      try {
        const RatioModel model(t);
        const auto [c, est] = minimize_upper_error(model, opt.cobyla);
        cs.score = base - (opt.score_energy_only ? est.value : est.value + est.std_error);
      } catch (const NumericalError&) {
        cs.skipped = true;
      }
    }
  });

  int skipped = 0;
  std::map<int, std::vector<const CandidateScore*>> by_weight;
  for (const auto& cs : out.candidates) {
    if (cs.skipped) {
      ++skipped;
      continue;
    }
    if (cs.score > 0) by_weight[cs.weight].push_back(&cs);
  }
  if (skipped > 0) log::info("select_paulis: skipped " + std::to_string(skipped) + " degenerate candidate(s)");
  for (auto& [w, list] : by_weight) {
    std::sort(list.begin(), list.end(), [](const CandidateScore* a, const CandidateScore* b) {
      if (a->score != b->score) return a->score > b->score;
      return a->key < b->key;
    });
    for (int i = 0; i < std::min<int>(opt.top_k, static_cast<int>(list.size())); ++i)
      out.selected.push_back(list[static_cast<std::size_t>(i)]->key);
  }

  out.spec.label = "krylov+";
  out.spec.operators = {PauliSum::identity(n), h};
  for (const auto& k : out.selected) {
    PauliSum p(PauliString(n, k));
    bool dup = false;
    for (const auto& o : out.spec.operators) dup = dup || o.approx_equal(p);
    if (!dup) out.spec.operators.push_back(std::move(p));
  }
  out.spec.validate();
  return out;
}

// ---------------------------------------------------------------------------
// Regularized generalized eigenvalue problem

struct GevpResult {
  double pseudoeigenvalue = 0.0;
  int discarded_sv_count = 0;
  std::vector<double> singular_values;  ///< descending
};

/**
 * Lowest eigenvalue of S~^{-1} H with S~^{-1} = V Sigma_r^{-1} U^T, where the
 * `discard` smallest singular values are dropped. The nonzero spectrum of that
 * L x L product equals the spectrum of the r x r matrix
 * Sigma_r^{-1} U_r^T H V_r, which is what gets diagonalized.
 */
inline GevpResult regularized_gevp(const Eigen::MatrixXd& hbar, const Eigen::MatrixXd& sbar, int discard) {
  const auto L = static_cast<int>(sbar.rows());
  if (hbar.rows() != L || hbar.cols() != L || sbar.cols() != L) throw DimensionError("regularized_gevp: shape mismatch");
  if (discard < 0 || discard >= L) throw ArgumentError("regularized_gevp: discard must lie in [0, L)");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(sbar, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::VectorXd& sv = svd.singularValues();
  if (sv(0) < 1e-14) throw NumericalError("regularized_gevp: overlap matrix has no significant singular value");
  GevpResult r;
  r.discarded_sv_count = discard;
  r.singular_values.assign(sv.data(), sv.data() + sv.size());
  const int keep = L - discard;
  const Eigen::MatrixXd ur = svd.matrixU().leftCols(keep);
  const Eigen::MatrixXd vr = svd.matrixV().leftCols(keep);
  const Eigen::MatrixXd m = sv.head(keep).cwiseInverse().asDiagonal() * (ur.transpose() * hbar * vr);
  Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
  r.pseudoeigenvalue = es.eigenvalues().real().minCoeff();
  return r;
}

inline GevpResult regularized_gevp(const SampleTensors& t, int discard) {
  return regularized_gevp(t.mean_h(), t.mean_s(), discard);
}

// ---------------------------------------------------------------------------
// Landscape

struct LandscapeCell {
  double ci = 0.0, cj = 0.0;
  double value = std::numeric_limits<double>::quiet_NaN();
  double std_error = std::numeric_limits<double>::quiet_NaN();
  bool ok = false;
};

/// Ratio estimate on a 2-D slice that sets c_i and c_j on top of c_base.
/// Singular points are reported as missing cells.
inline std::vector<LandscapeCell> landscape_scan(const RatioModel& model, int i, int j, std::span<const double> grid_i,
                                                 std::span<const double> grid_j, std::span<const double> c_base) {
  const int L = model.L();
  if (i == j || i < 0 || j < 0 || i >= L || j >= L) throw ArgumentError("landscape_scan: need two distinct valid dims");
  if (static_cast<int>(c_base.size()) != L) throw DimensionError("landscape_scan: base length != L");
  std::vector<LandscapeCell> out;
  out.reserve(grid_i.size() * grid_j.size());
  std::vector<double> c(c_base.begin(), c_base.end());
  for (double a : grid_i) {
    for (double b : grid_j) {
      if (!std::isfinite(a) || !std::isfinite(b)) throw ArgumentError("landscape_scan: grid must be finite");
      c[static_cast<std::size_t>(i)] = a;
      c[static_cast<std::size_t>(j)] = b;
      LandscapeCell cell{a, b};
      try {
        const auto e = model(c);
        cell.value = e.value;
        cell.std_error = e.std_error;
        cell.ok = true;
      } catch (const NumericalError&) {
      }
      out.push_back(cell);
    }
  }
  return out;
}

}  // namespace icqse
