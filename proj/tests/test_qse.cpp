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

#include <Eigen/Eigenvalues>

#include "icqse/qse.hpp"

using namespace icqse;

namespace {

Statevector random_state(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<cplx> a(std::size_t{1} << n);
  double nrm = 0;
  for (auto& x : a) {
    x = cplx(rng.uniform() - 0.5, rng.uniform() - 0.5);
    nrm += std::norm(x);
  }
  for (auto& x : a) x /= std::sqrt(nrm);
  return Statevector(n, a);
}

// Table whose configurations all carry the exact expectation values, so the
// sample means are the exact subspace matrices and every variance is zero.
PauliEvalTable exact_table(const Statevector& st, const std::vector<PauliKey>& keys, std::uint32_t copies = 2) {
  const int n = st.n_qubits();
  std::vector<double> m(std::size_t{copies} * keys.size());
  for (std::size_t p = 0; p < keys.size(); ++p) {
    const double v = expectation(st, PauliSum(PauliString(n, keys[p]))).real();
    for (std::uint32_t k = 0; k < copies; ++k) m[k * keys.size() + p] = v;
  }
  return PauliEvalTable::from_dense(n, copies, keys, m, 0);
}

SampleTensors exact_tensors(const Statevector& st, const SubspaceSpec& spec, const PauliSum& op) {
  const auto e = expand_subspace(spec, op);
  return assemble_tensors(exact_table(st, e.paulis), e, 1);
}

SubspaceSpec mixed_spec(int n, const PauliSum& h) {
  SubspaceSpec s = SubspaceSpec::krylov(h);
  s.operators.emplace_back(PauliString::from_letters(n, {{0, Letter::X}, {1, Letter::Z}}));
  s.operators.emplace_back(PauliString::single(n, 2, Letter::Y));
  s.label = "mixed";
  return s;
}

ShadowDataset noisy_dataset(int n, double g, std::uint32_t nc, std::uint16_t ns, std::uint64_t seed) {
  RootSpec rs{ModelParams::from_g(n, g), 0.15, NoiseSpec{0.15, 0.0}};
  return sample_shadows(prepare_root(rs), rs.noise, nc, ns, seed, 1);
}

}  // namespace

// --- COBYLA ----------------------------------------------------------------

TEST(Cobyla, UnconstrainedQuadratic) {
  auto f = [](std::span<const double> x, std::span<double>) {
    return 10 * (x[0] + 1) * (x[0] + 1) + x[1] * x[1];
  };
  const auto r = cobyla_minimize(f, {0.0, 0.0}, 0, {});
  EXPECT_NEAR(r.x[0], -1.0, 1e-4);
  EXPECT_NEAR(r.x[1], 0.0, 1e-4);
  EXPECT_EQ(r.status, CobylaStatus::Converged);
}

TEST(Cobyla, LinearObjectiveOnDisc) {
  // min x + y subject to 1 - x^2 - y^2 >= 0.
  auto f = [](std::span<const double> x, std::span<double> con) {
    con[0] = 1 - x[0] * x[0] - x[1] * x[1];
    return x[0] + x[1];
  };
  const auto r = cobyla_minimize(f, {1.0, 1.0}, 1, {});
  EXPECT_NEAR(r.x[0], -std::sqrt(0.5), 1e-5);
  EXPECT_NEAR(r.x[1], -std::sqrt(0.5), 1e-5);
  EXPECT_LE(r.max_violation, 1e-6);
}

TEST(Cobyla, BilinearOnDisc) {
  // min x y subject to 1 - x^2 - y^2 >= 0; optimum -1/2.
  auto f = [](std::span<const double> x, std::span<double> con) {
    con[0] = 1 - x[0] * x[0] - x[1] * x[1];
    return x[0] * x[1];
  };
  const auto r = cobyla_minimize(f, {1.0, 1.0}, 1, {0.5, 1e-8, 2000});
  EXPECT_NEAR(r.f, -0.5, 1e-6);
  EXPECT_NEAR(std::abs(r.x[0]), std::sqrt(0.5), 1e-4);
}

TEST(Cobyla, RosenbrockUnconstrained) {
  auto f = [](std::span<const double> x, std::span<double>) {
    return 10 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1 - x[0], 2);
  };
  const auto r = cobyla_minimize(f, {-1.2, 1.0}, 0, {0.5, 1e-8, 5000});
  EXPECT_NEAR(r.x[0], 1.0, 1e-3);
  EXPECT_NEAR(r.x[1], 1.0, 2e-3);
}

TEST(Cobyla, EvalCapReported) {
  auto f = [](std::span<const double> x, std::span<double>) { return std::pow(x[0] - 3, 2) + std::pow(x[1] + 2, 2); };
  const auto r = cobyla_minimize(f, {0.0, 0.0}, 0, {0.5, 1e-10, 10});
  EXPECT_EQ(r.status, CobylaStatus::MaxEvals);
  EXPECT_LE(r.evaluations, 10);
}

// --- Subspace expansion ----------------------------------------------------

TEST(Qse, PairIndexIsBijective) {
  for (int L : {1, 2, 5, 9}) {
    std::vector<int> seen(pair_count(L), 0);
    for (int i = 0; i < L; ++i)
      for (int j = i; j < L; ++j) ++seen[pair_index(i, j, L)];
    for (int s : seen) EXPECT_EQ(s, 1);
  }
}

TEST(Qse, ExpansionMatchesDenseMatrices) {
  const int n = 4;
  const auto h = build_hamiltonian(ModelParams::from_g(n, -0.5));
  const auto spec = mixed_spec(n, h);
  const auto st = random_state(n, 12);
  const auto t = exact_tensors(st, spec, h);
  Eigen::VectorXcd psi(st.dim());
  for (std::size_t i = 0; i < st.dim(); ++i) psi[static_cast<Eigen::Index>(i)] = st.amplitudes()[i];
  const Eigen::MatrixXcd H = dense(h);
  const Eigen::MatrixXd hbar = t.mean_h(), sbar = t.mean_s();
  for (int i = 0; i < spec.size(); ++i)
    for (int j = 0; j < spec.size(); ++j) {
      const Eigen::MatrixXcd si = dense(spec.operators[i]), sj = dense(spec.operators[j]);
      const cplx hij = psi.dot(si.adjoint() * H * sj * psi);
      const cplx sij = psi.dot(si.adjoint() * sj * psi);
      EXPECT_NEAR(hbar(i, j), hij.real(), 1e-10) << i << "," << j;
      EXPECT_NEAR(sbar(i, j), sij.real(), 1e-10) << i << "," << j;
    }
}

TEST(Qse, RatioAtExactTensorsIsRayleighQuotient) {
  const int n = 4;
  const auto h = build_hamiltonian(ModelParams::from_g(n, 0.3));
  const auto st = random_state(n, 2);
  const auto t = exact_tensors(st, SubspaceSpec::krylov(h), h);
  const std::vector<double> c{0.7, -0.2};
  Eigen::VectorXcd psi(st.dim());
  for (std::size_t i = 0; i < st.dim(); ++i) psi[static_cast<Eigen::Index>(i)] = st.amplitudes()[i];
  const Eigen::MatrixXcd W = c[0] * Eigen::MatrixXcd::Identity(16, 16) + c[1] * dense(h);
  const Eigen::VectorXcd phi = W * psi;
  const double want = phi.dot(dense(h) * phi).real() / phi.squaredNorm();
  const auto e = ratio_estimate(t, c);
  EXPECT_NEAR(e.value, want, 1e-10);
  EXPECT_NEAR(e.std_error, 0.0, 1e-12);
}

// --- Ratio estimator -------------------------------------------------------

class RatioFixture : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    const int n = 6;
    h_ = new PauliSum(build_hamiltonian(ModelParams::from_g(n, -0.5)));
    const auto d = noisy_dataset(n, -0.5, 3000, 4, 21);
    const auto e = expand_subspace(mixed_spec(n, *h_), *h_);
    t_ = new SampleTensors(assemble_tensors(evaluate_paulis(d, e.paulis, 1), e, 1));
  }
  static void TearDownTestSuite() {
    delete h_;
    delete t_;
  }
  static PauliSum* h_;
  static SampleTensors* t_;
};
PauliSum* RatioFixture::h_ = nullptr;
SampleTensors* RatioFixture::t_ = nullptr;

TEST_F(RatioFixture, MatchesDirectDeltaMethod) {
  const std::vector<double> c{1.0, 0.05, -0.3, 0.2};
  // Independent restatement: per-configuration quadratic forms.
  const int L = t_->L;
  std::vector<double> x(t_->n_configs), y(t_->n_configs);
  for (std::uint32_t k = 0; k < t_->n_configs; ++k) {
    double xs = 0, ys = 0;
    for (int i = 0; i < L; ++i)
      for (int j = 0; j < L; ++j) {
        xs += c[i] * c[j] * t_->h(k, std::min(i, j), std::max(i, j));
        ys += c[i] * c[j] * t_->s(k, std::min(i, j), std::max(i, j));
      }
    x[k] = xs;
    y[k] = ys;
  }
  const double n = t_->n_configs;
  double mx = 0, my = 0;
  for (std::uint32_t k = 0; k < n; ++k) mx += x[k] / n, my += y[k] / n;
  double vx = 0, vy = 0, cv = 0;
  for (std::uint32_t k = 0; k < n; ++k) {
    vx += (x[k] - mx) * (x[k] - mx) / (n - 1);
    vy += (y[k] - my) * (y[k] - my) / (n - 1);
    cv += (x[k] - mx) * (y[k] - my) / (n - 1);
  }
  const double r = mx / my;
  const double se = std::sqrt((vx - 2 * r * cv + r * r * vy) / (my * my) / n);
  const auto e = ratio_estimate(*t_, c);
  EXPECT_NEAR(e.value, r, 1e-10 * std::abs(r));
  EXPECT_NEAR(e.std_error, se, 1e-10 * se);

  // Dropping the covariance term changes the answer materially.
  const double se_nocov = std::sqrt((vx + r * r * vy) / (my * my) / n);
  EXPECT_GT(std::abs(se_nocov - se) / se, 0.05);
}

TEST_F(RatioFixture, ScaleInvariance) {
  const std::vector<double> c{1.0, 0.05, -0.3, 0.2};
  const auto a = ratio_estimate(*t_, c);
  for (double s : {-2.0, 0.01, 37.0}) {
    std::vector<double> cs;
    for (double v : c) cs.push_back(s * v);
    const auto b = ratio_estimate(*t_, cs);
    EXPECT_NEAR(b.value, a.value, 1e-11 * std::abs(a.value));
    EXPECT_NEAR(b.std_error, a.std_error, 1e-9 * a.std_error);
  }
}

TEST_F(RatioFixture, CollapseToSemAtE1) {
  const std::vector<double> e1{1, 0, 0, 0};
  const auto e = ratio_estimate(*t_, e1);
  std::vector<double> x(t_->n_configs);
  for (std::uint32_t k = 0; k < t_->n_configs; ++k) x[k] = t_->h(k, 0, 0);
  const auto sem = mean_and_sem(x);
  EXPECT_NEAR(e.value, sem.value, 1e-12);
  EXPECT_NEAR(e.std_error, sem.std_error, 1e-12);
}

TEST_F(RatioFixture, ModelAgreesWithDirect) {
  const RatioModel m(*t_);
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> c{1.0};
    for (int i = 1; i < t_->L; ++i) c.push_back(0.4 * (rng.uniform() - 0.5));
    const auto a = ratio_estimate(*t_, c), b = m(c);
    EXPECT_NEAR(a.value, b.value, 1e-9 * std::abs(a.value));
    EXPECT_NEAR(a.std_error, b.std_error, 1e-7 * a.std_error);
  }
}

TEST_F(RatioFixture, SingularNormalizationThrows) {
  EXPECT_THROW(ratio_estimate(*t_, std::vector<double>{0, 0, 0, 0}), NumericalError);
  EXPECT_THROW(ratio_estimate(*t_, std::vector<double>{1, 0}), DimensionError);
}

TEST_F(RatioFixture, ConstrainedMinimizeRespectsBudget) {
  const RatioModel m(*t_);
  const auto un = m(std::vector<double>{1, 0, 0, 0});
  const double eps = 1.5 * un.std_error;
  const auto r = constrained_minimize(m, eps);
  EXPECT_TRUE(r.energy.feasible);
  EXPECT_LE(r.energy.std_error, eps * (1 + kFeasibilitySlack));
  EXPECT_LE(r.energy.value, un.value);
  const auto again = m(r.c_opt);
  EXPECT_DOUBLE_EQ(again.value, r.energy.value);

  // Budget below the unmitigated error: the start point is infeasible.
  const auto bad = constrained_minimize(m, 0.5 * un.std_error);
  EXPECT_FALSE(bad.energy.feasible);
}

TEST_F(RatioFixture, WarmStartsNeverHurt) {
  const RatioModel m(*t_);
  const double base = std::abs(m(std::vector<double>{1, 0, 0, 0}).value);
  std::vector<double> prev;
  double last = std::numeric_limits<double>::infinity();
  for (double r : {0.002, 0.005, 0.01, 0.02}) {
    SolveOptions so;
    if (!prev.empty()) so.warm_starts = {prev};
    const auto s = constrained_minimize(m, r * base, so);
    EXPECT_LE(s.energy.value, last + 1e-12);
    last = s.energy.value;
    prev = s.c_opt;
  }
}

// --- GEVP ------------------------------------------------------------------

TEST(Gevp, MatchesGeneralizedEigenSolver) {
  const int n = 4;
  const auto h = build_hamiltonian(ModelParams::from_g(n, -0.5));
  const auto t = exact_tensors(random_state(n, 8), mixed_spec(n, h), h);
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(t.mean_h(), t.mean_s());
  const auto r = regularized_gevp(t, 0);
  EXPECT_NEAR(r.pseudoeigenvalue, ges.eigenvalues()(0), 1e-8);
  EXPECT_TRUE(std::is_sorted(r.singular_values.rbegin(), r.singular_values.rend()));
  EXPECT_THROW(regularized_gevp(t, t.L), ArgumentError);
}

TEST(Gevp, OptimizerAgreesOnExactTensors) {
  // With zero variance every point is feasible, so the constrained minimum is
  // the generalized Rayleigh-quotient minimum.
  const int n = 4;
  const auto h = build_hamiltonian(ModelParams::from_g(n, 0.5));
  const auto t = exact_tensors(random_state(n, 3), mixed_spec(n, h), h);
  const auto g = regularized_gevp(t, 0);
  const auto r = constrained_minimize(RatioModel(t), 1.0, {CobylaOptions{0.5, 1e-9, 5000}});
  EXPECT_NEAR(r.energy.value, g.pseudoeigenvalue, 1e-6);
}

TEST(Gevp, DiscardingAllButOneGivesProjection) {
  const Eigen::MatrixXd S = Eigen::Vector3d(4.0, 1.0, 1e-9).asDiagonal();
  const Eigen::MatrixXd H = Eigen::Vector3d(-2.0, -3.0, -50.0).asDiagonal();
  EXPECT_NEAR(regularized_gevp(H, S, 0).pseudoeigenvalue, -5e10, 1e3);
  EXPECT_NEAR(regularized_gevp(H, S, 1).pseudoeigenvalue, -3.0, 1e-12);
  EXPECT_NEAR(regularized_gevp(H, S, 2).pseudoeigenvalue, -0.5, 1e-12);
}

// --- Budget table and selection --------------------------------------------

TEST(Qse, DefaultEpsRatio) {
  EXPECT_DOUBLE_EQ(default_eps_ratio(6), 0.05);
  EXPECT_DOUBLE_EQ(default_eps_ratio(16), 0.05);
  EXPECT_DOUBLE_EQ(default_eps_ratio(24), 0.0625);
  EXPECT_DOUBLE_EQ(default_eps_ratio(80), 0.15);
  EXPECT_DOUBLE_EQ(default_eps_ratio(120), 0.15);
}

TEST(Selection, DeterministicAndWellFormed) {
  const int n = 6;
  const auto h = build_hamiltonian(ModelParams::from_g(n, -0.5));
  const auto d = noisy_dataset(n, -0.5, 2000, 4, 5);
  SelectionOptions o;
  o.pools = {{1, 20}, {2, 20}, {3, 20}};
  o.top_k = 2;
  o.threads = 1;
  const auto a = select_paulis(d, h, o);
  o.threads = 4;
  const auto b = select_paulis(d, h, o);
  EXPECT_EQ(a.selected, b.selected);
  EXPECT_EQ(a.trace_counter, b.trace_counter);
  EXPECT_EQ(a.spec.label, "krylov+");
  EXPECT_TRUE(a.spec.operators[0].is_identity());
  EXPECT_TRUE(a.spec.operators[1].approx_equal(h));
  EXPECT_LE(a.selected.size(), 6u);
  for (const auto& cs : a.candidates) {
    const bool chosen = std::find(a.selected.begin(), a.selected.end(), cs.key) != a.selected.end();
    if (chosen) EXPECT_GT(cs.score, 0.0);
  }
  o.seed = 2;
  EXPECT_NE(draw_pools(n, o), draw_pools(n, SelectionOptions{o.pools, o.top_k, 1}));
  o.pools = {{7, 5}};
  EXPECT_THROW(select_paulis(d, h, o), ArgumentError);
}
