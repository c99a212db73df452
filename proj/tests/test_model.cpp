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

#include "icqse/model.hpp"

using namespace icqse;

TEST(Model, TrajectoryCouplings) {
  const auto p = ModelParams::from_g(8, -0.5);
  EXPECT_DOUBLE_EQ(p.g_zz, 1.5);
  EXPECT_DOUBLE_EQ(p.g_x, 0.25);
  EXPECT_DOUBLE_EQ(p.g_zxz, 2.25);
  EXPECT_THROW(ModelParams::from_g(8, 1.5), ArgumentError);
}

TEST(Model, HamiltonianShape) {
  for (int n : {3, 6, 11}) {
    const auto h = build_hamiltonian(ModelParams::from_g(n, 0.2));
    EXPECT_EQ(h.size(), static_cast<std::size_t>(3 * n));
    EXPECT_TRUE(h.hermitian());
    EXPECT_EQ(h.max_weight(), 3);
  }
  const auto obc = build_hamiltonian(ModelParams::from_g(6, 0.2, false));
  EXPECT_EQ(obc.size(), static_cast<std::size_t>(5 + 6 + 4));
}

TEST(Model, StatevectorMatchesDense) {
  const int n = 5;
  const auto h = build_hamiltonian(ModelParams::from_g(n, 0.4));
  Rng rng(11);
  std::vector<cplx> amps(1u << n);
  for (auto& a : amps) a = cplx(rng.uniform() - 0.5, rng.uniform() - 0.5);
  double nrm = 0;
  for (const auto& a : amps) nrm += std::norm(a);
  for (auto& a : amps) a /= std::sqrt(nrm);
  Statevector s(n, amps);
  Eigen::VectorXcd v(1 << n);
  for (int i = 0; i < (1 << n); ++i) v[i] = s.amplitudes()[i];
  const cplx want = v.dot(dense(h) * v);
  EXPECT_NEAR(std::abs(expectation(s, h) - want), 0.0, 1e-10);
}

TEST(Model, DenseEdMatchesEigen) {
  const int n = 6;
  const auto h = build_hamiltonian(ModelParams::from_g(n, 0.7));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(dense(h));
  const auto sp = exact_diag(h, 4);
  ASSERT_EQ(sp.eigenvalues.size(), 4u);
  EXPECT_NEAR(sp.eigenvalues[0], es.eigenvalues()[0], 1e-9);
  EXPECT_NEAR(expectation(sp.ground_state(), h).real(), sp.eigenvalues[0], 1e-8);
}

TEST(Model, GroundEnergyOnTrajectory) {
  for (int n : {6, 8})
    for (double g : {-0.9, -0.5, 0.0, 0.5, 0.9})
      EXPECT_NEAR(exact_diag(ModelParams::from_g(n, g), 1).energy_density, exact_gs_density(g), 1e-9) << n << " " << g;
}

TEST(Model, LanczosAgreesWithDense) {
  const auto h = build_hamiltonian(ModelParams::from_g(10, 0.3));
  const auto dense_sp = detail::dense_spectrum(h, 1);
  const auto lz = detail::lanczos_spectrum(h, 1, {});
  EXPECT_NEAR(dense_sp.eigenvalues[0], lz.eigenvalues[0], 1e-8);
  EXPECT_EQ(lz.method, "lanczos");
  const auto big = exact_diag(ModelParams::from_g(11, -0.5), 1);
  EXPECT_EQ(big.method, "lanczos");
  EXPECT_NEAR(big.energy_density, exact_gs_density(-0.5), 1e-8);
}

TEST(Model, OrderParametersAtFixedPoints) {
  const int n = 8;
  const auto ops = order_parameter_ops(n);
  EXPECT_TRUE(ops.sx.hermitian());
  // g = 1: pure transverse field, product state |+>.
  const auto plus = exact_diag(ModelParams::from_g(n, 1.0), 1).ground_state();
  EXPECT_NEAR(expectation(plus, ops.sx).real(), 1.0, 1e-8);
  // g = -1: cluster state.
  const auto cluster = exact_diag(ModelParams::from_g(n, -1.0), 1).ground_state();
  EXPECT_NEAR(expectation(cluster, ops.szy).real(), 1.0, 1e-8);
  EXPECT_NEAR(sx_theory(1.0), 1.0, 1e-15);
  EXPECT_NEAR(szy_theory(-1.0), 1.0, 1e-15);
  EXPECT_THROW(order_parameter_ops(4), ArgumentError);
}

TEST(Model, CapEnforced) {
  EXPECT_THROW(exact_diag(ModelParams::from_g(15, 0.0), 1), ResourceError);
}
