// Copyright 2026 The qphomog Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "qph/swip.hpp"
#include "qph/tensor_space.hpp"

using namespace qph;

namespace
{

MesoGrid small_grid() { return build_meso_grid(3, 2, build_cell_mesh(3, 3)); }

ConductivityField random_field(const MesoGrid &g, std::uint64_t seed)
{
  ConductivityField K = make_conductivity(g);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(1.0, 20.0);
  for (auto &v : K.values)
  {
    v = Sym2::iso(u(rng));
  }
  return K;
}

}  // namespace

TEST(TensorSpace, UpsilonRoundTripIsBitExact)
{
  const MesoGrid g = small_grid();
  const Eigen::MatrixXd M = Eigen::MatrixXd::Random(g.cell_count(), g.cell.node_count());
  const TensorField t = upsilon_decompose(g, M);
  EXPECT_EQ(t.rank(), g.cell_count());
  EXPECT_TRUE(t.to_matrix() == M);
  for (int i = 0; i < g.cell_count(); ++i)
  {
    EXPECT_TRUE(t.evaluate_cell(i) == M.row(i).transpose());
  }
}

TEST(TensorSpace, ConductivityUpsilonRoundTripIsExact)
{
  const MesoGrid g = small_grid();
  const ConductivityField K = random_field(g, 3);
  const ConductivityField back = upsilon_conductivity(K).evaluate();
  EXPECT_EQ(back.values, K.values);
}

TEST(TensorSpace, RankAddsUnderSum)
{
  const MesoGrid g = small_grid();
  TensorField a = zero_tensor(g), b = zero_tensor(g);
  for (int r = 0; r < 2; ++r)
  {
    a.add_term(Eigen::VectorXd::Random(g.cell_count()), Eigen::VectorXd::Random(g.cell.node_count()));
  }
  b.add_term(Eigen::VectorXd::Random(g.cell_count()), Eigen::VectorXd::Random(g.cell.node_count()));
  const TensorField c = a + b;
  EXPECT_LE(c.rank(), a.rank() + b.rank());
  EXPECT_LT((c.to_matrix() - a.to_matrix() - b.to_matrix()).norm(), 1e-14);
}

TEST(TensorSpace, SvdTruncationRespectsTolerance)
{
  const MesoGrid g = small_grid();
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(g.cell_count(), g.cell.node_count());
  for (int r = 0; r < 3; ++r)
  {
    M += std::pow(10.0, -3.0 * r) * Eigen::VectorXd::Random(g.cell_count()) *
         Eigen::RowVectorXd::Random(g.cell.node_count());
  }
  const TensorField full = matrix_to_tensor(g, M, 1e-14);
  EXPECT_EQ(full.rank(), 3);
  const TensorField cut = svd_truncate(full, 1e-2);
  EXPECT_LE(cut.rank(), 2);
  EXPECT_LE((cut.to_matrix() - M).norm(), 1e-2 * M.norm());
}

TEST(TensorSpace, PeriodicConductivityIsRankOne)
{
  const MesoGrid g = small_grid();
  ElementConductivity k(static_cast<std::size_t>(g.cell.element_count()), Sym2::iso(2.0));
  k[4] = Sym2::iso(7.0);
  const LowRankConductivity K = periodic_conductivity(g, k);
  EXPECT_EQ(K.rank(), 1);
  for (int i = 0; i < g.cell_count(); ++i)
  {
    EXPECT_EQ(K.at(i, 4), Sym2::iso(7.0));
    EXPECT_EQ(K.at(i, 0), Sym2::iso(2.0));
  }
}

TEST(Swip, OperatorIsSymmetricPositiveSemidefinite)
{
  const MesoGrid g = small_grid();
  const SwipOperator op = assemble_swip(g, upsilon_conductivity(random_field(g, 5)));
  for (int t = 0; t < 5; ++t)
  {
    const Eigen::MatrixXd U = Eigen::MatrixXd::Random(g.cell_count(), g.cell.node_count());
    const Eigen::MatrixXd V = Eigen::MatrixXd::Random(g.cell_count(), g.cell.node_count());
    EXPECT_NEAR(op.bilinear(U, V), op.bilinear(V, U), 1e-10 * std::abs(op.bilinear(U, U)));
    EXPECT_GE(op.bilinear(U, U), -1e-12 * U.squaredNorm());
  }
  const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(g.cell_count(), g.cell.node_count());
  EXPECT_LT(op.apply(ones).norm(), 1e-10);
}

TEST(Swip, ContinuousFieldsSeeTheConformingStiffness)
{
  const MesoGrid g = small_grid();
  const ConductivityField K = random_field(g, 8);
  const SwipOperator op = assemble_swip(g, upsilon_conductivity(K));
  // conforming periodic supercell stiffness, folded by hand
  const CellMesh s = g.supercell_mesh();
  const SparseMatrix A = assemble_cell_stiffness(s, to_supercell_elements(K));
  const int NX = s.nx, NY = s.ny;
  auto pid = [&](int X, int Y) { return (Y % NY) * NX + (X % NX); };
  Eigen::VectorXd u = Eigen::VectorXd::Random(NX * NY);
  Eigen::VectorXd full(s.node_count());
  for (int Y = 0; Y <= NY; ++Y)
  {
    for (int X = 0; X <= NX; ++X)
    {
      full[s.node(X, Y)] = u[pid(X, Y)];
    }
  }
  const Eigen::VectorXd af = A * full;
  Eigen::VectorXd conf = Eigen::VectorXd::Zero(NX * NY);
  for (int Y = 0; Y <= NY; ++Y)
  {
    for (int X = 0; X <= NX; ++X)
    {
      conf[pid(X, Y)] += af[s.node(X, Y)];
    }
  }
  // the same field in per-cell storage
  const CellMesh &c = g.cell;
  Eigen::MatrixXd W(g.cell_count(), c.node_count());
  for (int i = 0; i < g.cell_count(); ++i)
  {
    for (int iy = 0; iy <= c.ny; ++iy)
    {
      for (int ix = 0; ix <= c.nx; ++ix)
      {
        W(i, c.node(ix, iy)) = u[pid(g.c1(i) * c.nx + ix, g.c2(i) * c.ny + iy)];
      }
    }
  }
  const Eigen::MatrixXd R = op.apply(W);
  Eigen::VectorXd dg = Eigen::VectorXd::Zero(NX * NY);
  for (int i = 0; i < g.cell_count(); ++i)
  {
    for (int iy = 0; iy <= c.ny; ++iy)
    {
      for (int ix = 0; ix <= c.nx; ++ix)
      {
        dg[pid(g.c1(i) * c.nx + ix, g.c2(i) * c.ny + iy)] += R(i, c.node(ix, iy));
      }
    }
  }
  EXPECT_LT((dg - conf).norm(), 1e-10 * conf.norm());
}

TEST(Swip, HomogeneousMediumHasZeroRightHandSide)
{
  const MesoGrid g = small_grid();
  ElementConductivity k(static_cast<std::size_t>(g.cell.element_count()), Sym2::iso(3.0));
  const TensorField F = assemble_rhs(g, periodic_conductivity(g, k), Axis::X);
  EXPECT_LT(F.to_matrix().norm(), 1e-12);
}

TEST(Swip, RightHandSideIsLinearInConductivity)
{
  const MesoGrid g = small_grid();
  const ConductivityField K = random_field(g, 2);
  ConductivityField K3 = K;
  for (auto &v : K3.values)
  {
    v = 3.0 * v;
  }
  const Eigen::MatrixXd a = assemble_rhs(g, upsilon_conductivity(K), Axis::Y).to_matrix();
  const Eigen::MatrixXd b = assemble_rhs(g, upsilon_conductivity(K3), Axis::Y).to_matrix();
  EXPECT_LT((b - 3.0 * a).norm(), 1e-12 * b.norm());
}

TEST(Swip, ResidualNormConventions)
{
  const MesoGrid g = small_grid();
  const SwipOperator op = assemble_swip(g, upsilon_conductivity(random_field(g, 4)));
  const Eigen::MatrixXd F = Eigen::MatrixXd::Random(g.cell_count(), g.cell.node_count());
  const Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(g.cell_count(), g.cell.node_count());
  EXPECT_DOUBLE_EQ(residual_norm(op, F, Z), 1.0);
  EXPECT_EQ(residual_norm(op, Z, Z), 0.0);
  EXPECT_TRUE(std::isinf(residual_norm(op, Z, F)));
}
