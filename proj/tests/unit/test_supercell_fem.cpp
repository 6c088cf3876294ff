// Copyright 2026 The qphomog Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "qph/homogenize.hpp"
#include "qph/supercell_fem.hpp"
#include "rectilinear_fem.hpp"

using namespace qph;

namespace
{

ElementConductivity inclusion_cell(const CellMesh &m, double k1, double k2)
{
  ElementConductivity k(static_cast<std::size_t>(m.element_count()), Sym2::iso(k1));
  for (int e = 0; e < m.element_count(); ++e)
  {
    const int ex = e % m.nx, ey = e / m.nx;
    if (ex >= m.nx / 4 && ex < 3 * m.nx / 4 && ey >= m.ny / 4 && ey < 3 * m.ny / 4)
    {
      k[static_cast<std::size_t>(e)] = Sym2::iso(k2);
    }
  }
  return k;
}

}  // namespace

TEST(SupercellFem, SingleCellEqualsPeriodicProblem)
{
  const CellMesh m = build_cell_mesh(8, 8);
  const ElementConductivity k = inclusion_cell(m, 1.0, 100.0);
  const MesoGrid g = build_meso_grid(1, 1, m);
  const HomogenizedTensor A = apparent_homogenize_fem(g, tile_periodic(g, k)).K;
  const HomogenizedTensor P = periodic_homogenize(m, k);
  EXPECT_LT((A - P).norm(), 1e-10 * P.norm());
}

TEST(SupercellFem, TiledPeriodicMediumReproducesCellTensor)
{
  const CellMesh m = build_cell_mesh(8, 8);
  const ElementConductivity k = inclusion_cell(m, 1.0, 100.0);
  const MesoGrid g = build_meso_grid(3, 2, m);
  const HomogenizedTensor A = apparent_homogenize_fem(g, tile_periodic(g, k)).K;
  const HomogenizedTensor P = periodic_homogenize(m, k);
  EXPECT_LT((A - P).norm(), 1e-8 * P.norm());
}

TEST(SupercellFem, RandomSupercellAgreesWithDenseOracle)
{
  const CellMesh m = build_cell_mesh(4, 3);
  const MesoGrid g = build_meso_grid(3, 2, m);
  ConductivityField K = make_conductivity(g);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(1.0, 30.0);
  for (auto &v : K.values)
  {
    v = Sym2::iso(u(rng));
  }
  const HomogenizedTensor A = apparent_homogenize_fem(g, K).K;
  // oracle works on the supercell element grid, row-major
  const CellMesh s = g.supercell_mesh();
  std::vector<double> k(static_cast<std::size_t>(s.element_count()));
  const ElementConductivity flat = to_supercell_elements(K);
  for (std::size_t e = 0; e < flat.size(); ++e)
  {
    k[e] = flat[e].xx;
  }
  const Eigen::Matrix2d ref = oracle::rectilinear_apparent_tensor(
      oracle::uniform_nodes(s.nx, s.lx), oracle::uniform_nodes(s.ny, s.ly), k);
  EXPECT_LT((A - ref).norm(), 1e-9 * ref.norm());
}

TEST(SupercellFem, SupercellElementOrderingRoundTrips)
{
  const CellMesh m = build_cell_mesh(3, 2);
  const MesoGrid g = build_meso_grid(2, 3, m);
  ConductivityField K = make_conductivity(g);
  for (int i = 0; i < g.cell_count(); ++i)
  {
    for (int e = 0; e < m.element_count(); ++e)
    {
      K.at(i, e) = Sym2::iso(100.0 * i + e + 1);
    }
  }
  const ElementConductivity flat = to_supercell_elements(K);
  for (std::size_t se = 0; se < flat.size(); ++se)
  {
    const auto [cell, elem] = supercell_element_origin(g, static_cast<int>(se));
    EXPECT_EQ(flat[se], K.at(cell, elem));
  }
}

TEST(SupercellFem, ApparentTensorIsSymmetric)
{
  const CellMesh m = build_cell_mesh(6, 6);
  const MesoGrid g = build_meso_grid(3, 3, m);
  ConductivityField K = make_conductivity(g);
  std::mt19937_64 rng(1);
  std::bernoulli_distribution b(0.4);
  const ElementConductivity inc = inclusion_cell(m, 1.0, 100.0);
  for (int i = 0; i < g.cell_count(); ++i)
  {
    const bool has = b(rng);
    for (int e = 0; e < m.element_count(); ++e)
    {
      K.at(i, e) = has ? inc[static_cast<std::size_t>(e)] : Sym2::iso(1.0);
    }
  }
  const HomogenizedTensor A = apparent_homogenize_fem(g, K).K;
  EXPECT_NEAR(A(0, 1), A(1, 0), 1e-10 * A.norm());
  const VoigtReuss vr = voigt_reuss_bounds(K);
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(A);
  EXPECT_GE(es.eigenvalues()[0], vr.lower * (1 - 1e-12));
  EXPECT_LE(es.eigenvalues()[1], vr.upper * (1 + 1e-12));
}
