// Copyright 2026 The qphomog Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "qph/homogenize.hpp"
#include "rectilinear_fem.hpp"

using namespace qph;

namespace
{

// Physical mesh of the stretched fibre medium, built by hand: each reference
// cell has 4 matrix elements, 2 fibre elements and 4 matrix elements across.
Eigen::Matrix2d physical_reference(const MediumSpec &s, const std::vector<double> &gaps)
{
  std::vector<double> x{0.0};
  for (int c = 0; c < s.n1; ++c)
  {
    const double left = 0.5 * gaps[c] / 4.0, right = 0.5 * gaps[c + 1] / 4.0;
    for (int e = 0; e < 4; ++e)
      x.push_back(x.back() + left);
    for (int e = 0; e < 2; ++e)
      x.push_back(x.back() + 0.1);
    for (int e = 0; e < 4; ++e)
      x.push_back(x.back() + right);
  }
  const std::vector<double> y = oracle::uniform_nodes(s.micro_ny * s.n2, s.cell_ly * s.n2);
  std::vector<double> k;
  for (int ey = 0; ey < s.micro_ny * s.n2; ++ey)
    for (int c = 0; c < s.n1; ++c)
      for (int ex = 0; ex < 10; ++ex)
        k.push_back(ex == 4 || ex == 5 ? s.k2 : s.k1);
  return oracle::rectilinear_apparent_tensor(x, y, k);
}

}  // namespace

TEST(Homogenize, MappedFemMatchesPhysicalMesh)
{
  const MediumSpec s = default_medium_spec(MediumKind::MappedFibres);
  const std::vector<double> gaps{0.3, 1.7, 0.9, 0.5, 1.2, 0.3};
  const MappedSample m = mapped_fibres_from_gaps(s, gaps);
  const HomogenizationResult r =
      apparent_homogenize_mapped(m.K_tilde, m.mapping, MappedSolver::Fem);
  const Eigen::Matrix2d ref = physical_reference(s, gaps);
  EXPECT_LT((r.K - ref).norm() / ref.norm(), 1e-8);
}

TEST(Homogenize, MappedFemMatchesPhysicalMeshForSampledGaps)
{
  const MediumSpec s = default_medium_spec(MediumKind::MappedFibres);
  for (std::uint64_t seed : {3u, 11u})
  {
    const MappedSample m = sample_mapped_fibres(s, seed);
    const HomogenizationResult r =
        apparent_homogenize_mapped(m.K_tilde, m.mapping, MappedSolver::Fem);
    const Eigen::Matrix2d ref = physical_reference(s, m.mapping.gaps);
    EXPECT_LT((r.K - ref).norm() / ref.norm(), 1e-8) << "seed " << seed;
  }
}

TEST(Homogenize, MappedMslrmTracksMappedFem)
{
  const MediumSpec s = default_medium_spec(MediumKind::MappedFibres);
  const MappedSample m = sample_mapped_fibres(s, 5);
  EXPECT_EQ(m.K_tilde.rank(), 3);
  const HomogenizationResult fem =
      apparent_homogenize_mapped(m.K_tilde, m.mapping, MappedSolver::Fem);
  ModesLibrary lib(m.K_tilde.grid.cell);
  MslrmOptions o;
  o.epsilon = 1e-6;
  const HomogenizationResult lr =
      apparent_homogenize_mapped(m.K_tilde, m.mapping, MappedSolver::Mslrm, &lib, o);
  EXPECT_LT((lr.K - fem.K).norm() / fem.K.norm(), 1e-4);
}

TEST(Homogenize, LowRankAndDenseFemAgree)
{
  MediumSpec s = default_medium_spec(MediumKind::BernoulliDefect);
  s.n1 = 3;
  s.n2 = 3;
  s.p = 0.5;
  const Medium m = sample_medium(s, 21);
  const HomogenizationResult a = apparent_homogenize_fem(*m.low_rank);
  const HomogenizationResult b = apparent_homogenize_fem(m.grid, m.dense);
  EXPECT_LT((a.K - b.K).norm(), 1e-10 * a.K.norm());
}

TEST(Homogenize, BernoulliMslrmTracksFem)
{
  MediumSpec s = default_medium_spec(MediumKind::BernoulliDefect);
  s.n1 = 3;
  s.n2 = 3;
  s.p = 0.5;
  const Medium m = sample_medium(s, 8);
  const HomogenizationResult fem = apparent_homogenize_fem(*m.low_rank);
  ModesLibrary lib(m.grid.cell);
  MslrmOptions o;
  o.epsilon = 1e-6;
  const HomogenizationResult lr = apparent_homogenize_mslrm(*m.low_rank, lib, o);
  EXPECT_LT((lr.K - fem.K).norm() / fem.K.norm(), 1e-4);
}

TEST(Homogenize, TensorWithinVoigtReussBounds)
{
  for (MediumKind kind : {MediumKind::BernoulliDefect, MediumKind::RegularPeaks})
  {
    MediumSpec s = default_medium_spec(kind);
    s.n1 = 3;
    s.n2 = 3;
    s.p = 0.5;
    const Medium m = sample_medium(s, 2);
    const HomogenizationResult r = apparent_homogenize_fem(m.grid, m.dense);
    const VoigtReuss vr = voigt_reuss_bounds(m.dense);
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(r.K);
    EXPECT_LE(es.eigenvalues()[1], vr.upper * (1 + 1e-10));
    EXPECT_GE(es.eigenvalues()[0], vr.lower * (1 - 1e-10));
    EXPECT_NEAR(r.K(0, 1), r.K(1, 0), 1e-10 * r.K.norm());
  }
}
