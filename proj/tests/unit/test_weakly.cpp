// Copyright 2026 The qphomog Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>

#include "qph/weakly_stochastic.hpp"

using namespace qph;

namespace
{

DefectModel small_model(int n1, int n2)
{
  MediumSpec s = default_medium_spec(MediumKind::BernoulliDefect);
  s.n1 = n1;
  s.n2 = n2;
  return defect_model_from_spec(s);
}

const DefectContributions &contributions_3x3()
{
  static const DefectContributions c = compute_contributions(small_model(3, 3));
  return c;
}

HomogenizedTensor fem_of(const DefectModel &m, const std::vector<int> &b)
{
  return apparent_homogenize_fem(m.grid, m.field(b)).K;
}

}  // namespace

TEST(WeaklyStochastic, FirstOrderExactForOneDefect)
{
  const DefectModel m = small_model(3, 3);
  const DefectContributions &c = contributions_3x3();
  std::vector<int> b(9, 0);
  EXPECT_LT((z1_eval(c, b) - fem_of(m, b)).norm(), 1e-7);
  b[4] = 1;
  EXPECT_LT((z1_eval(c, b) - fem_of(m, b)).norm(), 1e-7);
}

TEST(WeaklyStochastic, SecondOrderExactForTwoDefects)
{
  const DefectModel m = small_model(3, 3);
  const DefectContributions &c = contributions_3x3();
  for (auto [i, j] : {std::pair{0, 1}, std::pair{0, 4}, std::pair{2, 6}, std::pair{5, 7}})
  {
    std::vector<int> b(9, 0);
    b[static_cast<std::size_t>(i)] = b[static_cast<std::size_t>(j)] = 1;
    EXPECT_LT((z1_eval(c, b) + z2_eval(c, b) - fem_of(m, b)).norm(), 1e-7)
        << "cells " << i << " " << j;
  }
}

TEST(WeaklyStochastic, ComplementaryExactNearFullDefect)
{
  const DefectModel m = small_model(3, 3);
  const DefectContributions &c = contributions_3x3();
  ASSERT_TRUE(c.has_complementary);
  std::vector<int> b(9, 1);
  b[3] = 0;
  b[8] = 0;
  // the complementary expansion around the fully defective medium
  const HomogenizedTensor around_full = c.comp_periodic + 2.0 * c.comp_one + z2c_eval(c, b);
  EXPECT_LT((around_full - fem_of(m, b)).norm(), 1e-7);
}

TEST(WeaklyStochastic, ExpectationsMatchExactEnumeration)
{
  const DefectContributions c = compute_contributions(small_model(2, 2));
  for (double p : {0.1, 0.5})
  {
    HomogenizedTensor e1 = HomogenizedTensor::Zero(), e2 = e1, e2c = e1;
    for (int mask = 0; mask < 16; ++mask)
    {
      std::vector<int> b(4);
      int ones = 0;
      for (int k = 0; k < 4; ++k)
        ones += b[static_cast<std::size_t>(k)] = (mask >> k) & 1;
      const double w = std::pow(p, ones) * std::pow(1.0 - p, 4 - ones);
      e1 += w * z1_eval(c, b);
      e2 += w * z2_eval(c, b);
      e2c += w * z2c_eval(c, b);
    }
    EXPECT_LT((e1 - z1_expectation(c, p)).norm(), 1e-12 * e1.norm());
    EXPECT_LT((e2 - z2_expectation(c, p)).norm(), 1e-8);
    EXPECT_LT((e2c - z2c_expectation(c, p)).norm(), 1e-8);
  }
}

TEST(WeaklyStochastic, SymmetryReductionGivesSameContributions)
{
  const DefectModel m = small_model(3, 3);
  const DefectContributions &with = contributions_3x3();
  ContributionOptions o;
  o.use_symmetry = false;
  const DefectContributions without = compute_contributions(m, o);
  EXPECT_LT(with.solves, without.solves);
  ASSERT_EQ(with.ref_two.size(), without.ref_two.size());
  for (std::size_t d = 1; d < with.ref_two.size(); ++d)
  {
    EXPECT_LT((with.ref_two[d] - without.ref_two[d]).norm(), 1e-7) << "displacement " << d;
    EXPECT_LT((with.comp_two[d] - without.comp_two[d]).norm(), 1e-7) << "displacement " << d;
  }
  EXPECT_LT((with.ref_one - without.ref_one).norm(), 1e-12);
}

TEST(WeaklyStochastic, SymmetriesOfSquareCell)
{
  const auto sym = grid_symmetries(small_model(3, 3));
  EXPECT_EQ(sym.size(), 8u);
  const auto rect = grid_symmetries(small_model(3, 2));
  EXPECT_EQ(rect.size(), 4u);
  for (const GridSymmetry &g : sym)
  {
    const Eigen::Matrix2d S = g.matrix();
    EXPECT_LT((S * S.transpose() - Eigen::Matrix2d::Identity()).norm(), 1e-15);
  }
}

TEST(WeaklyStochastic, SaveLoadAndCache)
{
  const DefectModel m = small_model(2, 2);
  const auto dir = std::filesystem::temp_directory_path() / "qph_contrib_cache";
  std::filesystem::remove_all(dir);
  const DefectContributions a = cached_contributions(dir.string(), m);
  EXPECT_EQ(std::distance(std::filesystem::directory_iterator(dir), {}), 1);
  const DefectContributions b = cached_contributions(dir.string(), m);
  EXPECT_EQ(a.ref_periodic, b.ref_periodic);
  EXPECT_EQ(a.ref_one, b.ref_one);
  ASSERT_EQ(a.ref_two.size(), b.ref_two.size());
  for (std::size_t d = 1; d < a.ref_two.size(); ++d)
    EXPECT_EQ(a.ref_two[d], b.ref_two[d]);
  ContributionOptions o;
  o.penalty = 20.0;
  o.solver = DefectSolver::Mslrm;
  EXPECT_NE(contributions_key(m, o), contributions_key(m, {}));
  std::filesystem::remove_all(dir);
}

TEST(WeaklyStochastic, CoefficientsRecoverLinearModel)
{
  std::vector<double> q, z1, z2;
  for (int k = 0; k < 50; ++k)
  {
    const double a = std::sin(0.7 * k), b = std::cos(1.3 * k);
    z1.push_back(a);
    z2.push_back(b);
    q.push_back(3.0 + 0.5 * a - 2.0 * b);
  }
  const ControlCoefficients c = solve_control_coefficients(q, z1, z2, {});
  EXPECT_FALSE(c.fallback);
  EXPECT_NEAR(c.rho1, 0.5, 1e-10);
  EXPECT_NEAR(c.rho2, -2.0, 1e-10);
}

TEST(WeaklyStochastic, CoefficientsFallBackWhenSingular)
{
  std::vector<double> q, z1, z2;
  for (int k = 0; k < 20; ++k)
  {
    z1.push_back(k);
    z2.push_back(2.0 * k);
    q.push_back(1.5 * k + std::sin(k));
  }
  const ControlCoefficients c = solve_control_coefficients(q, z1, z2, {});
  EXPECT_TRUE(c.fallback);
  EXPECT_FALSE(c.warning.empty());
  EXPECT_EQ(c.rho2, 0.0);
}
