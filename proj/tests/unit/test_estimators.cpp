// Copyright 2026 The qphomog Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "qph/estimators.hpp"
#include "qph/seeding.hpp"

using namespace qph;

namespace
{

// Correlated Gaussians from one seed: x ~ N(0,1), q = 2 + x + s e, z_j = x + t_j e_j.
struct Synthetic
{
  double noise_q = 0.2;
  std::vector<double> noise{0.3, 1.0};

  double q(std::uint64_t seed) const
  {
    Rng g(seed);
    std::normal_distribution<double> n;
    const double x = n(g), e = n(g);
    return 2.0 + x + noise_q * e;
  }
  double z(std::size_t j, std::uint64_t seed) const
  {
    Rng g(seed);
    std::normal_distribution<double> n;
    const double x = n(g);
    n(g);
    double e = 0.0;
    for (std::size_t k = 0; k <= j; ++k)
      e = n(g);
    return x + noise[j] * e;
  }
  double var_q() const { return 1.0 + noise_q * noise_q; }
  double var_z(std::size_t j) const { return 1.0 + noise[j] * noise[j]; }
  double r(std::size_t j) const { return 1.0 / std::sqrt(var_q() * var_z(j)); }
};

// MFMC variance with real-valued sample counts.
double mfmc_variance_real(const std::vector<double> &m, const std::vector<double> &rho,
                          const std::vector<double> &var, const std::vector<double> &r)
{
  double e = var[0] / m[0];
  for (std::size_t j = 1; j < m.size(); ++j)
    e += (1.0 / m[j - 1] - 1.0 / m[j]) *
         (rho[j] * rho[j] * var[j] - 2.0 * rho[j] * r[j] * std::sqrt(var[0] * var[j]));
  return e;
}

}  // namespace

TEST(Estimators, PairwiseSumIsAccurate)
{
  std::vector<double> v(1 << 20, 0.1);
  long double ref = 0.0L;
  for (double x : v)
    ref += x;
  EXPECT_NEAR(pairwise_sum(v), static_cast<double>(ref), 1e-9);
}

TEST(Estimators, UnbiasedMoments)
{
  const std::vector<double> a{1.0, 2.0, 3.0, 4.0}, b{2.0, 1.0, 4.0, 3.0};
  EXPECT_DOUBLE_EQ(empirical_mean(a), 2.5);
  EXPECT_NEAR(empirical_var(a), 5.0 / 3.0, 1e-15);
  EXPECT_NEAR(empirical_cov(a, b), 3.0 / 3.0, 1e-15);
}

TEST(Estimators, RequiredSamples)
{
  EXPECT_EQ(required_samples(1.0, 0.1), 100u);
  EXPECT_EQ(required_samples(1.015, 0.1), 102u);
  EXPECT_EQ(required_samples(0.0, 0.1), 1u);
  EXPECT_THROW(required_samples(1.0, 0.0), Error);
}

TEST(Estimators, OptimalCoefficientMinimisesVariance)
{
  const Synthetic s;
  std::vector<double> q, z;
  for (std::uint64_t k = 0; k < 2000; ++k)
  {
    q.push_back(s.q(derive_seed(1, kStreamSynthetic, k)));
    z.push_back(s.z(0, derive_seed(1, kStreamSynthetic, k)));
  }
  const double rho = cv_rho(q, z);
  auto var_u = [&](double c) {
    std::vector<double> u(q.size());
    for (std::size_t i = 0; i < q.size(); ++i)
      u[i] = q[i] - c * z[i];
    return empirical_var(u);
  };
  const double corr = empirical_cov(q, z) / std::sqrt(empirical_var(q) * empirical_var(z));
  EXPECT_NEAR(var_u(rho), empirical_var(q) * (1.0 - corr * corr), 1e-10);
  EXPECT_LT(var_u(rho), var_u(rho * 1.05));
  EXPECT_LT(var_u(rho), var_u(rho * 0.95));
}

TEST(Estimators, CvAllocationMeetsToleranceNearMinimalCost)
{
  const double var_u = 0.05, var_z = 1.2, rho = 0.9, c_u = 1.0, c_z = 0.01, eta = 0.01;
  const CvPlan p = cv_allocate(var_u, var_z, rho, c_u, c_z, eta);
  EXPECT_LE(p.predicted_variance, eta * eta * (1 + 1e-12));
  EXPECT_GE(p.n_z, p.n_u);
  // brute force over n_u, n_z
  double best = INFINITY;
  for (std::size_t nu = 1; nu <= 3000; ++nu)
  {
    const double rest = eta * eta - var_u / static_cast<double>(nu);
    if (rest <= 0.0)
      continue;
    const auto nz = static_cast<std::size_t>(std::ceil(rho * rho * var_z / rest));
    best = std::min(best, static_cast<double>(nu) * c_u + static_cast<double>(std::max(nz, nu)) * c_z);
  }
  EXPECT_LE(p.cost(), best * 1.01);
}

TEST(Estimators, CvAllocationFallsBackToPlainMc)
{
  const CvPlan p = cv_allocate(0.5, 1.0, 0.0, 1.0, 0.1, 0.1);
  EXPECT_TRUE(p.plain_mc);
  EXPECT_EQ(p.n_u, 50u);
  EXPECT_EQ(p.n_z, 0u);
}

TEST(Estimators, CvEstimateIsUnbiasedWithKnownMean)
{
  const Synthetic s;
  const Sampler q = [&](std::uint64_t k) { return s.q(k); };
  const Sampler z = [&](std::uint64_t k) { return s.z(0, k); };
  const double rho = 1.0 / s.var_z(0);
  const double vu = s.var_q() - 1.0 / s.var_z(0);
  const CvPlan p = cv_allocate(vu, s.var_z(0), rho, 1.0, 0.01, 0.01);
  std::vector<double> est;
  for (std::uint64_t rep = 0; rep < 40; ++rep)
    est.push_back(cv_estimate(q, z, p, 100 + rep, 0.0).value);
  const double sd = std::sqrt(vu / static_cast<double>(p.n_u));
  EXPECT_NEAR(empirical_mean(est), 2.0, 4.0 * sd / std::sqrt(40.0));
  EXPECT_LT(empirical_var(est), 2.0 * sd * sd);
}

TEST(Estimators, CvEstimateWithSampledControlMean)
{
  const Synthetic s;
  const Sampler q = [&](std::uint64_t k) { return s.q(k); };
  const Sampler z = [&](std::uint64_t k) { return s.z(0, k); };
  const double rho = 1.0 / s.var_z(0);
  const double vu = s.var_q() - 1.0 / s.var_z(0);
  const CvPlan p = cv_allocate(vu, s.var_z(0), rho, 1.0, 0.01, 0.02);
  std::vector<double> est;
  for (std::uint64_t rep = 0; rep < 40; ++rep)
    est.push_back(cv_estimate(q, z, p, 500 + rep).value);
  EXPECT_NEAR(empirical_mean(est), 2.0, 4.0 * std::sqrt(p.predicted_variance / 40.0));
  EXPECT_LT(empirical_var(est), 2.0 * p.predicted_variance);
}

TEST(Estimators, MfmcConditions)
{
  const std::vector<double> g{1.0, 0.1, 0.001}, r{1.0, 0.95, 0.8};
  EXPECT_TRUE(mfmc_check_conditions(g, r).empty());
  const std::vector<double> bad_order{1.0, 0.8, 0.95};
  EXPECT_NE(mfmc_check_conditions(g, bad_order).find("ordering"), std::string::npos);
  const std::vector<double> pricey{1.0, 0.999, 0.001}, close{1.0, 0.99, 0.98};
  EXPECT_NE(mfmc_check_conditions(pricey, close).find("cost"), std::string::npos);
  const std::vector<double> v{1.0, 1.0, 1.0};
  EXPECT_THROW(mfmc_allocate(g, bad_order, v, 100.0), Error);
}

TEST(Estimators, MfmcAllocationMatchesBruteForceOptimum)
{
  const std::vector<double> g{1.0, 0.02}, r{1.0, 0.9}, v{2.0, 3.0};
  const double budget = 200.0;
  const MfmcPlan p = mfmc_allocate(g, r, v, budget);
  const double closed = v[0] * p.predicted_ratio * g[0] / budget;
  EXPECT_NEAR(mfmc_variance_real(p.m_real, p.rho, v, r), closed, 1e-12 * closed);
  // scan m0 on a fine grid; m1 takes the remaining budget
  double best = INFINITY;
  for (double m0 = 1.0; m0 < budget; m0 += 0.01)
  {
    const double m1 = (budget - m0 * g[0]) / g[1];
    if (m1 < m0)
      break;
    best = std::min(best, mfmc_variance_real({m0, m1}, p.rho, v, r));
  }
  EXPECT_NEAR(best, closed, 1e-6 * closed);
  EXPECT_LE(p.cost(), budget);
  EXPECT_LE(p.m[0], p.m[1]);
}

TEST(Estimators, MfmcToleranceAllocation)
{
  const std::vector<double> g{1.0, 0.05, 0.002}, r{1.0, 0.97, 0.85}, v{1.5, 1.0, 2.0};
  const MfmcPlan p = mfmc_allocate_tolerance(g, r, v, 1e-4);
  EXPECT_LE(p.predicted_variance, 1e-4 * (1 + 1e-9));
  for (std::size_t j = 1; j < p.m.size(); ++j)
    EXPECT_LE(p.m[j - 1], p.m[j]);
  EXPECT_LT(p.predicted_ratio, 1.0);
}

TEST(Estimators, MfmcEstimateIsUnbiasedWithPredictedVariance)
{
  const Synthetic s;
  const std::vector<Sampler> models{[&](std::uint64_t k) { return s.q(k); },
                                    [&](std::uint64_t k) { return s.z(0, k); },
                                    [&](std::uint64_t k) { return s.z(1, k); }};
  const std::vector<double> r{1.0, s.r(0), s.r(1)};
  const std::vector<double> v{s.var_q(), s.var_z(0), s.var_z(1)};
  const std::vector<double> g{1.0, 0.05, 0.001};
  const MfmcPlan p = mfmc_allocate(g, r, v, 60.0);
  std::vector<double> est;
  for (std::uint64_t rep = 0; rep < 200; ++rep)
    est.push_back(mfmc_estimate(models, p, 900 + rep).value);
  EXPECT_NEAR(empirical_mean(est), 2.0, 4.0 * std::sqrt(p.predicted_variance / 200.0));
  EXPECT_NEAR(empirical_var(est) / p.predicted_variance, 1.0, 0.35);
}

TEST(Estimators, McDrawIsThreadCountInvariant)
{
  const Synthetic s;
  const Sampler q = [&](std::uint64_t k) { return s.q(k); };
  EXPECT_EQ(draw_samples(q, 37, 4, kStreamHigh, 1), draw_samples(q, 37, 4, kStreamHigh, 4));
  const McEstimate e = mc_estimate(q, 4000, 3);
  EXPECT_NEAR(e.mean, 2.0, 4.0 * std::sqrt(e.estimator_variance()));
  EXPECT_NEAR(e.variance, s.var_q(), 0.1);
}
