// Copyright 2026 The qphomog Authors
// SPDX-License-Identifier: Apache-2.0

#include "qph/estimators.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "qph/linalg.hpp"
#include "qph/seeding.hpp"

namespace qph
{

double pairwise_sum(std::span<const double> v)
{
  if (v.size() <= 8)
    return std::accumulate(v.begin(), v.end(), 0.0);
  const std::size_t h = v.size() / 2;
  return pairwise_sum(v.first(h)) + pairwise_sum(v.subspan(h));
}

double empirical_mean(std::span<const double> v)
{
  if (v.empty())
    throw Error("mean of an empty sample");
  return pairwise_sum(v) / static_cast<double>(v.size());
}

double empirical_cov(std::span<const double> a, std::span<const double> b)
{
  if (a.size() != b.size())
    throw Error("covariance of samples with different lengths");
  if (a.size() < 2)
    throw Error("covariance needs at least two samples");
  const double ma = empirical_mean(a), mb = empirical_mean(b);
  std::vector<double> prod(a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    prod[i] = (a[i] - ma) * (b[i] - mb);
  return pairwise_sum(prod) / static_cast<double>(a.size() - 1);
}

double empirical_var(std::span<const double> v)
{
  return empirical_cov(v, v);
}

McEstimate mc_summary(std::span<const double> samples)
{
  if (samples.size() < 2)
    throw Error("Monte Carlo estimate needs m >= 2 samples");
  return {empirical_mean(samples), empirical_var(samples), samples.size()};
}

std::vector<double> draw_samples(const Sampler &s, std::size_t m, std::uint64_t seed,
                                 std::uint64_t stream, int threads)
{
  std::vector<double> out(m);
  parallel_for(m, threads, [&](std::size_t k) { out[k] = s(derive_seed(seed, stream, k)); });
  return out;
}

McEstimate mc_estimate(const Sampler &s, std::size_t m, std::uint64_t seed, int threads)
{
  if (m < 2)
    throw Error("Monte Carlo estimate needs m >= 2 samples");
  const auto v = draw_samples(s, m, seed, kStreamHigh, threads);
  return mc_summary(v);
}

std::size_t required_samples(double variance, double eta)
{
  if (!(eta > 0.0))
    throw Error("required_samples: eta must be positive");
  if (!(variance >= 0.0))
    throw Error("required_samples: variance must be non-negative");
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(variance / (eta * eta))));
}

double cv_rho(std::span<const double> q, std::span<const double> z)
{
  const double vz = empirical_var(z);
  if (!(vz > 0.0))
    throw Error("control coefficient undefined: control variate has zero variance");
  return empirical_cov(q, z) / vz;
}

double cv_rho(std::span<const double> q, std::span<const double> z_paired,
              std::span<const double> z_extra)
{
  if (z_extra.size() <= z_paired.size())
    return cv_rho(q, z_paired);
  const double vz = empirical_var(z_extra);
  if (!(vz > 0.0))
    throw Error("control coefficient undefined: control variate has zero variance");
  return empirical_cov(q, z_paired) / vz;
}

double cv_variance(double var_u, double var_z, double rho, std::size_t n_u, std::size_t n_z)
{
  double v = var_u / static_cast<double>(n_u);
  if (rho != 0.0)
    v += rho * rho * var_z / static_cast<double>(n_z);
  return v;
}

CvPlan cv_allocate(double var_u, double var_z, double rho, double c_u, double c_z, double eta)
{
  if (!(eta > 0.0))
    throw Error("cv_allocate: eta must be positive");
  if (!(var_u >= 0.0) || !(var_z >= 0.0))
    throw Error("cv_allocate: variances must be non-negative");
  if (!(c_u > 0.0) || !(c_z > 0.0))
    throw Error("cv_allocate: costs must be positive");
  CvPlan p;
  p.rho = rho;
  p.c_u = c_u;
  p.c_z = c_z;
  p.var_u = var_u;
  p.var_z = var_z;
  const double s = rho * rho * var_z;
  if (rho == 0.0 || s == 0.0)
  {
    p.plain_mc = true;
    p.n_u = required_samples(var_u, eta);
    p.n_z = 0;
    p.predicted_variance = var_u / static_cast<double>(p.n_u);
    return p;
  }
  const double nz = std::ceil((s + std::sqrt(var_u * s * c_u / c_z)) / (eta * eta));
  const double nu = std::ceil(nz * std::sqrt(c_z * var_u / (c_u * s)));
  p.n_u = std::max<std::size_t>(1, static_cast<std::size_t>(nu));
  p.n_z = std::max<std::size_t>({1, static_cast<std::size_t>(nz), p.n_u});
  p.predicted_variance = cv_variance(var_u, var_z, rho, p.n_u, p.n_z);
  return p;
}

CvEstimate cv_estimate(const Sampler &q, const Sampler &z, const CvPlan &plan,
                       std::uint64_t seed, std::optional<double> known_mean_z, int threads)
{
  if (plan.n_u < 1)
    throw Error("cv_estimate: plan needs n_U >= 1");
  CvEstimate out;
  out.n_u = plan.n_u;
  std::vector<double> u(plan.n_u);
  parallel_for(plan.n_u, threads, [&](std::size_t k) {
    const std::uint64_t s = derive_seed(seed, kStreamHigh, k);
    u[k] = q(s) - (plan.rho != 0.0 ? plan.rho * z(s) : 0.0);
  });
  out.mean_u = empirical_mean(u);
  if (plan.rho == 0.0)
  {
    out.value = out.mean_u;
    return out;
  }
  if (known_mean_z)
  {
    out.mean_z = *known_mean_z;
  }
  else
  {
    if (plan.n_z < 1)
      throw Error("cv_estimate: plan needs n_Z >= 1 without a known expectation");
    out.n_z = plan.n_z;
    const auto zs = draw_samples(z, plan.n_z, seed, kStreamLow, threads);
    out.mean_z = empirical_mean(zs);
  }
  out.value = out.mean_u + plan.rho * out.mean_z;
  return out;
}

double MfmcPlan::cost() const
{
  double c = 0.0;
  for (std::size_t j = 0; j < m.size(); ++j)
    c += static_cast<double>(m[j]) * gamma[j];
  return c;
}

std::string mfmc_check_conditions(std::span<const double> gamma, std::span<const double> r)
{
  const std::size_t n = r.size() - 1;  // low-fidelity count
  auto rr = [&](std::size_t j) { return j <= n ? r[j] : 0.0; };
  std::ostringstream os;
  for (std::size_t j = 0; j <= n; ++j)
    if (!(std::abs(rr(j)) > std::abs(rr(j + 1))))
    {
      os << "correlation ordering fails for models (" << j << ", " << j + 1
         << "): |r_" << j << "| = " << std::abs(rr(j)) << " is not > |r_" << j + 1
         << "| = " << std::abs(rr(j + 1));
      return os.str();
    }
  for (std::size_t j = 1; j <= n; ++j)
  {
    const double lhs = gamma[j - 1] / gamma[j];
    const double rhs = (rr(j - 1) * rr(j - 1) - rr(j) * rr(j)) /
                       (rr(j) * rr(j) - rr(j + 1) * rr(j + 1));
    if (!(lhs > rhs))
    {
      os << "cost/correlation condition fails for models (" << j - 1 << ", " << j
         << "): gamma ratio " << lhs << " is not > " << rhs;
      return os.str();
    }
  }
  return {};
}

namespace
{

void check_mfmc_inputs(std::span<const double> gamma, std::span<const double> r,
                       std::span<const double> variances)
{
  if (gamma.empty() || gamma.size() != r.size() || gamma.size() != variances.size())
    throw Error("MFMC: costs, correlations and variances need one entry per model");
  if (std::abs(r[0] - 1.0) > 1e-12)
    throw Error("MFMC: r[0] is the self-correlation of model 0 and must be 1");
  for (double g : gamma)
    if (!(g > 0.0))
      throw Error("MFMC: model costs must be positive");
  for (double v : variances)
    if (!(v > 0.0))
      throw Error("MFMC: model variances must be positive");
  if (const std::string why = mfmc_check_conditions(gamma, r); !why.empty())
    throw Error("MFMC conditions violated: " + why);
}

}  // namespace

double mfmc_predicted_reduction(std::span<const double> gamma, std::span<const double> r)
{
  if (gamma.empty() || gamma.size() != r.size())
    throw Error("MFMC: costs and correlations need one entry per model");
  const std::size_t n = r.size() - 1;
  double s = 0.0;
  for (std::size_t j = 0; j <= n; ++j)
  {
    const double rj = j == 0 ? 1.0 : r[j];
    const double rn = j + 1 <= n ? r[j + 1] : 0.0;
    s += std::sqrt(gamma[j] / gamma[0] * (rj * rj - rn * rn));
  }
  return s * s;
}

double mfmc_variance(std::span<const std::size_t> m, std::span<const double> rho,
                     std::span<const double> variances, std::span<const double> r)
{
  const double s0 = variances[0];
  double e = s0 / static_cast<double>(m[0]);
  for (std::size_t j = 1; j < m.size(); ++j)
  {
    const double cov = r[j] * std::sqrt(s0 * variances[j]);
    e += (1.0 / static_cast<double>(m[j - 1]) - 1.0 / static_cast<double>(m[j])) *
         (rho[j] * rho[j] * variances[j] - 2.0 * rho[j] * cov);
  }
  return e;
}

MfmcPlan mfmc_allocate(std::span<const double> gamma, std::span<const double> r,
                       std::span<const double> variances, double budget, MfmcRounding rounding)
{
  check_mfmc_inputs(gamma, r, variances);
  if (!(budget >= gamma[0]))
    throw Error("MFMC: budget is below the cost of one high-fidelity sample");
  const std::size_t n = gamma.size() - 1;
  MfmcPlan p;
  p.gamma.assign(gamma.begin(), gamma.end());
  p.r.assign(r.begin(), r.end());
  p.variances.assign(variances.begin(), variances.end());
  p.budget = budget;
  p.rho.assign(n + 1, 1.0);
  for (std::size_t j = 1; j <= n; ++j)
    p.rho[j] = r[j] * std::sqrt(variances[0] / variances[j]);

  std::vector<double> w(n + 1, 1.0);
  double denom = gamma[0];
  for (std::size_t j = 1; j <= n; ++j)
  {
    const double rn = j + 1 <= n ? r[j + 1] : 0.0;
    w[j] = std::sqrt(gamma[0] / gamma[j] * (r[j] * r[j] - rn * rn) / (1.0 - r[1] * r[1]));
    denom += gamma[j] * w[j];
  }
  const double m0 = budget / denom;
  p.m_real.resize(n + 1);
  p.m.resize(n + 1);
  for (std::size_t j = 0; j <= n; ++j)
  {
    p.m_real[j] = m0 * w[j];
    const double v = rounding == MfmcRounding::Budget ? std::floor(p.m_real[j] * (1 + 1e-12))
                                                      : std::ceil(p.m_real[j] * (1 - 1e-12));
    p.m[j] = std::max<std::size_t>(1, static_cast<std::size_t>(v));
    if (j > 0)
      p.m[j] = std::max(p.m[j], p.m[j - 1]);
  }
  if (rounding == MfmcRounding::Budget && p.cost() > budget * (1 + 1e-12))
    throw Error("MFMC: budget too small for a nested allocation");
  p.predicted_ratio = mfmc_predicted_reduction(gamma, r);
  p.predicted_variance = mfmc_variance(p.m, p.rho, variances, r);
  return p;
}

MfmcPlan mfmc_allocate_tolerance(std::span<const double> gamma, std::span<const double> r,
                                 std::span<const double> variances, double tolerance)
{
  check_mfmc_inputs(gamma, r, variances);
  if (!(tolerance > 0.0))
    throw Error("MFMC: tolerance must be positive");
  const double ratio = mfmc_predicted_reduction(gamma, r);
  const double budget = std::max(gamma[0], gamma[0] * variances[0] * ratio / tolerance);
  return mfmc_allocate(gamma, r, variances, budget, MfmcRounding::Tolerance);
}

MfmcEstimate mfmc_estimate(const std::vector<Sampler> &models, const MfmcPlan &plan,
                           std::uint64_t seed, int threads)
{
  if (models.size() != plan.m.size() || models.empty())
    throw Error("MFMC: plan and model count differ");
  for (std::size_t j = 1; j < plan.m.size(); ++j)
    if (plan.m[j] < plan.m[j - 1])
      throw Error("MFMC: sample counts must be non-decreasing");
  const std::size_t M = plan.m.back(), n = models.size();
  std::vector<std::vector<double>> v(n);
  for (std::size_t j = 0; j < n; ++j)
    v[j].resize(plan.m[j]);
  parallel_for(M, threads, [&](std::size_t k) {
    const std::uint64_t s = derive_seed(seed, kStreamShared, k);
    for (std::size_t j = 0; j < n; ++j)
      if (k < plan.m[j])
        v[j][k] = models[j](s);
  });
  MfmcEstimate out;
  out.means.resize(n);
  out.value = empirical_mean(v[0]);
  out.means[0] = out.value;
  for (std::size_t j = 1; j < n; ++j)
  {
    const std::span<const double> all(v[j]);
    out.means[j] = empirical_mean(all);
    const double prev = empirical_mean(all.first(plan.m[j - 1]));
    out.value += plan.rho[j] * (out.means[j] - prev);
  }
  return out;
}

}  // namespace qph
