// Copyright 2026 The qphomog Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef QPH_ESTIMATORS_HPP
#define QPH_ESTIMATORS_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qph/types.hpp"

namespace qph
{

// A random scalar: maps a sample seed to a realisation. Several samplers fed
// the same seed see the same random event.
using Sampler = std::function<double(std::uint64_t seed)>;

// Scalar functional of a homogenised tensor; default picks entry (0, 0).
struct ScalarQoI
{
  int row = 0;
  int col = 0;
  double operator()(const HomogenizedTensor &K) const { return K(row, col); }
};

// Sum in index order by recursive halving, independent of thread schedule.
double pairwise_sum(std::span<const double> v);
double empirical_mean(std::span<const double> v);
// Unbiased sample covariance; needs equal lengths >= 2.
double empirical_cov(std::span<const double> a, std::span<const double> b);
double empirical_var(std::span<const double> v);

struct McEstimate
{
  double mean = 0.0;
  double variance = 0.0;  // sample variance of one realisation
  std::size_t m = 0;
  double estimator_variance() const { return variance / static_cast<double>(m); }
};

McEstimate mc_summary(std::span<const double> samples);
// Draws sample k with derive_seed(seed, stream, k).
std::vector<double> draw_samples(const Sampler &s, std::size_t m, std::uint64_t seed,
                                 std::uint64_t stream, int threads = 1);
McEstimate mc_estimate(const Sampler &s, std::size_t m, std::uint64_t seed, int threads = 1);

// ceil(variance / eta^2), at least 1.
std::size_t required_samples(double variance, double eta);

// Optimal control coefficient cov(Q, Z) / var(Z) from paired samples.
double cv_rho(std::span<const double> q, std::span<const double> z);
// Paired samples for the covariance; the variance of Z also uses the extra
// unpaired draws when there are more of them.
double cv_rho(std::span<const double> q, std::span<const double> z_paired,
              std::span<const double> z_extra);

struct CvPlan
{
  double rho = 0.0;
  std::size_t n_u = 1;
  std::size_t n_z = 0;
  double c_u = 0.0;  // cost of one U = Q - rho Z sample (Q and Z)
  double c_z = 0.0;
  double var_u = 0.0;
  double var_z = 0.0;
  double predicted_variance = 0.0;  // var_u / n_u + rho^2 var_z / n_z
  bool plain_mc = false;            // rho == 0
  double cost() const { return static_cast<double>(n_u) * c_u + static_cast<double>(n_z) * c_z; }
};

// Cost-optimal (n_U, n_Z) for target standard deviation eta. Both counts
// are at least 1 and n_Z >= n_U.
CvPlan cv_allocate(double var_u, double var_z, double rho, double c_u, double c_z, double eta);
double cv_variance(double var_u, double var_z, double rho, std::size_t n_u, std::size_t n_z);

struct CvEstimate
{
  double value = 0.0;
  double mean_u = 0.0;
  double mean_z = 0.0;  // over the independent stream, or the known expectation
  std::size_t n_u = 0;
  std::size_t n_z = 0;
};

// U on stream kStreamHigh, Z on the independent stream kStreamLow. With a
// known expectation of Z the second stream is not sampled.
CvEstimate cv_estimate(const Sampler &q, const Sampler &z, const CvPlan &plan,
                       std::uint64_t seed, std::optional<double> known_mean_z = std::nullopt,
                       int threads = 1);

enum class MfmcRounding
{
  Budget,     // floor: never exceed the budget
  Tolerance,  // ceil: never exceed the target error
};

struct MfmcPlan
{
  std::vector<double> gamma;      // costs, model 0 is the high-fidelity one
  std::vector<double> r;          // correlations with model 0, r[0] = 1
  std::vector<double> variances;  // Var of each model
  std::vector<double> rho;        // control coefficients, rho[0] unused (1)
  std::vector<double> m_real;
  std::vector<std::size_t> m;
  double budget = 0.0;
  double predicted_ratio = 0.0;     // closed-form MSE ratio against plain MC
  double predicted_variance = 0.0;  // E(m, rho) at the integer sample counts
  double cost() const;
};

// Empty when the ordering conditions hold, otherwise a message naming the
// first failing index pair.
std::string mfmc_check_conditions(std::span<const double> gamma, std::span<const double> r);

// gamma, r and variances have one entry per model; r[0] must be 1.
MfmcPlan mfmc_allocate(std::span<const double> gamma, std::span<const double> r,
                       std::span<const double> variances, double budget,
                       MfmcRounding rounding = MfmcRounding::Budget);
// Smallest-budget plan whose predicted error is <= tolerance (ceil rounding).
MfmcPlan mfmc_allocate_tolerance(std::span<const double> gamma, std::span<const double> r,
                                 std::span<const double> variances, double tolerance);

// (sum_j sqrt(gamma_j / gamma_0 (r_j^2 - r_{j+1}^2)))^2 with r_0 = 1, r_{n+1} = 0.
double mfmc_predicted_reduction(std::span<const double> gamma, std::span<const double> r);

// E(m, rho): variance of the multi-fidelity estimator.
double mfmc_variance(std::span<const std::size_t> m, std::span<const double> rho,
                     std::span<const double> variances, std::span<const double> r);

struct MfmcEstimate
{
  double value = 0.0;
  std::vector<double> means;  // per model, over its own m_j
};

// Nested sampling: every model sees the shared stream, model j its first m_j draws.
MfmcEstimate mfmc_estimate(const std::vector<Sampler> &models, const MfmcPlan &plan,
                           std::uint64_t seed, int threads = 1);

}  // namespace qph

#endif  // QPH_ESTIMATORS_HPP
