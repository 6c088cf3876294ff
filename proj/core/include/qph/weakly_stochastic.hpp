// Copyright 2026 The qphomog Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef QPH_WEAKLY_STOCHASTIC_HPP
#define QPH_WEAKLY_STOCHASTIC_HPP

#include <span>
#include <string>
#include <vector>

#include "qph/estimators.hpp"
#include "qph/homogenize.hpp"
#include "qph/media.hpp"

namespace qph
{

// Sound cells carry k_ref, faulty cells k_ref + k_def.
struct DefectModel
{
  MesoGrid grid;
  ElementConductivity k_ref;
  ElementConductivity k_def;

  // Same geometry with the roles swapped: reference k_ref + k_def, defect -k_def.
  DefectModel complementary() const;
  ConductivityField field(const std::vector<int> &defects) const;
  LowRankConductivity low_rank(const std::vector<int> &defects) const;
};

// Bernoulli-defect and unidirectional-fibre media in defect form: K1 reference, (K2 - K1) chi defect.
DefectModel defect_model_from_spec(const MediumSpec &spec);

// Reflections / transposition of the grid about the centre of cell 0.
struct GridSymmetry
{
  bool swap = false;
  bool flip_x = false;
  bool flip_y = false;

  Eigen::Matrix2d matrix() const;
  // Wrapped displacement image, as a cell index.
  int apply(const MesoGrid &grid, int displacement) const;
};

// Symmetries leaving both cell patterns and the meso grid invariant.
std::vector<GridSymmetry> grid_symmetries(const DefectModel &model);

enum class DefectSolver
{
  Fem,
  Mslrm
};

struct ContributionOptions
{
  DefectSolver solver = DefectSolver::Fem;
  double epsilon = 1e-2;
  double penalty = 10.0;
  SolverOptions fem;
  GreedyOptions greedy;
  bool use_symmetry = true;
  bool complementary = true;
  int threads = 1;  // FEM configurations only; MsLRM shares one library sequentially
};

struct DefectContributions
{
  MesoGrid grid;
  HomogenizedTensor ref_periodic = HomogenizedTensor::Zero();  // K_sharp*
  HomogenizedTensor ref_one = HomogenizedTensor::Zero();       // K_1*^N
  std::vector<HomogenizedTensor> ref_two;  // K_2*^{d,N} per wrapped displacement; [0] unused
  HomogenizedTensor comp_periodic = HomogenizedTensor::Zero();
  HomogenizedTensor comp_one = HomogenizedTensor::Zero();
  std::vector<HomogenizedTensor> comp_two;
  bool has_complementary = false;
  int solves = 0;  // distinct configurations actually solved
  double seconds = 0.0;

  void save(const std::string &path) const;
  static DefectContributions load(const std::string &path);
};

// One-defect contribution: apparent(one defect) - periodic. Two-defect
// contribution per displacement d: apparent({0, d}) - 2 apparent({0}) + periodic.
DefectContributions compute_contributions(const DefectModel &model,
                                          const ContributionOptions &opts = {});

// Cached variant: reuses <dir>/contrib-<key>.json when the key matches.
DefectContributions cached_contributions(const std::string &dir, const DefectModel &model,
                                         const ContributionOptions &opts = {});
std::string contributions_key(const DefectModel &model, const ContributionOptions &opts);

HomogenizedTensor z1_eval(const DefectContributions &c, const std::vector<int> &defects);
HomogenizedTensor z1_expectation(const DefectContributions &c, double p);
HomogenizedTensor z2_eval(const DefectContributions &c, const std::vector<int> &defects);
HomogenizedTensor z2_expectation(const DefectContributions &c, double p);
// Complementary second-order term, driven by the sound cells 1 - B_i.
HomogenizedTensor z2c_eval(const DefectContributions &c, const std::vector<int> &defects);
HomogenizedTensor z2c_expectation(const DefectContributions &c, double p);

struct ControlCoefficients
{
  double rho1 = 0.0;
  double rho2 = 0.0;
  double rho2c = 0.0;
  bool fallback = false;  // singular system: first order only
  std::string warning;
};

// Optimal coefficients of the three controls from pilot samples. Pass an
// empty z2c to solve the 2x2 system without the complementary term.
ControlCoefficients solve_control_coefficients(std::span<const double> q,
                                               std::span<const double> z1,
                                               std::span<const double> z2,
                                               std::span<const double> z2c);

}  // namespace qph

#endif  // QPH_WEAKLY_STOCHASTIC_HPP
