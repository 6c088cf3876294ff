// Copyright 2026 The qphomog Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef QPH_EIM_HPP
#define QPH_EIM_HPP

#include <string>
#include <vector>

#include "qph/tensor_space.hpp"

namespace qph
{

// Separated interpolant sum_j alpha_j (x) q_j of a scalar cell-by-element field.
struct EimModel
{
  MesoGrid grid;
  Eigen::MatrixXd alpha;  // #I x n meso coefficients
  Eigen::MatrixXd q;      // elements x n micro basis
  std::vector<int> point_cells;     // i_p
  std::vector<int> point_elements;  // y_p
  std::vector<double> sup_history;  // sup residual before each iteration, then final
  double delta = 0.0;
  double achieved = 0.0;  // sup |K - model| at termination

  int rank() const { return static_cast<int>(q.cols()); }
  Eigen::VectorXd evaluate(int cell) const;
  Eigen::MatrixXd evaluate_all() const;  // #I x elements
  // Matrix (q_j(y_p))_{p,j}; unit lower triangular by construction.
  Eigen::MatrixXd point_matrix() const;
  // A priori Lebesgue bound 2^n - 1, diagnostic only.
  double lebesgue_bound() const;

  void save(const std::string &path) const;
  static EimModel load(const std::string &path);
};

// Row i holds the scalar value of cell i per element; throws if not isotropic.
Eigen::MatrixXd scalar_samples(const ConductivityField &K);

// Greedy interpolation until sup over cells and elements of the residual is
// <= delta. Ties in argmax go to the lowest (cell, element). Throws if
// max_rank is reached first.
EimModel eim_interpolate(const MesoGrid &grid, const Eigen::MatrixXd &K, double delta,
                         int max_rank = 100);
EimModel eim_interpolate(const ConductivityField &K, double delta, int max_rank = 100);

// Clamps values below floor up to floor.
Eigen::VectorXd spd_repair(const Eigen::VectorXd &values, double floor);
// Tensor version: eigenvalues below floor are raised to floor.
Sym2 spd_repair(const Sym2 &k, double floor);

// Low-rank conductivity from the model. Cells where repair changes values get
// one extra correction term each, so the result is always admissible.
LowRankConductivity eim_to_conductivity(const EimModel &model, double floor);

}  // namespace qph

#endif  // QPH_EIM_HPP
