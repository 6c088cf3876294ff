// Copyright 2026 The qphomog Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef QPH_TENSOR_SPACE_HPP
#define QPH_TENSOR_SPACE_HPP

#include <vector>

#include "qph/supercell_fem.hpp"

namespace qph
{

// Rank-r field over R^I (x) V_h(Y): sum_n meso_n (x) micro_n. Micro fields are
// nodal over the full (non-identified) node set of the reference cell, so
// each cell carries its own copy of the interface nodes.
struct TensorField
{
  MesoGrid grid;
  std::vector<Eigen::VectorXd> meso;
  std::vector<Eigen::VectorXd> micro;

  int rank() const { return static_cast<int>(meso.size()); }
  void add_term(Eigen::VectorXd m, Eigen::VectorXd y);
  // Row i holds the nodal values on cell i.
  Eigen::MatrixXd to_matrix() const;
  Eigen::VectorXd evaluate_cell(int cell) const;
  double norm() const;
  TensorField scaled(double s) const;
};

TensorField zero_tensor(const MesoGrid &grid);
TensorField operator+(const TensorField &a, const TensorField &b);

// Canonical rank-#I form: one term per cell, meso vector = unit basis vector.
TensorField upsilon_decompose(const MesoGrid &grid, const Eigen::MatrixXd &cell_fields);

// Keeps the leading singular triplets so that the dropped Frobenius mass is
// at most tol * ||t||. Meso factors carry the singular values.
TensorField svd_truncate(const TensorField &t, double tol);

// Factored form of a #I x n matrix, same truncation rule.
TensorField matrix_to_tensor(const MesoGrid &grid, const Eigen::MatrixXd &M, double tol);

// One separated conductivity term: meso Sym2 per cell times a scalar per element.
struct ConductivityTerm
{
  std::vector<Sym2> meso;
  Eigen::VectorXd micro;
};

struct LowRankConductivity
{
  MesoGrid grid;
  std::vector<ConductivityTerm> terms;
  double alpha = 0.0;  // declared lower eigenvalue bound, 0 when unknown
  double beta = 0.0;   // declared upper bound, 0 when unknown

  int rank() const { return static_cast<int>(terms.size()); }
  Sym2 at(int cell, int element) const;
  ConductivityField evaluate() const;
  // Throws unless every (cell, element) value is SPD.
  void validate() const;
};

// Periodic cell pattern as a separated field with constant meso factors.
LowRankConductivity periodic_conductivity(const MesoGrid &grid, const ElementConductivity &cell_k);

// Canonical rank-#I conductivity from a dense field.
LowRankConductivity upsilon_conductivity(const ConductivityField &K);

// Separated element-constant vector field sum_t a_t(i) (x) chi_t(y).
struct DriveTerm
{
  std::vector<Vec2> meso;
  Eigen::VectorXd micro;
};

struct DriveField
{
  std::vector<DriveTerm> terms;
  Vec2 at(int cell, int element) const;
  std::vector<Vec2> evaluate(const MesoGrid &grid) const;
};

DriveField unit_drive_field(const MesoGrid &grid, Axis dir);

}  // namespace qph

#endif  // QPH_TENSOR_SPACE_HPP
