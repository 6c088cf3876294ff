// Copyright 2026 The qphomog Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef QPH_SWIP_HPP
#define QPH_SWIP_HPP

#include <array>
#include <cstdint>
#include <vector>

#include "qph/tensor_space.hpp"

namespace qph
{

// One separated term M (x) m acting as W -> M W m^T on the #I x n
// coefficient matrix (test index first).
struct SeparatedBlock
{
  SparseMatrix meso;
  SparseMatrix micro;
};

struct SwipStats
{
  int volume_blocks = 0;  // before merging
  int face_blocks = 0;    // before merging
  int merged_blocks = 0;  // blocks actually stored
};

// Symmetric weighted interior penalty form: conforming Q1 inside each cell,
// discontinuous across cell interfaces, periodic meso wrap-around.
struct SwipOperator
{
  MesoGrid grid;
  double penalty = 10.0;
  std::vector<SeparatedBlock> blocks;
  SwipStats stats;
  std::uint64_t id = 0;  // unique per assembly, keys cached applications

  Eigen::MatrixXd apply(const Eigen::MatrixXd &W) const;
  Eigen::MatrixXd apply(const TensorField &w) const { return apply(w.to_matrix()); }
  double bilinear(const Eigen::MatrixXd &U, const Eigen::MatrixXd &V) const
  {
    return V.cwiseProduct(apply(U)).sum();
  }
};

SwipOperator assemble_swip(const MesoGrid &grid, const LowRankConductivity &K,
                           double penalty = 10.0);

// v -> -sum_cells int grad v . K g + sum_faces int {K g . n}_w [v].
TensorField assemble_rhs(const MesoGrid &grid, const LowRankConductivity &K, Axis dir);
TensorField assemble_rhs(const MesoGrid &grid, const LowRankConductivity &K,
                         const DriveField &drive);

// ||F - A(W)|| / ||F|| in the Euclidean norm; 0 if both vanish, +inf if only F does.
double residual_norm(const SwipOperator &op, const TensorField &rhs, const TensorField &w);
double residual_norm(const SwipOperator &op, const Eigen::MatrixXd &F, const Eigen::MatrixXd &W);

// A_ab = |Y_N|^-1 sum_i int_Y (g_a + grad w_a) . K g_b with W_a row-per-cell nodal values.
Eigen::Matrix2d tensor_drive_flux(const LowRankConductivity &K,
                                  const std::array<DriveField, 2> &drives,
                                  const std::array<Eigen::MatrixXd, 2> &W);

}  // namespace qph

#endif  // QPH_SWIP_HPP
