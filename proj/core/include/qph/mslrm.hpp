// Copyright 2026 The qphomog Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef QPH_MSLRM_HPP
#define QPH_MSLRM_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "qph/swip.hpp"

namespace qph
{

// Micro modes shared across samples. Modes are kept orthonormal and
// orthogonal to the constant field, which is always part of the projection
// basis but never stored.
class ModesLibrary
{
public:
  ModesLibrary() = default;
  explicit ModesLibrary(const CellMesh &mesh, double admission_tol = 1e-8);

  const CellMesh &mesh() const { return mesh_; }
  int size() const { return static_cast<int>(modes_.size()); }
  bool empty() const { return modes_.empty(); }
  const Eigen::VectorXd &mode(int k) const { return modes_[static_cast<std::size_t>(k)]; }
  int created_at(int k) const { return created_at_[static_cast<std::size_t>(k)]; }
  double admission_tol() const { return admission_tol_; }

  // Orthonormalises the candidate; returns the new index, or -1 when its
  // norm after orthogonalisation is below admission_tol of the original.
  int try_add(const Eigen::VectorXd &candidate, int sample_index);

  // n x (1 + size): normalised constant first, then the stored modes.
  Eigen::MatrixXd basis() const;

  // Largest deviation of the basis Gram matrix from the identity.
  double orthonormality_defect() const;

  // Applications m_t * basis for every block of `op`, extended lazily.
  const std::vector<Eigen::MatrixXd> &applied(const SwipOperator &op) const;

  void save(const std::string &path) const;
  static ModesLibrary load(const std::string &path);

private:
  CellMesh mesh_{};
  double admission_tol_ = 1e-8;
  std::vector<Eigen::VectorXd> modes_;
  std::vector<int> created_at_;

  mutable std::uint64_t cache_key_ = 0;
  mutable const void *cache_op_ = nullptr;
  mutable std::vector<Eigen::MatrixXd> cache_;
};

struct AlsOptions
{
  int max_sweeps = 20;
  double rel_tol = 1e-3;
  double regularization = 1e-12;
};

struct AlsResult
{
  Eigen::VectorXd meso;
  Eigen::VectorXd micro;
  int sweeps = 0;
  std::vector<double> energy;  // after every sweep
  bool stagnated = false;
};

// Rank-one increment s (x) phi minimising 1/2 a(u,u) - <R, u>.
AlsResult als_rank_one(const SwipOperator &op, const Eigen::MatrixXd &residual,
                       const AlsOptions &opts = {});

struct ProjectionResult
{
  Eigen::MatrixXd coefficients;  // #I x (1 + library size)
  Eigen::MatrixXd field;         // #I x n
  double residual = 0.0;
};

// Galerkin projection on R^I (x) span(constant, library).
ProjectionResult galerkin_project(const SwipOperator &op, const Eigen::MatrixXd &rhs,
                                  const ModesLibrary &library);

struct GreedyOptions
{
  int max_rank = 150;
  bool update = true;
  AlsOptions als;
  std::size_t memory_budget_bytes = 0;  // 0: unlimited
  // consecutive iterations without a new best residual; Galerkin updates
  // are energy-optimal, so the algebraic residual can oscillate early on
  int max_stall = 25;
};

struct SolveReport
{
  int rank = 0;
  int greedy_iterations = 0;
  std::vector<int> als_sweeps;
  double residual = 0.0;
  bool recycled = false;
  bool success = true;
  bool als_warning = false;
  int modes_added = 0;
  double seconds = 0.0;
  std::string failure;
};

struct GreedyResult
{
  TensorField field;
  Eigen::MatrixXd values;  // #I x n nodal values of the field
  SolveReport report;
};

GreedyResult greedy_solve(const SwipOperator &op, const TensorField &rhs, double epsilon,
                          ModesLibrary &library, const GreedyOptions &opts = {},
                          int sample_index = 0);

GreedyResult greedy_solve(const MesoGrid &grid, const LowRankConductivity &K, Axis dir,
                          double epsilon, ModesLibrary &library, const GreedyOptions &opts = {},
                          double penalty = 10.0, int sample_index = 0);

}  // namespace qph

#endif  // QPH_MSLRM_HPP
