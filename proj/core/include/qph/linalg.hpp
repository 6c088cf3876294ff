// Copyright 2026 The qphomog Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef QPH_LINALG_HPP
#define QPH_LINALG_HPP

#include <cstddef>
#include <functional>

#include "qph/types.hpp"

namespace qph
{

enum class SolverKind
{
  Auto,     // direct below direct_threshold unknowns, CG above
  Cg,
  Direct
};

struct SolverOptions
{
  double rel_tol = 1e-10;
  int max_iterations = 50000;
  std::size_t direct_threshold = 200000;
  SolverKind kind = SolverKind::Auto;
};

struct SolveInfo
{
  int iterations = 0;
  double rel_residual = 0.0;
  bool direct = false;
};

// Solves A x = b for symmetric positive semidefinite A whose kernel is the
// constant vector. The returned x has zero arithmetic mean. b is projected
// onto the range of A before solving.
Eigen::VectorXd solve_constant_kernel(const SparseMatrix &A, const Eigen::VectorXd &b,
                                      const SolverOptions &opts, SolveInfo *info = nullptr);

// Same system, several right-hand sides sharing one factorisation when direct.
Eigen::MatrixXd solve_constant_kernel(const SparseMatrix &A, const Eigen::MatrixXd &B,
                                      const SolverOptions &opts, SolveInfo *info = nullptr);

// Deflated Jacobi-preconditioned conjugate gradients, exposed for testing.
Eigen::VectorXd deflated_pcg(const SparseMatrix &A, const Eigen::VectorXd &b, double rel_tol,
                             int max_iterations, SolveInfo *info = nullptr);

// Pins the first unknown to zero and factorises; kernel must be the constants.
Eigen::MatrixXd pinned_direct_solve(const SparseMatrix &A, const Eigen::MatrixXd &B);

// Runs body(i) for i in [0, n) on up to `threads` workers. Results must be
// written to per-index slots so the outcome does not depend on scheduling.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)> &body);

}  // namespace qph

#endif  // QPH_LINALG_HPP
