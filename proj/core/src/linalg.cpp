// Copyright 2026 The qphomog Authors
// SPDX-License-Identifier: Apache-2.0

#include "qph/linalg.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include <Eigen/SparseCholesky>

namespace qph
{

Axis axis_from_index(int index)
{
  if (index != 0 && index != 1)
  {
    throw Error("invalid axis index " + std::to_string(index) + " (expected 0 or 1)");
  }
  return static_cast<Axis>(index);
}

int checked_axis(Axis a)
{
  return static_cast<int>(axis_from_index(static_cast<int>(a)));
}

namespace
{

void remove_mean(Eigen::Ref<Eigen::VectorXd> v)
{
  if (v.size() > 0)
  {
    v.array() -= v.mean();
  }
}

}  // namespace

Eigen::VectorXd deflated_pcg(const SparseMatrix &A, const Eigen::VectorXd &b_in, double rel_tol,
                             int max_iterations, SolveInfo *info)
{
  const Eigen::Index n = A.rows();
  Eigen::VectorXd b = b_in;
  remove_mean(b);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  const double bnorm = b.norm();
  if (info)
  {
    *info = {};
  }
  if (bnorm == 0.0)
  {
    return x;
  }
  Eigen::VectorXd inv_diag = A.diagonal();
  for (Eigen::Index i = 0; i < n; ++i)
  {
    inv_diag[i] = inv_diag[i] > 0.0 ? 1.0 / inv_diag[i] : 1.0;
  }
  Eigen::VectorXd r = b;
  Eigen::VectorXd z = inv_diag.cwiseProduct(r);
  remove_mean(z);
  Eigen::VectorXd p = z;
  Eigen::VectorXd Ap(n);
  double rz = r.dot(z);
  double rel = 1.0;
  int it = 0;
  for (; it < max_iterations; ++it)
  {
    Ap.noalias() = A * p;
    const double pAp = p.dot(Ap);
    if (!(pAp > 0.0))
    {
      break;
    }
    const double alpha = rz / pAp;
    x += alpha * p;
    r -= alpha * Ap;
    rel = r.norm() / bnorm;
    if (rel <= rel_tol)
    {
      ++it;
      break;
    }
    z = inv_diag.cwiseProduct(r);
    remove_mean(z);
    const double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  // recompute from scratch to report the true residual
  Eigen::VectorXd res = b - A * x;
  remove_mean(res);
  rel = res.norm() / bnorm;
  remove_mean(x);
  if (info)
  {
    info->iterations = it;
    info->rel_residual = rel;
  }
  if (rel > rel_tol)
  {
    throw SolverError("conjugate gradients stopped at relative residual " + std::to_string(rel),
                      rel, it);
  }
  return x;
}

Eigen::MatrixXd pinned_direct_solve(const SparseMatrix &A, const Eigen::MatrixXd &B)
{
  const Eigen::Index n = A.rows();
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(n, B.cols());
  if (n <= 1)
  {
    return X;
  }
  std::vector<Triplet> trip;
  trip.reserve(static_cast<std::size_t>(A.nonZeros()));
  for (int k = 0; k < A.outerSize(); ++k)
  {
    for (SparseMatrix::InnerIterator it(A, k); it; ++it)
    {
      if (it.row() > 0 && it.col() > 0)
      {
        trip.emplace_back(static_cast<int>(it.row() - 1), static_cast<int>(it.col() - 1),
                          it.value());
      }
    }
  }
  SparseMatrix R(n - 1, n - 1);
  R.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<SparseMatrix> ldlt(R);
  if (ldlt.info() != Eigen::Success)
  {
    throw SolverError("direct factorisation failed", 1.0, 0);
  }
  Eigen::MatrixXd Bc = B;
  for (Eigen::Index c = 0; c < Bc.cols(); ++c)
  {
    Bc.col(c).array() -= Bc.col(c).mean();
  }
  X.bottomRows(n - 1) = ldlt.solve(Bc.bottomRows(n - 1));
  // two rounds of iterative refinement against the full singular system
  for (int round = 0; round < 2; ++round)
  {
    Eigen::MatrixXd R = Bc - A * X;
    X.bottomRows(n - 1) += ldlt.solve(R.bottomRows(n - 1));
  }
  for (Eigen::Index c = 0; c < X.cols(); ++c)
  {
    X.col(c).array() -= X.col(c).mean();
  }
  return X;
}

Eigen::MatrixXd solve_constant_kernel(const SparseMatrix &A, const Eigen::MatrixXd &B,
                                      const SolverOptions &opts, SolveInfo *info)
{
  const auto n = static_cast<std::size_t>(A.rows());
  const bool direct = opts.kind == SolverKind::Direct ||
                      (opts.kind == SolverKind::Auto && n <= opts.direct_threshold);
  SolveInfo local;
  Eigen::MatrixXd X(A.rows(), B.cols());
  if (direct)
  {
    X = pinned_direct_solve(A, B);
    local.direct = true;
    for (Eigen::Index c = 0; c < B.cols(); ++c)
    {
      Eigen::VectorXd b = B.col(c);
      remove_mean(b);
      const double bn = b.norm();
      Eigen::VectorXd r = b - A * X.col(c);
      remove_mean(r);
      const double rel = bn > 0.0 ? r.norm() / bn : r.norm();
      local.rel_residual = std::max(local.rel_residual, rel);
    }
    if (local.rel_residual > opts.rel_tol)
    {
      throw SolverError("direct solve left relative residual " +
                          std::to_string(local.rel_residual),
                        local.rel_residual, 0);
    }
  }
  else
  {
    for (Eigen::Index c = 0; c < B.cols(); ++c)
    {
      SolveInfo ci;
      X.col(c) = deflated_pcg(A, B.col(c), opts.rel_tol, opts.max_iterations, &ci);
      local.iterations += ci.iterations;
      local.rel_residual = std::max(local.rel_residual, ci.rel_residual);
    }
  }
  if (info)
  {
    *info = local;
  }
  return X;
}

Eigen::VectorXd solve_constant_kernel(const SparseMatrix &A, const Eigen::VectorXd &b,
                                      const SolverOptions &opts, SolveInfo *info)
{
  Eigen::MatrixXd B = b;
  return solve_constant_kernel(A, B, opts, info).col(0);
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)> &body)
{
  const std::size_t workers =
    std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, threads)));
  if (workers <= 1)
  {
    for (std::size_t i = 0; i < n; ++i)
    {
      body(i);
    }
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w)
  {
    pool.emplace_back(
      [&]()
      {
        for (;;)
        {
          const std::size_t i = next.fetch_add(1);
          if (i >= n)
          {
            return;
          }
          try
          {
            body(i);
          }
          catch (...)
          {
            std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure)
            {
              failure = std::current_exception();
            }
            next = n;
          }
        }
      });
  }
  for (auto &t : pool)
  {
    t.join();
  }
  if (failure)
  {
    std::rethrow_exception(failure);
  }
}

}  // namespace qph
