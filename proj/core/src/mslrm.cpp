// Copyright 2026 The qphomog Authors
// SPDX-License-Identifier: Apache-2.0

#include "qph/mslrm.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>

#include <Eigen/SparseCholesky>
#include <nlohmann/json.hpp>

namespace qph
{

ModesLibrary::ModesLibrary(const CellMesh &mesh, double admission_tol)
  : mesh_(mesh), admission_tol_(admission_tol)
{
}

int ModesLibrary::try_add(const Eigen::VectorXd &candidate, int sample_index)
{
  if (candidate.size() != mesh_.node_count())
  {
    throw Error("mode size does not match the library mesh");
  }
  const double original = candidate.norm();
  if (!(original > 0.0) || !std::isfinite(original))
  {
    return -1;
  }
  Eigen::VectorXd v = candidate;
  // two passes of modified Gram-Schmidt against constant + modes
  for (int pass = 0; pass < 2; ++pass)
  {
    v.array() -= v.mean();
    for (const auto &q : modes_)
    {
      v -= q.dot(v) * q;
    }
  }
  const double remaining = v.norm();
  if (remaining < admission_tol_ * original)
  {
    return -1;
  }
  modes_.push_back(v / remaining);
  created_at_.push_back(sample_index);
  return size() - 1;
}

Eigen::MatrixXd ModesLibrary::basis() const
{
  const int n = mesh_.node_count();
  Eigen::MatrixXd B(n, 1 + size());
  B.col(0).setConstant(1.0 / std::sqrt(static_cast<double>(n)));
  for (int k = 0; k < size(); ++k)
  {
    B.col(1 + k) = modes_[static_cast<std::size_t>(k)];
  }
  return B;
}

double ModesLibrary::orthonormality_defect() const
{
  const Eigen::MatrixXd B = basis();
  const Eigen::MatrixXd G = B.transpose() * B;
  return (G - Eigen::MatrixXd::Identity(G.rows(), G.cols())).cwiseAbs().maxCoeff();
}

const std::vector<Eigen::MatrixXd> &ModesLibrary::applied(const SwipOperator &op) const
{
  const Eigen::Index k = 1 + size();
  if (cache_key_ != op.id || cache_op_ != &op || cache_.size() != op.blocks.size())
  {
    cache_.clear();
    cache_key_ = op.id;
    cache_op_ = &op;
    const Eigen::MatrixXd B = basis();
    for (const auto &b : op.blocks)
    {
      cache_.push_back(b.micro * B);
    }
    return cache_;
  }
  const Eigen::Index have = cache_.empty() ? k : cache_.front().cols();
  if (have < k)
  {
    const Eigen::MatrixXd B = basis();
    for (std::size_t t = 0; t < op.blocks.size(); ++t)
    {
      Eigen::MatrixXd grown(B.rows(), k);
      grown.leftCols(have) = cache_[t];
      grown.rightCols(k - have) = op.blocks[t].micro * B.rightCols(k - have);
      cache_[t] = std::move(grown);
    }
  }
  return cache_;
}

void ModesLibrary::save(const std::string &path) const
{
  nlohmann::json j;
  j["format"] = "qphomog-modes";
  j["version"] = 1;
  j["mesh"] = {{"nx", mesh_.nx}, {"ny", mesh_.ny}, {"lx", mesh_.lx}, {"ly", mesh_.ly}};
  j["admission_tol"] = admission_tol_;
  j["modes"] = nlohmann::json::array();
  for (int k = 0; k < size(); ++k)
  {
    const auto &m = modes_[static_cast<std::size_t>(k)];
    j["modes"].push_back(
      {{"created_at", created_at_[static_cast<std::size_t>(k)]},
       {"values", std::vector<double>(m.data(), m.data() + m.size())}});
  }
  std::ofstream out(path);
  if (!out)
  {
    throw Error("cannot write modes library to " + path);
  }
  out << j.dump() << '\n';
}

ModesLibrary ModesLibrary::load(const std::string &path)
{
  std::ifstream in(path);
  if (!in)
  {
    throw Error("cannot read modes library from " + path);
  }
  nlohmann::json j;
  try
  {
    in >> j;
  }
  catch (const nlohmann::json::exception &e)
  {
    throw Error("malformed modes library " + path + ": " + e.what());
  }
  if (j.value("format", "") != "qphomog-modes")
  {
    throw Error(path + " is not a modes library");
  }
  const auto &mj = j.at("mesh");
  ModesLibrary lib(build_cell_mesh(mj.at("nx"), mj.at("ny"), mj.at("lx"), mj.at("ly")),
                   j.value("admission_tol", 1e-8));
  for (const auto &entry : j.at("modes"))
  {
    const auto values = entry.at("values").get<std::vector<double>>();
    if (static_cast<int>(values.size()) != lib.mesh_.node_count())
    {
      throw Error("mode length does not match the stored mesh in " + path);
    }
    lib.modes_.push_back(Eigen::Map<const Eigen::VectorXd>(values.data(),
                                                           static_cast<Eigen::Index>(values.size())));
    lib.created_at_.push_back(entry.value("created_at", 0));
  }
  return lib;
}

namespace
{

using Clock = std::chrono::steady_clock;

// Solves (A + tau I) x = b with tau relative to the largest diagonal entry.
Eigen::VectorXd regularized_solve(SparseMatrix A, const Eigen::VectorXd &b, double rel_reg)
{
  const double dmax = A.diagonal().cwiseAbs().maxCoeff();
  const double tau = rel_reg * (dmax > 0.0 ? dmax : 1.0);
  for (Eigen::Index i = 0; i < A.rows(); ++i)
  {
    A.coeffRef(i, i) += tau;
  }
  Eigen::SimplicialLDLT<SparseMatrix> ldlt(A);
  if (ldlt.info() != Eigen::Success)
  {
    throw Error("rank-one subproblem factorisation failed");
  }
  return ldlt.solve(b);
}

double rank_one_energy(const SwipOperator &op, const Eigen::MatrixXd &R, const Eigen::VectorXd &s,
                       const Eigen::VectorXd &phi)
{
  double quad = 0.0;
  for (const auto &b : op.blocks)
  {
    quad += s.dot(b.meso * s) * phi.dot(b.micro * phi);
  }
  return 0.5 * quad - s.dot(R * phi);
}

// ||a b^T - c d^T||_F
double outer_distance(const Eigen::VectorXd &a, const Eigen::VectorXd &b, const Eigen::VectorXd &c,
                      const Eigen::VectorXd &d)
{
  const double v = a.squaredNorm() * b.squaredNorm() + c.squaredNorm() * d.squaredNorm() -
                   2.0 * a.dot(c) * b.dot(d);
  return std::sqrt(std::max(v, 0.0));
}

Eigen::VectorXd dominant_right_vector(const Eigen::MatrixXd &R)
{
  Eigen::Index row = 0;
  R.rowwise().squaredNorm().maxCoeff(&row);
  Eigen::VectorXd v = R.row(row).transpose();
  if (v.norm() == 0.0)
  {
    v.setOnes();
  }
  v.normalize();
  for (int it = 0; it < 100; ++it)
  {
    Eigen::VectorXd w = R.transpose() * (R * v);
    const double n = w.norm();
    if (n == 0.0)
    {
      break;
    }
    w /= n;
    const double change = (w - v).norm();
    v = w;
    if (change < 1e-10)
    {
      break;
    }
  }
  return v;
}

// Reduced operator sum_t M_t (x) (B^T m_t B), unknown ordered (cell, mode).
SparseMatrix reduced_operator(const SwipOperator &op, const std::vector<Eigen::MatrixXd> &applied,
                              const Eigen::MatrixXd &B)
{
  const int k = static_cast<int>(B.cols());
  const int nc = op.grid.cell_count();
  std::vector<Triplet> trip;
  std::size_t est = 0;
  for (const auto &b : op.blocks)
  {
    est += static_cast<std::size_t>(b.meso.nonZeros()) * static_cast<std::size_t>(k * k);
  }
  trip.reserve(est);
  for (std::size_t t = 0; t < op.blocks.size(); ++t)
  {
    const Eigen::MatrixXd r = B.transpose() * applied[t];
    const SparseMatrix &M = op.blocks[t].meso;
    for (int col = 0; col < M.outerSize(); ++col)
    {
      for (SparseMatrix::InnerIterator it(M, col); it; ++it)
      {
        const int i = static_cast<int>(it.row()), j = static_cast<int>(it.col());
        for (int a = 0; a < k; ++a)
        {
          for (int b = 0; b < k; ++b)
          {
            const double v = it.value() * r(a, b);
            if (v != 0.0)
            {
              trip.emplace_back(i * k + a, j * k + b, v);
            }
          }
        }
      }
    }
  }
  SparseMatrix A(nc * k, nc * k);
  A.setFromTriplets(trip.begin(), trip.end());
  return A;
}

Eigen::MatrixXd apply_projected(const SwipOperator &op, const std::vector<Eigen::MatrixXd> &applied,
                                const Eigen::MatrixXd &S)
{
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(S.rows(), applied.front().rows());
  for (std::size_t t = 0; t < op.blocks.size(); ++t)
  {
    const Eigen::MatrixXd MS = op.blocks[t].meso * S;
    out.noalias() += MS * applied[t].transpose();
  }
  return out;
}

double relative_residual(const Eigen::MatrixXd &F, const Eigen::MatrixXd &AW)
{
  const double fn = F.norm();
  const double rn = (F - AW).norm();
  if (fn == 0.0)
  {
    return rn == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  }
  return rn / fn;
}

int field_rank(const Eigen::MatrixXd &S)
{
  const double top = S.colwise().norm().maxCoeff();
  int r = 0;
  for (Eigen::Index c = 0; c < S.cols(); ++c)
  {
    if (S.col(c).norm() > 1e-12 * top && top > 0.0)
    {
      ++r;
    }
  }
  return r;
}

TensorField field_from(const MesoGrid &grid, const Eigen::MatrixXd &S, const Eigen::MatrixXd &B)
{
  TensorField t = zero_tensor(grid);
  const double top = S.size() ? S.colwise().norm().maxCoeff() : 0.0;
  for (Eigen::Index c = 0; c < S.cols(); ++c)
  {
    if (top > 0.0 && S.col(c).norm() > 1e-12 * top)
    {
      t.add_term(S.col(c), B.col(c));
    }
  }
  return t;
}

std::size_t memory_estimate(const SwipOperator &op, const ModesLibrary &lib)
{
  const std::size_t k = static_cast<std::size_t>(1 + lib.size());
  const std::size_t nc = static_cast<std::size_t>(op.grid.cell_count());
  const std::size_t n = static_cast<std::size_t>(op.grid.cell.node_count());
  std::size_t meso_nnz = 0;
  for (const auto &b : op.blocks)
  {
    meso_nnz += static_cast<std::size_t>(b.meso.nonZeros());
  }
  // reduced matrix + factor (roughly twice) + cached applications + dense fields
  return 2 * meso_nnz * k * k * 16 + op.blocks.size() * n * k * 8 + 4 * nc * n * 8;
}

}  // namespace

AlsResult als_rank_one(const SwipOperator &op, const Eigen::MatrixXd &R, const AlsOptions &opts)
{
  const int nc = op.grid.cell_count();
  const int n = op.grid.cell.node_count();
  if (R.rows() != nc || R.cols() != n)
  {
    throw Error("residual shape does not match the operator grid");
  }
  if (R.norm() == 0.0)
  {
    throw Error("rank-one enrichment requested for a zero residual");
  }
  AlsResult res;
  Eigen::VectorXd phi = dominant_right_vector(R);
  Eigen::VectorXd s = Eigen::VectorXd::Ones(nc);
  double best_energy = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_s, best_phi;
  for (int sweep = 0; sweep < opts.max_sweeps; ++sweep)
  {
    const Eigen::VectorXd s_old = s, phi_old = phi;
    // fixed meso factor: micro system
    {
      SparseMatrix A(n, n);
      for (const auto &b : op.blocks)
      {
        const double w = s.dot(b.meso * s);
        if (w != 0.0)
        {
          A += w * b.micro;
        }
      }
      phi = regularized_solve(A, R.transpose() * s, opts.regularization);
      const double pn = phi.norm();
      if (pn == 0.0)
      {
        break;
      }
      phi /= pn;
    }
    // fixed micro factor: meso system
    {
      SparseMatrix A(nc, nc);
      for (const auto &b : op.blocks)
      {
        const double w = phi.dot(b.micro * phi);
        if (w != 0.0)
        {
          A += w * b.meso;
        }
      }
      s = regularized_solve(A, R * phi, opts.regularization);
    }
    const double energy = rank_one_energy(op, R, s, phi);
    res.energy.push_back(energy);
    res.sweeps = sweep + 1;
    if (energy < best_energy)
    {
      best_energy = energy;
      best_s = s;
      best_phi = phi;
    }
    else if (energy > best_energy + 1e-12 * std::abs(best_energy))
    {
      res.stagnated = true;
      break;
    }
    const double scale = s.norm() * phi.norm();
    if (sweep > 0 && outer_distance(s, phi, s_old, phi_old) < opts.rel_tol * scale)
    {
      break;
    }
  }
  if (best_s.size() == 0)
  {
    res.stagnated = true;
    best_s = s;
    best_phi = phi;
  }
  res.meso = best_s;
  res.micro = best_phi;
  return res;
}

ProjectionResult galerkin_project(const SwipOperator &op, const Eigen::MatrixXd &F,
                                  const ModesLibrary &library)
{
  const int nc = op.grid.cell_count();
  if (!(library.mesh() == op.grid.cell))
  {
    throw Error("library mesh does not match the operator cell mesh");
  }
  const Eigen::MatrixXd B = library.basis();
  const int k = static_cast<int>(B.cols());
  const auto &applied = library.applied(op);
  const SparseMatrix A = reduced_operator(op, applied, B);
  const Eigen::MatrixXd Fr = F * B;  // nc x k
  Eigen::VectorXd rhs(nc * k);
  for (int i = 0; i < nc; ++i)
  {
    for (int a = 0; a < k; ++a)
    {
      rhs[i * k + a] = Fr(i, a);
    }
  }
  // the global constant (mode 0 equal in every cell) spans the kernel; pin
  // the first unknown and restore zero mean afterwards
  std::vector<Triplet> trip;
  trip.reserve(static_cast<std::size_t>(A.nonZeros()));
  for (int c = 0; c < A.outerSize(); ++c)
  {
    for (SparseMatrix::InnerIterator it(A, c); it; ++it)
    {
      if (it.row() > 0 && it.col() > 0)
      {
        trip.emplace_back(static_cast<int>(it.row() - 1), static_cast<int>(it.col() - 1), it.value());
      }
    }
  }
  const int m = nc * k - 1;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(nc * k);
  if (m > 0)
  {
    SparseMatrix Ar(m, m);
    Ar.setFromTriplets(trip.begin(), trip.end());
    Eigen::SimplicialLDLT<SparseMatrix> ldlt(Ar);
    if (ldlt.info() != Eigen::Success)
    {
      throw Error("reduced system factorisation failed");
    }
    const Eigen::VectorXd D = ldlt.vectorD();
    const double dmax = D.cwiseAbs().maxCoeff();
    for (Eigen::Index j = 0; j < D.size(); ++j)
    {
      if (!(D[j] > 1e-14 * dmax))
      {
        // undo the fill-reducing permutation to name the unknown
        const Eigen::Index orig = ldlt.permutationPinv().indices()[j] + 1;
        throw Error("singular reduced system: dependent mode " +
                    std::to_string(static_cast<int>(orig % k)) + " (0 is the constant)");
      }
    }
    x.tail(m) = ldlt.solve(rhs.tail(m));
  }
  Eigen::MatrixXd S(nc, k);
  for (int i = 0; i < nc; ++i)
  {
    for (int a = 0; a < k; ++a)
    {
      S(i, a) = x[i * k + a];
    }
  }
  S.col(0).array() -= S.col(0).mean();
  ProjectionResult out;
  out.coefficients = S;
  out.field = S * B.transpose();
  out.residual = relative_residual(F, apply_projected(op, applied, S));
  return out;
}

GreedyResult greedy_solve(const SwipOperator &op, const TensorField &rhs, double epsilon,
                          ModesLibrary &library, const GreedyOptions &opts, int sample_index)
{
  const auto t0 = Clock::now();
  if (!(epsilon > 0.0))
  {
    throw Error("greedy tolerance must be positive");
  }
  if (!(library.mesh() == op.grid.cell))
  {
    throw Error("library mesh does not match the operator cell mesh");
  }
  const int nc = op.grid.cell_count();
  const int n = op.grid.cell.node_count();
  const Eigen::MatrixXd F = rhs.to_matrix();
  GreedyResult result{zero_tensor(op.grid), Eigen::MatrixXd::Zero(nc, n), {}};
  SolveReport &rep = result.report;
  auto finish = [&]()
  {
    rep.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    return result;
  };
  if (F.norm() == 0.0)
  {
    rep.residual = 0.0;
    rep.recycled = true;
    return finish();
  }

  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(nc, n);
  Eigen::MatrixXd S;
  double residual = 1.0;
  bool projected = false;
  if (!library.empty())
  {
    ProjectionResult p = galerkin_project(op, F, library);
    W = p.field;
    S = p.coefficients;
    residual = p.residual;
    projected = true;
    if (residual <= epsilon)
    {
      rep.recycled = true;
      rep.residual = residual;
      rep.rank = field_rank(S);
      result.values = W;
      result.field = field_from(op.grid, S, library.basis());
      return finish();
    }
  }

  int stalled = 0;
  double best = residual;
  // the first solve of an empty library always builds at least one mode
  while (rep.greedy_iterations == 0 || residual > epsilon)
  {
    if (1 + library.size() > opts.max_rank && opts.update)
    {
      rep.success = false;
      rep.failure = "rank cap " + std::to_string(opts.max_rank) + " reached";
      break;
    }
    if (!opts.update && rep.greedy_iterations >= opts.max_rank)
    {
      rep.success = false;
      rep.failure = "rank cap " + std::to_string(opts.max_rank) + " reached";
      break;
    }
    if (opts.memory_budget_bytes > 0 && memory_estimate(op, library) > opts.memory_budget_bytes)
    {
      rep.success = false;
      rep.failure = "memory budget exceeded";
      break;
    }
    const Eigen::MatrixXd R = F - op.apply(W);
    if (R.norm() == 0.0)
    {
      residual = 0.0;
      break;
    }
    const AlsResult als = als_rank_one(op, R, opts.als);
    rep.als_sweeps.push_back(als.sweeps);
    rep.als_warning = rep.als_warning || als.stagnated;
    int idx = library.try_add(als.micro, sample_index);
    if (idx < 0 && opts.update)
    {
      // ALS landed inside the current span; fall back to the dominant micro
      // direction of the residual itself
      idx = library.try_add(dominant_right_vector(R), sample_index);
    }
    if (idx >= 0)
    {
      ++rep.modes_added;
    }
    ++rep.greedy_iterations;
    if (opts.update)
    {
      if (idx < 0)
      {
        rep.success = false;
        rep.failure = "enrichment produced a mode already in the library span";
        break;
      }
      // Galerkin in the enlarged space is energy-optimal even when the
      // residual norm goes up, so the update is always taken
      ProjectionResult p = galerkin_project(op, F, library);
      W = p.field;
      S = p.coefficients;
      residual = p.residual;
    }
    else
    {
      const Eigen::MatrixXd Wn = W + als.meso * als.micro.transpose();
      const double next = residual_norm(op, F, Wn);
      if (next <= residual || !projected)
      {
        W = Wn;
        residual = next;
      }
    }
    projected = true;
    if (residual < best)
    {
      best = residual;
      stalled = 0;
    }
    else if (++stalled >= opts.max_stall)
    {
      rep.success = false;
      rep.failure = "residual stopped decreasing";
      break;
    }
  }
  rep.residual = residual;
  if (residual > epsilon)
  {
    rep.success = false;
    if (rep.failure.empty())
    {
      rep.failure = "tolerance not reached";
    }
  }
  result.values = W;
  if (opts.update && S.size() > 0)
  {
    rep.rank = field_rank(S);
    result.field = field_from(op.grid, S, library.basis());
  }
  else
  {
    result.field = matrix_to_tensor(op.grid, W, 1e-14);
    rep.rank = result.field.rank();
  }
  return finish();
}

GreedyResult greedy_solve(const MesoGrid &grid, const LowRankConductivity &K, Axis dir,
                          double epsilon, ModesLibrary &library, const GreedyOptions &opts,
                          double penalty, int sample_index)
{
  const SwipOperator op = assemble_swip(grid, K, penalty);
  const TensorField rhs = assemble_rhs(grid, K, dir);
  return greedy_solve(op, rhs, epsilon, library, opts, sample_index);
}

}  // namespace qph
