// Copyright 2026 The qphomog Authors
// SPDX-License-Identifier: Apache-2.0

#include "qph/tensor_space.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/QR>
#include <Eigen/SVD>

namespace qph
{

void TensorField::add_term(Eigen::VectorXd m, Eigen::VectorXd y)
{
  if (m.size() != grid.cell_count() || y.size() != grid.cell.node_count())
  {
    throw Error("tensor term shape does not match the grid");
  }
  meso.push_back(std::move(m));
  micro.push_back(std::move(y));
}

Eigen::MatrixXd TensorField::to_matrix() const
{
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(grid.cell_count(), grid.cell.node_count());
  for (int n = 0; n < rank(); ++n)
  {
    M.noalias() += meso[static_cast<std::size_t>(n)] * micro[static_cast<std::size_t>(n)].transpose();
  }
  return M;
}

Eigen::VectorXd TensorField::evaluate_cell(int cell) const
{
  if (cell < 0 || cell >= grid.cell_count())
  {
    throw Error("cell index out of range");
  }
  Eigen::VectorXd v = Eigen::VectorXd::Zero(grid.cell.node_count());
  for (int n = 0; n < rank(); ++n)
  {
    v += meso[static_cast<std::size_t>(n)][cell] * micro[static_cast<std::size_t>(n)];
  }
  return v;
}

double TensorField::norm() const
{
  // ||A B^T||_F = ||R_A R_B^T||_F with thin QR of both factor matrices; the
  // Gram-sum formula loses everything to cancellation when terms nearly cancel
  const int r = rank();
  if (r == 0)
  {
    return 0.0;
  }
  if (r == 1)
  {
    return meso[0].norm() * micro[0].norm();
  }
  Eigen::MatrixXd A(meso[0].size(), r), B(micro[0].size(), r);
  for (int n = 0; n < r; ++n)
  {
    A.col(n) = meso[static_cast<std::size_t>(n)];
    B.col(n) = micro[static_cast<std::size_t>(n)];
  }
  auto thin_r = [](const Eigen::MatrixXd &M) -> Eigen::MatrixXd {
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(M);
    const Eigen::Index k = std::min(M.rows(), M.cols());
    return qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  };
  return (thin_r(A) * thin_r(B).transpose()).norm();
}

TensorField TensorField::scaled(double s) const
{
  TensorField out = *this;
  for (auto &m : out.meso)
  {
    m *= s;
  }
  return out;
}

TensorField zero_tensor(const MesoGrid &grid)
{
  return TensorField{grid, {}, {}};
}

TensorField operator+(const TensorField &a, const TensorField &b)
{
  if (!(a.grid == b.grid))
  {
    throw Error("cannot add tensor fields on different grids");
  }
  TensorField out = a;
  out.meso.insert(out.meso.end(), b.meso.begin(), b.meso.end());
  out.micro.insert(out.micro.end(), b.micro.begin(), b.micro.end());
  return out;
}

TensorField upsilon_decompose(const MesoGrid &grid, const Eigen::MatrixXd &cell_fields)
{
  if (cell_fields.rows() != grid.cell_count() || cell_fields.cols() != grid.cell.node_count())
  {
    throw Error("cell field matrix shape does not match the grid");
  }
  TensorField t = zero_tensor(grid);
  for (int i = 0; i < grid.cell_count(); ++i)
  {
    t.add_term(Eigen::VectorXd::Unit(grid.cell_count(), i), cell_fields.row(i).transpose());
  }
  return t;
}

namespace
{

// Number of leading singular values to keep so the tail mass is <= budget.
int truncation_rank(const Eigen::VectorXd &sv, double budget)
{
  int k = static_cast<int>(sv.size());
  double tail = 0.0;
  while (k > 0)
  {
    const double next = tail + sv[k - 1] * sv[k - 1];
    if (std::sqrt(next) > budget)
    {
      break;
    }
    tail = next;
    --k;
  }
  return k;
}

}  // namespace

TensorField svd_truncate(const TensorField &t, double tol)
{
  if (tol < 0.0 || std::isnan(tol))
  {
    throw Error("truncation tolerance must be non-negative");
  }
  TensorField out = zero_tensor(t.grid);
  const int r = t.rank();
  if (r == 0 || std::isinf(tol))
  {
    return out;
  }
  Eigen::MatrixXd A(t.grid.cell_count(), r), B(t.grid.cell.node_count(), r);
  for (int n = 0; n < r; ++n)
  {
    A.col(n) = t.meso[static_cast<std::size_t>(n)];
    B.col(n) = t.micro[static_cast<std::size_t>(n)];
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qa(A), qb(B);
  const int ka = static_cast<int>(std::min(A.rows(), A.cols()));
  const int kb = static_cast<int>(std::min(B.rows(), B.cols()));
  const Eigen::MatrixXd Ra = qa.matrixQR().topRows(ka).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd Rb = qb.matrixQR().topRows(kb).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd core = Ra * Rb.transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(core, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd sv = svd.singularValues();
  const double total = sv.norm();
  if (total == 0.0)
  {
    return out;
  }
  int k = truncation_rank(sv, tol * total);
  if (tol == 0.0)
  {
    // drop exact zeros up to roundoff of the factorisation
    k = 0;
    while (k < sv.size() && sv[k] > 1e-13 * sv[0])
    {
      ++k;
    }
  }
  const Eigen::MatrixXd Qa = qa.householderQ() * Eigen::MatrixXd::Identity(A.rows(), ka);
  const Eigen::MatrixXd Qb = qb.householderQ() * Eigen::MatrixXd::Identity(B.rows(), kb);
  const Eigen::MatrixXd U = Qa * svd.matrixU();
  const Eigen::MatrixXd V = Qb * svd.matrixV();
  for (int n = 0; n < k; ++n)
  {
    out.add_term(sv[n] * U.col(n), V.col(n));
  }
  return out;
}

TensorField matrix_to_tensor(const MesoGrid &grid, const Eigen::MatrixXd &M, double tol)
{
  if (M.rows() != grid.cell_count() || M.cols() != grid.cell.node_count())
  {
    throw Error("matrix shape does not match the grid");
  }
  TensorField out = zero_tensor(grid);
  Eigen::BDCSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd sv = svd.singularValues();
  if (sv.size() == 0 || sv[0] == 0.0)
  {
    return out;
  }
  int k = truncation_rank(sv, tol * sv.norm());
  if (tol == 0.0)
  {
    k = 0;
    while (k < sv.size() && sv[k] > 1e-13 * sv[0])
    {
      ++k;
    }
  }
  for (int n = 0; n < k; ++n)
  {
    out.add_term(sv[n] * svd.matrixU().col(n), svd.matrixV().col(n));
  }
  return out;
}

Sym2 LowRankConductivity::at(int cell, int element) const
{
  Sym2 s;
  for (const auto &t : terms)
  {
    s += t.micro[element] * t.meso[static_cast<std::size_t>(cell)];
  }
  return s;
}

ConductivityField LowRankConductivity::evaluate() const
{
  ConductivityField K = make_conductivity(grid);
  const int ne = grid.cell.element_count();
  for (const auto &t : terms)
  {
    if (static_cast<int>(t.meso.size()) != grid.cell_count() || t.micro.size() != ne)
    {
      throw Error("conductivity term shape does not match the grid");
    }
  }
  for (int c = 0; c < grid.cell_count(); ++c)
  {
    for (int e = 0; e < ne; ++e)
    {
      K.at(c, e) = at(c, e);
    }
  }
  return K;
}

void LowRankConductivity::validate() const
{
  const ConductivityField K = evaluate();
  for (int c = 0; c < grid.cell_count(); ++c)
  {
    for (int e = 0; e < grid.cell.element_count(); ++e)
    {
      if (!K.at(c, e).is_spd())
      {
        throw Error("conductivity is not positive definite at cell " + std::to_string(c) +
                    ", element " + std::to_string(e));
      }
    }
  }
}

LowRankConductivity periodic_conductivity(const MesoGrid &grid, const ElementConductivity &cell_k)
{
  check_conductivity(grid.cell, cell_k);
  const int ne = grid.cell.element_count();
  const auto nc = static_cast<std::size_t>(grid.cell_count());
  LowRankConductivity K{grid, {}, 0.0, 0.0};
  bool isotropic = true;
  for (const auto &k : cell_k)
  {
    isotropic = isotropic && k.xy == 0.0 && k.xx == k.yy;
  }
  if (isotropic)
  {
    Eigen::VectorXd micro(ne);
    for (int e = 0; e < ne; ++e)
    {
      micro[e] = cell_k[static_cast<std::size_t>(e)].xx;
    }
    K.terms.push_back({std::vector<Sym2>(nc, Sym2::iso(1.0)), micro});
  }
  else
  {
    const Sym2 unit[3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    for (int comp = 0; comp < 3; ++comp)
    {
      Eigen::VectorXd micro(ne);
      for (int e = 0; e < ne; ++e)
      {
        const Sym2 &k = cell_k[static_cast<std::size_t>(e)];
        micro[e] = comp == 0 ? k.xx : (comp == 1 ? k.xy : k.yy);
      }
      if (micro.cwiseAbs().maxCoeff() > 0.0)
      {
        K.terms.push_back({std::vector<Sym2>(nc, unit[comp]), micro});
      }
    }
  }
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto &k : cell_k)
  {
    lo = std::min(lo, k.min_eig());
    hi = std::max(hi, k.max_eig());
  }
  K.alpha = lo;
  K.beta = hi;
  return K;
}

LowRankConductivity upsilon_conductivity(const ConductivityField &K)
{
  const MesoGrid &g = K.grid;
  const int ne = g.cell.element_count();
  LowRankConductivity out{g, {}, K.min_eig(), K.max_eig()};
  const Sym2 unit[3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  for (int c = 0; c < g.cell_count(); ++c)
  {
    const auto cv = K.cell_values(c);
    bool isotropic = true;
    for (const auto &k : cv)
    {
      isotropic = isotropic && k.xy == 0.0 && k.xx == k.yy;
    }
    for (int comp = 0; comp < (isotropic ? 1 : 3); ++comp)
    {
      std::vector<Sym2> meso(static_cast<std::size_t>(g.cell_count()));
      meso[static_cast<std::size_t>(c)] = isotropic ? Sym2::iso(1.0) : unit[comp];
      Eigen::VectorXd micro(ne);
      for (int e = 0; e < ne; ++e)
      {
        const Sym2 &k = cv[static_cast<std::size_t>(e)];
        micro[e] = (isotropic || comp == 0) ? k.xx : (comp == 1 ? k.xy : k.yy);
      }
      out.terms.push_back({std::move(meso), std::move(micro)});
    }
  }
  return out;
}

Vec2 DriveField::at(int cell, int element) const
{
  Vec2 v = Vec2::Zero();
  for (const auto &t : terms)
  {
    v += t.micro[element] * t.meso[static_cast<std::size_t>(cell)];
  }
  return v;
}

std::vector<Vec2> DriveField::evaluate(const MesoGrid &grid) const
{
  const int ne = grid.cell.element_count();
  std::vector<Vec2> out(static_cast<std::size_t>(grid.cell_count() * ne));
  for (int c = 0; c < grid.cell_count(); ++c)
  {
    for (int e = 0; e < ne; ++e)
    {
      out[static_cast<std::size_t>(c * ne + e)] = at(c, e);
    }
  }
  return out;
}

DriveField unit_drive_field(const MesoGrid &grid, Axis dir)
{
  Vec2 e = Vec2::Zero();
  e[checked_axis(dir)] = 1.0;
  return DriveField{{DriveTerm{std::vector<Vec2>(static_cast<std::size_t>(grid.cell_count()), e),
                               Eigen::VectorXd::Ones(grid.cell.element_count())}}};
}

}  // namespace qph
