// Copyright 2026 The qphomog Authors
// SPDX-License-Identifier: Apache-2.0

#include "qph/swip.hpp"

#include <atomic>
#include <cmath>
#include <limits>

#include <Eigen/SVD>

namespace qph
{

namespace
{

constexpr double kGaussPts[2] = {0.5 - 0.28867513459481287, 0.5 + 0.28867513459481287};
constexpr double kMergeTol = 1e-12;
constexpr double kCompressTol = 1e-14;

Eigen::Vector4d shape_values(double xi, double eta)
{
  return {(1 - xi) * (1 - eta), xi * (1 - eta), xi * eta, (1 - xi) * eta};
}

Eigen::Matrix<double, 4, 2> shape_grads(double xi, double eta, double hx, double hy)
{
  Eigen::Matrix<double, 4, 2> g;
  g << -(1 - eta) / hx, -(1 - xi) / hy, (1 - eta) / hx, -xi / hy, eta / hx, xi / hy, -eta / hx,
    (1 - xi) / hy;
  return g;
}

// Geometry of the cell-interface faces normal to one axis. Side 0 ("L") is
// the cell with the lower index along the axis, side 1 ("R") its neighbour;
// the normal points from L to R.
struct FaceFamily
{
  int axis;
  int nseg;
  double seg_len;
  double normal_h;
  std::vector<std::array<int, 2>> seg_elem;  // [s][side]

  // Reference coordinates of edge parameter t on side `side`.
  std::pair<double, double> ref_point(int side, double t) const
  {
    if (axis == 0)
    {
      return {side == 0 ? 1.0 : 0.0, t};
    }
    return {t, side == 0 ? 1.0 : 0.0};
  }
};

FaceFamily face_family(const CellMesh &m, int axis)
{
  FaceFamily f;
  f.axis = axis;
  f.nseg = axis == 0 ? m.ny : m.nx;
  f.seg_len = axis == 0 ? m.hy() : m.hx();
  f.normal_h = axis == 0 ? m.hx() : m.hy();
  f.seg_elem.resize(static_cast<std::size_t>(f.nseg));
  for (int s = 0; s < f.nseg; ++s)
  {
    if (axis == 0)
    {
      f.seg_elem[static_cast<std::size_t>(s)] = {m.element(m.nx - 1, s), m.element(0, s)};
    }
    else
    {
      f.seg_elem[static_cast<std::size_t>(s)] = {m.element(s, m.ny - 1), m.element(s, 0)};
    }
  }
  return f;
}

int face_cell(const MesoGrid &g, int axis, int f, int side)
{
  if (side == 0)
  {
    return f;
  }
  return axis == 0 ? g.right(f) : g.up(f);
}

double side_sign(int side) { return side == 0 ? 1.0 : -1.0; }

// Separated approximation C ~ sum_t beta_t gamma_t^T dropping singular
// values below kCompressTol * max.
std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> compress(const Eigen::MatrixXd &C)
{
  std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> out;
  if (C.size() == 0 || C.cwiseAbs().maxCoeff() == 0.0)
  {
    return out;
  }
  // exact rank-one shortcut: every row a multiple of the first nonzero row
  Eigen::Index pivot = 0;
  C.rowwise().norm().maxCoeff(&pivot);
  const Eigen::VectorXd prow = C.row(pivot).transpose();
  const double pn2 = prow.squaredNorm();
  Eigen::VectorXd coef = C * prow / pn2;
  if ((C - coef * prow.transpose()).cwiseAbs().maxCoeff() <= 1e-15 * C.cwiseAbs().maxCoeff())
  {
    out.emplace_back(coef, prow);
    return out;
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(C, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto &sv = svd.singularValues();
  for (Eigen::Index k = 0; k < sv.size(); ++k)
  {
    if (sv[k] <= kCompressTol * sv[0])
    {
      break;
    }
    out.emplace_back(sv[k] * svd.matrixU().col(k), svd.matrixV().col(k));
  }
  return out;
}

SparseMatrix diag_matrix(const Eigen::VectorXd &d)
{
  std::vector<Triplet> trip;
  for (Eigen::Index i = 0; i < d.size(); ++i)
  {
    if (d[i] != 0.0)
    {
      trip.emplace_back(static_cast<int>(i), static_cast<int>(i), d[i]);
    }
  }
  SparseMatrix M(d.size(), d.size());
  M.setFromTriplets(trip.begin(), trip.end());
  return M;
}

// Merges blocks whose meso matrices agree up to a scalar factor.
std::vector<SeparatedBlock> merge_blocks(std::vector<SeparatedBlock> in)
{
  struct Canon
  {
    SparseMatrix normalized;
    double scale;
  };
  std::vector<SeparatedBlock> out;
  std::vector<Canon> canon;
  for (auto &b : in)
  {
    b.meso.prune(0.0);
    b.meso.makeCompressed();
    b.micro.prune(0.0);
    b.micro.makeCompressed();
    if (b.meso.nonZeros() == 0 || b.micro.nonZeros() == 0)
    {
      continue;
    }
    const double scale = b.meso.valuePtr()[0];
    SparseMatrix normalized = b.meso / scale;
    bool merged = false;
    for (std::size_t k = 0; k < out.size(); ++k)
    {
      const SparseMatrix &ref = canon[k].normalized;
      if (ref.nonZeros() != normalized.nonZeros() || ref.rows() != normalized.rows())
      {
        continue;
      }
      const bool same_pattern =
        std::equal(ref.innerIndexPtr(), ref.innerIndexPtr() + ref.nonZeros(),
                   normalized.innerIndexPtr()) &&
        std::equal(ref.outerIndexPtr(), ref.outerIndexPtr() + ref.outerSize() + 1,
                   normalized.outerIndexPtr());
      if (!same_pattern)
      {
        continue;
      }
      double diff = 0.0;
      for (Eigen::Index j = 0; j < ref.nonZeros(); ++j)
      {
        diff = std::max(diff, std::abs(ref.valuePtr()[j] - normalized.valuePtr()[j]));
      }
      if (diff <= kMergeTol)
      {
        out[k].micro += (scale / canon[k].scale) * b.micro;
        merged = true;
        break;
      }
    }
    if (!merged)
    {
      canon.push_back({normalized, scale});
      out.push_back(std::move(b));
    }
  }
  for (auto &b : out)
  {
    b.micro.prune(0.0);
    b.micro.makeCompressed();
  }
  return out;
}

// Sum over segments of gamma(s) * local 4x4 matrices placed at the node
// pairs (test element, trial element).
SparseMatrix segment_sum(const CellMesh &m, const FaceFamily &ff, int trial_side, int test_side,
                         const Eigen::VectorXd &gamma,
                         const std::vector<Eigen::Matrix4d> &local)
{
  std::vector<Triplet> trip;
  trip.reserve(static_cast<std::size_t>(16 * ff.nseg));
  for (int s = 0; s < ff.nseg; ++s)
  {
    if (gamma[s] == 0.0)
    {
      continue;
    }
    const auto trial_nodes = m.element_nodes(ff.seg_elem[static_cast<std::size_t>(s)][static_cast<std::size_t>(trial_side)]);
    const auto test_nodes = m.element_nodes(ff.seg_elem[static_cast<std::size_t>(s)][static_cast<std::size_t>(test_side)]);
    const Eigen::Matrix4d &L = local[static_cast<std::size_t>(s)];
    for (int p = 0; p < 4; ++p)
    {
      for (int q = 0; q < 4; ++q)
      {
        if (L(p, q) != 0.0)
        {
          trip.emplace_back(test_nodes[p], trial_nodes[q], gamma[s] * L(p, q));
        }
      }
    }
  }
  SparseMatrix M(m.node_count(), m.node_count());
  M.setFromTriplets(trip.begin(), trip.end());
  return M;
}

// Meso coupling placing beta(f) at (cell_test(f), cell_trial(f)).
SparseMatrix face_coupling(const MesoGrid &g, int axis, int trial_side, int test_side,
                           const Eigen::VectorXd &beta)
{
  std::vector<Triplet> trip;
  for (int f = 0; f < g.cell_count(); ++f)
  {
    if (beta[f] != 0.0)
    {
      trip.emplace_back(face_cell(g, axis, f, test_side), face_cell(g, axis, f, trial_side),
                        beta[f]);
    }
  }
  SparseMatrix M(g.cell_count(), g.cell_count());
  M.setFromTriplets(trip.begin(), trip.end());
  return M;
}

// Local edge matrices on one segment: value(test) x d_c value(trial) and
// value(test) x value(trial), for each (trial side, test side).
struct EdgeLocal
{
  // flux[trial][test][c][s], mass[trial][test][s]
  std::array<std::array<std::array<std::vector<Eigen::Matrix4d>, 2>, 2>, 2> flux;
  std::array<std::array<std::vector<Eigen::Matrix4d>, 2>, 2> mass;
};

EdgeLocal edge_local(const CellMesh &m, const FaceFamily &ff)
{
  EdgeLocal el;
  for (int a = 0; a < 2; ++a)
  {
    for (int b = 0; b < 2; ++b)
    {
      el.mass[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)].assign(static_cast<std::size_t>(ff.nseg), Eigen::Matrix4d::Zero());
      for (int c = 0; c < 2; ++c)
      {
        el.flux[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)][static_cast<std::size_t>(c)].assign(static_cast<std::size_t>(ff.nseg), Eigen::Matrix4d::Zero());
      }
    }
  }
  // the local matrices do not depend on the segment on a uniform mesh
  Eigen::Matrix4d mass[2][2], flux[2][2][2];
  for (int a = 0; a < 2; ++a)
  {
    for (int b = 0; b < 2; ++b)
    {
      mass[a][b].setZero();
      flux[a][b][0].setZero();
      flux[a][b][1].setZero();
    }
  }
  for (double t : kGaussPts)
  {
    const double w = 0.5 * ff.seg_len;
    for (int trial = 0; trial < 2; ++trial)
    {
      const auto [xt, yt] = ff.ref_point(trial, t);
      const Eigen::Vector4d vt = shape_values(xt, yt);
      const auto gt = shape_grads(xt, yt, m.hx(), m.hy());
      for (int test = 0; test < 2; ++test)
      {
        const auto [xs, ys] = ff.ref_point(test, t);
        const Eigen::Vector4d vs = shape_values(xs, ys);
        mass[trial][test] += w * vs * vt.transpose();
        for (int c = 0; c < 2; ++c)
        {
          flux[trial][test][c] += w * vs * gt.col(c).transpose();
        }
      }
    }
  }
  for (int s = 0; s < ff.nseg; ++s)
  {
    const auto us = static_cast<std::size_t>(s);
    for (int a = 0; a < 2; ++a)
    {
      for (int b = 0; b < 2; ++b)
      {
        el.mass[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)][us] = mass[a][b];
        for (int c = 0; c < 2; ++c)
        {
          el.flux[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)][static_cast<std::size_t>(c)][us] = flux[a][b][c];
        }
      }
    }
  }
  return el;
}

// Weighted normal data on every (face, segment) for one face family.
struct FaceData
{
  Eigen::MatrixXd omega[2];   // weight of side
  Eigen::MatrixXd sigma;      // penalty coefficient
};

FaceData face_data(const MesoGrid &g, const LowRankConductivity &K, const FaceFamily &ff,
                   double penalty)
{
  const int nf = g.cell_count();
  FaceData fd;
  fd.omega[0].resize(nf, ff.nseg);
  fd.omega[1].resize(nf, ff.nseg);
  fd.sigma.resize(nf, ff.nseg);
  for (int f = 0; f < nf; ++f)
  {
    for (int s = 0; s < ff.nseg; ++s)
    {
      double dn[2];
      for (int side = 0; side < 2; ++side)
      {
        const Sym2 k = K.at(face_cell(g, ff.axis, f, side),
                            ff.seg_elem[static_cast<std::size_t>(s)][static_cast<std::size_t>(side)]);
        dn[side] = ff.axis == 0 ? k.xx : k.yy;
      }
      if (!(dn[0] > 0.0) || !(dn[1] > 0.0))
      {
        throw Error("conductivity is not positive definite on a cell interface");
      }
      const double sum = dn[0] + dn[1];
      fd.omega[0](f, s) = dn[1] / sum;
      fd.omega[1](f, s) = dn[0] / sum;
      fd.sigma(f, s) = penalty * (2.0 * dn[0] * dn[1] / sum) / ff.normal_h;
    }
  }
  return fd;
}

}  // namespace

SwipOperator assemble_swip(const MesoGrid &grid, const LowRankConductivity &K, double penalty)
{
  if (!(penalty > 0.0))
  {
    throw Error("penalty parameter must be positive");
  }
  if (!(grid == K.grid))
  {
    throw Error("conductivity belongs to a different grid");
  }
  K.validate();
  const CellMesh &m = grid.cell;
  const int ne = m.element_count();
  std::vector<SeparatedBlock> blocks;
  SwipStats stats;

  // volume terms, one block per (conductivity term, tensor component)
  const Sym2 unit[3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  for (const auto &t : K.terms)
  {
    for (int comp = 0; comp < 3; ++comp)
    {
      Eigen::VectorXd a(grid.cell_count());
      for (int i = 0; i < grid.cell_count(); ++i)
      {
        const Sym2 &s = t.meso[static_cast<std::size_t>(i)];
        a[i] = comp == 0 ? s.xx : (comp == 1 ? s.xy : s.yy);
      }
      if (a.cwiseAbs().maxCoeff() == 0.0 || t.micro.cwiseAbs().maxCoeff() == 0.0)
      {
        continue;
      }
      ElementConductivity weights(static_cast<std::size_t>(ne));
      for (int e = 0; e < ne; ++e)
      {
        weights[static_cast<std::size_t>(e)] = t.micro[e] * unit[comp];
      }
      blocks.push_back({diag_matrix(a), assemble_cell_stiffness(m, weights)});
      ++stats.volume_blocks;
    }
  }

  // interface terms
  for (int axis = 0; axis < 2; ++axis)
  {
    const FaceFamily ff = face_family(m, axis);
    const EdgeLocal el = edge_local(m, ff);
    const FaceData fd = face_data(grid, K, ff, penalty);
    for (int trial = 0; trial < 2; ++trial)
    {
      for (int c = 0; c < 2; ++c)
      {
        // kappa(f, s) = omega_S (K_S n)_c
        Eigen::MatrixXd kappa(grid.cell_count(), ff.nseg);
        for (int f = 0; f < grid.cell_count(); ++f)
        {
          const int cell = face_cell(grid, axis, f, trial);
          for (int s = 0; s < ff.nseg; ++s)
          {
            const Sym2 k = K.at(cell, ff.seg_elem[static_cast<std::size_t>(s)][static_cast<std::size_t>(trial)]);
            kappa(f, s) = fd.omega[trial](f, s) * k.component(axis, c);
          }
        }
        for (const auto &[beta, gamma] : compress(kappa))
        {
          for (int test = 0; test < 2; ++test)
          {
            const double sgn = -side_sign(test);
            SeparatedBlock b{face_coupling(grid, axis, trial, test, sgn * beta),
                             segment_sum(m, ff, trial, test, gamma,
                                         el.flux[static_cast<std::size_t>(trial)][static_cast<std::size_t>(test)][static_cast<std::size_t>(c)])};
            SparseMatrix mt = b.meso.transpose();
            SparseMatrix ut = b.micro.transpose();
            blocks.push_back(std::move(b));
            blocks.push_back({std::move(mt), std::move(ut)});
            stats.face_blocks += 2;
          }
        }
      }
    }
    for (const auto &[beta, gamma] : compress(fd.sigma))
    {
      for (int trial = 0; trial < 2; ++trial)
      {
        for (int test = 0; test < 2; ++test)
        {
          const double sgn = side_sign(trial) * side_sign(test);
          blocks.push_back({face_coupling(grid, axis, trial, test, sgn * beta),
                            segment_sum(m, ff, trial, test, gamma,
                                        el.mass[static_cast<std::size_t>(trial)][static_cast<std::size_t>(test)])});
          ++stats.face_blocks;
        }
      }
    }
  }
  SwipOperator op;
  op.grid = grid;
  op.penalty = penalty;
  static std::atomic<std::uint64_t> next_id{1};
  op.id = next_id.fetch_add(1);
  op.blocks = merge_blocks(std::move(blocks));
  stats.merged_blocks = static_cast<int>(op.blocks.size());
  op.stats = stats;
  return op;
}

Eigen::MatrixXd SwipOperator::apply(const Eigen::MatrixXd &W) const
{
  if (W.rows() != grid.cell_count() || W.cols() != grid.cell.node_count())
  {
    throw Error("operand shape does not match the operator grid");
  }
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(W.rows(), W.cols());
  Eigen::MatrixXd tmp(W.rows(), W.cols());
  for (const auto &b : blocks)
  {
    tmp.noalias() = W * b.micro.transpose();
    out.noalias() += b.meso * tmp;
  }
  return out;
}

TensorField assemble_rhs(const MesoGrid &grid, const LowRankConductivity &K,
                         const DriveField &drive)
{
  if (!(grid == K.grid))
  {
    throw Error("conductivity belongs to a different grid");
  }
  const CellMesh &m = grid.cell;
  const int ne = m.element_count();
  const int nc = grid.cell_count();
  const auto gi = element_gradient_integrals(m.hx(), m.hy());

  // sum of term magnitudes before cancellation, to tell round-off from signal
  double gross = 0.0;
  TensorField vol = zero_tensor(grid);
  for (const auto &kt : K.terms)
  {
    for (const auto &gt : drive.terms)
    {
      Eigen::VectorXd chi = kt.micro.cwiseProduct(gt.micro);
      if (chi.cwiseAbs().maxCoeff() == 0.0)
      {
        continue;
      }
      for (int c = 0; c < 2; ++c)
      {
        Eigen::VectorXd a(nc);
        for (int i = 0; i < nc; ++i)
        {
          a[i] = kt.meso[static_cast<std::size_t>(i)].apply(gt.meso[static_cast<std::size_t>(i)])[c];
        }
        if (a.cwiseAbs().maxCoeff() == 0.0)
        {
          continue;
        }
        Eigen::VectorXd L = Eigen::VectorXd::Zero(m.node_count());
        Eigen::VectorXd Labs = Eigen::VectorXd::Zero(m.node_count());
        for (int e = 0; e < ne; ++e)
        {
          const auto nodes = m.element_nodes(e);
          for (int p = 0; p < 4; ++p)
          {
            L[nodes[p]] -= chi[e] * gi(p, c);
            Labs[nodes[p]] += std::abs(chi[e] * gi(p, c));
          }
        }
        gross += a.norm() * Labs.norm();
        vol.add_term(a, L);
      }
    }
  }

  TensorField face = zero_tensor(grid);
  for (int axis = 0; axis < 2; ++axis)
  {
    const FaceFamily ff = face_family(m, axis);
    Eigen::MatrixXd psi(nc, ff.nseg);
    for (int f = 0; f < nc; ++f)
    {
      for (int s = 0; s < ff.nseg; ++s)
      {
        double dn[2], qn[2];
        for (int side = 0; side < 2; ++side)
        {
          const int cell = face_cell(grid, axis, f, side);
          const int e = ff.seg_elem[static_cast<std::size_t>(s)][static_cast<std::size_t>(side)];
          const Sym2 k = K.at(cell, e);
          dn[side] = axis == 0 ? k.xx : k.yy;
          qn[side] = k.apply(drive.at(cell, e))[axis];
        }
        psi(f, s) = (dn[1] * qn[0] + dn[0] * qn[1]) / (dn[0] + dn[1]);
      }
    }
    for (const auto &[beta, gamma] : compress(psi))
    {
      for (int side = 0; side < 2; ++side)
      {
        Eigen::VectorXd a = Eigen::VectorXd::Zero(nc);
        for (int f = 0; f < nc; ++f)
        {
          a[face_cell(grid, axis, f, side)] += side_sign(side) * beta[f];
        }
        Eigen::VectorXd y = Eigen::VectorXd::Zero(m.node_count());
        for (int s = 0; s < ff.nseg; ++s)
        {
          const auto nodes = m.element_nodes(ff.seg_elem[static_cast<std::size_t>(s)][static_cast<std::size_t>(side)]);
          const auto [x0, y0] = ff.ref_point(side, 0.0);
          const auto [x1, y1] = ff.ref_point(side, 1.0);
          const Eigen::Vector4d v0 = shape_values(x0, y0), v1 = shape_values(x1, y1);
          for (int p = 0; p < 4; ++p)
          {
            // trapezoid on the edge is exact for a linear trace
            y[nodes[p]] += gamma[s] * 0.5 * ff.seg_len * (v0[p] + v1[p]);
          }
        }
        gross += a.norm() * y.norm();
        face.add_term(a, y);
      }
    }
  }
  const double scale = gross;
  TensorField sum = vol + face;
  if (scale == 0.0)
  {
    return zero_tensor(grid);
  }
  const double total = sum.norm();
  if (total <= 1e-13 * scale)
  {
    return zero_tensor(grid);
  }
  return svd_truncate(sum, 1e-13 * scale / total);
}

TensorField assemble_rhs(const MesoGrid &grid, const LowRankConductivity &K, Axis dir)
{
  return assemble_rhs(grid, K, unit_drive_field(grid, dir));
}

double residual_norm(const SwipOperator &op, const Eigen::MatrixXd &F, const Eigen::MatrixXd &W)
{
  const double fn = F.norm();
  const double rn = (F - op.apply(W)).norm();
  if (fn == 0.0)
  {
    return rn == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  }
  return rn / fn;
}

double residual_norm(const SwipOperator &op, const TensorField &rhs, const TensorField &w)
{
  return residual_norm(op, rhs.to_matrix(), w.to_matrix());
}

Eigen::Matrix2d tensor_drive_flux(const LowRankConductivity &K,
                                  const std::array<DriveField, 2> &drives,
                                  const std::array<Eigen::MatrixXd, 2> &W)
{
  const MesoGrid &g = K.grid;
  const CellMesh &m = g.cell;
  const double hx = m.hx(), hy = m.hy(), area = hx * hy;
  Eigen::Matrix2d out = Eigen::Matrix2d::Zero();
  for (int a = 0; a < 2; ++a)
  {
    if (W[static_cast<std::size_t>(a)].rows() != g.cell_count() ||
        W[static_cast<std::size_t>(a)].cols() != m.node_count())
    {
      throw Error("corrector shape does not match the grid");
    }
  }
  for (int i = 0; i < g.cell_count(); ++i)
  {
    for (int e = 0; e < m.element_count(); ++e)
    {
      const Sym2 k = K.at(i, e);
      const auto nodes = m.element_nodes(e);
      for (int a = 0; a < 2; ++a)
      {
        const Eigen::MatrixXd &Wa = W[static_cast<std::size_t>(a)];
        const Eigen::Vector4d we(Wa(i, nodes[0]), Wa(i, nodes[1]), Wa(i, nodes[2]), Wa(i, nodes[3]));
        const Vec2 grad = drives[static_cast<std::size_t>(a)].at(i, e) + element_mean_gradient(hx, hy, we);
        for (int b = 0; b < 2; ++b)
        {
          out(a, b) += area * grad.dot(k.apply(drives[static_cast<std::size_t>(b)].at(i, e)));
        }
      }
    }
  }
  return out / g.area();
}

}  // namespace qph
