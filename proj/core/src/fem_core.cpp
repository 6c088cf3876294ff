// Copyright 2026 The qphomog Authors
// SPDX-License-Identifier: Apache-2.0

#include "qph/fem_core.hpp"

#include <cmath>
#include <string>

namespace qph
{

namespace
{

constexpr double kGauss[2] = {0.5 - 0.28867513459481287, 0.5 + 0.28867513459481287};

// Gradient of the 4 reference shape functions at (xi, eta) in [0,1]^2,
// scaled to physical element size.
Eigen::Matrix<double, 4, 2> shape_gradients(double xi, double eta, double hx, double hy)
{
  Eigen::Matrix<double, 4, 2> g;
  g << -(1 - eta) / hx, -(1 - xi) / hy,  //
    (1 - eta) / hx, -xi / hy,            //
    eta / hx, xi / hy,                   //
    -eta / hx, (1 - xi) / hy;
  return g;
}

std::vector<Vec2> constant_drive(const CellMesh &mesh, Axis dir)
{
  Vec2 e = Vec2::Zero();
  e[checked_axis(dir)] = 1.0;
  return std::vector<Vec2>(static_cast<std::size_t>(mesh.element_count()), e);
}

}  // namespace

CellMesh build_cell_mesh(int nx, int ny, double lx, double ly)
{
  if (nx < 1 || ny < 1)
  {
    throw Error("mesh element counts must be positive, got " + std::to_string(nx) + "x" +
                std::to_string(ny));
  }
  if (!(lx > 0.0) || !(ly > 0.0) || !std::isfinite(lx) || !std::isfinite(ly))
  {
    throw Error("mesh side lengths must be positive and finite");
  }
  return CellMesh{nx, ny, lx, ly};
}

void check_conductivity(const CellMesh &mesh, const ElementConductivity &k)
{
  if (static_cast<int>(k.size()) != mesh.element_count())
  {
    throw Error("conductivity has " + std::to_string(k.size()) + " entries for " +
                std::to_string(mesh.element_count()) + " elements");
  }
}

Eigen::Matrix4d element_stiffness(double hx, double hy, const Sym2 &k)
{
  Eigen::Matrix4d ke = Eigen::Matrix4d::Zero();
  const Eigen::Matrix2d km = k.matrix();
  const double w = 0.25 * hx * hy;
  for (double xi : kGauss)
  {
    for (double eta : kGauss)
    {
      const auto g = shape_gradients(xi, eta, hx, hy);
      ke.noalias() += w * g * km * g.transpose();
    }
  }
  return ke;
}

Eigen::Matrix<double, 4, 2> element_gradient_integrals(double hx, double hy)
{
  // grad N is linear, so the midpoint rule is exact
  return shape_gradients(0.5, 0.5, hx, hy) * (hx * hy);
}

Vec2 element_mean_gradient(double hx, double hy, const Eigen::Vector4d &values)
{
  return shape_gradients(0.5, 0.5, hx, hy).transpose() * values;
}

SparseMatrix assemble_cell_stiffness(const CellMesh &mesh, const ElementConductivity &k)
{
  check_conductivity(mesh, k);
  std::vector<Triplet> trip;
  trip.reserve(static_cast<std::size_t>(16 * mesh.element_count()));
  for (int e = 0; e < mesh.element_count(); ++e)
  {
    const auto ke = element_stiffness(mesh.hx(), mesh.hy(), k[static_cast<std::size_t>(e)]);
    const auto nodes = mesh.element_nodes(e);
    for (int a = 0; a < 4; ++a)
    {
      for (int b = 0; b < 4; ++b)
      {
        trip.emplace_back(nodes[a], nodes[b], ke(a, b));
      }
    }
  }
  SparseMatrix A(mesh.node_count(), mesh.node_count());
  A.setFromTriplets(trip.begin(), trip.end());
  return A;
}

Eigen::VectorXd assemble_drive_rhs(const CellMesh &mesh, const ElementConductivity &k,
                                   std::span<const Vec2> drive)
{
  check_conductivity(mesh, k);
  if (static_cast<int>(drive.size()) != mesh.element_count())
  {
    throw Error("drive field size does not match element count");
  }
  Eigen::VectorXd b = Eigen::VectorXd::Zero(mesh.node_count());
  const auto gi = element_gradient_integrals(mesh.hx(), mesh.hy());
  for (int e = 0; e < mesh.element_count(); ++e)
  {
    const auto ue = static_cast<std::size_t>(e);
    const Vec2 q = k[ue].apply(drive[ue]);
    const auto nodes = mesh.element_nodes(e);
    for (int a = 0; a < 4; ++a)
    {
      b[nodes[a]] -= gi(a, 0) * q[0] + gi(a, 1) * q[1];
    }
  }
  return b;
}

Eigen::VectorXd assemble_corrector_rhs(const CellMesh &mesh, const ElementConductivity &k,
                                       Axis dir)
{
  const auto drive = constant_drive(mesh, dir);
  return assemble_drive_rhs(mesh, k, drive);
}

std::vector<int> periodic_node_map(const CellMesh &mesh)
{
  std::vector<int> map(static_cast<std::size_t>(mesh.node_count()));
  for (int iy = 0; iy <= mesh.ny; ++iy)
  {
    for (int ix = 0; ix <= mesh.nx; ++ix)
    {
      map[static_cast<std::size_t>(mesh.node(ix, iy))] = (iy % mesh.ny) * mesh.nx + (ix % mesh.nx);
    }
  }
  return map;
}

SparseMatrix assemble_periodic_stiffness(const CellMesh &mesh, const ElementConductivity &k)
{
  check_conductivity(mesh, k);
  // single terms of a low-rank tensor need not be definite; a solve does
  for (const Sym2 &kk : k)
  {
    if (!kk.is_spd())
    {
      throw Error("conductivity is not positive definite");
    }
  }
  const auto map = periodic_node_map(mesh);
  std::vector<Triplet> trip;
  trip.reserve(static_cast<std::size_t>(16 * mesh.element_count()));
  for (int e = 0; e < mesh.element_count(); ++e)
  {
    const auto ke = element_stiffness(mesh.hx(), mesh.hy(), k[static_cast<std::size_t>(e)]);
    const auto nodes = mesh.element_nodes(e);
    for (int a = 0; a < 4; ++a)
    {
      for (int b = 0; b < 4; ++b)
      {
        trip.emplace_back(map[static_cast<std::size_t>(nodes[a])],
                          map[static_cast<std::size_t>(nodes[b])], ke(a, b));
      }
    }
  }
  const int n = mesh.nx * mesh.ny;
  SparseMatrix A(n, n);
  A.setFromTriplets(trip.begin(), trip.end());
  return A;
}

std::vector<MicroField> solve_periodic_drives(const CellMesh &mesh, const ElementConductivity &k,
                                              const std::vector<std::vector<Vec2>> &drives,
                                              const SolverOptions &opts, SolveInfo *info)
{
  check_conductivity(mesh, k);
  // single terms of a low-rank tensor need not be definite; a solve does
  for (const Sym2 &kk : k)
  {
    if (!kk.is_spd())
    {
      throw Error("conductivity is not positive definite");
    }
  }
  const auto map = periodic_node_map(mesh);
  const int n = mesh.nx * mesh.ny;
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(drives.size()));
  for (std::size_t d = 0; d < drives.size(); ++d)
  {
    const Eigen::VectorXd full = assemble_drive_rhs(mesh, k, drives[d]);
    for (int v = 0; v < mesh.node_count(); ++v)
    {
      B(map[static_cast<std::size_t>(v)], static_cast<Eigen::Index>(d)) += full[v];
    }
  }
  std::vector<MicroField> out(drives.size(), MicroField::Zero(mesh.node_count()));
  if (B.norm() == 0.0)
  {
    if (info)
    {
      *info = {};
    }
    return out;
  }
  const SparseMatrix A = assemble_periodic_stiffness(mesh, k);
  const Eigen::MatrixXd X = solve_constant_kernel(A, B, opts, info);
  for (std::size_t d = 0; d < drives.size(); ++d)
  {
    for (int v = 0; v < mesh.node_count(); ++v)
    {
      out[d][v] = X(map[static_cast<std::size_t>(v)], static_cast<Eigen::Index>(d));
    }
  }
  return out;
}

std::array<MicroField, 2> solve_periodic_cell_pair(const CellMesh &mesh,
                                                   const ElementConductivity &k,
                                                   const SolverOptions &opts, SolveInfo *info)
{
  auto w = solve_periodic_drives(
    mesh, k, {constant_drive(mesh, Axis::X), constant_drive(mesh, Axis::Y)}, opts, info);
  return {std::move(w[0]), std::move(w[1])};
}

MicroField solve_periodic_cell(const CellMesh &mesh, const ElementConductivity &k, Axis dir,
                               const SolverOptions &opts, SolveInfo *info)
{
  return solve_periodic_drives(mesh, k, {constant_drive(mesh, dir)}, opts, info)[0];
}

double integrate_drive_flux(const CellMesh &mesh, const ElementConductivity &k,
                            std::span<const Vec2> drive_a, const MicroField &w_a,
                            std::span<const Vec2> drive_b)
{
  check_conductivity(mesh, k);
  if (w_a.size() != mesh.node_count())
  {
    throw Error("field size does not match mesh node count");
  }
  if (static_cast<int>(drive_a.size()) != mesh.element_count() ||
      static_cast<int>(drive_b.size()) != mesh.element_count())
  {
    throw Error("drive field size does not match element count");
  }
  const double hx = mesh.hx(), hy = mesh.hy(), area = hx * hy;
  double sum = 0.0;
  for (int e = 0; e < mesh.element_count(); ++e)
  {
    const auto ue = static_cast<std::size_t>(e);
    const auto nodes = mesh.element_nodes(e);
    const Eigen::Vector4d we(w_a[nodes[0]], w_a[nodes[1]], w_a[nodes[2]], w_a[nodes[3]]);
    // the integrand is linear in grad w, so the element mean is exact
    const Vec2 grad = drive_a[ue] + element_mean_gradient(hx, hy, we);
    sum += area * grad.dot(k[ue].apply(drive_b[ue]));
  }
  return sum / mesh.area();
}

double integrate_flux(const CellMesh &mesh, const ElementConductivity &k, const MicroField &w,
                      Axis i, Axis j)
{
  const auto gi = constant_drive(mesh, i);
  const auto gj = constant_drive(mesh, j);
  return integrate_drive_flux(mesh, k, gi, w, gj);
}

}  // namespace qph
