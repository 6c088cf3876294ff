// Copyright 2026 The qphomog Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef QPH_FEM_CORE_HPP
#define QPH_FEM_CORE_HPP

#include <array>
#include <span>
#include <vector>

#include "qph/linalg.hpp"
#include "qph/types.hpp"

namespace qph
{

// Uniform structured quadrilateral mesh of [0,lx]x[0,ly]. Nodes and
// elements are numbered row-major: node (ix, iy) -> iy*(nx+1)+ix.
struct CellMesh
{
  int nx = 1;
  int ny = 1;
  double lx = 1.0;
  double ly = 1.0;

  int node_count() const { return (nx + 1) * (ny + 1); }
  int element_count() const { return nx * ny; }
  double hx() const { return lx / nx; }
  double hy() const { return ly / ny; }
  double area() const { return lx * ly; }
  int node(int ix, int iy) const { return iy * (nx + 1) + ix; }
  int element(int ex, int ey) const { return ey * nx + ex; }
  // Counter-clockwise from the lower-left corner.
  std::array<int, 4> element_nodes(int e) const
  {
    const int ex = e % nx, ey = e / nx;
    return {node(ex, ey), node(ex + 1, ey), node(ex + 1, ey + 1), node(ex, ey + 1)};
  }
  Vec2 element_centroid(int e) const
  {
    return {(e % nx + 0.5) * hx(), (e / nx + 0.5) * hy()};
  }

  friend bool operator==(const CellMesh &, const CellMesh &) = default;
};

CellMesh build_cell_mesh(int nx, int ny, double lx = 1.0, double ly = 1.0);

using ElementConductivity = std::vector<Sym2>;
using MicroField = Eigen::VectorXd;

// Element stiffness of a Q1 element with constant k, 2x2 Gauss.
Eigen::Matrix4d element_stiffness(double hx, double hy, const Sym2 &k);

// Rows: local node, columns: component; integral of grad N_a over the element.
Eigen::Matrix<double, 4, 2> element_gradient_integrals(double hx, double hy);

// Average gradient of a bilinear field over one element from its 4 nodal values.
Vec2 element_mean_gradient(double hx, double hy, const Eigen::Vector4d &values);

SparseMatrix assemble_cell_stiffness(const CellMesh &mesh, const ElementConductivity &k);

// v -> -int grad v . K e_dir over the full (non-identified) node set.
Eigen::VectorXd assemble_corrector_rhs(const CellMesh &mesh, const ElementConductivity &k,
                                       Axis dir);

// v -> -int grad v . K g with g constant per element.
Eigen::VectorXd assemble_drive_rhs(const CellMesh &mesh, const ElementConductivity &k,
                                   std::span<const Vec2> drive);

// Periodic identification: full node -> periodic unknown (ix mod nx, iy mod ny).
std::vector<int> periodic_node_map(const CellMesh &mesh);

SparseMatrix assemble_periodic_stiffness(const CellMesh &mesh, const ElementConductivity &k);

// Zero-mean periodic corrector, returned on the full node set.
MicroField solve_periodic_cell(const CellMesh &mesh, const ElementConductivity &k, Axis dir,
                               const SolverOptions &opts = {}, SolveInfo *info = nullptr);

// Both axes at once, sharing the factorisation when the solve is direct.
std::array<MicroField, 2> solve_periodic_cell_pair(const CellMesh &mesh,
                                                   const ElementConductivity &k,
                                                   const SolverOptions &opts = {},
                                                   SolveInfo *info = nullptr);

// General periodic drive: find w with int grad v . K (g + grad w) = 0.
std::vector<MicroField> solve_periodic_drives(const CellMesh &mesh, const ElementConductivity &k,
                                              const std::vector<std::vector<Vec2>> &drives,
                                              const SolverOptions &opts = {},
                                              SolveInfo *info = nullptr);

// |Y|^-1 int (e_i + grad w) . K e_j, exact for bilinear w and constant k.
double integrate_flux(const CellMesh &mesh, const ElementConductivity &k, const MicroField &w,
                      Axis i, Axis j);

// |Y|^-1 int (g_a + grad w_a) . K g_b for element-constant drives.
double integrate_drive_flux(const CellMesh &mesh, const ElementConductivity &k,
                            std::span<const Vec2> drive_a, const MicroField &w_a,
                            std::span<const Vec2> drive_b);

void check_conductivity(const CellMesh &mesh, const ElementConductivity &k);

}  // namespace qph

#endif  // QPH_FEM_CORE_HPP
