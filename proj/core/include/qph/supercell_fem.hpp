// Copyright 2026 The qphomog Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef QPH_SUPERCELL_FEM_HPP
#define QPH_SUPERCELL_FEM_HPP

#include <array>
#include <vector>

#include "qph/fem_core.hpp"

namespace qph
{

// N1 x N2 copies of a reference cell; cell (c1, c2) -> c2*N1 + c1.
struct MesoGrid
{
  int n1 = 1;
  int n2 = 1;
  CellMesh cell;

  int cell_count() const { return n1 * n2; }
  int cell_index(int c1, int c2) const { return c2 * n1 + c1; }
  int c1(int i) const { return i % n1; }
  int c2(int i) const { return i / n1; }
  // neighbour in +x / +y with periodic wrap
  int right(int i) const { return cell_index((c1(i) + 1) % n1, c2(i)); }
  int up(int i) const { return cell_index(c1(i), (c2(i) + 1) % n2); }
  double area() const { return n1 * n2 * cell.area(); }
  CellMesh supercell_mesh() const
  {
    return CellMesh{n1 * cell.nx, n2 * cell.ny, n1 * cell.lx, n2 * cell.ly};
  }

  friend bool operator==(const MesoGrid &, const MesoGrid &) = default;
};

MesoGrid build_meso_grid(int n1, int n2, const CellMesh &cell);

// Element-constant conductivity over every (cell, element) pair, cell-major.
struct ConductivityField
{
  MesoGrid grid;
  std::vector<Sym2> values;

  const Sym2 &at(int cell, int element) const
  {
    return values[static_cast<std::size_t>(cell) * grid.cell.element_count() + element];
  }
  Sym2 &at(int cell, int element)
  {
    return values[static_cast<std::size_t>(cell) * grid.cell.element_count() + element];
  }
  ElementConductivity cell_values(int cell) const;
  double min_eig() const;
  double max_eig() const;
};

ConductivityField make_conductivity(const MesoGrid &grid);
ConductivityField tile_periodic(const MesoGrid &grid, const ElementConductivity &cell_k);

using SupercellField = Eigen::VectorXd;

// Conductivity re-indexed onto the glued supercell mesh.
ElementConductivity to_supercell_elements(const ConductivityField &K);

// Supercell element (EX, EY) -> (cell, local element).
std::pair<int, int> supercell_element_origin(const MesoGrid &grid, int supercell_element);

std::array<SupercellField, 2> solve_apparent_correctors(const MesoGrid &grid,
                                                        const ConductivityField &K,
                                                        const SolverOptions &opts = {},
                                                        SolveInfo *info = nullptr);

HomogenizedTensor apparent_homogenize(const MesoGrid &grid, const ConductivityField &K,
                                      const std::array<SupercellField, 2> &w);

// Drive fields given per (cell, element), cell-major like ConductivityField.
std::vector<SupercellField> solve_apparent_drives(const MesoGrid &grid,
                                                  const ConductivityField &K,
                                                  const std::vector<std::vector<Vec2>> &drives,
                                                  const SolverOptions &opts = {},
                                                  SolveInfo *info = nullptr);

// Matrix A_ab = |Y_N|^-1 int (g_a + grad w_a) . K g_b.
Eigen::Matrix2d apparent_drive_flux(const MesoGrid &grid, const ConductivityField &K,
                                    const std::vector<std::vector<Vec2>> &drives,
                                    const std::vector<SupercellField> &w);

}  // namespace qph

#endif  // QPH_SUPERCELL_FEM_HPP
