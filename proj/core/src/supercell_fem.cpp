// Copyright 2026 The qphomog Authors
// SPDX-License-Identifier: Apache-2.0

#include "qph/supercell_fem.hpp"

#include <algorithm>
#include <limits>
#include <string>

namespace qph
{

MesoGrid build_meso_grid(int n1, int n2, const CellMesh &cell)
{
  if (n1 < 1 || n2 < 1)
  {
    throw Error("meso grid counts must be positive");
  }
  build_cell_mesh(cell.nx, cell.ny, cell.lx, cell.ly);
  return MesoGrid{n1, n2, cell};
}

ElementConductivity ConductivityField::cell_values(int cell) const
{
  const auto ne = static_cast<std::size_t>(grid.cell.element_count());
  auto first = values.begin() + static_cast<std::ptrdiff_t>(cell * ne);
  return ElementConductivity(first, first + static_cast<std::ptrdiff_t>(ne));
}

double ConductivityField::min_eig() const
{
  double m = std::numeric_limits<double>::infinity();
  for (const auto &k : values)
  {
    m = std::min(m, k.min_eig());
  }
  return m;
}

double ConductivityField::max_eig() const
{
  double m = -std::numeric_limits<double>::infinity();
  for (const auto &k : values)
  {
    m = std::max(m, k.max_eig());
  }
  return m;
}

ConductivityField make_conductivity(const MesoGrid &grid)
{
  return ConductivityField{
    grid, std::vector<Sym2>(static_cast<std::size_t>(grid.cell_count()) *
                            static_cast<std::size_t>(grid.cell.element_count()))};
}

ConductivityField tile_periodic(const MesoGrid &grid, const ElementConductivity &cell_k)
{
  check_conductivity(grid.cell, cell_k);
  ConductivityField K = make_conductivity(grid);
  for (int c = 0; c < grid.cell_count(); ++c)
  {
    std::copy(cell_k.begin(), cell_k.end(),
              K.values.begin() + static_cast<std::ptrdiff_t>(c) * grid.cell.element_count());
  }
  return K;
}

std::pair<int, int> supercell_element_origin(const MesoGrid &grid, int supercell_element)
{
  const int snx = grid.n1 * grid.cell.nx;
  const int ex = supercell_element % snx, ey = supercell_element / snx;
  const int cell = grid.cell_index(ex / grid.cell.nx, ey / grid.cell.ny);
  return {cell, grid.cell.element(ex % grid.cell.nx, ey % grid.cell.ny)};
}

ElementConductivity to_supercell_elements(const ConductivityField &K)
{
  const MesoGrid &g = K.grid;
  if (K.values.size() != static_cast<std::size_t>(g.cell_count()) *
                           static_cast<std::size_t>(g.cell.element_count()))
  {
    throw Error("conductivity field size does not match its grid");
  }
  const int total = g.cell_count() * g.cell.element_count();
  ElementConductivity out(static_cast<std::size_t>(total));
  for (int e = 0; e < total; ++e)
  {
    const auto [cell, local] = supercell_element_origin(g, e);
    out[static_cast<std::size_t>(e)] = K.at(cell, local);
  }
  return out;
}

namespace
{

std::vector<Vec2> to_supercell_drive(const MesoGrid &g, const std::vector<Vec2> &drive)
{
  const int total = g.cell_count() * g.cell.element_count();
  if (static_cast<int>(drive.size()) != total)
  {
    throw Error("drive field size does not match the grid");
  }
  std::vector<Vec2> out(static_cast<std::size_t>(total));
  for (int e = 0; e < total; ++e)
  {
    const auto [cell, local] = supercell_element_origin(g, e);
    out[static_cast<std::size_t>(e)] =
      drive[static_cast<std::size_t>(cell) * g.cell.element_count() + local];
  }
  return out;
}

std::vector<Vec2> unit_drive(const MesoGrid &g, int axis)
{
  Vec2 e = Vec2::Zero();
  e[axis] = 1.0;
  return std::vector<Vec2>(
    static_cast<std::size_t>(g.cell_count()) * g.cell.element_count(), e);
}

void check_grid(const MesoGrid &grid, const ConductivityField &K)
{
  if (!(grid == K.grid))
  {
    throw Error("conductivity field belongs to a different grid");
  }
}

}  // namespace

std::vector<SupercellField> solve_apparent_drives(const MesoGrid &grid,
                                                  const ConductivityField &K,
                                                  const std::vector<std::vector<Vec2>> &drives,
                                                  const SolverOptions &opts, SolveInfo *info)
{
  check_grid(grid, K);
  const CellMesh big = grid.supercell_mesh();
  const auto kbig = to_supercell_elements(K);
  std::vector<std::vector<Vec2>> big_drives;
  big_drives.reserve(drives.size());
  for (const auto &d : drives)
  {
    big_drives.push_back(to_supercell_drive(grid, d));
  }
  return solve_periodic_drives(big, kbig, big_drives, opts, info);
}

std::array<SupercellField, 2> solve_apparent_correctors(const MesoGrid &grid,
                                                        const ConductivityField &K,
                                                        const SolverOptions &opts,
                                                        SolveInfo *info)
{
  auto w = solve_apparent_drives(grid, K, {unit_drive(grid, 0), unit_drive(grid, 1)}, opts, info);
  return {std::move(w[0]), std::move(w[1])};
}

Eigen::Matrix2d apparent_drive_flux(const MesoGrid &grid, const ConductivityField &K,
                                    const std::vector<std::vector<Vec2>> &drives,
                                    const std::vector<SupercellField> &w)
{
  check_grid(grid, K);
  if (drives.size() != 2 || w.size() != 2)
  {
    throw Error("expected two drives and two correctors");
  }
  const CellMesh big = grid.supercell_mesh();
  const auto kbig = to_supercell_elements(K);
  Eigen::Matrix2d out;
  std::array<std::vector<Vec2>, 2> bd = {to_supercell_drive(grid, drives[0]),
                                         to_supercell_drive(grid, drives[1])};
  for (int a = 0; a < 2; ++a)
  {
    if (w[static_cast<std::size_t>(a)].size() != big.node_count())
    {
      throw Error("corrector size does not match the supercell mesh");
    }
    for (int b = 0; b < 2; ++b)
    {
      out(a, b) = integrate_drive_flux(big, kbig, bd[static_cast<std::size_t>(a)],
                                       w[static_cast<std::size_t>(a)],
                                       bd[static_cast<std::size_t>(b)]);
    }
  }
  return out;
}

HomogenizedTensor apparent_homogenize(const MesoGrid &grid, const ConductivityField &K,
                                      const std::array<SupercellField, 2> &w)
{
  return apparent_drive_flux(grid, K, {unit_drive(grid, 0), unit_drive(grid, 1)},
                             {w[0], w[1]});
}

}  // namespace qph
