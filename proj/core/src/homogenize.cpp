// Copyright 2026 The qphomog Authors
// SPDX-License-Identifier: Apache-2.0

#include "qph/homogenize.hpp"

#include <chrono>

namespace qph
{

namespace
{

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0)
{
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void require_success(const SolveReport &r, Axis dir)
{
  if (!r.success)
    throw SolverError("MsLRM corrector " + std::to_string(checked_axis(dir)) +
                          " failed: " + r.failure,
                      r.residual, r.greedy_iterations);
}

std::array<Eigen::MatrixXd, 2> solve_mslrm_pair(const LowRankConductivity &K,
                                                const std::array<DriveField, 2> &drives,
                                                ModesLibrary &library, const MslrmOptions &opts,
                                                int sample_index, HomogenizationResult &out)
{
  if (!(opts.epsilon > 0.0))
    throw Error("MsLRM tolerance must be positive");
  const SwipOperator op = assemble_swip(K.grid, K, opts.penalty);
  std::array<Eigen::MatrixXd, 2> W;
  out.recycled = true;
  for (int a = 0; a < 2; ++a)
  {
    const TensorField rhs = assemble_rhs(K.grid, K, drives[static_cast<std::size_t>(a)]);
    GreedyResult g = greedy_solve(op, rhs, opts.epsilon, library, opts.greedy, sample_index);
    require_success(g.report, axis_from_index(a));
    out.rank = std::max(out.rank, g.report.rank);
    out.recycled = out.recycled && g.report.recycled;
    out.modes_added += g.report.modes_added;
    out.reports[static_cast<std::size_t>(a)] = std::move(g.report);
    W[static_cast<std::size_t>(a)] = std::move(g.values);
  }
  return W;
}

}  // namespace

HomogenizedTensor periodic_homogenize(const CellMesh &cell, const ElementConductivity &k,
                                      const SolverOptions &opts)
{
  const auto w = solve_periodic_cell_pair(cell, k, opts);
  HomogenizedTensor K;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      K(i, j) = integrate_flux(cell, k, w[static_cast<std::size_t>(i)], axis_from_index(i),
                               axis_from_index(j));
  return K;
}

HomogenizationResult apparent_homogenize_fem(const MesoGrid &grid, const ConductivityField &K,
                                             const SolverOptions &opts)
{
  const auto t0 = Clock::now();
  HomogenizationResult out;
  const auto w = solve_apparent_correctors(grid, K, opts);
  out.K = apparent_homogenize(grid, K, w);
  out.seconds = since(t0);
  return out;
}

HomogenizationResult apparent_homogenize_fem(const LowRankConductivity &K,
                                             const SolverOptions &opts)
{
  const auto t0 = Clock::now();
  HomogenizationResult out = apparent_homogenize_fem(K.grid, K.evaluate(), opts);
  out.seconds = since(t0);
  return out;
}

HomogenizationResult apparent_homogenize_mslrm(const LowRankConductivity &K,
                                               ModesLibrary &library, const MslrmOptions &opts,
                                               int sample_index)
{
  const auto t0 = Clock::now();
  HomogenizationResult out;
  const std::array<DriveField, 2> drives = {unit_drive_field(K.grid, Axis::X),
                                            unit_drive_field(K.grid, Axis::Y)};
  const auto W = solve_mslrm_pair(K, drives, library, opts, sample_index, out);
  out.K = tensor_drive_flux(K, drives, W);
  out.seconds = since(t0);
  return out;
}

HomogenizationResult apparent_homogenize_mapped(const LowRankConductivity &K_tilde,
                                                const MappingSpec &mapping, MappedSolver solver,
                                                ModesLibrary *library, const MslrmOptions &mslrm,
                                                const SolverOptions &fem, int sample_index)
{
  const auto t0 = Clock::now();
  mapping.validate();
  if (!(mapping.grid == K_tilde.grid))
    throw Error("mapping and conductivity live on different grids");
  const std::array<DriveField, 2> drives = {mapping.drive(Axis::X), mapping.drive(Axis::Y)};
  HomogenizationResult out;
  if (solver == MappedSolver::Fem)
  {
    const ConductivityField K = K_tilde.evaluate();
    const std::vector<std::vector<Vec2>> g = {drives[0].evaluate(K.grid),
                                              drives[1].evaluate(K.grid)};
    const auto w = solve_apparent_drives(K.grid, K, g, fem);
    out.K = apparent_drive_flux(K.grid, K, g, w);
  }
  else
  {
    if (library == nullptr)
      throw Error("mapped MsLRM evaluation needs a modes library");
    const auto W = solve_mslrm_pair(K_tilde, drives, *library, mslrm, sample_index, out);
    out.K = tensor_drive_flux(K_tilde, drives, W);
  }
  const double det = mapping.mean_jacobian();
  if (!(det > 0.0))
    throw Error("mapped evaluation: singular mean gradient");
  out.K /= det;
  out.seconds = since(t0);
  return out;
}

VoigtReuss voigt_reuss_bounds(const ConductivityField &K)
{
  double sum = 0.0, inv = 0.0;
  for (const Sym2 &s : K.values)
  {
    if (s.xy != 0.0 || s.xx != s.yy)
      throw Error("Voigt-Reuss bounds expect an isotropic scalar field");
    sum += s.xx;
    inv += 1.0 / s.xx;
  }
  const double n = static_cast<double>(K.values.size());
  return {sum / n, n / inv};
}

}  // namespace qph
