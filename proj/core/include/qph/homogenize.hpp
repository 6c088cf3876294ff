// Copyright 2026 The qphomog Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef QPH_HOMOGENIZE_HPP
#define QPH_HOMOGENIZE_HPP

#include "qph/media.hpp"
#include "qph/mslrm.hpp"

namespace qph
{

// Output of one apparent evaluation plus what the estimator layer needs.
struct HomogenizationResult
{
  HomogenizedTensor K = HomogenizedTensor::Zero();
  double seconds = 0.0;  // wall time of the solve and flux evaluation
  // MsLRM only
  int rank = 0;                 // larger of the two corrector ranks
  bool recycled = false;        // both directions solved without new modes
  int modes_added = 0;
  std::array<SolveReport, 2> reports{};
};

HomogenizedTensor periodic_homogenize(const CellMesh &cell, const ElementConductivity &k,
                                      const SolverOptions &opts = {});

HomogenizationResult apparent_homogenize_fem(const MesoGrid &grid, const ConductivityField &K,
                                             const SolverOptions &opts = {});
HomogenizationResult apparent_homogenize_fem(const LowRankConductivity &K,
                                             const SolverOptions &opts = {});

struct MslrmOptions
{
  double epsilon = 1e-2;
  double penalty = 10.0;
  GreedyOptions greedy;
};

// Both directions share `library`; throws SolverError if a solve fails.
HomogenizationResult apparent_homogenize_mslrm(const LowRankConductivity &K,
                                               ModesLibrary &library,
                                               const MslrmOptions &opts = {},
                                               int sample_index = 0);

enum class MappedSolver
{
  Fem,
  Mslrm
};

// Reference-domain evaluation of the stretched medium: correctors driven by
// grad(phi)^T e_i, fluxes divided by det of the mean gradient.
HomogenizationResult apparent_homogenize_mapped(const LowRankConductivity &K_tilde,
                                                const MappingSpec &mapping, MappedSolver solver,
                                                ModesLibrary *library = nullptr,
                                                const MslrmOptions &mslrm = {},
                                                const SolverOptions &fem = {},
                                                int sample_index = 0);

// Arithmetic / harmonic means of the isotropic scalar over the supercell.
struct VoigtReuss
{
  double upper = 0.0;
  double lower = 0.0;
};
VoigtReuss voigt_reuss_bounds(const ConductivityField &K);

}  // namespace qph

#endif  // QPH_HOMOGENIZE_HPP
