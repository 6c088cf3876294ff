// Copyright 2026 The qphomog Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef QPH_MEDIA_HPP
#define QPH_MEDIA_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qph/tensor_space.hpp"

namespace qph
{

enum class MediumKind
{
  BernoulliDefect,
  AperiodicSquares,
  UnidirectionalFibres,
  MappedFibres,
  RegularPeaks,
  IrregularPeaks,
};

std::string medium_kind_name(MediumKind kind);
MediumKind parse_medium_kind(const std::string &name);

struct MediumSpec
{
  MediumKind kind = MediumKind::BernoulliDefect;
  int n1 = 10;
  int n2 = 10;
  int micro_nx = 20;
  int micro_ny = 20;
  double cell_lx = 1.0;
  double cell_ly = 1.0;

  double k1 = 1.0;
  double k2 = 100.0;
  double k2_min = 1.0;  // aperiodic amplitude law
  double k2_max = 100.0;
  double p = 0.1;       // probability that a cell carries the inclusion
  std::vector<double> side_lengths;  // aperiodic side-length support

  double fibre_width = 0.2;
  double gap_min = 0.1;
  double gap_max = 2.0;

  double alpha_max = 199.0;  // peak amplitude ~ U[0, alpha_max]
  double beta_min = 2.0;     // peak decay entries ~ U[beta_min, beta_max]
  double beta_max = 10.0;
  double delta_trunc = 1.0;  // irregular peaks: tail truncation level

  // Throws on inconsistent parameters.
  void validate() const;
  MesoGrid grid() const;
};

// Default parameters for each variant, on a 10 x 10 grid (fibres: 5 x 1).
MediumSpec default_medium_spec(MediumKind kind);

// Micro masks (1 inside, 0 outside) on the element grid.
Eigen::VectorXd centred_block_mask(const CellMesh &mesh, int mx, int my);
// Throws unless the side is a whole, evenly centred number of elements.
Eigen::VectorXd centred_square_mask(const CellMesh &mesh, double side);
// Element count of the centred square closest to half the cell area along one
// axis of n elements; throws if it misses by more than half an element.
int half_area_elements(int n);
// Full-height centred vertical strip of the given width.
Eigen::VectorXd fibre_mask(const CellMesh &mesh, double width);

struct BernoulliSample
{
  LowRankConductivity K;
  std::vector<int> inclusions;  // B_i in {0,1}, 1: inclusion present
  double inclusion_fraction = 0.0;  // realised area fraction of the pattern
};

// Rank-one when every B_i agrees, otherwise K1 (x) 1 + (K2-K1) B (x) chi.
BernoulliSample bernoulli_from_pattern(const MesoGrid &grid, double k1, double k2,
                                       const Eigen::VectorXd &mask,
                                       const std::vector<int> &inclusions);

BernoulliSample sample_bernoulli_defect(const MediumSpec &spec, std::uint64_t seed);
BernoulliSample sample_unidirectional_fibres(const MediumSpec &spec, std::uint64_t seed);

struct AperiodicSample
{
  LowRankConductivity K;
  std::vector<double> sides;
  std::vector<double> amplitudes;  // K2 per cell
};

AperiodicSample sample_aperiodic_squares(const MediumSpec &spec, std::uint64_t seed);

// Piecewise-affine stretching of the x1 axis, one gap variable per fibre
// interval: gaps[c] sits left of cell c's fibre, gaps[c+1] right of it.
struct MappingSpec
{
  MesoGrid grid;
  double fibre_width = 0.2;
  std::vector<double> gaps;  // n1 + 1 values

  // Meso factors, indexed by the cell column c1.
  double offset(int c1) const;
  double left_stretch(int c1) const { return gaps[c1] / (1.0 - fibre_width); }
  double right_stretch(int c1) const { return gaps[c1 + 1] / (1.0 - fibre_width); }

  // Micro factors on y1 in [0, 1].
  double micro_left(double y1) const;
  double micro_fibre(double y1) const;
  double micro_right(double y1) const;

  // Physical x1 of reference point (cell, y1).
  double phi(int cell, double y1) const;
  // d phi_1 / d y1 from the separated derivative formula, at an interior y1.
  double jacobian(int cell, double y1) const;
  // Jacobian per micro element of `cell` (constant on each element).
  Eigen::VectorXd element_jacobian(int cell) const;
  // Physical width of the whole row of cells.
  double physical_length() const;
  // det of the mean gradient: physical over reference length along x1.
  double mean_jacobian() const;
  // Physical x1 of every reference node column, n1 * nx + 1 values.
  std::vector<double> physical_node_x() const;

  // grad(phi)^T e_dir expressed in the reference domain.
  DriveField drive(Axis dir) const;
  void validate() const;
};

struct MappedSample
{
  LowRankConductivity K_tilde;  // det(grad phi) grad phi^-1 K grad phi^-T, three terms
  MappingSpec mapping;
  Eigen::VectorXd fibre;        // reference fibre mask
};

// Builds K_tilde for given gaps (no randomness).
MappedSample mapped_fibres_from_gaps(const MediumSpec &spec, std::vector<double> gaps);
MappedSample sample_mapped_fibres(const MediumSpec &spec, std::uint64_t seed);

struct PeakSample
{
  ConductivityField K;  // isotropic, one value per element
  int peak_count = 0;
  double truncation_radius = 0.0;
};

// Exponential peak amplitude at offset d from its centre.
double peak_value(double alpha, double beta1, double beta2, double d1, double d2);

PeakSample sample_regular_peaks(const MediumSpec &spec, std::uint64_t seed);
PeakSample sample_irregular_peaks(const MediumSpec &spec, std::uint64_t seed);
// ln(alpha_max / delta_trunc) / beta_min
double irregular_truncation_radius(const MediumSpec &spec);

// Any variant, reduced to what the homogenisation layer needs.
struct Medium
{
  MesoGrid grid;
  std::optional<LowRankConductivity> low_rank;
  ConductivityField dense;
  std::optional<MappingSpec> mapping;
  std::vector<int> inclusions;  // Bernoulli variants only
  double inclusion_fraction = 0.0;
};

Medium sample_medium(const MediumSpec &spec, std::uint64_t seed);

// Plain-text header followed by little-endian float64 (xx, xy, yy) per
// supercell element, row-major over the supercell mesh.
void write_medium_grid(const std::string &path, const ConductivityField &K);
ConductivityField read_medium_grid(const std::string &path);

}  // namespace qph

#endif  // QPH_MEDIA_HPP
