// Copyright 2026 The qphomog Authors
// SPDX-License-Identifier: Apache-2.0

#include "qph/media.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "qph/seeding.hpp"

namespace qph
{

namespace
{

constexpr double kAlignTol = 1e-9;

// Number of elements covered by `length` at spacing h, or -1 if not whole.
int whole_elements(double length, double h)
{
  const double m = length / h;
  const double r = std::round(m);
  return std::abs(m - r) <= kAlignTol * std::max(1.0, m) ? static_cast<int>(r) : -1;
}

Eigen::VectorXd constant_micro(const CellMesh &mesh, double v)
{
  return Eigen::VectorXd::Constant(mesh.element_count(), v);
}

std::vector<int> draw_bernoulli(const MesoGrid &grid, double p, Rng &rng)
{
  std::bernoulli_distribution b(p);
  std::vector<int> out(static_cast<std::size_t>(grid.cell_count()));
  for (auto &v : out)
    v = b(rng) ? 1 : 0;
  return out;
}

}  // namespace

std::string medium_kind_name(MediumKind kind)
{
  switch (kind)
  {
  case MediumKind::BernoulliDefect: return "bernoulli_defect";
  case MediumKind::AperiodicSquares: return "aperiodic_squares";
  case MediumKind::UnidirectionalFibres: return "unidirectional_fibres";
  case MediumKind::MappedFibres: return "mapped_fibres";
  case MediumKind::RegularPeaks: return "regular_peaks";
  case MediumKind::IrregularPeaks: return "irregular_peaks";
  }
  return "unknown";
}

MediumKind parse_medium_kind(const std::string &name)
{
  for (auto k : {MediumKind::BernoulliDefect, MediumKind::AperiodicSquares,
                 MediumKind::UnidirectionalFibres, MediumKind::MappedFibres,
                 MediumKind::RegularPeaks, MediumKind::IrregularPeaks})
    if (medium_kind_name(k) == name)
      return k;
  throw Error("unknown medium variant '" + name + "'");
}

void MediumSpec::validate() const
{
  if (n1 < 1 || n2 < 1 || micro_nx < 1 || micro_ny < 1)
    throw Error("medium: grid and micro resolution must be positive");
  if (!(cell_lx > 0.0) || !(cell_ly > 0.0))
    throw Error("medium: cell side lengths must be positive");
  if (!(k1 > 0.0))
    throw Error("medium: K1 must be positive");
  if (!(p >= 0.0 && p <= 1.0))
    throw Error("medium: probability p must lie in [0, 1]");
  switch (kind)
  {
  case MediumKind::BernoulliDefect:
  case MediumKind::UnidirectionalFibres:
  case MediumKind::MappedFibres:
    if (!(k2 >= k1))
      throw Error("medium: need 0 < K1 <= K2");
    break;
  case MediumKind::AperiodicSquares:
    if (!(k2_min > 0.0 && k2_min <= k2_max))
      throw Error("medium: need 0 < K2- <= K2+");
    if (side_lengths.empty())
      throw Error("medium: aperiodic squares need a side-length support");
    for (double s : side_lengths)
      if (s < 0.0 || s > std::min(cell_lx, cell_ly))
        throw Error("medium: inclusion side lengths must fit inside the cell");
    break;
  case MediumKind::RegularPeaks:
  case MediumKind::IrregularPeaks:
    if (!(alpha_max >= 0.0) || !(beta_min > 0.0 && beta_min <= beta_max))
      throw Error("medium: peak laws need alpha_max >= 0 and 0 < beta_min <= beta_max");
    if (kind == MediumKind::IrregularPeaks && !(delta_trunc > 0.0))
      throw Error("medium: truncation level must be positive");
    break;
  }
  if (kind == MediumKind::UnidirectionalFibres || kind == MediumKind::MappedFibres)
    if (!(fibre_width > 0.0 && fibre_width < cell_lx))
      throw Error("medium: fibre width must lie strictly inside the cell");
  if (kind == MediumKind::MappedFibres)
  {
    if (cell_lx != 1.0)
      throw Error("medium: mapped fibres use a unit-width reference cell");
    if (!(gap_min > 0.0 && gap_min <= gap_max))
      throw Error("medium: gap law needs 0 < gap_min <= gap_max");
  }
}

MesoGrid MediumSpec::grid() const
{
  return build_meso_grid(n1, n2, build_cell_mesh(micro_nx, micro_ny, cell_lx, cell_ly));
}

MediumSpec default_medium_spec(MediumKind kind)
{
  MediumSpec s;
  s.kind = kind;
  switch (kind)
  {
  case MediumKind::BernoulliDefect:
    break;
  case MediumKind::AperiodicSquares:
    for (int i = 1; i <= 10; ++i)
      s.side_lengths.push_back((i - 1) * 0.1);
    break;
  case MediumKind::UnidirectionalFibres:
  case MediumKind::MappedFibres:
    s.n1 = 5;
    s.n2 = 1;
    s.cell_ly = 10.0;
    s.micro_nx = 10;
    s.micro_ny = 20;
    if (kind == MediumKind::MappedFibres)
      s.p = 1.0;
    break;
  case MediumKind::RegularPeaks:
    break;
  case MediumKind::IrregularPeaks:
    s.alpha_max = 179.0;
    s.beta_min = 0.1;
    s.beta_max = 2.0;
    break;
  }
  return s;
}

Eigen::VectorXd centred_block_mask(const CellMesh &mesh, int mx, int my)
{
  if (mx < 0 || my < 0 || mx > mesh.nx || my > mesh.ny || (mesh.nx - mx) % 2 != 0 ||
      (mesh.ny - my) % 2 != 0)
    throw Error("centred block of " + std::to_string(mx) + "x" + std::to_string(my) +
                " elements cannot be centred on a " + std::to_string(mesh.nx) + "x" +
                std::to_string(mesh.ny) + " cell mesh");
  Eigen::VectorXd m = Eigen::VectorXd::Zero(mesh.element_count());
  const int x0 = (mesh.nx - mx) / 2, y0 = (mesh.ny - my) / 2;
  for (int ey = y0; ey < y0 + my; ++ey)
    for (int ex = x0; ex < x0 + mx; ++ex)
      m[mesh.element(ex, ey)] = 1.0;
  return m;
}

Eigen::VectorXd centred_square_mask(const CellMesh &mesh, double side)
{
  const int mx = whole_elements(side, mesh.hx());
  const int my = whole_elements(side, mesh.hy());
  if (mx < 0 || my < 0 || (mesh.nx - mx) % 2 != 0 || (mesh.ny - my) % 2 != 0)
  {
    std::ostringstream os;
    os << "inclusion side " << side << " does not align with the " << mesh.nx << "x"
       << mesh.ny << " cell mesh; choose a resolution making the side a whole number of "
       << "elements with an even remainder on each axis";
    throw Error(os.str());
  }
  return centred_block_mask(mesh, mx, my);
}

int half_area_elements(int n)
{
  const double target = n / std::sqrt(2.0);
  int best = -1;
  for (int m = n % 2; m <= n; m += 2)
    if (best < 0 || std::abs(m - target) < std::abs(best - target))
      best = m;
  if (std::abs(best - target) > 0.5 + 1e-12)
    throw Error("a centred half-area square cannot be resolved on " + std::to_string(n) +
                " elements per side; use a resolution divisible enough to place the "
                "inclusion boundary within half an element");
  return best;
}

Eigen::VectorXd fibre_mask(const CellMesh &mesh, double width)
{
  const int m = whole_elements(width, mesh.hx());
  if (m <= 0 || (mesh.nx - m) % 2 != 0)
  {
    std::ostringstream os;
    os << "fibre width " << width << " does not align with " << mesh.nx
       << " elements along x; choose a resolution with whole, evenly centred fibre edges";
    throw Error(os.str());
  }
  return centred_block_mask(mesh, m, mesh.ny);
}

BernoulliSample bernoulli_from_pattern(const MesoGrid &grid, double k1, double k2,
                                       const Eigen::VectorXd &mask,
                                       const std::vector<int> &inclusions)
{
  if (static_cast<int>(inclusions.size()) != grid.cell_count())
    throw Error("inclusion pattern does not match the meso grid");
  BernoulliSample out;
  out.inclusions = inclusions;
  out.inclusion_fraction = mask.mean();
  out.K.grid = grid;
  out.K.alpha = std::min(k1, k2);
  out.K.beta = std::max(k1, k2);
  const auto n = static_cast<std::size_t>(grid.cell_count());

  const bool all_same = std::all_of(inclusions.begin(), inclusions.end(),
                                    [&](int b) { return b == inclusions.front(); });
  if (all_same || k2 == k1)
  {
    const double b = inclusions.front();
    out.K.terms.push_back({std::vector<Sym2>(n, Sym2::iso(1.0)),
                           Eigen::VectorXd(constant_micro(grid.cell, k1) + b * (k2 - k1) * mask)});
    return out;
  }
  out.K.terms.push_back({std::vector<Sym2>(n, Sym2::iso(1.0)), constant_micro(grid.cell, k1)});
  std::vector<Sym2> meso(n);
  for (std::size_t i = 0; i < n; ++i)
    meso[i] = Sym2::iso(inclusions[i] ? k2 - k1 : 0.0);
  out.K.terms.push_back({std::move(meso), mask});
  return out;
}

BernoulliSample sample_bernoulli_defect(const MediumSpec &spec, std::uint64_t seed)
{
  if (spec.kind != MediumKind::BernoulliDefect)
    throw Error("sample_bernoulli_defect: wrong medium variant");
  spec.validate();
  const MesoGrid grid = spec.grid();
  const Eigen::VectorXd mask =
      centred_block_mask(grid.cell, half_area_elements(grid.cell.nx),
                         half_area_elements(grid.cell.ny));
  Rng rng(seed);
  return bernoulli_from_pattern(grid, spec.k1, spec.k2, mask, draw_bernoulli(grid, spec.p, rng));
}

BernoulliSample sample_unidirectional_fibres(const MediumSpec &spec, std::uint64_t seed)
{
  if (spec.kind != MediumKind::UnidirectionalFibres)
    throw Error("sample_unidirectional_fibres: wrong medium variant");
  spec.validate();
  const MesoGrid grid = spec.grid();
  const Eigen::VectorXd mask = fibre_mask(grid.cell, spec.fibre_width);
  Rng rng(seed);
  return bernoulli_from_pattern(grid, spec.k1, spec.k2, mask, draw_bernoulli(grid, spec.p, rng));
}

AperiodicSample sample_aperiodic_squares(const MediumSpec &spec, std::uint64_t seed)
{
  if (spec.kind != MediumKind::AperiodicSquares)
    throw Error("sample_aperiodic_squares: wrong medium variant");
  spec.validate();
  const MesoGrid grid = spec.grid();
  const auto n = static_cast<std::size_t>(grid.cell_count());

  // Check alignment of the whole support up front so failures do not depend on the draw.
  std::vector<Eigen::VectorXd> masks;
  for (double s : spec.side_lengths)
    masks.push_back(centred_square_mask(grid.cell, s));

  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, spec.side_lengths.size() - 1);
  std::uniform_real_distribution<double> amp(spec.k2_min, spec.k2_max);
  AperiodicSample out;
  std::vector<std::size_t> which(n);
  out.sides.resize(n);
  out.amplitudes.resize(n);
  for (std::size_t i = 0; i < n; ++i)
  {
    which[i] = pick(rng);
    out.sides[i] = spec.side_lengths[which[i]];
    out.amplitudes[i] = amp(rng);
  }

  out.K.grid = grid;
  out.K.alpha = std::min(spec.k1, spec.k2_min);
  out.K.beta = std::max(spec.k1, spec.k2_max);
  out.K.terms.push_back({std::vector<Sym2>(n, Sym2::iso(1.0)), constant_micro(grid.cell, spec.k1)});
  // One term per distinct side in use; duplicates in the support share a term.
  std::map<int, std::vector<std::size_t>> by_pattern;
  for (std::size_t i = 0; i < n; ++i)
  {
    const Eigen::VectorXd &m = masks[which[i]];
    if (m.sum() == 0.0)
      continue;
    std::size_t first = which[i];
    for (std::size_t j = 0; j < masks.size(); ++j)
      if (masks[j] == m)
      {
        first = j;
        break;
      }
    by_pattern[static_cast<int>(first)].push_back(i);
  }
  for (const auto &[pattern, cells] : by_pattern)
  {
    std::vector<Sym2> meso(n);
    for (std::size_t i : cells)
      meso[i] = Sym2::iso(out.amplitudes[i] - spec.k1);
    out.K.terms.push_back({std::move(meso), masks[static_cast<std::size_t>(pattern)]});
  }
  return out;
}

double MappingSpec::offset(int c1) const
{
  if (c1 == 0)
    return 0.0;
  double s = 0.5 * gaps[0] + 0.5 * gaps[static_cast<std::size_t>(c1)] + c1 * fibre_width;
  for (int k = 1; k <= c1 - 1; ++k)
    s += gaps[static_cast<std::size_t>(k)];
  return s;
}

double MappingSpec::micro_left(double y1) const
{
  return std::min(y1, 0.5 * (1.0 - fibre_width));
}

double MappingSpec::micro_fibre(double y1) const
{
  return std::max(0.0, std::min(fibre_width, y1 - 0.5 * (1.0 - fibre_width)));
}

double MappingSpec::micro_right(double y1) const
{
  return std::max(0.0, y1 - 0.5 * (1.0 + fibre_width));
}

double MappingSpec::phi(int cell, double y1) const
{
  const int c = grid.c1(cell);
  return offset(c) + left_stretch(c) * micro_left(y1) + micro_fibre(y1) +
         right_stretch(c) * micro_right(y1);
}

double MappingSpec::jacobian(int cell, double y1) const
{
  const int c = grid.c1(cell);
  const double a = 0.5 * (1.0 - fibre_width), b = 0.5 * (1.0 + fibre_width);
  const double d1 = y1 < a ? 1.0 : 0.0;
  const double d2 = (y1 > a && y1 < b) ? 1.0 : 0.0;
  const double d3 = y1 > b ? 1.0 : 0.0;
  return left_stretch(c) * d1 + d2 + right_stretch(c) * d3;
}

Eigen::VectorXd MappingSpec::element_jacobian(int cell) const
{
  const CellMesh &m = grid.cell;
  Eigen::VectorXd j(m.element_count());
  for (int e = 0; e < m.element_count(); ++e)
    j[e] = jacobian(cell, m.element_centroid(e)[0]);
  return j;
}

double MappingSpec::physical_length() const
{
  return offset(grid.n1 - 1) + 0.5 * gaps[static_cast<std::size_t>(grid.n1 - 1)] + fibre_width +
         0.5 * gaps[static_cast<std::size_t>(grid.n1)];
}

double MappingSpec::mean_jacobian() const
{
  return physical_length() / (grid.n1 * grid.cell.lx);
}

std::vector<double> MappingSpec::physical_node_x() const
{
  const CellMesh &m = grid.cell;
  std::vector<double> x;
  x.reserve(static_cast<std::size_t>(grid.n1 * m.nx + 1));
  for (int c = 0; c < grid.n1; ++c)
    for (int ix = 0; ix < m.nx; ++ix)
      x.push_back(phi(grid.cell_index(c, 0), ix * m.hx()));
  x.push_back(physical_length());
  return x;
}

void MappingSpec::validate() const
{
  if (static_cast<int>(gaps.size()) != grid.n1 + 1)
    throw Error("mapping needs n1 + 1 gap values");
  if (!(fibre_width > 0.0 && fibre_width < 1.0))
    throw Error("mapping fibre width must lie in (0, 1)");
  if (grid.cell.lx != 1.0)
    throw Error("mapping assumes a unit-width reference cell");
  for (double g : gaps)
    if (!(g > 0.0) || !std::isfinite(g))
      throw Error("mapping has a non-invertible gradient (gap <= 0)");
  // zone edges must be element edges
  if (whole_elements(0.5 * (1.0 - fibre_width), grid.cell.hx()) < 0)
    throw Error("fibre edges do not align with the micro mesh");
}

DriveField MappingSpec::drive(Axis dir) const
{
  if (dir == Axis::Y)
    return unit_drive_field(grid, Axis::Y);
  const CellMesh &m = grid.cell;
  const auto n = static_cast<std::size_t>(grid.cell_count());
  const double a = 0.5 * (1.0 - fibre_width), b = 0.5 * (1.0 + fibre_width);
  Eigen::VectorXd z1 = Eigen::VectorXd::Zero(m.element_count());
  Eigen::VectorXd z2 = z1, z3 = z1;
  for (int e = 0; e < m.element_count(); ++e)
  {
    const double y = m.element_centroid(e)[0];
    (y < a ? z1 : (y < b ? z2 : z3))[e] = 1.0;
  }
  DriveField d;
  DriveTerm t1{std::vector<Vec2>(n), z1}, t2{std::vector<Vec2>(n, Vec2(1.0, 0.0)), z2},
      t3{std::vector<Vec2>(n), z3};
  for (std::size_t i = 0; i < n; ++i)
  {
    const int c = grid.c1(static_cast<int>(i));
    t1.meso[i] = Vec2(left_stretch(c), 0.0);
    t3.meso[i] = Vec2(right_stretch(c), 0.0);
  }
  d.terms = {std::move(t1), std::move(t2), std::move(t3)};
  return d;
}

MappedSample mapped_fibres_from_gaps(const MediumSpec &spec, std::vector<double> gaps)
{
  if (spec.kind != MediumKind::MappedFibres)
    throw Error("mapped fibres: wrong medium variant");
  spec.validate();
  MappedSample out;
  out.mapping.grid = spec.grid();
  out.mapping.fibre_width = spec.fibre_width;
  out.mapping.gaps = std::move(gaps);
  out.mapping.validate();
  const MesoGrid &grid = out.mapping.grid;
  const CellMesh &m = grid.cell;
  out.fibre = fibre_mask(m, spec.fibre_width);

  const double a = 0.5 * (1.0 - spec.fibre_width);
  Eigen::VectorXd left = Eigen::VectorXd::Zero(m.element_count()), right = left;
  for (int e = 0; e < m.element_count(); ++e)
    if (out.fibre[e] == 0.0)
      (m.element_centroid(e)[0] < a ? left : right)[e] = 1.0;

  // Matrix zones: K_tilde = diag(k1 / phi', k1 phi'); fibre zone: phi' = 1.
  const auto n = static_cast<std::size_t>(grid.cell_count());
  std::vector<Sym2> ml(n), mr(n);
  double lo = spec.k2, hi = spec.k2;
  for (std::size_t i = 0; i < n; ++i)
  {
    const int c = grid.c1(static_cast<int>(i));
    const double sl = out.mapping.left_stretch(c), sr = out.mapping.right_stretch(c);
    if (!(sl > 0.0) || !(sr > 0.0))
      throw Error("mapped fibres: non-invertible gradient");
    ml[i] = Sym2::diag(spec.k1 / sl, spec.k1 * sl);
    mr[i] = Sym2::diag(spec.k1 / sr, spec.k1 * sr);
    for (const Sym2 &s : {ml[i], mr[i]})
    {
      lo = std::min(lo, s.min_eig());
      hi = std::max(hi, s.max_eig());
    }
  }
  LowRankConductivity &K = out.K_tilde;
  K.grid = grid;
  K.alpha = lo;
  K.beta = hi;
  K.terms.push_back({std::move(ml), left});
  K.terms.push_back({std::vector<Sym2>(n, Sym2::iso(spec.k2)), out.fibre});
  K.terms.push_back({std::move(mr), right});
  if (K.rank() != 3)
    throw Error("mapped fibres: structural rank certificate failed");
  return out;
}

MappedSample sample_mapped_fibres(const MediumSpec &spec, std::uint64_t seed)
{
  spec.validate();
  Rng rng(seed);
  std::uniform_real_distribution<double> gap(spec.gap_min, spec.gap_max);
  std::vector<double> gaps(static_cast<std::size_t>(spec.n1 + 1));
  for (auto &g : gaps)
    g = gap(rng);
  return mapped_fibres_from_gaps(spec, std::move(gaps));
}

double peak_value(double alpha, double beta1, double beta2, double d1, double d2)
{
  return alpha * std::exp(-std::hypot(beta1 * d1, beta2 * d2));
}

PeakSample sample_regular_peaks(const MediumSpec &spec, std::uint64_t seed)
{
  if (spec.kind != MediumKind::RegularPeaks)
    throw Error("sample_regular_peaks: wrong medium variant");
  spec.validate();
  const MesoGrid grid = spec.grid();
  const CellMesh &m = grid.cell;
  Rng rng(seed);
  std::uniform_real_distribution<double> alpha(0.0, spec.alpha_max);
  std::uniform_real_distribution<double> beta(spec.beta_min, spec.beta_max);
  PeakSample out;
  out.K = make_conductivity(grid);
  out.peak_count = grid.cell_count();
  const Vec2 centre(0.5 * m.lx, 0.5 * m.ly);
  for (int i = 0; i < grid.cell_count(); ++i)
  {
    const double a = alpha(rng), b1 = beta(rng), b2 = beta(rng);
    for (int e = 0; e < m.element_count(); ++e)
    {
      const Vec2 d = m.element_centroid(e) - centre;
      out.K.at(i, e) = Sym2::iso(1.0 + peak_value(a, b1, b2, d[0], d[1]));
    }
  }
  return out;
}

double irregular_truncation_radius(const MediumSpec &spec)
{
  return std::log(spec.alpha_max / spec.delta_trunc) / spec.beta_min;
}

PeakSample sample_irregular_peaks(const MediumSpec &spec, std::uint64_t seed)
{
  if (spec.kind != MediumKind::IrregularPeaks)
    throw Error("sample_irregular_peaks: wrong medium variant");
  spec.validate();
  const MesoGrid grid = spec.grid();
  const CellMesh &m = grid.cell;
  const double R = std::max(0.0, irregular_truncation_radius(spec));
  const double L1 = grid.n1 * m.lx, L2 = grid.n2 * m.ly;

  Rng rng(seed);
  std::poisson_distribution<int> count((L1 + R) * (L2 + R));
  std::uniform_real_distribution<double> cx(-R, L1 + R), cy(-R, L2 + R);
  std::uniform_real_distribution<double> alpha(0.0, spec.alpha_max);
  std::uniform_real_distribution<double> beta(spec.beta_min, spec.beta_max);
  struct Peak
  {
    double x, y, a, b1, b2;
  };
  PeakSample out;
  out.truncation_radius = R;
  out.peak_count = count(rng);
  std::vector<Peak> peaks(static_cast<std::size_t>(out.peak_count));
  for (auto &pk : peaks)
  {
    pk.x = cx(rng);
    pk.y = cy(rng);
    pk.a = alpha(rng);
    pk.b1 = beta(rng);
    pk.b2 = beta(rng);
  }

  out.K = make_conductivity(grid);
  for (int i = 0; i < grid.cell_count(); ++i)
  {
    const Vec2 origin(grid.c1(i) * m.lx, grid.c2(i) * m.ly);
    for (int e = 0; e < m.element_count(); ++e)
    {
      const Vec2 x = origin + m.element_centroid(e);
      double v = 1.0;
      for (const Peak &pk : peaks)
        v += peak_value(pk.a, pk.b1, pk.b2, x[0] - pk.x, x[1] - pk.y);
      out.K.at(i, e) = Sym2::iso(v);
    }
  }
  return out;
}

Medium sample_medium(const MediumSpec &spec, std::uint64_t seed)
{
  Medium out;
  switch (spec.kind)
  {
  case MediumKind::BernoulliDefect:
  case MediumKind::UnidirectionalFibres:
  {
    BernoulliSample s = spec.kind == MediumKind::BernoulliDefect
                            ? sample_bernoulli_defect(spec, seed)
                            : sample_unidirectional_fibres(spec, seed);
    out.inclusions = std::move(s.inclusions);
    out.inclusion_fraction = s.inclusion_fraction;
    out.low_rank = std::move(s.K);
    break;
  }
  case MediumKind::AperiodicSquares:
    out.low_rank = sample_aperiodic_squares(spec, seed).K;
    break;
  case MediumKind::MappedFibres:
  {
    MappedSample s = sample_mapped_fibres(spec, seed);
    out.low_rank = std::move(s.K_tilde);
    out.mapping = std::move(s.mapping);
    break;
  }
  case MediumKind::RegularPeaks:
    out.dense = sample_regular_peaks(spec, seed).K;
    break;
  case MediumKind::IrregularPeaks:
    out.dense = sample_irregular_peaks(spec, seed).K;
    break;
  }
  if (out.low_rank)
  {
    out.grid = out.low_rank->grid;
    out.dense = out.low_rank->evaluate();
  }
  else
  {
    out.grid = out.dense.grid;
  }
  return out;
}

void write_medium_grid(const std::string &path, const ConductivityField &K)
{
  static_assert(std::endian::native == std::endian::little, "little-endian host expected");
  std::ofstream f(path, std::ios::binary);
  if (!f)
    throw Error("cannot open '" + path + "' for writing");
  const MesoGrid &g = K.grid;
  const CellMesh big = g.supercell_mesh();
  f << "qphomog-medium 1\n"
    << "meso " << g.n1 << " " << g.n2 << "\n"
    << "cell " << g.cell.nx << " " << g.cell.ny << " " << g.cell.lx << " " << g.cell.ly << "\n"
    << "layout row-major " << big.nx << " " << big.ny << " xx xy yy float64-le\n"
    << "end\n";
  const ElementConductivity flat = to_supercell_elements(K);
  for (const Sym2 &s : flat)
  {
    const double v[3] = {s.xx, s.xy, s.yy};
    f.write(reinterpret_cast<const char *>(v), sizeof v);
  }
  if (!f)
    throw Error("failed writing '" + path + "'");
}

ConductivityField read_medium_grid(const std::string &path)
{
  std::ifstream f(path, std::ios::binary);
  if (!f)
    throw Error("cannot open '" + path + "'");
  std::string line, tag;
  int version = 0, n1 = 0, n2 = 0, nx = 0, ny = 0;
  double lx = 0, ly = 0;
  std::getline(f, line);
  std::istringstream(line) >> tag >> version;
  if (tag != "qphomog-medium" || version != 1)
    throw Error("'" + path + "' is not a medium grid file");
  while (std::getline(f, line) && line != "end")
  {
    std::istringstream is(line);
    is >> tag;
    if (tag == "meso")
      is >> n1 >> n2;
    else if (tag == "cell")
      is >> nx >> ny >> lx >> ly;
  }
  const MesoGrid g = build_meso_grid(n1, n2, build_cell_mesh(nx, ny, lx, ly));
  ConductivityField K = make_conductivity(g);
  const CellMesh big = g.supercell_mesh();
  for (int e = 0; e < big.element_count(); ++e)
  {
    double v[3];
    f.read(reinterpret_cast<char *>(v), sizeof v);
    if (!f)
      throw Error("'" + path + "' is truncated");
    const auto [cell, local] = supercell_element_origin(g, e);
    K.at(cell, local) = Sym2{v[0], v[1], v[2]};
  }
  return K;
}

}  // namespace qph
