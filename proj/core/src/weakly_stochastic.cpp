// Copyright 2026 The qphomog Authors
// SPDX-License-Identifier: Apache-2.0

#include "qph/weakly_stochastic.hpp"

#include <algorithm>
#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

namespace qph
{

namespace
{

Sym2 transform(const Eigen::Matrix2d &R, const Sym2 &k)
{
  const Eigen::Matrix2d M = R * k.matrix() * R.transpose();
  return Sym2{M(0, 0), M(0, 1), M(1, 1)};
}

// Terms of a periodic cell pattern with per-cell weights; no SPD requirement.
void append_pattern(LowRankConductivity &K, const ElementConductivity &k,
                    const std::vector<double> &weights)
{
  const int ne = K.grid.cell.element_count();
  const auto nc = weights.size();
  bool isotropic = true, any = false;
  for (const Sym2 &s : k)
  {
    isotropic = isotropic && s.xy == 0.0 && s.xx == s.yy;
    any = any || !s.is_zero();
  }
  const bool weighted = std::any_of(weights.begin(), weights.end(), [](double w) { return w != 0.0; });
  if (!any || !weighted)
    return;
  auto meso = [&](const Sym2 &unit) {
    std::vector<Sym2> m(nc);
    for (std::size_t i = 0; i < nc; ++i)
      m[i] = weights[i] * unit;
    return m;
  };
  if (isotropic)
  {
    Eigen::VectorXd micro(ne);
    for (int e = 0; e < ne; ++e)
      micro[e] = k[static_cast<std::size_t>(e)].xx;
    K.terms.push_back({meso(Sym2::iso(1.0)), micro});
    return;
  }
  const Sym2 unit[3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  for (int c = 0; c < 3; ++c)
  {
    Eigen::VectorXd micro(ne);
    for (int e = 0; e < ne; ++e)
    {
      const Sym2 &s = k[static_cast<std::size_t>(e)];
      micro[e] = c == 0 ? s.xx : (c == 1 ? s.xy : s.yy);
    }
    if (micro.cwiseAbs().maxCoeff() > 0.0)
      K.terms.push_back({meso(unit[c]), micro});
  }
}

bool same_pattern(const ElementConductivity &a, const ElementConductivity &b)
{
  double scale = 0.0, diff = 0.0;
  for (std::size_t e = 0; e < a.size(); ++e)
  {
    scale = std::max({scale, std::abs(a[e].xx), std::abs(a[e].yy), std::abs(a[e].xy)});
    const Sym2 d = a[e] - b[e];
    diff = std::max({diff, std::abs(d.xx), std::abs(d.yy), std::abs(d.xy)});
  }
  return diff <= 1e-12 * std::max(scale, 1e-300);
}

ElementConductivity transform_pattern(const CellMesh &m, const ElementConductivity &k,
                                      const GridSymmetry &g)
{
  const Eigen::Matrix2d R = g.matrix();
  ElementConductivity out(k.size());
  for (int e = 0; e < m.element_count(); ++e)
  {
    int ex = e % m.nx, ey = e / m.nx;
    if (g.swap)
      std::swap(ex, ey);
    if (g.flip_x)
      ex = m.nx - 1 - ex;
    if (g.flip_y)
      ey = m.ny - 1 - ey;
    out[static_cast<std::size_t>(m.element(ex, ey))] = transform(R, k[static_cast<std::size_t>(e)]);
  }
  return out;
}

std::vector<int> single_defect(const MesoGrid &g, int d)
{
  std::vector<int> b(static_cast<std::size_t>(g.cell_count()), 0);
  b[0] = 1;
  if (d >= 0)
    b[static_cast<std::size_t>(d)] = 1;
  return b;
}

int displacement(const MesoGrid &g, int i, int j)
{
  return g.cell_index(((g.c1(j) - g.c1(i)) % g.n1 + g.n1) % g.n1,
                      ((g.c2(j) - g.c2(i)) % g.n2 + g.n2) % g.n2);
}

int negate(const MesoGrid &g, int d)
{
  return g.cell_index((g.n1 - g.c1(d)) % g.n1, (g.n2 - g.c2(d)) % g.n2);
}

nlohmann::json tensor_json(const HomogenizedTensor &K)
{
  return {K(0, 0), K(0, 1), K(1, 0), K(1, 1)};
}

HomogenizedTensor tensor_from(const nlohmann::json &j)
{
  HomogenizedTensor K;
  K << j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(), j.at(3).get<double>();
  return K;
}

void check_defects(const DefectContributions &c, const std::vector<int> &b)
{
  if (static_cast<int>(b.size()) != c.grid.cell_count())
    throw Error("defect vector does not match the contribution grid");
}

HomogenizedTensor pair_sum(const MesoGrid &g, const std::vector<HomogenizedTensor> &two,
                           const std::vector<int> &b, int active)
{
  std::vector<int> cells;
  for (int i = 0; i < g.cell_count(); ++i)
    if (b[static_cast<std::size_t>(i)] == active)
      cells.push_back(i);
  HomogenizedTensor s = HomogenizedTensor::Zero();
  for (std::size_t a = 0; a < cells.size(); ++a)
    for (std::size_t c = a + 1; c < cells.size(); ++c)
      s += two[static_cast<std::size_t>(displacement(g, cells[a], cells[c]))];
  return s;  // 1/2 sum over ordered pairs, two equal halves
}

HomogenizedTensor all_pairs(const std::vector<HomogenizedTensor> &two, int cells)
{
  HomogenizedTensor s = HomogenizedTensor::Zero();
  for (std::size_t d = 1; d < two.size(); ++d)
    s += two[d];
  return 0.5 * cells * s;
}

}  // namespace

DefectModel DefectModel::complementary() const
{
  DefectModel m;
  m.grid = grid;
  m.k_ref.resize(k_ref.size());
  m.k_def.resize(k_def.size());
  for (std::size_t e = 0; e < k_ref.size(); ++e)
  {
    m.k_ref[e] = k_ref[e] + k_def[e];
    m.k_def[e] = Sym2{} - k_def[e];
  }
  return m;
}

ConductivityField DefectModel::field(const std::vector<int> &defects) const
{
  if (static_cast<int>(defects.size()) != grid.cell_count())
    throw Error("defect vector does not match the grid");
  ConductivityField K = make_conductivity(grid);
  for (int i = 0; i < grid.cell_count(); ++i)
    for (int e = 0; e < grid.cell.element_count(); ++e)
    {
      const auto ue = static_cast<std::size_t>(e);
      K.at(i, e) = defects[static_cast<std::size_t>(i)] ? k_ref[ue] + k_def[ue] : k_ref[ue];
    }
  return K;
}

LowRankConductivity DefectModel::low_rank(const std::vector<int> &defects) const
{
  if (static_cast<int>(defects.size()) != grid.cell_count())
    throw Error("defect vector does not match the grid");
  LowRankConductivity K;
  K.grid = grid;
  const auto n = static_cast<std::size_t>(grid.cell_count());
  append_pattern(K, k_ref, std::vector<double>(n, 1.0));
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = defects[i] ? 1.0 : 0.0;
  append_pattern(K, k_def, w);
  double lo = INFINITY, hi = 0.0;
  const bool any = std::any_of(defects.begin(), defects.end(), [](int b) { return b != 0; });
  const bool all = std::all_of(defects.begin(), defects.end(), [](int b) { return b != 0; });
  for (std::size_t e = 0; e < k_ref.size(); ++e)
  {
    if (!all)
    {
      lo = std::min(lo, k_ref[e].min_eig());
      hi = std::max(hi, k_ref[e].max_eig());
    }
    if (any)
    {
      const Sym2 s = k_ref[e] + k_def[e];
      lo = std::min(lo, s.min_eig());
      hi = std::max(hi, s.max_eig());
    }
  }
  K.alpha = lo;
  K.beta = hi;
  return K;
}

DefectModel defect_model_from_spec(const MediumSpec &spec)
{
  spec.validate();
  DefectModel m;
  m.grid = spec.grid();
  Eigen::VectorXd mask;
  if (spec.kind == MediumKind::BernoulliDefect)
    mask = centred_block_mask(m.grid.cell, half_area_elements(m.grid.cell.nx),
                              half_area_elements(m.grid.cell.ny));
  else if (spec.kind == MediumKind::UnidirectionalFibres)
    mask = fibre_mask(m.grid.cell, spec.fibre_width);
  else
    throw Error("defect form exists only for Bernoulli-defect and fibre media");
  const int ne = m.grid.cell.element_count();
  m.k_ref.assign(static_cast<std::size_t>(ne), Sym2::iso(spec.k1));
  m.k_def.resize(static_cast<std::size_t>(ne));
  for (int e = 0; e < ne; ++e)
    m.k_def[static_cast<std::size_t>(e)] = Sym2::iso((spec.k2 - spec.k1) * mask[e]);
  return m;
}

Eigen::Matrix2d GridSymmetry::matrix() const
{
  Eigen::Matrix2d S = swap ? (Eigen::Matrix2d() << 0, 1, 1, 0).finished()
                           : Eigen::Matrix2d::Identity().eval();
  Eigen::Matrix2d F = Eigen::Matrix2d::Identity();
  F(0, 0) = flip_x ? -1.0 : 1.0;
  F(1, 1) = flip_y ? -1.0 : 1.0;
  return F * S;
}

int GridSymmetry::apply(const MesoGrid &grid, int d) const
{
  int d1 = grid.c1(d), d2 = grid.c2(d);
  if (swap)
    std::swap(d1, d2);
  if (flip_x)
    d1 = (grid.n1 - d1) % grid.n1;
  if (flip_y)
    d2 = (grid.n2 - d2) % grid.n2;
  return grid.cell_index(d1, d2);
}

std::vector<GridSymmetry> grid_symmetries(const DefectModel &model)
{
  const MesoGrid &g = model.grid;
  const CellMesh &m = g.cell;
  std::vector<GridSymmetry> out;
  for (int code = 0; code < 8; ++code)
  {
    const GridSymmetry s{(code & 4) != 0, (code & 1) != 0, (code & 2) != 0};
    if (s.swap && (g.n1 != g.n2 || m.nx != m.ny || m.lx != m.ly))
      continue;
    if (code != 0 && !(same_pattern(transform_pattern(m, model.k_ref, s), model.k_ref) &&
                       same_pattern(transform_pattern(m, model.k_def, s), model.k_def)))
      continue;
    out.push_back(s);
  }
  return out;
}

DefectContributions compute_contributions(const DefectModel &model, const ContributionOptions &opts)
{
  const auto t0 = std::chrono::steady_clock::now();
  const MesoGrid &g = model.grid;
  const int N = g.cell_count();
  if (static_cast<int>(model.k_ref.size()) != g.cell.element_count() ||
      model.k_def.size() != model.k_ref.size())
    throw Error("defect model patterns do not match the cell mesh");

  // Representative displacement per orbit, and the symmetry mapping it onto each d.
  const std::vector<GridSymmetry> syms =
      opts.use_symmetry ? grid_symmetries(model) : std::vector<GridSymmetry>{GridSymmetry{}};
  std::vector<int> rep(static_cast<std::size_t>(N), -1);
  std::vector<GridSymmetry> how(static_cast<std::size_t>(N));
  std::vector<int> reps;
  for (int d = 1; d < N; ++d)
  {
    if (rep[static_cast<std::size_t>(d)] >= 0)
      continue;
    reps.push_back(d);
    for (const GridSymmetry &s : syms)
      for (int img : {s.apply(g, d), negate(g, s.apply(g, d))})
        if (rep[static_cast<std::size_t>(img)] < 0)
        {
          rep[static_cast<std::size_t>(img)] = d;
          how[static_cast<std::size_t>(img)] = s;
        }
  }

  DefectContributions c;
  c.grid = g;
  c.has_complementary = opts.complementary;

  auto run = [&](const DefectModel &m, HomogenizedTensor &periodic, HomogenizedTensor &one,
                 std::vector<HomogenizedTensor> &two) {
    ModesLibrary lib(g.cell);
    const MslrmOptions mo{opts.epsilon, opts.penalty, opts.greedy};
    int sample = 0;
    auto solve = [&](const std::vector<int> &b) -> HomogenizedTensor {
      if (opts.solver == DefectSolver::Fem)
        return apparent_homogenize_fem(g, m.field(b), opts.fem).K;
      return apparent_homogenize_mslrm(m.low_rank(b), lib, mo, sample++).K;
    };
    if (opts.solver == DefectSolver::Fem)
      periodic = periodic_homogenize(g.cell, m.k_ref, opts.fem);
    else
      periodic = solve(std::vector<int>(static_cast<std::size_t>(N), 0));
    const HomogenizedTensor a1 = solve(single_defect(g, -1));
    one = a1 - periodic;
    c.solves += 2;

    std::vector<HomogenizedTensor> a2(reps.size());
    const int threads = opts.solver == DefectSolver::Fem ? opts.threads : 1;
    parallel_for(reps.size(), threads,
                 [&](std::size_t r) { a2[r] = solve(single_defect(g, reps[r])); });
    c.solves += static_cast<int>(reps.size());

    std::vector<HomogenizedTensor> rep_value(static_cast<std::size_t>(N), HomogenizedTensor::Zero());
    for (std::size_t r = 0; r < reps.size(); ++r)
      rep_value[static_cast<std::size_t>(reps[r])] = a2[r] - 2.0 * a1 + periodic;
    two.assign(static_cast<std::size_t>(N), HomogenizedTensor::Zero());
    for (int d = 1; d < N; ++d)
    {
      const Eigen::Matrix2d R = how[static_cast<std::size_t>(d)].matrix();
      two[static_cast<std::size_t>(d)] =
          R * rep_value[static_cast<std::size_t>(rep[static_cast<std::size_t>(d)])] * R.transpose();
    }
  };

  run(model, c.ref_periodic, c.ref_one, c.ref_two);
  if (opts.complementary)
    run(model.complementary(), c.comp_periodic, c.comp_one, c.comp_two);
  else
    c.comp_two.assign(static_cast<std::size_t>(N), HomogenizedTensor::Zero());
  c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return c;
}

std::string contributions_key(const DefectModel &model, const ContributionOptions &opts)
{
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](const void *p, std::size_t n) {
    const auto *b = static_cast<const unsigned char *>(p);
    for (std::size_t i = 0; i < n; ++i)
    {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  auto mixd = [&](double v) { mix(&v, sizeof v); };
  auto mixi = [&](long long v) { mix(&v, sizeof v); };
  const MesoGrid &g = model.grid;
  mixi(g.n1), mixi(g.n2), mixi(g.cell.nx), mixi(g.cell.ny), mixd(g.cell.lx), mixd(g.cell.ly);
  for (const auto *pat : {&model.k_ref, &model.k_def})
    for (const Sym2 &s : *pat)
      mixd(s.xx), mixd(s.xy), mixd(s.yy);
  mixi(static_cast<int>(opts.solver));
  if (opts.solver == DefectSolver::Mslrm)
    mixd(opts.epsilon), mixd(opts.penalty);
  else
    mixd(opts.fem.rel_tol);
  mixi(opts.complementary ? 1 : 0);
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

DefectContributions cached_contributions(const std::string &dir, const DefectModel &model,
                                         const ContributionOptions &opts)
{
  const std::string key = contributions_key(model, opts);
  const std::filesystem::path path = std::filesystem::path(dir) / ("contrib-" + key + ".json");
  if (std::filesystem::exists(path))
  {
    DefectContributions c = DefectContributions::load(path.string());
    if (c.grid == model.grid)
      return c;
  }
  DefectContributions c = compute_contributions(model, opts);
  std::filesystem::create_directories(dir);
  c.save(path.string());
  return c;
}

void DefectContributions::save(const std::string &path) const
{
  nlohmann::json j;
  j["format"] = "qphomog-defect-contributions";
  j["version"] = 1;
  j["grid"] = {{"n1", grid.n1}, {"n2", grid.n2}, {"nx", grid.cell.nx}, {"ny", grid.cell.ny},
               {"lx", grid.cell.lx}, {"ly", grid.cell.ly}};
  j["ref_periodic"] = tensor_json(ref_periodic);
  j["ref_one"] = tensor_json(ref_one);
  j["comp_periodic"] = tensor_json(comp_periodic);
  j["comp_one"] = tensor_json(comp_one);
  j["has_complementary"] = has_complementary;
  j["solves"] = solves;
  j["seconds"] = seconds;
  for (const auto &t : ref_two)
    j["ref_two"].push_back(tensor_json(t));
  for (const auto &t : comp_two)
    j["comp_two"].push_back(tensor_json(t));
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp);
    if (!f)
      throw Error("cannot open '" + tmp + "' for writing");
    f << std::setprecision(17) << j.dump() << '\n';
  }
  std::filesystem::rename(tmp, path);
}

DefectContributions DefectContributions::load(const std::string &path)
{
  std::ifstream f(path);
  if (!f)
    throw Error("cannot open '" + path + "'");
  const nlohmann::json j = nlohmann::json::parse(f);
  if (j.at("format") != "qphomog-defect-contributions" || j.at("version") != 1)
    throw Error("'" + path + "' is not a contributions file");
  DefectContributions c;
  const auto &g = j.at("grid");
  c.grid = build_meso_grid(g.at("n1"), g.at("n2"),
                           build_cell_mesh(g.at("nx"), g.at("ny"), g.at("lx"), g.at("ly")));
  c.ref_periodic = tensor_from(j.at("ref_periodic"));
  c.ref_one = tensor_from(j.at("ref_one"));
  c.comp_periodic = tensor_from(j.at("comp_periodic"));
  c.comp_one = tensor_from(j.at("comp_one"));
  c.has_complementary = j.at("has_complementary");
  c.solves = j.at("solves");
  c.seconds = j.at("seconds");
  for (const auto &t : j.at("ref_two"))
    c.ref_two.push_back(tensor_from(t));
  for (const auto &t : j.at("comp_two"))
    c.comp_two.push_back(tensor_from(t));
  if (static_cast<int>(c.ref_two.size()) != c.grid.cell_count() ||
      static_cast<int>(c.comp_two.size()) != c.grid.cell_count())
    throw Error("'" + path + "' has inconsistent two-defect tables");
  return c;
}

HomogenizedTensor z1_eval(const DefectContributions &c, const std::vector<int> &defects)
{
  check_defects(c, defects);
  int count = 0;
  for (int b : defects)
    count += b != 0;
  return c.ref_periodic + count * c.ref_one;
}

HomogenizedTensor z1_expectation(const DefectContributions &c, double p)
{
  return c.ref_periodic + p * c.grid.cell_count() * c.ref_one;
}

HomogenizedTensor z2_eval(const DefectContributions &c, const std::vector<int> &defects)
{
  check_defects(c, defects);
  std::vector<int> b(defects.size());
  for (std::size_t i = 0; i < b.size(); ++i)
    b[i] = defects[i] != 0;
  return pair_sum(c.grid, c.ref_two, b, 1);
}

HomogenizedTensor z2_expectation(const DefectContributions &c, double p)
{
  return p * p * all_pairs(c.ref_two, c.grid.cell_count());
}

HomogenizedTensor z2c_eval(const DefectContributions &c, const std::vector<int> &defects)
{
  check_defects(c, defects);
  std::vector<int> b(defects.size());
  for (std::size_t i = 0; i < b.size(); ++i)
    b[i] = defects[i] != 0;
  return pair_sum(c.grid, c.comp_two, b, 0);
}

HomogenizedTensor z2c_expectation(const DefectContributions &c, double p)
{
  return (1.0 - p) * (1.0 - p) * all_pairs(c.comp_two, c.grid.cell_count());
}

ControlCoefficients solve_control_coefficients(std::span<const double> q,
                                               std::span<const double> z1,
                                               std::span<const double> z2,
                                               std::span<const double> z2c)
{
  if (q.size() < 2)
    throw Error("control coefficients need at least two pilot samples");
  std::vector<std::span<const double>> z = {z1, z2};
  if (!z2c.empty())
    z.push_back(z2c);
  for (const auto &s : z)
    if (s.size() != q.size())
      throw Error("pilot samples of the controls differ in length");
  const auto k = static_cast<Eigen::Index>(z.size());
  Eigen::MatrixXd G(k, k);
  Eigen::VectorXd b(k);
  for (Eigen::Index a = 0; a < k; ++a)
  {
    b[a] = empirical_cov(q, z[static_cast<std::size_t>(a)]);
    for (Eigen::Index c = 0; c <= a; ++c)
      G(a, c) = G(c, a) = empirical_cov(z[static_cast<std::size_t>(a)], z[static_cast<std::size_t>(c)]);
  }
  ControlCoefficients out;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
  const double lmax = es.eigenvalues().maxCoeff(), lmin = es.eigenvalues().minCoeff();
  if (lmin < -1e-10 * std::max(lmax, 0.0))
    throw Error("control covariance matrix is not positive semidefinite");
  if (!(lmax > 0.0) || lmin <= 1e-12 * lmax)
  {
    out.fallback = true;
    out.warning = "singular control covariance; using the first-order coefficient only";
    out.rho1 = G(0, 0) > 0.0 ? b[0] / G(0, 0) : 0.0;
    return out;
  }
  const Eigen::VectorXd rho = es.eigenvectors() *
                              (es.eigenvalues().cwiseInverse().asDiagonal() *
                               (es.eigenvectors().transpose() * b));
  out.rho1 = rho[0];
  out.rho2 = rho[1];
  if (k > 2)
    out.rho2c = rho[2];
  return out;
}

}  // namespace qph
