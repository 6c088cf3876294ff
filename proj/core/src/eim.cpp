// Copyright 2026 The qphomog Authors
// SPDX-License-Identifier: Apache-2.0

#include "qph/eim.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

namespace qph
{

namespace
{

// Position of the largest |value|, first occurrence wins.
Eigen::Index first_argmax_abs(const Eigen::Ref<const Eigen::VectorXd> &v, double *value)
{
  Eigen::Index best = 0;
  double m = -1.0;
  for (Eigen::Index k = 0; k < v.size(); ++k)
    if (std::abs(v[k]) > m)
    {
      m = std::abs(v[k]);
      best = k;
    }
  if (value)
    *value = m;
  return best;
}

}  // namespace

Eigen::VectorXd EimModel::evaluate(int cell) const
{
  if (cell < 0 || cell >= grid.cell_count())
    throw Error("EIM evaluation: cell index " + std::to_string(cell) + " out of range");
  return q * alpha.row(cell).transpose();
}

Eigen::MatrixXd EimModel::evaluate_all() const
{
  return alpha * q.transpose();
}

Eigen::MatrixXd EimModel::point_matrix() const
{
  const int n = rank();
  Eigen::MatrixXd P(n, n);
  for (int p = 0; p < n; ++p)
    P.row(p) = q.row(point_elements[static_cast<std::size_t>(p)]);
  return P;
}

double EimModel::lebesgue_bound() const
{
  return std::ldexp(1.0, rank()) - 1.0;
}

Eigen::MatrixXd scalar_samples(const ConductivityField &K)
{
  const int ne = K.grid.cell.element_count();
  Eigen::MatrixXd S(K.grid.cell_count(), ne);
  for (int i = 0; i < K.grid.cell_count(); ++i)
    for (int e = 0; e < ne; ++e)
    {
      const Sym2 &k = K.at(i, e);
      if (k.xy != 0.0 || k.xx != k.yy)
        throw Error("EIM expects an isotropic scalar conductivity");
      S(i, e) = k.xx;
    }
  return S;
}

EimModel eim_interpolate(const MesoGrid &grid, const Eigen::MatrixXd &K, double delta,
                         int max_rank)
{
  if (!(delta > 0.0))
    throw Error("EIM tolerance must be positive");
  if (K.rows() != grid.cell_count() || K.cols() != grid.cell.element_count())
    throw Error("EIM input shape does not match the grid");
  if (!K.allFinite())
    throw Error("EIM input has non-finite values");

  EimModel m;
  m.grid = grid;
  m.delta = delta;
  const Eigen::Index nI = K.rows(), ne = K.cols();
  m.alpha.resize(nI, 0);
  m.q.resize(ne, 0);
  Eigen::MatrixXd R = K;

  auto sup = [&](Eigen::Index *cell) {
    Eigen::VectorXd rowmax = R.cwiseAbs().rowwise().maxCoeff();
    double v = 0.0;
    const Eigen::Index c = first_argmax_abs(rowmax, &v);
    if (cell)
      *cell = c;
    return v;
  };

  Eigen::Index in = 0;
  double s = sup(&in);
  while (s > delta)
  {
    if (m.rank() >= max_rank)
      throw Error("EIM reached the rank cap " + std::to_string(max_rank) +
                  " with sup residual " + std::to_string(s) + " > " + std::to_string(delta));
    m.sup_history.push_back(s);
    double piv = 0.0;
    const Eigen::Index yn = first_argmax_abs(R.row(in).transpose(), &piv);
    const double r_pivot = R(in, yn);
    if (r_pivot == 0.0)
      throw Error("EIM pivot vanished while the tolerance is unmet");
    const Eigen::VectorXd qn = R.row(in).transpose() / r_pivot;

    const int n = m.rank() + 1;
    m.q.conservativeResize(ne, n);
    m.q.col(n - 1) = qn;
    m.point_cells.push_back(static_cast<int>(in));
    m.point_elements.push_back(static_cast<int>(yn));

    // sum_j alpha_j(i) q_j(y_p) = K(i, y_p) by forward substitution.
    const Eigen::MatrixXd P = m.point_matrix();
    Eigen::MatrixXd Kp(nI, n);
    for (int p = 0; p < n; ++p)
      Kp.col(p) = K.col(m.point_elements[static_cast<std::size_t>(p)]);
    m.alpha = P.triangularView<Eigen::UnitLower>().solve(Kp.transpose()).transpose();
    // Earlier coefficients are untouched since q_n vanishes at earlier points,
    // so the residual update only needs the newest term.
    R -= m.alpha.col(n - 1) * qn.transpose();
    s = sup(&in);
  }
  m.sup_history.push_back(s);
  m.achieved = s;
  return m;
}

EimModel eim_interpolate(const ConductivityField &K, double delta, int max_rank)
{
  return eim_interpolate(K.grid, scalar_samples(K), delta, max_rank);
}

Eigen::VectorXd spd_repair(const Eigen::VectorXd &values, double floor)
{
  if (!(floor > 0.0))
    throw Error("repair floor must be positive");
  return values.cwiseMax(floor);
}

Sym2 spd_repair(const Sym2 &k, double floor)
{
  if (!(floor > 0.0))
    throw Error("repair floor must be positive");
  if (k.min_eig() >= floor)
    return k;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(k.matrix());
  const Eigen::Vector2d l = es.eigenvalues().cwiseMax(floor);
  const Eigen::Matrix2d M = es.eigenvectors() * l.asDiagonal() * es.eigenvectors().transpose();
  return Sym2{M(0, 0), 0.5 * (M(0, 1) + M(1, 0)), M(1, 1)};
}

LowRankConductivity eim_to_conductivity(const EimModel &model, double floor)
{
  LowRankConductivity K;
  K.grid = model.grid;
  const auto nI = static_cast<std::size_t>(model.grid.cell_count());
  for (int j = 0; j < model.rank(); ++j)
  {
    ConductivityTerm t{std::vector<Sym2>(nI), model.q.col(j)};
    for (std::size_t i = 0; i < nI; ++i)
      t.meso[i] = Sym2::iso(model.alpha(static_cast<Eigen::Index>(i), j));
    K.terms.push_back(std::move(t));
  }
  double lo = INFINITY, hi = 0.0;
  for (std::size_t i = 0; i < nI; ++i)
  {
    const Eigen::VectorXd v = model.evaluate(static_cast<int>(i));
    const Eigen::VectorXd r = spd_repair(v, floor);
    lo = std::min(lo, r.minCoeff());
    hi = std::max(hi, r.maxCoeff());
    if ((r - v).cwiseAbs().maxCoeff() == 0.0)
      continue;
    ConductivityTerm t{std::vector<Sym2>(nI), r - v};
    t.meso[i] = Sym2::iso(1.0);
    K.terms.push_back(std::move(t));
  }
  K.alpha = lo;
  K.beta = hi;
  return K;
}

void EimModel::save(const std::string &path) const
{
  nlohmann::json j;
  j["format"] = "qphomog-eim";
  j["version"] = 1;
  j["grid"] = {{"n1", grid.n1}, {"n2", grid.n2}, {"nx", grid.cell.nx}, {"ny", grid.cell.ny},
               {"lx", grid.cell.lx}, {"ly", grid.cell.ly}};
  j["delta"] = delta;
  j["achieved"] = achieved;
  j["sup_history"] = sup_history;
  j["point_cells"] = point_cells;
  j["point_elements"] = point_elements;
  auto cols = [](const Eigen::MatrixXd &M) {
    std::vector<std::vector<double>> out;
    for (Eigen::Index c = 0; c < M.cols(); ++c)
      out.emplace_back(M.col(c).data(), M.col(c).data() + M.rows());
    return out;
  };
  j["alpha"] = cols(alpha);
  j["q"] = cols(q);
  std::ofstream f(path);
  if (!f)
    throw Error("cannot open '" + path + "' for writing");
  f << j.dump() << '\n';
}

EimModel EimModel::load(const std::string &path)
{
  std::ifstream f(path);
  if (!f)
    throw Error("cannot open '" + path + "'");
  const nlohmann::json j = nlohmann::json::parse(f);
  if (j.at("format") != "qphomog-eim" || j.at("version") != 1)
    throw Error("'" + path + "' is not an EIM model file");
  EimModel m;
  const auto &g = j.at("grid");
  m.grid = build_meso_grid(g.at("n1"), g.at("n2"),
                           build_cell_mesh(g.at("nx"), g.at("ny"), g.at("lx"), g.at("ly")));
  m.delta = j.at("delta");
  m.achieved = j.at("achieved");
  m.sup_history = j.at("sup_history").get<std::vector<double>>();
  m.point_cells = j.at("point_cells").get<std::vector<int>>();
  m.point_elements = j.at("point_elements").get<std::vector<int>>();
  auto mat = [](const nlohmann::json &c, Eigen::Index rows) {
    const auto v = c.get<std::vector<std::vector<double>>>();
    Eigen::MatrixXd M(rows, static_cast<Eigen::Index>(v.size()));
    for (std::size_t k = 0; k < v.size(); ++k)
    {
      if (static_cast<Eigen::Index>(v[k].size()) != rows)
        throw Error("EIM model file has inconsistent column sizes");
      M.col(static_cast<Eigen::Index>(k)) = Eigen::Map<const Eigen::VectorXd>(v[k].data(), rows);
    }
    return M;
  };
  m.alpha = mat(j.at("alpha"), m.grid.cell_count());
  m.q = mat(j.at("q"), m.grid.cell.element_count());
  return m;
}

}  // namespace qph
