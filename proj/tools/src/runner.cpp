// Copyright 2026 The qphomog Authors
// SPDX-License-Identifier: Apache-2.0

#include "runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <thread>

#include <Eigen/Core>

#include "qph/eim.hpp"
#include "qph/estimators.hpp"
#include "qph/homogenize.hpp"
#include "qph/seeding.hpp"
#include "qph/weakly_stochastic.hpp"

#ifndef QPH_VERSION
#define QPH_VERSION "unknown"
#endif

namespace qph::cli
{

namespace
{

using nlohmann::json;
using Clock = std::chrono::steady_clock;

std::atomic<bool> g_stop{false};

double seconds_since(Clock::time_point t0)
{
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// --- records and the ordered writer -------------------------------------

struct Record
{
  std::string model;
  std::string phase;
  std::size_t sample = 0;
  std::uint64_t seed = 0;
  HomogenizedTensor K = HomogenizedTensor::Zero();
  double qoi = 0.0;
  int rank = 0;
  double seconds = 0.0;
  bool recycled = false;
  int modes_added = 0;
  std::optional<double> z1, z2, z2c, ref_error;
};

std::string num(double v)
{
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string opt_num(const std::optional<double> &v) { return v ? num(*v) : std::string(); }

class CsvWriter
{
public:
  CsvWriter(const std::string &path, bool record_timing)
    : out_(path, std::ios::trunc), timing_(record_timing)
  {
    if (!out_)
    {
      throw Error("cannot write " + path);
    }
    const auto &cols = samples_csv_columns();
    for (std::size_t i = 0; i < cols.size(); ++i)
    {
      out_ << (i ? "," : "") << cols[i];
    }
    out_ << '\n' << std::flush;
  }

  void write(const Record &r)
  {
    out_ << r.model << ',' << r.phase << ',' << r.sample << ',' << r.seed << ',' << num(r.K(0, 0))
         << ',' << num(r.K(0, 1)) << ',' << num(r.K(1, 1)) << ',' << num(r.qoi) << ',' << r.rank
         << ',' << num(timing_ ? r.seconds : 0.0) << ',' << (r.recycled ? 1 : 0) << ','
         << r.modes_added << ',' << opt_num(r.z1) << ',' << opt_num(r.z2) << ',' << opt_num(r.z2c)
         << ',' << opt_num(r.ref_error) << '\n';
    out_.flush();
  }

private:
  std::ofstream out_;
  bool timing_;
};

// --- model evaluation ----------------------------------------------------

struct Output
{
  HomogenizedTensor K = HomogenizedTensor::Zero();
  int rank = 0;
  double seconds = 0.0;
  bool recycled = false;
  int modes_added = 0;
};

Output from_result(const HomogenizationResult &r)
{
  return {r.K, r.rank, r.seconds, r.recycled, r.modes_added};
}

class Models
{
public:
  explicit Models(const RunConfig &c) : cfg_(c)
  {
    fem_.rel_tol = c.solver.fem_rel_tol;
    const CellMesh cell = c.medium.grid().cell;
    libraries_.emplace_back(cell);
    for (std::size_t j = 0; j < c.estimator.low_fidelity.size(); ++j)
    {
      libraries_.emplace_back(cell);
    }
    used_.assign(libraries_.size(), 0);
  }

  // Model 0 is the high-fidelity solver, model j >= 1 the (j-1)-th low-fidelity one.
  std::string name(int m) const { return m == 0 ? "high" : "low" + std::to_string(m); }
  int count() const { return static_cast<int>(libraries_.size()); }
  bool uses_library(int m) const
  {
    return used_[static_cast<std::size_t>(m)] && cfg_.solver.recycling &&
           (m > 0 || cfg_.solver.method == HighSolver::Mslrm);
  }
  void mark_used(int m) { used_[static_cast<std::size_t>(m)] = 1; }
  ModesLibrary &library(int m) { return libraries_[static_cast<std::size_t>(m)]; }

  Output evaluate(int m, const Medium &med, ModesLibrary *lib, int sample) const
  {
    ModesLibrary fresh(med.grid.cell);
    ModesLibrary &L = (lib && cfg_.solver.recycling) ? *lib : fresh;
    if (m == 0)
    {
      return high(med, L, sample);
    }
    return low(cfg_.estimator.low_fidelity[static_cast<std::size_t>(m - 1)], med, L, sample);
  }

  Output fem_reference(const Medium &med) const
  {
    if (med.mapping)
    {
      return from_result(apparent_homogenize_mapped(*med.low_rank, *med.mapping, MappedSolver::Fem,
                                                    nullptr, {}, fem_));
    }
    return from_result(apparent_homogenize_fem(med.grid, med.dense, fem_));
  }

private:
  MslrmOptions mslrm(double eps) const
  {
    MslrmOptions o;
    o.epsilon = eps;
    o.penalty = cfg_.solver.penalty;
    o.greedy.max_rank = cfg_.solver.max_rank;
    return o;
  }

  Output high(const Medium &med, ModesLibrary &lib, int sample) const
  {
    if (cfg_.solver.method == HighSolver::Fem)
    {
      return fem_reference(med);
    }
    if (!med.low_rank)
    {
      throw Error(std::string("solver.method \"mslrm\" needs a separated medium; ") +
                  medium_kind_name(cfg_.medium.kind) + " samples are only available pointwise");
    }
    if (med.mapping)
    {
      return from_result(apparent_homogenize_mapped(*med.low_rank, *med.mapping, MappedSolver::Mslrm,
                                                    &lib, mslrm(cfg_.solver.epsilon), fem_, sample));
    }
    return from_result(apparent_homogenize_mslrm(*med.low_rank, lib, mslrm(cfg_.solver.epsilon), sample));
  }

  Output low(const LowFidelity &f, const Medium &med, ModesLibrary &lib, int sample) const
  {
    const auto t0 = Clock::now();
    HomogenizationResult r;
    if (med.mapping)
    {
      // the stretched-fibre tensor is anisotropic and already rank 3: no interpolation
      r = apparent_homogenize_mapped(*med.low_rank, *med.mapping, MappedSolver::Mslrm, &lib,
                                     mslrm(f.epsilon), fem_, sample);
    }
    else
    {
      const EimModel eim = eim_interpolate(med.dense, f.delta);
      const LowRankConductivity Kt = eim_to_conductivity(eim, cfg_.estimator.eim_floor);
      r = apparent_homogenize_mslrm(Kt, lib, mslrm(f.epsilon), sample);
    }
    Output o = from_result(r);
    o.seconds = seconds_since(t0);
    return o;
  }

  const RunConfig &cfg_;
  SolverOptions fem_;
  std::vector<ModesLibrary> libraries_;
  std::vector<char> used_;
};

// --- batch scheduling ------------------------------------------------------

struct Task
{
  std::string phase;
  std::uint64_t stream = 0;
  std::size_t sample = 0;
  std::vector<int> models;
  bool reference = false;  // also solve with FEM and log the error of model 0
};

struct TaskResult
{
  std::vector<Record> records;
  std::vector<int> inclusions;
};

template <typename F>
void parallel_run(std::size_t n, int threads, F &&fn)
{
  if (threads <= 1 || n <= 1)
  {
    for (std::size_t i = 0; i < n; ++i)
    {
      fn(i);
    }
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  std::vector<std::thread> pool;
  const std::size_t nt = std::min<std::size_t>(n, static_cast<std::size_t>(threads));
  for (std::size_t t = 0; t < nt; ++t)
  {
    pool.emplace_back([&]() {
      for (std::size_t i = next++; i < n; i = next++)
      {
        try
        {
          fn(i);
        }
        catch (...)
        {
          std::lock_guard<std::mutex> lock(err_mu);
          if (!err)
          {
            err = std::current_exception();
          }
        }
      }
    });
  }
  for (auto &t : pool)
  {
    t.join();
  }
  if (err)
  {
    std::rethrow_exception(err);
  }
}

class Engine
{
public:
  Engine(const RunConfig &cfg, CsvWriter &csv)
    : cfg_(cfg), models_(cfg), csv_(csv), qoi_{cfg.estimator.qoi_row, cfg.estimator.qoi_col}
  {
  }

  Models &models() { return models_; }
  const ScalarQoI &qoi() const { return qoi_; }

  // Optional per-sample hook filling the control columns.
  std::function<void(Record &, const Medium &)> decorate;

  // Runs the tasks in batches of `threads`. Sequentially every solve sees the
  // library grown by all earlier ones; in parallel each sample works on a
  // snapshot taken at the start of its batch and new modes are merged in
  // sample order afterwards, so results depend on the thread count only.
  // Returns false when interrupted.
  bool run(const std::vector<Task> &tasks, std::vector<TaskResult> &results)
  {
    results.assign(tasks.size(), {});
    for (const auto &t : tasks)
    {
      for (int m : t.models)
      {
        models_.mark_used(m);
      }
    }
    const std::size_t batch = static_cast<std::size_t>(cfg_.threads);
    for (std::size_t start = 0; start < tasks.size(); start += batch)
    {
      if (stop_requested())
      {
        results.resize(start);
        return false;
      }
      const std::size_t stop = std::min(tasks.size(), start + batch);
      const bool shared = stop - start == 1;
      std::vector<std::vector<ModesLibrary>> copies(stop - start);
      std::vector<int> snapshot(static_cast<std::size_t>(models_.count()));
      for (int m = 0; m < models_.count(); ++m)
      {
        snapshot[static_cast<std::size_t>(m)] = models_.library(m).size();
      }
      if (!shared)
      {
        for (auto &c : copies)
        {
          for (int m = 0; m < models_.count(); ++m)
          {
            c.push_back(models_.library(m));
          }
        }
      }
      parallel_run(stop - start, cfg_.threads, [&](std::size_t i) {
        const Task &t = tasks[start + i];
        TaskResult &res = results[start + i];
        const std::uint64_t seed = derive_seed(cfg_.seed, t.stream, t.sample);
        const Medium med = sample_medium(cfg_.medium, seed);
        res.inclusions = med.inclusions;
        for (int m : t.models)
        {
          ModesLibrary *lib = shared ? &models_.library(m) : &copies[i][static_cast<std::size_t>(m)];
          const Output o = models_.evaluate(m, med, lib, static_cast<int>(t.sample));
          Record r;
          r.model = models_.name(m);
          r.phase = t.phase;
          r.sample = t.sample;
          r.seed = seed;
          r.K = o.K;
          r.qoi = qoi_(o.K);
          r.rank = o.rank;
          r.seconds = o.seconds;
          r.recycled = o.recycled;
          r.modes_added = o.modes_added;
          if (m == 0 && t.reference)
          {
            const Output ref = models_.fem_reference(med);
            r.ref_error = (o.K - ref.K).norm() / ref.K.norm();
          }
          if (decorate)
          {
            decorate(r, med);
          }
          res.records.push_back(r);
        }
      });
      if (!shared)
      {
        for (std::size_t i = 0; i < copies.size(); ++i)
        {
          for (int m = 0; m < models_.count(); ++m)
          {
            const ModesLibrary &c = copies[i][static_cast<std::size_t>(m)];
            for (int k = snapshot[static_cast<std::size_t>(m)]; k < c.size(); ++k)
            {
              models_.library(m).try_add(c.mode(k), c.created_at(k));
            }
          }
        }
      }
      for (std::size_t i = start; i < stop; ++i)
      {
        for (const auto &r : results[i].records)
        {
          csv_.write(r);
        }
      }
    }
    return true;
  }

private:
  const RunConfig &cfg_;
  Models models_;
  CsvWriter &csv_;
  ScalarQoI qoi_;
};

std::vector<Task> make_tasks(const std::string &phase, std::uint64_t stream, std::size_t n,
                             std::vector<int> models, bool reference = false)
{
  std::vector<Task> t(n);
  for (std::size_t k = 0; k < n; ++k)
  {
    t[k] = {phase, stream, k, models, reference};
  }
  return t;
}

// Column `model` of the results, in task order.
std::vector<double> column(const std::vector<TaskResult> &res, std::size_t idx)
{
  std::vector<double> v;
  v.reserve(res.size());
  for (const auto &r : res)
  {
    v.push_back(r.records.at(idx).qoi);
  }
  return v;
}

double mean_seconds(const std::vector<TaskResult> &res, std::size_t idx)
{
  double s = 0.0;
  for (const auto &r : res)
  {
    s += r.records.at(idx).seconds;
  }
  return res.empty() ? 0.0 : s / static_cast<double>(res.size());
}

json tensor_json(const HomogenizedTensor &K)
{
  return json::array({json::array({K(0, 0), K(0, 1)}), json::array({K(1, 0), K(1, 1)})});
}

json rank_stats(const std::vector<TaskResult> &res, std::size_t idx)
{
  if (res.empty())
  {
    return json::object();
  }
  double sum = 0.0;
  int mx = 0, recycled = 0;
  for (const auto &r : res)
  {
    sum += r.records[idx].rank;
    mx = std::max(mx, r.records[idx].rank);
    recycled += r.records[idx].recycled;
  }
  return {{"mean_rank", sum / static_cast<double>(res.size())},
          {"max_rank", mx},
          {"recycled_samples", recycled}};
}

double variance_or_zero(const std::vector<double> &v)
{
  return v.size() >= 2 ? empirical_var(v) : 0.0;
}

// --- estimator modes -------------------------------------------------------

struct ModeResult
{
  json summary;
  bool complete = true;
};

ModeResult run_mc(const RunConfig &cfg, Engine &eng, bool plan_only)
{
  ModeResult out;
  json &s = out.summary;
  const bool reference = cfg.estimator.compare_fem && cfg.solver.method == HighSolver::Mslrm;
  std::size_t m = static_cast<std::size_t>(cfg.estimator.samples);
  std::vector<TaskResult> res;
  if (m == 0)
  {
    std::vector<TaskResult> pilot;
    out.complete = eng.run(make_tasks("pilot", kStreamPilot, static_cast<std::size_t>(cfg.estimator.pilot_samples), {0}), pilot);
    if (!out.complete)
    {
      return out;
    }
    const double var = empirical_var(column(pilot, 0));
    m = required_samples(var, cfg.estimator.eta);
    s["pilot"] = {{"samples", pilot.size()}, {"variance", var}, {"cost", mean_seconds(pilot, 0)}};
  }
  s["allocation"] = {{"samples", m}};
  if (plan_only)
  {
    return out;
  }
  out.complete = eng.run(make_tasks("main", kStreamHigh, m, {0}, reference), res);
  const std::vector<double> q = column(res, 0);
  HomogenizedTensor mean = HomogenizedTensor::Zero();
  for (const auto &r : res)
  {
    mean += r.records[0].K;
  }
  if (!res.empty())
  {
    mean /= static_cast<double>(res.size());
  }
  const double var = variance_or_zero(q);
  s["estimate"] = q.empty() ? 0.0 : empirical_mean(q);
  s["estimate_tensor"] = tensor_json(mean);
  s["variance"] = var;
  s["samples"] = q.size();
  s["estimator_variance"] = q.empty() ? 0.0 : var / static_cast<double>(q.size());
  s["eta_squared"] = cfg.estimator.eta * cfg.estimator.eta;
  s["mean_cost"] = mean_seconds(res, 0);
  s["ranks"] = rank_stats(res, 0);
  if (reference)
  {
    std::vector<double> err;
    for (const auto &r : res)
    {
      err.push_back(*r.records[0].ref_error);
    }
    std::sort(err.begin(), err.end());
    s["median_ref_error"] = err.empty() ? 0.0 : err[err.size() / 2];
  }
  return out;
}

ModeResult run_cv_eim(const RunConfig &cfg, Engine &eng, bool plan_only)
{
  ModeResult out;
  json &s = out.summary;
  std::vector<TaskResult> pilot;
  out.complete = eng.run(make_tasks("pilot", kStreamPilot, static_cast<std::size_t>(cfg.estimator.pilot_samples), {0, 1}), pilot);
  if (!out.complete)
  {
    return out;
  }
  const std::vector<double> q = column(pilot, 0), z = column(pilot, 1);
  const double rho = cv_rho(q, z);
  std::vector<double> u(q.size());
  for (std::size_t i = 0; i < q.size(); ++i)
  {
    u[i] = q[i] - rho * z[i];
  }
  const double var_q = empirical_var(q), var_z = empirical_var(z), var_u = empirical_var(u);
  const double c_q = cfg.estimator.cost_high.value_or(mean_seconds(pilot, 0));
  const double c_z = cfg.estimator.cost_low.empty() ? mean_seconds(pilot, 1) : cfg.estimator.cost_low[0];
  const CvPlan plan = cv_allocate(var_u, var_z, rho, c_q + c_z, c_z, cfg.estimator.eta);
  const double eta2 = cfg.estimator.eta * cfg.estimator.eta;
  const double cost_fe = c_q * var_q / eta2;
  s["pilot"] = {{"samples", q.size()}, {"var_q", var_q}, {"var_z", var_z}, {"var_u", var_u},
                {"rho", rho}, {"cost_high", c_q}, {"cost_low", c_z},
                {"correlation", var_q > 0.0 && var_z > 0.0 ? empirical_cov(q, z) / std::sqrt(var_q * var_z) : 0.0}};
  s["allocation"] = {{"n_u", plan.n_u}, {"n_z", plan.n_z}, {"plain_mc", plan.plain_mc},
                     {"predicted_variance", plan.predicted_variance}, {"cost", plan.cost()}};
  s["predicted_reduction"] = {{"variance_factor", var_u > 0.0 ? var_q / var_u : 0.0},
                              {"cost_plain_mc", cost_fe},
                              {"cost_factor", plan.cost() > 0.0 ? cost_fe / plan.cost() : 0.0}};
  if (plan_only)
  {
    return out;
  }
  std::vector<TaskResult> ures, zres;
  out.complete = eng.run(make_tasks("main", kStreamHigh, plan.n_u, {0, 1}), ures);
  if (out.complete && plan.n_z > 0)
  {
    out.complete = eng.run(make_tasks("low", kStreamLow, plan.n_z, {1}), zres);
  }
  const std::vector<double> qm = column(ures, 0), zm = column(ures, 1), zl = column(zres, 0);
  std::vector<double> um(qm.size());
  for (std::size_t i = 0; i < qm.size(); ++i)
  {
    um[i] = qm[i] - rho * zm[i];
  }
  const double mean_u = um.empty() ? 0.0 : empirical_mean(um);
  const double mean_z = zl.empty() ? 0.0 : empirical_mean(zl);
  const double vu = variance_or_zero(um), vz = variance_or_zero(zl);
  const double achieved = (um.empty() ? 0.0 : vu / static_cast<double>(um.size())) +
                          (zl.empty() ? 0.0 : rho * rho * vz / static_cast<double>(zl.size()));
  s["estimate"] = plan.plain_mc ? mean_u : mean_u + rho * mean_z;
  s["mean_u"] = mean_u;
  s["mean_z"] = mean_z;
  s["samples"] = {{"n_u", um.size()}, {"n_z", zl.size()}};
  s["achieved_variance"] = achieved;
  s["eta_squared"] = eta2;
  const double vq_main = variance_or_zero(qm);
  const double cost = c_q * static_cast<double>(um.size()) +
                      c_z * static_cast<double>(um.size() + zl.size());
  s["achieved_reduction"] = {{"variance_factor", vu > 0.0 ? vq_main / vu : 0.0},
                             {"cost", cost},
                             {"cost_factor", cost > 0.0 ? cost_fe / cost : 0.0}};
  s["ranks_high"] = rank_stats(ures, 0);
  s["ranks_low"] = rank_stats(ures, 1);
  return out;
}

ModeResult run_cv_weakly(const RunConfig &cfg, Engine &eng, const std::string &cache_dir,
                         bool second_order, bool plan_only)
{
  ModeResult out;
  json &s = out.summary;
  const DefectModel model = defect_model_from_spec(cfg.medium);
  ContributionOptions co;
  co.solver = cfg.estimator.contribution_solver == "mslrm" ? DefectSolver::Mslrm : DefectSolver::Fem;
  co.epsilon = cfg.solver.epsilon;
  co.penalty = cfg.solver.penalty;
  co.fem.rel_tol = cfg.solver.fem_rel_tol;
  co.use_symmetry = cfg.estimator.symmetry;
  co.complementary = second_order && cfg.estimator.complementary;
  co.threads = cfg.threads;
  const DefectContributions c = cached_contributions(cache_dir, model, co);
  const double p = cfg.medium.p;
  const ScalarQoI qoi = eng.qoi();
  const double e1 = qoi(z1_expectation(c, p));
  const double e2 = qoi(z2_expectation(c, p));
  const double e2c = c.has_complementary ? qoi(z2c_expectation(c, p)) : 0.0;
  eng.decorate = [&](Record &r, const Medium &med) {
    r.z1 = qoi(z1_eval(c, med.inclusions));
    if (second_order)
    {
      r.z2 = qoi(z2_eval(c, med.inclusions));
      if (c.has_complementary)
      {
        r.z2c = qoi(z2c_eval(c, med.inclusions));
      }
    }
  };
  s["contributions"] = {{"solves", c.solves}, {"seconds", c.seconds}, {"complementary", c.has_complementary},
                        {"expectation_z1", e1}, {"expectation_z2", e2}, {"expectation_z2c", e2c}};

  std::vector<TaskResult> pilot;
  out.complete = eng.run(make_tasks("pilot", kStreamPilot, static_cast<std::size_t>(cfg.estimator.pilot_samples), {0}), pilot);
  if (!out.complete)
  {
    return out;
  }
  auto controls = [&](const std::vector<TaskResult> &res, std::vector<double> &q, std::vector<double> &z1,
                      std::vector<double> &z2, std::vector<double> &z2c) {
    for (const auto &t : res)
    {
      const Record &r = t.records[0];
      q.push_back(r.qoi);
      z1.push_back(*r.z1);
      if (r.z2)
        z2.push_back(*r.z2);
      if (r.z2c)
        z2c.push_back(*r.z2c);
    }
  };
  std::vector<double> q, z1, z2, z2c;
  controls(pilot, q, z1, z2, z2c);
  ControlCoefficients cc;
  if (second_order)
  {
    cc = solve_control_coefficients(q, z1, z2, z2c);
  }
  else
  {
    cc.rho1 = cv_rho(q, z1);
  }
  auto x_values = [&](const std::vector<double> &qq, const std::vector<double> &a, const std::vector<double> &b,
                      const std::vector<double> &d) {
    std::vector<double> x(qq.size());
    for (std::size_t i = 0; i < qq.size(); ++i)
    {
      x[i] = qq[i] - cc.rho1 * (a[i] - e1);
      if (!b.empty())
        x[i] -= cc.rho2 * (b[i] - e2);
      if (!d.empty())
        x[i] -= cc.rho2c * (d[i] - e2c);
    }
    return x;
  };
  const std::vector<double> xp = x_values(q, z1, z2, z2c);
  const double var_q = empirical_var(q), var_x = empirical_var(xp);
  const std::size_t n = required_samples(var_x, cfg.estimator.eta);
  const double c_q = cfg.estimator.cost_high.value_or(mean_seconds(pilot, 0));
  const double eta2 = cfg.estimator.eta * cfg.estimator.eta;
  s["pilot"] = {{"samples", q.size()}, {"var_q", var_q}, {"var_x", var_x}, {"cost_high", c_q}};
  s["coefficients"] = {{"rho1", cc.rho1}, {"rho2", cc.rho2}, {"rho2c", cc.rho2c},
                       {"fallback", cc.fallback}, {"warning", cc.warning}};
  s["allocation"] = {{"samples", n}};
  s["predicted_reduction"] = {{"variance_factor", var_x > 0.0 ? var_q / var_x : 0.0},
                              {"cost_plain_mc", c_q * var_q / eta2},
                              {"cost_factor", var_x > 0.0 ? var_q / var_x : 0.0}};
  if (plan_only)
  {
    return out;
  }
  std::vector<TaskResult> res;
  out.complete = eng.run(make_tasks("main", kStreamHigh, n, {0}), res);
  std::vector<double> qm, a, b, d;
  controls(res, qm, a, b, d);
  const std::vector<double> xm = x_values(qm, a, b, d);
  const double vx = variance_or_zero(xm), vq = variance_or_zero(qm);
  s["estimate"] = xm.empty() ? 0.0 : empirical_mean(xm);
  s["samples"] = xm.size();
  s["variance_x"] = vx;
  s["variance_q"] = vq;
  s["achieved_variance"] = xm.empty() ? 0.0 : vx / static_cast<double>(xm.size());
  s["eta_squared"] = eta2;
  const double cost = c_q * static_cast<double>(xm.size()) + c.seconds;
  s["achieved_reduction"] = {{"variance_factor", vx > 0.0 ? vq / vx : 0.0},
                             {"cost", cost},
                             {"cost_factor", cost > 0.0 ? c_q * vq / eta2 / cost : 0.0}};
  s["ranks"] = rank_stats(res, 0);
  return out;
}

// Subset of the low-fidelity models (kept in decreasing |r| order) with the
// smallest predicted cost ratio among those satisfying the ordering conditions.
std::vector<int> select_mfmc_models(const std::vector<double> &gamma, const std::vector<double> &r)
{
  const int n = static_cast<int>(gamma.size()) - 1;
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j)
  {
    order[static_cast<std::size_t>(j)] = j + 1;
  }
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return std::abs(r[static_cast<std::size_t>(a)]) > std::abs(r[static_cast<std::size_t>(b)]);
  });
  std::vector<int> best{0};
  double best_ratio = 1.0;
  for (unsigned mask = 1; mask < (1u << n); ++mask)
  {
    std::vector<int> pick{0};
    std::vector<double> g{gamma[0]}, rr{1.0};
    for (int j = 0; j < n; ++j)
    {
      if (mask & (1u << j))
      {
        const int m = order[static_cast<std::size_t>(j)];
        pick.push_back(m);
        g.push_back(gamma[static_cast<std::size_t>(m)]);
        rr.push_back(r[static_cast<std::size_t>(m)]);
      }
    }
    if (!mfmc_check_conditions(g, rr).empty())
    {
      continue;
    }
    const double ratio = mfmc_predicted_reduction(g, rr);
    if (ratio < best_ratio)
    {
      best_ratio = ratio;
      best = pick;
    }
  }
  return best;
}

ModeResult run_mfmc(const RunConfig &cfg, Engine &eng, bool plan_only)
{
  ModeResult out;
  json &s = out.summary;
  const int nm = eng.models().count();
  std::vector<int> all(static_cast<std::size_t>(nm));
  for (int m = 0; m < nm; ++m)
  {
    all[static_cast<std::size_t>(m)] = m;
  }
  std::vector<TaskResult> pilot;
  out.complete = eng.run(make_tasks("pilot", kStreamPilot, static_cast<std::size_t>(cfg.estimator.pilot_samples), all), pilot);
  if (!out.complete)
  {
    return out;
  }
  std::vector<double> gamma, r, var;
  const std::vector<double> q = column(pilot, 0);
  for (int m = 0; m < nm; ++m)
  {
    const std::vector<double> v = column(pilot, static_cast<std::size_t>(m));
    var.push_back(empirical_var(v));
    const double sq = std::sqrt(var[0] * var.back());
    r.push_back(m == 0 ? 1.0 : (sq > 0.0 ? empirical_cov(q, v) / sq : 0.0));
    double c = mean_seconds(pilot, static_cast<std::size_t>(m));
    if (m == 0 && cfg.estimator.cost_high)
      c = *cfg.estimator.cost_high;
    if (m > 0 && !cfg.estimator.cost_low.empty())
      c = cfg.estimator.cost_low[static_cast<std::size_t>(m - 1)];
    gamma.push_back(c);
  }
  const std::vector<int> chosen = select_mfmc_models(gamma, r);
  std::vector<double> g, rr, vv;
  for (int m : chosen)
  {
    g.push_back(gamma[static_cast<std::size_t>(m)]);
    rr.push_back(r[static_cast<std::size_t>(m)]);
    vv.push_back(var[static_cast<std::size_t>(m)]);
  }
  const double eta2 = cfg.estimator.eta * cfg.estimator.eta;
  const MfmcPlan plan = cfg.estimator.budget > 0.0
                            ? mfmc_allocate(g, rr, vv, cfg.estimator.budget, MfmcRounding::Budget)
                            : mfmc_allocate_tolerance(g, rr, vv, eta2);
  json models = json::array();
  for (int m = 0; m < nm; ++m)
  {
    models.push_back({{"model", eng.models().name(m)},
                      {"cost", gamma[static_cast<std::size_t>(m)]},
                      {"correlation", r[static_cast<std::size_t>(m)]},
                      {"variance", var[static_cast<std::size_t>(m)]},
                      {"selected", std::find(chosen.begin(), chosen.end(), m) != chosen.end()}});
  }
  s["pilot"] = {{"samples", q.size()}, {"models", models}};
  s["allocation"] = {{"m", plan.m}, {"m_real", plan.m_real}, {"rho", plan.rho},
                     {"budget", plan.budget}, {"cost", plan.cost()},
                     {"predicted_variance", plan.predicted_variance}};
  s["predicted_reduction"] = {{"mse_ratio", plan.predicted_ratio}};
  if (plan_only)
  {
    return out;
  }
  // nested sampling on the shared stream: model chosen[j] on the first m_j draws
  std::vector<Task> tasks;
  for (std::size_t k = 0; k < plan.m.back(); ++k)
  {
    Task t{"main", kStreamShared, k, {}, false};
    for (std::size_t j = 0; j < chosen.size(); ++j)
    {
      if (k < plan.m[j])
      {
        t.models.push_back(chosen[j]);
      }
    }
    tasks.push_back(t);
  }
  std::vector<TaskResult> res;
  out.complete = eng.run(tasks, res);
  std::vector<std::vector<double>> v(chosen.size());
  for (const auto &t : res)
  {
    for (std::size_t j = 0; j < t.records.size(); ++j)
    {
      v[j].push_back(t.records[j].qoi);
    }
  }
  double value = v[0].empty() ? 0.0 : empirical_mean(v[0]);
  for (std::size_t j = 1; j < chosen.size(); ++j)
  {
    if (v[j].empty())
      continue;
    const std::span<const double> allv(v[j]);
    const std::size_t prev = std::min(plan.m[j - 1], allv.size());
    value += plan.rho[j] * (empirical_mean(allv) - empirical_mean(allv.first(prev)));
  }
  s["estimate"] = value;
  s["samples"] = plan.m;
  s["variance_high"] = variance_or_zero(v[0]);
  s["eta_squared"] = eta2;
  s["achieved_cost"] = [&]() {
    double c = 0.0;
    for (std::size_t j = 0; j < chosen.size(); ++j)
      c += g[j] * static_cast<double>(v[j].size());
    return c;
  }();
  return out;
}

void write_json(const std::filesystem::path &p, const json &j)
{
  std::ofstream out(p, std::ios::trunc);
  if (!out)
  {
    throw Error("cannot write " + p.string());
  }
  out << j.dump(2) << '\n';
}

std::string sanitize(const std::string &s)
{
  std::string o;
  for (char ch : s)
  {
    o += (std::isalnum(static_cast<unsigned char>(ch)) || ch == '.' || ch == '-' || ch == '_') ? ch : '_';
  }
  return o;
}

}  // namespace

const std::vector<std::string> &samples_csv_columns()
{
  static const std::vector<std::string> cols{
      "model", "phase",    "sample",      "seed", "k_xx", "k_xy", "k_yy", "qoi",
      "rank",  "seconds", "recycled", "modes_added", "z1",   "z2",   "z2c",  "ref_error"};
  return cols;
}

void request_stop() { g_stop = true; }
void clear_stop() { g_stop = false; }
bool stop_requested() { return g_stop.load(); }

RunOutcome run_campaign(const RunConfig &config, const std::string &out_dir, bool plan_only)
{
  namespace fs = std::filesystem;
  const auto t0 = Clock::now();
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);

  json manifest;
  manifest["tool"] = "qphomog";
  manifest["version"] = QPH_VERSION;
  manifest["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                      "." + std::to_string(EIGEN_MINOR_VERSION);
  manifest["compiler"] = __VERSION__;
  manifest["config"] = config.to_json();
  manifest["seed"] = config.seed;
  manifest["streams"] = {{"medium", kStreamMedium}, {"pilot", kStreamPilot}, {"high", kStreamHigh},
                         {"low", kStreamLow},       {"shared", kStreamShared}};
  manifest["seed_rule"] = "sample k of a stream uses derive_seed(seed, stream, k)";
  manifest["samples_csv"] = {{"version", kSamplesCsvVersion}, {"columns", samples_csv_columns()}};
  manifest["plan_only"] = plan_only;
  write_json(dir / "manifest.json", manifest);

  CsvWriter csv((dir / "samples.csv").string(), config.record_timing);
  Engine eng(config, csv);
  const std::string cache = config.cache_dir.empty() ? (dir / "cache").string() : config.cache_dir;

  ModeResult mr;
  switch (config.estimator.mode)
  {
    case EstimatorMode::Mc:
      mr = run_mc(config, eng, plan_only);
      break;
    case EstimatorMode::CvEim:
      mr = run_cv_eim(config, eng, plan_only);
      break;
    case EstimatorMode::CvWeakly1:
      mr = run_cv_weakly(config, eng, cache, false, plan_only);
      break;
    case EstimatorMode::CvWeakly2:
      mr = run_cv_weakly(config, eng, cache, true, plan_only);
      break;
    case EstimatorMode::Mfmc:
      mr = run_mfmc(config, eng, plan_only);
      break;
  }
  RunOutcome out;
  out.interrupted = !mr.complete;
  out.summary = mr.summary;
  out.summary["mode"] = estimator_mode_name(config.estimator.mode);
  out.summary["interrupted"] = out.interrupted;
  out.summary["wall_seconds"] = config.record_timing ? seconds_since(t0) : 0.0;
  json libs = json::array();
  for (int m = 0; m < eng.models().count(); ++m)
  {
    if (eng.models().uses_library(m))
    {
      const std::string file = "library-" + eng.models().name(m) + ".json";
      eng.models().library(m).save((dir / file).string());
      libs.push_back({{"model", eng.models().name(m)}, {"modes", eng.models().library(m).size()}, {"file", file}});
    }
  }
  out.summary["libraries"] = libs;
  write_json(dir / (plan_only ? "plan.json" : "summary.json"), out.summary);
  return out;
}

std::vector<SweepEntry> run_sweep(const json &base_config, const std::string &parameter,
                                  const std::vector<std::string> &values, const std::string &out_dir)
{
  namespace fs = std::filesystem;
  std::vector<SweepEntry> entries;
  if (values.empty())
  {
    return entries;
  }
  fs::create_directories(out_dir);
  std::ofstream merged(fs::path(out_dir) / "sweep.csv", std::ios::trunc);
  merged << "parameter,value,status,estimate,variance,samples,mean_rank,median_ref_error,directory\n";
  for (std::size_t i = 0; i < values.size(); ++i)
  {
    if (stop_requested())
    {
      break;
    }
    SweepEntry e;
    e.value = values[i];
    e.directory = (fs::path(out_dir) / (std::to_string(i) + "-" + sanitize(parameter) + "-" + sanitize(values[i]))).string();
    try
    {
      json tree = base_config;
      set_dotted(tree, parameter, values[i]);
      tree["output"] = e.directory;
      const RunConfig cfg = config_from_json(tree);
      const RunOutcome o = run_campaign(cfg, e.directory);
      e.summary = o.summary;
      e.ok = !o.interrupted;
      if (o.interrupted)
      {
        e.error = "interrupted";
      }
    }
    catch (const std::exception &ex)
    {
      e.error = ex.what();
    }
    auto field = [&](const char *k) -> std::string {
      if (!e.summary.contains(k) || !e.summary[k].is_number())
        return "";
      return num(e.summary[k].get<double>());
    };
    std::string samples;
    if (e.summary.contains("samples"))
    {
      samples = e.summary["samples"].is_number() ? std::to_string(e.summary["samples"].get<long long>())
                                                 : "\"" + e.summary["samples"].dump() + "\"";
      std::replace(samples.begin(), samples.end(), ',', ';');
    }
    std::string mean_rank;
    for (const char *k : {"ranks", "ranks_high"})
    {
      if (e.summary.contains(k) && e.summary[k].contains("mean_rank"))
        mean_rank = num(e.summary[k]["mean_rank"].get<double>());
    }
    std::string status = e.ok ? "ok" : e.error;
    std::replace(status.begin(), status.end(), ',', ';');
    std::replace(status.begin(), status.end(), '\n', ' ');
    merged << parameter << ',' << values[i] << ',' << status << ',' << field("estimate") << ','
           << (e.summary.contains("variance") ? field("variance") : field("variance_x")) << ',' << samples
           << ',' << mean_rank << ',' << field("median_ref_error") << ',' << e.directory << '\n';
    merged.flush();
    entries.push_back(std::move(e));
  }
  return entries;
}

json inspect_library(const std::string &path)
{
  const ModesLibrary lib = ModesLibrary::load(path);
  json j;
  j["path"] = path;
  j["mesh"] = {{"nx", lib.mesh().nx}, {"ny", lib.mesh().ny}, {"lx", lib.mesh().lx}, {"ly", lib.mesh().ly}};
  j["modes"] = lib.size();
  j["admission_tol"] = lib.admission_tol();
  j["orthonormality_defect"] = lib.orthonormality_defect();
  json created = json::object();
  for (int k = 0; k < lib.size(); ++k)
  {
    const std::string key = std::to_string(lib.created_at(k));
    created[key] = created.value(key, 0) + 1;
  }
  j["modes_per_sample"] = created;
  return j;
}

}  // namespace qph::cli
