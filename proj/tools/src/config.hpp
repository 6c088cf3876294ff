// Copyright 2026 The qphomog Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef QPH_TOOLS_CONFIG_HPP
#define QPH_TOOLS_CONFIG_HPP

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qph/media.hpp"

namespace qph::cli
{

class ConfigError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

enum class HighSolver
{
  Fem,
  Mslrm
};

enum class EstimatorMode
{
  Mc,
  CvWeakly1,
  CvWeakly2,
  CvEim,
  Mfmc
};

const char *estimator_mode_name(EstimatorMode m);

struct LowFidelity
{
  double delta = 0.1;    // EIM tolerance
  double epsilon = 1.0;  // MsLRM tolerance on the interpolated medium
};

struct SolverConfig
{
  HighSolver method = HighSolver::Fem;
  double epsilon = 1e-2;
  double penalty = 10.0;
  bool recycling = true;
  int max_rank = 150;
  double fem_rel_tol = 1e-10;
};

struct EstimatorConfig
{
  EstimatorMode mode = EstimatorMode::Mc;
  int qoi_row = 0;
  int qoi_col = 0;
  int samples = 0;  // mc: fixed count; 0 sizes the run from eta and the pilot
  double eta = 0.05;
  double budget = 0.0;  // mfmc: cost budget; 0 targets eta instead
  int pilot_samples = 20;
  double eim_floor = 1e-3;
  std::vector<LowFidelity> low_fidelity{LowFidelity{}};  // cv_eim uses the first entry
  bool compare_fem = false;  // mc with mslrm: also solve with FEM and log the error
  std::string contribution_solver = "fem";
  bool complementary = true;
  bool symmetry = true;
  // Per-sample costs; measured wall time of the pilot when absent.
  std::optional<double> cost_high;
  std::vector<double> cost_low;
};

struct RunConfig
{
  MediumSpec medium;
  SolverConfig solver;
  EstimatorConfig estimator;
  std::uint64_t seed = 1;
  int threads = 1;
  std::string output = "qphomog-run";
  std::string cache_dir;  // defect contributions; empty: <output>/cache
  bool record_timing = true;

  nlohmann::json to_json() const;
};

// Parses and validates; unknown keys are rejected with their JSON path and
// the line of their first occurrence in `text`.
RunConfig parse_config(const std::string &text);
RunConfig load_config(const std::string &path);
RunConfig config_from_json(const nlohmann::json &j, const std::string &text = {});

// Sets a dotted key (e.g. "solver.epsilon") in a config tree; the value is
// parsed as JSON, falling back to a plain string.
void set_dotted(nlohmann::json &tree, const std::string &key, const std::string &value);

}  // namespace qph::cli

#endif  // QPH_TOOLS_CONFIG_HPP
