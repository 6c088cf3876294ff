// Copyright 2026 The qphomog Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef QPH_TOOLS_RUNNER_HPP
#define QPH_TOOLS_RUNNER_HPP

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "config.hpp"

namespace qph::cli
{

// Bumped whenever the per-sample CSV columns change.
inline constexpr const char *kSamplesCsvVersion = "samples-v1";
const std::vector<std::string> &samples_csv_columns();

// Interrupt handling: the runner stops between batches once requested and
// still writes the summary (flagged as interrupted).
void request_stop();
void clear_stop();
bool stop_requested();

struct RunOutcome
{
  nlohmann::json summary;
  bool interrupted = false;
};

// Writes manifest.json, samples.csv and summary.json (or plan.json when
// plan_only) into `out_dir`, creating it.
RunOutcome run_campaign(const RunConfig &config, const std::string &out_dir, bool plan_only = false);

struct SweepEntry
{
  std::string value;
  std::string directory;
  bool ok = false;
  std::string error;
  nlohmann::json summary;
};

// One run directory per value under `out_dir` plus sweep.csv. Failures are
// recorded per value and the sweep carries on.
std::vector<SweepEntry> run_sweep(const nlohmann::json &base_config, const std::string &parameter,
                                  const std::vector<std::string> &values, const std::string &out_dir);

// Summary of a saved modes library.
nlohmann::json inspect_library(const std::string &path);

}  // namespace qph::cli

#endif  // QPH_TOOLS_RUNNER_HPP
