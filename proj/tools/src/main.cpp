// Copyright 2026 The qphomog Authors
// SPDX-License-Identifier: Apache-2.0

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "config.hpp"
#include "runner.hpp"

namespace
{

extern "C" void on_sigint(int) { qph::cli::request_stop(); }

struct Common
{
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string out;
};

void add_common(CLI::App *app, Common &c)
{
  app->add_option("--config", c.config, "JSON run configuration")->required()->envname("QPH_CONFIG");
  app->add_option("--seed", c.seed, "master seed (overrides the config)")->envname("QPH_SEED");
  app->add_option("--threads", c.threads, "worker threads (overrides the config)")->envname("QPH_THREADS");
  app->add_option("--out", c.out, "output directory (overrides the config)")->envname("QPH_OUT");
}

std::string read_text(const std::string &path)
{
  std::ifstream in(path);
  if (!in)
  {
    throw qph::cli::ConfigError("cannot read config file " + path);
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

qph::cli::RunConfig resolve(const Common &c)
{
  qph::cli::RunConfig cfg = qph::cli::parse_config(read_text(c.config));
  if (c.seed)
    cfg.seed = *c.seed;
  if (c.threads)
  {
    if (*c.threads < 1)
      throw qph::cli::ConfigError("--threads must be at least 1");
    cfg.threads = *c.threads;
  }
  if (!c.out.empty())
    cfg.output = c.out;
  return cfg;
}

int finish(const qph::cli::RunOutcome &o, const std::string &dir)
{
  std::cout << o.summary.dump(2) << '\n';
  if (o.interrupted)
  {
    std::cerr << "interrupted; partial results in " << dir << '\n';
    return 130;
  }
  return 0;
}

}  // namespace

int main(int argc, char **argv)
{
  CLI::App app{"qphomog: homogenisation of quasi-periodic random media"};
  app.require_subcommand(1);

  Common run_opts, plan_opts, sweep_opts;
  auto *run = app.add_subcommand("run", "run a campaign from a config file");
  add_common(run, run_opts);
  auto *plan = app.add_subcommand("plan", "pilot samples and sample allocation only");
  add_common(plan, plan_opts);
  auto *sweep = app.add_subcommand("sweep", "one run per value of a config parameter");
  add_common(sweep, sweep_opts);
  std::string param;
  std::vector<std::string> values;
  sweep->add_option("--param", param, "dotted config key, e.g. solver.epsilon")->required();
  sweep->add_option("--values", values, "comma-separated values")->delimiter(',');
  auto *inspect = app.add_subcommand("inspect-library", "summarise a saved modes library");
  std::string lib_path;
  inspect->add_option("library", lib_path, "library JSON file")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);
  std::signal(SIGINT, on_sigint);

  try
  {
    if (*run || *plan)
    {
      const Common &c = *run ? run_opts : plan_opts;
      const qph::cli::RunConfig cfg = resolve(c);
      return finish(qph::cli::run_campaign(cfg, cfg.output, static_cast<bool>(*plan)), cfg.output);
    }
    if (*sweep)
    {
      const qph::cli::RunConfig cfg = resolve(sweep_opts);
      nlohmann::json base = cfg.to_json();
      const auto entries = qph::cli::run_sweep(base, param, values, cfg.output);
      int failed = 0;
      for (const auto &e : entries)
      {
        std::cout << param << '=' << e.value << ": " << (e.ok ? "ok" : e.error) << " (" << e.directory << ")\n";
        failed += !e.ok;
      }
      if (qph::cli::stop_requested())
        return 130;
      return failed ? 1 : 0;
    }
    if (*inspect)
    {
      std::cout << qph::cli::inspect_library(lib_path).dump(2) << '\n';
      return 0;
    }
  }
  catch (const qph::cli::ConfigError &e)
  {
    std::cerr << e.what() << '\n';
    return 2;
  }
  catch (const std::exception &e)
  {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
