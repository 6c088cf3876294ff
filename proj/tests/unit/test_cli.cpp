// Copyright 2026 The qphomog Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "config.hpp"
#include "runner.hpp"

using namespace qph::cli;
namespace fs = std::filesystem;

namespace
{

const char *kSmall = R"({
  "medium": {"kind": "bernoulli_defect", "n1": 2, "n2": 2, "p": 0.5},
  "estimator": {"mode": "mc", "samples": 3},
  "seed": 11,
  "record_timing": false
})";

std::string slurp(const fs::path &p)
{
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path scratch(const std::string &name)
{
  const fs::path d = fs::temp_directory_path() / ("qph_cli_" + name);
  fs::remove_all(d);
  return d;
}

std::string error_of(const std::string &text)
{
  try
  {
    parse_config(text);
  }
  catch (const ConfigError &e)
  {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(Config, DefaultsAndRoundTrip)
{
  const RunConfig c = parse_config(kSmall);
  EXPECT_EQ(c.medium.n1, 2);
  EXPECT_EQ(c.estimator.samples, 3);
  EXPECT_EQ(c.seed, 11u);
  EXPECT_FALSE(c.record_timing);
  const RunConfig d = config_from_json(c.to_json());
  EXPECT_EQ(d.to_json(), c.to_json());
}

TEST(Config, UnknownKeyReportsPathAndLine)
{
  const std::string msg = error_of("{\n  \"medium\": {\n    \"kind\": \"bernoulli_defect\",\n    \"nn\": 3\n  }\n}");
  EXPECT_NE(msg.find("medium.nn"), std::string::npos) << msg;
  EXPECT_NE(msg.find("line 4"), std::string::npos) << msg;
}

TEST(Config, SyntaxErrorReportsLine)
{
  const std::string msg = error_of("{\n  \"seed\": 1,\n  \"threads\": ,\n}");
  EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
}

TEST(Config, InvalidValuesAreRejected)
{
  EXPECT_FALSE(error_of(R"({"threads": 0})").empty());
  EXPECT_FALSE(error_of(R"({"solver": {"method": "magic"}})").empty());
  EXPECT_FALSE(error_of(R"({"estimator": {"mode": "qmc"}})").empty());
  EXPECT_FALSE(error_of(R"({"medium": {"p": 2.0}})").empty());
  EXPECT_FALSE(error_of(R"({"estimator": {"qoi": [0, 2]}})").empty());
}

TEST(Config, SetDottedParsesJsonOrString)
{
  nlohmann::json t = nlohmann::json::parse(kSmall);
  set_dotted(t, "solver.epsilon", "1e-3");
  set_dotted(t, "medium.kind", "regular_peaks");
  set_dotted(t, "estimator.qoi", "[1, 1]");
  EXPECT_DOUBLE_EQ(t["solver"]["epsilon"].get<double>(), 1e-3);
  EXPECT_EQ(t["medium"]["kind"], "regular_peaks");
  const RunConfig c = config_from_json(t);
  EXPECT_EQ(c.estimator.qoi_row, 1);
  EXPECT_EQ(c.medium.kind, qph::MediumKind::RegularPeaks);
}

TEST(Runner, HomogeneousMediumGivesScalarIdentity)
{
  RunConfig c = parse_config(kSmall);
  c.medium.p = 0.0;
  const fs::path out = scratch("homog");
  const RunOutcome r = run_campaign(c, out.string());
  EXPECT_FALSE(r.interrupted);
  EXPECT_NEAR(r.summary["estimate"].get<double>(), 1.0, 1e-10);
  EXPECT_NEAR(r.summary["variance"].get<double>(), 0.0, 1e-18);
  EXPECT_TRUE(fs::exists(out / "manifest.json"));
  EXPECT_TRUE(fs::exists(out / "samples.csv"));
  EXPECT_TRUE(fs::exists(out / "summary.json"));
  fs::remove_all(out);
}

TEST(Runner, OutputIsByteIdenticalAcrossRunsAndThreads)
{
  RunConfig c = parse_config(kSmall);
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  run_campaign(c, a.string());
  c.threads = 3;
  run_campaign(c, b.string());
  EXPECT_EQ(slurp(a / "samples.csv"), slurp(b / "samples.csv"));
  nlohmann::json sa = nlohmann::json::parse(slurp(a / "summary.json"));
  nlohmann::json sb = nlohmann::json::parse(slurp(b / "summary.json"));
  EXPECT_EQ(sa["estimate"], sb["estimate"]);
  const std::string header = slurp(a / "samples.csv").substr(0, 5);
  EXPECT_EQ(header, "model");
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Runner, PlanOnlyWritesPlan)
{
  RunConfig c = parse_config(kSmall);
  const fs::path out = scratch("plan");
  run_campaign(c, out.string(), true);
  EXPECT_TRUE(fs::exists(out / "plan.json"));
  EXPECT_FALSE(fs::exists(out / "summary.json"));
  fs::remove_all(out);
}

TEST(Runner, EmptySweepIsNoOp)
{
  const fs::path out = scratch("sweep_empty");
  const auto entries = run_sweep(nlohmann::json::parse(kSmall), "medium.p", {}, out.string());
  EXPECT_TRUE(entries.empty());
  fs::remove_all(out);
}

TEST(Runner, SweepRecordsFailuresAndContinues)
{
  const fs::path out = scratch("sweep");
  const auto entries =
      run_sweep(nlohmann::json::parse(kSmall), "medium.p", {"0.0", "7", "1.0"}, out.string());
  ASSERT_EQ(entries.size(), 3u);
  EXPECT_TRUE(entries[0].ok);
  EXPECT_FALSE(entries[1].ok);
  EXPECT_FALSE(entries[1].error.empty());
  EXPECT_TRUE(entries[2].ok);
  // every cell carries the inclusion: no spread across samples
  EXPECT_NEAR(entries[2].summary["variance"].get<double>(), 0.0, 1e-16);
  EXPECT_GT(entries[2].summary["estimate"].get<double>(), 1.0);
  EXPECT_TRUE(fs::exists(out / "sweep.csv"));
  fs::remove_all(out);
}

TEST(Runner, CsvColumnsAreVersioned)
{
  const auto &cols = samples_csv_columns();
  EXPECT_EQ(cols.front(), "model");
  EXPECT_NE(std::find(cols.begin(), cols.end(), "qoi"), cols.end());
  EXPECT_STREQ(kSamplesCsvVersion, "samples-v1");
}
