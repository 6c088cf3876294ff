// Copyright 2026 The qphomog Authors
// SPDX-License-Identifier: Apache-2.0

#include "config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace qph::cli
{

namespace
{

using nlohmann::json;

// Position just past `"key"` followed by a colon, searching from `from`.
std::size_t find_key(const std::string &text, const std::string &key, std::size_t from)
{
  const std::string quoted = "\"" + key + "\"";
  std::size_t pos = text.find(quoted, from);
  while (pos != std::string::npos)
  {
    std::size_t after = pos + quoted.size();
    while (after < text.size() && std::isspace(static_cast<unsigned char>(text[after])))
    {
      ++after;
    }
    if (after < text.size() && text[after] == ':')
    {
      return after;
    }
    pos = text.find(quoted, pos + 1);
  }
  return std::string::npos;
}

// 1-based line of the innermost key of `path`, 0 when not found. Walks the
// path in order so a nested key is looked up after its parent.
int key_line(const std::string &text, const std::vector<std::string> &path)
{
  std::size_t pos = 0;
  for (const auto &k : path)
  {
    pos = find_key(text, k, pos);
    if (pos == std::string::npos)
    {
      return 0;
    }
  }
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(pos), '\n'));
}

std::string dotted(const std::vector<std::string> &path)
{
  std::string s;
  for (const auto &k : path)
  {
    s += (s.empty() ? "" : ".") + k;
  }
  return s;
}

class Reader
{
public:
  Reader(const json &obj, std::vector<std::string> path, const std::string &text)
    : obj_(obj), path_(std::move(path)), text_(text)
  {
    if (!obj_.is_object())
    {
      fail(path_, "expected an object");
    }
  }

  [[noreturn]] void fail(const std::vector<std::string> &path, const std::string &msg) const
  {
    std::ostringstream os;
    os << "config error at '" << (path.empty() ? std::string("<root>") : dotted(path)) << "'";
    const int line = path.empty() ? 0 : key_line(text_, path);
    if (line > 0)
    {
      os << " (line " << line << ")";
    }
    os << ": " << msg;
    throw ConfigError(os.str());
  }

  std::vector<std::string> at(const std::string &key) const
  {
    auto p = path_;
    p.push_back(key);
    return p;
  }

  bool has(const std::string &key)
  {
    seen_.insert(key);
    return obj_.contains(key);
  }

  template <typename T>
  void get(const std::string &key, T &out)
  {
    if (!has(key))
    {
      return;
    }
    try
    {
      out = obj_.at(key).get<T>();
    }
    catch (const json::exception &e)
    {
      fail(at(key), std::string("wrong type (") + obj_.at(key).type_name() + ")");
    }
  }

  const json &sub(const std::string &key)
  {
    seen_.insert(key);
    return obj_.at(key);
  }

  void reject_unknown() const
  {
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
    {
      if (!seen_.count(it.key()))
      {
        fail(at(it.key()), "unknown key");
      }
    }
  }

  const std::vector<std::string> &path() const { return path_; }

private:
  const json &obj_;
  std::vector<std::string> path_;
  const std::string &text_;
  std::set<std::string> seen_;
};

MediumSpec read_medium(const json &j, const std::string &text)
{
  Reader r(j, {"medium"}, text);
  std::string kind = "bernoulli_defect";
  r.get("kind", kind);
  MediumSpec m;
  try
  {
    m = default_medium_spec(parse_medium_kind(kind));
  }
  catch (const std::exception &e)
  {
    r.fail(r.at("kind"), e.what());
  }
  r.get("n1", m.n1);
  r.get("n2", m.n2);
  r.get("micro_nx", m.micro_nx);
  r.get("micro_ny", m.micro_ny);
  r.get("cell_lx", m.cell_lx);
  r.get("cell_ly", m.cell_ly);
  r.get("k1", m.k1);
  r.get("k2", m.k2);
  r.get("k2_min", m.k2_min);
  r.get("k2_max", m.k2_max);
  r.get("p", m.p);
  r.get("side_lengths", m.side_lengths);
  r.get("fibre_width", m.fibre_width);
  r.get("gap_min", m.gap_min);
  r.get("gap_max", m.gap_max);
  r.get("alpha_max", m.alpha_max);
  r.get("beta_min", m.beta_min);
  r.get("beta_max", m.beta_max);
  r.get("delta_trunc", m.delta_trunc);
  r.reject_unknown();
  try
  {
    m.validate();
  }
  catch (const std::exception &e)
  {
    r.fail(r.path(), e.what());
  }
  return m;
}

SolverConfig read_solver(const json &j, const std::string &text)
{
  Reader r(j, {"solver"}, text);
  SolverConfig s;
  std::string method = "fem";
  r.get("method", method);
  if (method == "fem")
  {
    s.method = HighSolver::Fem;
  }
  else if (method == "mslrm")
  {
    s.method = HighSolver::Mslrm;
  }
  else
  {
    r.fail(r.at("method"), "expected \"fem\" or \"mslrm\", got \"" + method + "\"");
  }
  r.get("epsilon", s.epsilon);
  r.get("penalty", s.penalty);
  r.get("recycling", s.recycling);
  r.get("max_rank", s.max_rank);
  r.get("fem_rel_tol", s.fem_rel_tol);
  r.reject_unknown();
  if (!(s.epsilon > 0.0))
  {
    r.fail(r.at("epsilon"), "must be positive");
  }
  if (!(s.penalty > 0.0))
  {
    r.fail(r.at("penalty"), "must be positive");
  }
  if (s.max_rank < 1)
  {
    r.fail(r.at("max_rank"), "must be at least 1");
  }
  return s;
}

EstimatorConfig read_estimator(const json &j, const std::string &text)
{
  Reader r(j, {"estimator"}, text);
  EstimatorConfig e;
  std::string mode = "mc";
  r.get("mode", mode);
  if (mode == "mc")
  {
    e.mode = EstimatorMode::Mc;
  }
  else if (mode == "cv_weakly_1")
  {
    e.mode = EstimatorMode::CvWeakly1;
  }
  else if (mode == "cv_weakly_2")
  {
    e.mode = EstimatorMode::CvWeakly2;
  }
  else if (mode == "cv_eim")
  {
    e.mode = EstimatorMode::CvEim;
  }
  else if (mode == "mfmc")
  {
    e.mode = EstimatorMode::Mfmc;
  }
  else
  {
    r.fail(r.at("mode"), "unknown estimator mode \"" + mode + "\"");
  }
  if (r.has("qoi"))
  {
    const json &q = r.sub("qoi");
    if (!q.is_array() || q.size() != 2 || !q[0].is_number_integer() || !q[1].is_number_integer() ||
        q[0].get<int>() < 0 || q[0].get<int>() > 1 || q[1].get<int>() < 0 || q[1].get<int>() > 1)
    {
      r.fail(r.at("qoi"), "expected [row, col] with entries 0 or 1");
    }
    e.qoi_row = q[0].get<int>();
    e.qoi_col = q[1].get<int>();
  }
  r.get("samples", e.samples);
  r.get("eta", e.eta);
  r.get("budget", e.budget);
  r.get("pilot_samples", e.pilot_samples);
  r.get("eim_floor", e.eim_floor);
  if (r.has("low_fidelity"))
  {
    const json &lf = r.sub("low_fidelity");
    if (!lf.is_array() || lf.empty())
    {
      r.fail(r.at("low_fidelity"), "expected a non-empty array");
    }
    e.low_fidelity.clear();
    for (std::size_t i = 0; i < lf.size(); ++i)
    {
      Reader lr(lf[i], {"estimator", "low_fidelity", std::to_string(i)}, text);
      LowFidelity f;
      lr.get("delta", f.delta);
      lr.get("epsilon", f.epsilon);
      lr.reject_unknown();
      if (!(f.delta > 0.0) || !(f.epsilon > 0.0))
      {
        lr.fail(lr.path(), "delta and epsilon must be positive");
      }
      e.low_fidelity.push_back(f);
    }
  }
  r.get("compare_fem", e.compare_fem);
  r.get("contribution_solver", e.contribution_solver);
  r.get("complementary", e.complementary);
  r.get("symmetry", e.symmetry);
  if (r.has("cost_high"))
  {
    double c = 0.0;
    r.get("cost_high", c);
    e.cost_high = c;
  }
  r.get("cost_low", e.cost_low);
  r.reject_unknown();

  if (e.samples < 0)
  {
    r.fail(r.at("samples"), "must be non-negative");
  }
  if (!(e.eta > 0.0))
  {
    r.fail(r.at("eta"), "must be positive");
  }
  if (e.budget < 0.0)
  {
    r.fail(r.at("budget"), "must be non-negative");
  }
  if (e.pilot_samples < 2)
  {
    r.fail(r.at("pilot_samples"), "needs at least 2 pilot samples");
  }
  if (e.contribution_solver != "fem" && e.contribution_solver != "mslrm")
  {
    r.fail(r.at("contribution_solver"), "expected \"fem\" or \"mslrm\"");
  }
  if (e.cost_high && !(*e.cost_high > 0.0))
  {
    r.fail(r.at("cost_high"), "must be positive");
  }
  for (double c : e.cost_low)
  {
    if (!(c > 0.0))
    {
      r.fail(r.at("cost_low"), "costs must be positive");
    }
  }
  if (!e.cost_low.empty() && e.cost_low.size() != e.low_fidelity.size())
  {
    r.fail(r.at("cost_low"), "needs one cost per low-fidelity model");
  }
  return e;
}

}  // namespace

const char *estimator_mode_name(EstimatorMode m)
{
  switch (m)
  {
    case EstimatorMode::Mc:
      return "mc";
    case EstimatorMode::CvWeakly1:
      return "cv_weakly_1";
    case EstimatorMode::CvWeakly2:
      return "cv_weakly_2";
    case EstimatorMode::CvEim:
      return "cv_eim";
    case EstimatorMode::Mfmc:
      return "mfmc";
  }
  return "?";
}

RunConfig config_from_json(const json &j, const std::string &text)
{
  Reader r(j, {}, text);
  RunConfig c;
  if (r.has("medium"))
  {
    c.medium = read_medium(r.sub("medium"), text);
  }
  if (r.has("solver"))
  {
    c.solver = read_solver(r.sub("solver"), text);
  }
  if (r.has("estimator"))
  {
    c.estimator = read_estimator(r.sub("estimator"), text);
  }
  r.get("seed", c.seed);
  r.get("threads", c.threads);
  r.get("output", c.output);
  r.get("cache_dir", c.cache_dir);
  r.get("record_timing", c.record_timing);
  r.reject_unknown();
  if (c.threads < 1)
  {
    r.fail({"threads"}, "must be at least 1");
  }
  return c;
}

RunConfig parse_config(const std::string &text)
{
  json j;
  try
  {
    j = json::parse(text);
  }
  catch (const json::parse_error &e)
  {
    // byte offset -> line for the diagnostic
    const std::size_t off = std::min<std::size_t>(e.byte, text.size());
    const int line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(off), '\n'));
    throw ConfigError("config syntax error (line " + std::to_string(line) + "): " + e.what());
  }
  return config_from_json(j, text);
}

RunConfig load_config(const std::string &path)
{
  std::ifstream in(path);
  if (!in)
  {
    throw ConfigError("cannot read config file " + path);
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void set_dotted(json &tree, const std::string &key, const std::string &value)
{
  json v;
  try
  {
    v = json::parse(value);
  }
  catch (const json::parse_error &)
  {
    v = value;
  }
  json *node = &tree;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.'))
  {
    parts.push_back(part);
  }
  if (parts.empty())
  {
    throw ConfigError("empty parameter name");
  }
  for (std::size_t i = 0; i + 1 < parts.size(); ++i)
  {
    json &next = (*node)[parts[i]];
    if (next.is_null())
    {
      next = json::object();
    }
    if (!next.is_object())
    {
      throw ConfigError("parameter '" + key + "' does not address an object member");
    }
    node = &next;
  }
  (*node)[parts.back()] = v;
}

json RunConfig::to_json() const
{
  json m = {{"kind", medium_kind_name(medium.kind)},
            {"n1", medium.n1},
            {"n2", medium.n2},
            {"micro_nx", medium.micro_nx},
            {"micro_ny", medium.micro_ny},
            {"cell_lx", medium.cell_lx},
            {"cell_ly", medium.cell_ly},
            {"k1", medium.k1},
            {"k2", medium.k2},
            {"k2_min", medium.k2_min},
            {"k2_max", medium.k2_max},
            {"p", medium.p},
            {"side_lengths", medium.side_lengths},
            {"fibre_width", medium.fibre_width},
            {"gap_min", medium.gap_min},
            {"gap_max", medium.gap_max},
            {"alpha_max", medium.alpha_max},
            {"beta_min", medium.beta_min},
            {"beta_max", medium.beta_max},
            {"delta_trunc", medium.delta_trunc}};
  json s = {{"method", solver.method == HighSolver::Fem ? "fem" : "mslrm"},
            {"epsilon", solver.epsilon},
            {"penalty", solver.penalty},
            {"recycling", solver.recycling},
            {"max_rank", solver.max_rank},
            {"fem_rel_tol", solver.fem_rel_tol}};
  json lf = json::array();
  for (const auto &f : estimator.low_fidelity)
  {
    lf.push_back({{"delta", f.delta}, {"epsilon", f.epsilon}});
  }
  json e = {{"mode", estimator_mode_name(estimator.mode)},
            {"qoi", {estimator.qoi_row, estimator.qoi_col}},
            {"samples", estimator.samples},
            {"eta", estimator.eta},
            {"budget", estimator.budget},
            {"pilot_samples", estimator.pilot_samples},
            {"eim_floor", estimator.eim_floor},
            {"low_fidelity", lf},
            {"compare_fem", estimator.compare_fem},
            {"contribution_solver", estimator.contribution_solver},
            {"complementary", estimator.complementary},
            {"symmetry", estimator.symmetry},
            {"cost_low", estimator.cost_low}};
  if (estimator.cost_high)
  {
    e["cost_high"] = *estimator.cost_high;
  }
  return {{"medium", m},          {"solver", s},         {"estimator", e},
          {"seed", seed},         {"threads", threads},  {"output", output},
          {"cache_dir", cache_dir}, {"record_timing", record_timing}};
}

}  // namespace qph::cli
