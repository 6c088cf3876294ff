// Copyright 2026 The qphomog Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "qph/eim.hpp"
#include "qph/homogenize.hpp"
#include "qph/media.hpp"
#include "qph/seeding.hpp"
#include "qph/swip.hpp"

using namespace qph;

namespace
{

MediumSpec defect_spec(int n, double p)
{
  MediumSpec s = default_medium_spec(MediumKind::BernoulliDefect);
  s.n1 = n;
  s.n2 = n;
  s.p = p;
  return s;
}

void BM_PeriodicCell(benchmark::State &st)
{
  const CellMesh m = build_cell_mesh(static_cast<int>(st.range(0)), static_cast<int>(st.range(0)));
  ElementConductivity k(static_cast<std::size_t>(m.element_count()), Sym2::iso(1.0));
  for (int e = 0; e < m.element_count(); e += 3)
    k[static_cast<std::size_t>(e)] = Sym2::iso(100.0);
  for (auto _ : st)
    benchmark::DoNotOptimize(periodic_homogenize(m, k));
}
BENCHMARK(BM_PeriodicCell)->Arg(20)->Arg(80)->Unit(benchmark::kMillisecond);

void BM_SupercellFem(benchmark::State &st)
{
  const auto b = sample_bernoulli_defect(defect_spec(static_cast<int>(st.range(0)), 0.5),
                                         derive_seed(1, kStreamMedium, 0));
  for (auto _ : st)
    benchmark::DoNotOptimize(apparent_homogenize_fem(b.K));
}
BENCHMARK(BM_SupercellFem)->Arg(4)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_SwipApply(benchmark::State &st)
{
  const auto b = sample_bernoulli_defect(defect_spec(10, 0.5), derive_seed(1, kStreamMedium, 1));
  const SwipOperator op = assemble_swip(b.K.grid, b.K);
  const Eigen::MatrixXd W =
      Eigen::MatrixXd::Random(b.K.grid.cell_count(), b.K.grid.cell.node_count());
  for (auto _ : st)
    benchmark::DoNotOptimize(op.apply(W));
}
BENCHMARK(BM_SwipApply)->Unit(benchmark::kMicrosecond);

// One sample against a library that already covers the medium family.
void BM_MslrmRecycled(benchmark::State &st)
{
  const MediumSpec s = defect_spec(10, 0.1);
  ModesLibrary lib(s.grid().cell);
  MslrmOptions o;
  o.epsilon = 1e-2;
  for (int k = 0; k < 5; ++k)
    apparent_homogenize_mslrm(sample_bernoulli_defect(s, derive_seed(2, kStreamMedium, k)).K,
                              lib, o, k);
  const auto b = sample_bernoulli_defect(s, derive_seed(2, kStreamMedium, 100));
  for (auto _ : st)
  {
    ModesLibrary copy = lib;
    benchmark::DoNotOptimize(apparent_homogenize_mslrm(b.K, copy, o, 100));
  }
  st.counters["modes"] = lib.size();
}
BENCHMARK(BM_MslrmRecycled)->Unit(benchmark::kMillisecond);

void BM_EimPeaks(benchmark::State &st)
{
  const Medium m = sample_medium(default_medium_spec(MediumKind::RegularPeaks),
                                 derive_seed(3, kStreamMedium, 0));
  const double delta = 1.0 / static_cast<double>(st.range(0));
  for (auto _ : st)
    benchmark::DoNotOptimize(eim_interpolate(m.dense, delta));
}
BENCHMARK(BM_EimPeaks)->Arg(1)->Arg(10)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
