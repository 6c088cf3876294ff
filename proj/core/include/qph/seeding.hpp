// Copyright 2026 The qphomog Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef QPH_SEEDING_HPP
#define QPH_SEEDING_HPP

#include <cstdint>
#include <random>

namespace qph
{

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

// Order-independent per-sample seed: depends only on the three inputs.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index);

inline Rng make_rng(std::uint64_t master, std::uint64_t stream, std::uint64_t index)
{
  return Rng(derive_seed(master, stream, index));
}

// Stream tags used by the estimator layers. Independent streams give the
// independent omega / omega' draws; nested estimators share one stream.
enum SeedStream : std::uint64_t
{
  kStreamMedium = 1,
  kStreamPilot = 2,
  kStreamHigh = 3,
  kStreamLow = 4,
  kStreamShared = 5,
  kStreamSynthetic = 6,
};

}  // namespace qph

#endif  // QPH_SEEDING_HPP
