// Copyright 2026 The memeforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace memeforge {

/// Deterministic generator whose outputs are identical across standard
/// libraries. std::mt19937_64 is fully specified; the distributions in
/// <random> are not, so bounded draws are done here by rejection.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, bound). `bound` must be positive.
  std::uint64_t below(std::uint64_t bound);

  /// Uniform real in [0, 1) with 53 bits of precision.
  double unit();

 private:
  std::mt19937_64 engine_;
};

/// Mixes a base seed with a textual key (splitmix64 finalizer over FNV-1a).
std::uint64_t derive_seed(std::uint64_t base, std::string_view key);

}  // namespace memeforge
