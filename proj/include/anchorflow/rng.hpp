// Copyright (C) 2026 the anchorflow authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace anchorflow {

// Deterministic random source. All distribution transforms are implemented
// here (not via std:: distributions, whose output is implementation-defined)
// so that a seed reproduces the same stream on any build of this tool.
//
// Named substreams let one root seed drive independent generators (data,
// train, infer) that can be re-run in isolation.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  Rng substream(std::string_view name) const;

  uint64_t next_u64();
  double uniform();                       // [0, 1)
  double uniform(double lo, double hi);   // [lo, hi)
  double normal();                        // standard Gaussian, Box-Muller
  int uniform_int(int lo, int hi);        // inclusive bounds

  uint64_t seed() const { return seed_; }

 private:
  std::mt19937_64 engine_;
  uint64_t seed_ = 0;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace anchorflow
