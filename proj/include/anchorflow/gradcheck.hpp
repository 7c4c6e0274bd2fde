// Copyright (C) 2026 the anchorflow authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

namespace anchorflow {

struct GradCheckResult {
  std::string component;
  double max_rel_err = 0.0;
  int probes = 0;
  bool pass = false;
};

inline constexpr double kGradCheckTolerance = 1e-4;
inline constexpr double kGradCheckStep = 1e-5;

// Central-difference verification of every hand-derived backward pass,
// including the geometric loss paths (kinematic chain, skinning, projection,
// robust penalty, joint-bone consistency, world rollout) and the full
// training objectives of both stages. Each component runs >= 100 random
// probes.
std::vector<GradCheckResult> run_gradient_checks(uint64_t seed);

}  // namespace anchorflow
