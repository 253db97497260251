// Copyright 2026 The splat4d Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

// Finite-difference validation of every analytic gradient in the library.
// Each suite builds a seeded random problem, evaluates the analytic gradient
// once, re-evaluates the objective under central perturbations of every
// scalar parameter, and reports one worst-case relative error per parameter
// group: max |analytic - numeric| / max(|analytic|_inf, |numeric|_inf, 1e-8).

namespace splat4d {

constexpr double kGradCheckEpsilon = 1e-3;
constexpr double kGradCheckTolerance = 1e-2;

struct GradCheckResult {
  std::string group;
  double max_rel_error = 0.0;

  bool passed() const { return max_rel_error < kGradCheckTolerance; }
};

// Tiled rasterizer: base parameter groups plus the deformation-delta path.
// The scene keeps every gaussian center interior and total opacity low so no
// cull or termination boundary sits within epsilon of the test point.
std::vector<GradCheckResult> gradcheck_rasterizer(std::uint64_t seed = 7);

// Image and point losses with analytic gradients.
std::vector<GradCheckResult> gradcheck_losses(std::uint64_t seed = 7);

// Toy motion head, one group per weight tensor.
std::vector<GradCheckResult> gradcheck_head(std::uint64_t seed = 7);

}  // namespace splat4d
