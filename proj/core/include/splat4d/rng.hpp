// Copyright 2026 The splat4d Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>

#include "splat4d/types.hpp"

namespace splat4d {

// Deterministic draws on top of std::mt19937_64. The draw functions are
// hand-rolled because the standard <random> distributions are not
// bit-portable across library implementations, and reproducibility across
// toolchains is part of the determinism contract.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * (1.0 / 9007199254740992.0);
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). The multiply-and-floor bias is below 2^-40
  // for any n this project draws; bit-stable is what matters here.
  int uniform_int(int n) {
    const int v = static_cast<int>(uniform() * n);
    return v >= n ? n - 1 : v;
  }

  // Uniform direction via rejection sampling in the unit ball.
  Vec3 unit_vector() {
    for (;;) {
      const Vec3 v(uniform(-1.0, 1.0), uniform(-1.0, 1.0), uniform(-1.0, 1.0));
      const double norm = v.norm();
      if (norm > 1e-4 && norm <= 1.0) {
        return v / norm;
      }
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace splat4d
