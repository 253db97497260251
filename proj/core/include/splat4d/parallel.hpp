// Copyright 2026 The splat4d Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>

namespace splat4d {

// Number of worker threads to use. Honors the SPLAT4D_THREADS environment
// variable; unset, empty, unparsable, or 0 means hardware concurrency.
int thread_budget();

// Runs fn(i) for every i in [0, n) across at most thread_budget() threads.
// Work is split into contiguous blocks, one per worker. Callers must make
// iterations write to disjoint state; ordered reductions are the caller's
// job (see rasterize_backward for the pattern).
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace splat4d
