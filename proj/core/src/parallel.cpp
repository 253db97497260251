// Copyright 2026 The splat4d Authors
// SPDX-License-Identifier: Apache-2.0
#include "splat4d/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace splat4d {

int thread_budget() {
  int budget = 0;
  if (const char* env = std::getenv("SPLAT4D_THREADS")) {
    try {
      budget = std::stoi(env);
    } catch (const std::exception&) {
      budget = 0;
    }
  }
  if (budget <= 0) {
    budget = static_cast<int>(std::thread::hardware_concurrency());
  }
  return std::max(budget, 1);
}

void parallel_for(int n, const std::function<void(int)>& fn) {
  if (n <= 0) {
    return;
  }
  const int workers = std::min(thread_budget(), n);
  if (workers == 1) {
    for (int i = 0; i < n; ++i) {
      fn(i);
    }
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int t = 0; t < workers; ++t) {
    const int begin = static_cast<int>(static_cast<long long>(n) * t / workers);
    const int end = static_cast<int>(static_cast<long long>(n) * (t + 1) / workers);
    pool.emplace_back([begin, end, &fn] {
      for (int i = begin; i < end; ++i) {
        fn(i);
      }
    });
  }
  for (auto& th : pool) {
    th.join();
  }
}

}  // namespace splat4d
