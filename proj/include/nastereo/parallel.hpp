// Copyright 2026 The nastereo Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace nastereo {

/// Worker count: hardware concurrency, capped by NASTEREO_THREADS when set.
inline int thread_count() {
  int n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("NASTEREO_THREADS")) {
    try {
      const int cap = std::stoi(env);
      if (cap >= 1) n = std::min(n, cap);
    } catch (...) {
      // ignore malformed values
    }
  }
  return n;
}

/// Runs fn(row) for every row in [0, rows). Rows are split into contiguous
/// blocks, one per worker; fn must only write to row-local state.
template <typename Fn>
void parallel_for_rows(int rows, Fn&& fn) {
  const int workers = std::min(thread_count(), std::max(rows, 1));
  if (workers <= 1) {
    for (int r = 0; r < rows; ++r) fn(r);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const int block = (rows + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const int begin = w * block;
    const int end = std::min(rows, begin + block);
    if (begin >= end) break;
    pool.emplace_back([begin, end, &fn] {
      for (int r = begin; r < end; ++r) fn(r);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace nastereo
