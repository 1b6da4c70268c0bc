#pragma once

#include <thread>
#include <vector>

namespace cavu {

// Static contiguous partition of [0, n) across worker threads. Workers write
// to disjoint preallocated slots, so results are bit-identical for any job
// count; reductions happen afterwards in fixed index order.
template <typename Fn>
void parallel_for(int n, int jobs, Fn&& fn) {
  if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
  if (jobs < 1) jobs = 1;
  if (jobs > n) jobs = n < 1 ? 1 : n;
  if (jobs == 1) {
    fn(0, n);
    return;
  }
  std::vector<std::thread> workers;
  workers.reserve(jobs);
  const int chunk = (n + jobs - 1) / jobs;
  for (int w = 0; w < jobs; ++w) {
    const int begin = w * chunk;
    const int end = begin + chunk < n ? begin + chunk : n;
    if (begin >= end) break;
    workers.emplace_back([&fn, begin, end]() { fn(begin, end); });
  }
  for (auto& t : workers) t.join();
}

}  // namespace cavu
