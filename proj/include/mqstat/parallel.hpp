#ifndef MQSTAT_PARALLEL_HPP
#define MQSTAT_PARALLEL_HPP

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace mqstat {

/// Runs body(i) for i in [0, count) on up to `threads` workers, each taking a
/// contiguous block. Callers write results into per-index slots and reduce in
/// index order, so results do not depend on the worker count. The exception
/// from the lowest failing index is rethrown.
template <class Body> void parallel_for(std::size_t count, unsigned threads, Body &&body) {
  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(threads == 0 ? 1 : threads, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::mutex mu;
  std::exception_ptr first_error;
  std::size_t first_index = count;
  auto run = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (i < first_index) {
          first_index = i;
          first_error = std::current_exception();
        }
        return;
      }
    }
  };
  std::vector<std::jthread> pool;
  const std::size_t block = (count + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * block;
    const std::size_t end = std::min(count, begin + block);
    if (begin < end) pool.emplace_back(run, begin, end);
  }
  pool.clear();
  if (first_error) std::rethrow_exception(first_error);
}

} // namespace mqstat

#endif // MQSTAT_PARALLEL_HPP
