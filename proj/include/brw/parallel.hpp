#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace brw {

/// Runs fn(worker, i) for i in [0, count) on up to `jobs` threads. Indices are
/// handed out dynamically; callers write results into slot i so the output
/// never depends on scheduling. The first exception thrown is rethrown.
template <typename Fn>
void parallel_for(std::size_t count, unsigned jobs, Fn&& fn) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(0u, i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(jobs);
  for (unsigned w = 0; w < jobs; ++w) {
    pool.emplace_back([&, w] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(w, i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next.store(count);
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

/// Splits [0, total) into fixed-size chunks and runs fn(chunk, begin, end)
/// on each. The chunking depends only on `total` and `chunk_size`, so a caller
/// that seeds one generator per chunk gets results independent of `jobs`.
template <typename Fn>
std::size_t for_chunks(std::size_t total, std::size_t chunk_size, unsigned jobs, Fn&& fn) {
  const std::size_t chunks = (total + chunk_size - 1) / chunk_size;
  parallel_for(chunks, jobs, [&](unsigned, std::size_t c) {
    const std::size_t begin = c * chunk_size;
    fn(c, begin, std::min(total, begin + chunk_size));
  });
  return chunks;
}

/// Worker count from BRW_JOBS, else hardware concurrency.
unsigned default_jobs();

}  // namespace brw
