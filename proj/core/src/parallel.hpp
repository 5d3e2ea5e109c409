#pragma once

// Internal helper: deterministic chunked parallel execution. Chunk boundaries
// depend only on the item count and chunk size — never on the worker count —
// so callers that reduce per-chunk results in chunk order get bit-identical
// output for any thread count.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace revattr::detail {

inline unsigned resolve_threads(unsigned requested) {
  if (requested != 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1U : hw;
}

/// Invokes fn(chunk_index, begin, end) for every chunk of [0, count).
/// `threads` = 0 means hardware concurrency. Exceptions thrown by `fn` are
/// rethrown on the calling thread (first one wins).
template <typename Fn>
void parallel_chunks(std::size_t count, std::size_t chunk_size, unsigned threads, Fn&& fn) {
  if (count == 0) return;
  const std::size_t nchunks = (count + chunk_size - 1) / chunk_size;
  const auto run_chunk = [&](std::size_t c) {
    fn(c, c * chunk_size, std::min(count, (c + 1) * chunk_size));
  };

  const unsigned workers =
      static_cast<unsigned>(std::min<std::size_t>(resolve_threads(threads), nchunks));
  if (workers <= 1) {
    for (std::size_t c = 0; c < nchunks; ++c) run_chunk(c);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;

  const auto worker = [&] {
    while (!failed.load(std::memory_order_relaxed)) {
      const std::size_t c = next.fetch_add(1, std::memory_order_relaxed);
      if (c >= nchunks) return;
      try {
        run_chunk(c);
      } catch (...) {
        std::scoped_lock lock(error_mutex);
        if (!error) error = std::current_exception();
        failed.store(true, std::memory_order_relaxed);
        return;
      }
    }
  };

  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned t = 0; t < workers; ++t) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace revattr::detail
