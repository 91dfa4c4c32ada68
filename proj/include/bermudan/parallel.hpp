#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace bermudan {

/// Paths per work chunk. Reductions combine per-chunk partials in chunk
/// order, so results only depend on this constant and never on thread count.
inline constexpr std::size_t kChunkSize = 4096;

namespace detail {
inline std::atomic<std::size_t>& thread_setting() {
  static std::atomic<std::size_t> value{0};
  return value;
}
}  // namespace detail

/// 0 selects std::thread::hardware_concurrency().
inline void set_thread_count(std::size_t threads) { detail::thread_setting() = threads; }

inline std::size_t thread_count() {
  const std::size_t requested = detail::thread_setting();
  if (requested > 0) return requested;
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

inline std::size_t chunk_count(std::size_t n, std::size_t chunk = kChunkSize) {
  return (n + chunk - 1) / chunk;
}

/// Calls fn(begin, end, chunk_index) for every chunk of [0, n). Chunks may run
/// concurrently; the first exception thrown is rethrown on the caller.
template <class Fn>
void parallel_for_chunks(std::size_t n, Fn&& fn, std::size_t chunk = kChunkSize) {
  const std::size_t chunks = chunk_count(n, chunk);
  const std::size_t workers = std::min(thread_count(), chunks);
  auto run_chunk = [&](std::size_t c) {
    const std::size_t begin = c * chunk;
    fn(begin, std::min(n, begin + chunk), c);
  };
  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t c = next++; c < chunks; c = next++) {
      try {
        run_chunk(c);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = chunks;
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

/// Deterministic map-reduce: partial(begin, end) per chunk, combined
/// left-to-right with combine(acc, partial).
template <class T, class Partial, class Combine>
T parallel_reduce(std::size_t n, T init, Partial&& partial, Combine&& combine,
                  std::size_t chunk = kChunkSize) {
  std::vector<T> partials(chunk_count(n, chunk), init);
  parallel_for_chunks(
      n, [&](std::size_t b, std::size_t e, std::size_t c) { partials[c] = partial(b, e); },
      chunk);
  T acc = std::move(init);
  for (auto& p : partials) combine(acc, p);
  return acc;
}

}  // namespace bermudan
