#ifndef RAREIS_PARALLEL_HPP
#define RAREIS_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>
#include <vector>

namespace rareis::parallel {

/// Rows per sampling chunk. Fixed so that results never depend on the
/// worker count.
inline constexpr std::ptrdiff_t kChunkRows = 4096;

void set_max_threads(unsigned n) noexcept;
[[nodiscard]] unsigned max_threads() noexcept;

namespace detail {
/// Set on threads currently executing a parallel region; nested regions run inline.
inline thread_local bool in_region = false;

struct RegionGuard {
  bool previous = in_region;
  RegionGuard() noexcept { in_region = true; }
  ~RegionGuard() { in_region = previous; }
  RegionGuard(const RegionGuard&) = delete;
  RegionGuard& operator=(const RegionGuard&) = delete;
};
}  // namespace detail

/// Runs fn(i) for i in [0, count). Work is distributed over up to
/// max_threads() workers; if several calls throw, the exception from the
/// smallest index is rethrown.
template <class Fn>
void for_each_index(std::size_t count, Fn&& fn) {
  const auto threads = static_cast<std::size_t>(max_threads());
  if (threads <= 1 || count <= 1 || detail::in_region) {
    for (std::size_t i = 0; i < count; ++i) {
      fn(i);
    }
    return;
  }

  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  std::size_t error_index = std::numeric_limits<std::size_t>::max();

  auto worker = [&] {
    const detail::RegionGuard guard;
    for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
      try {
        fn(i);
      } catch (...) {
        const std::lock_guard lock{error_mutex};
        if (i < error_index) {
          error_index = i;
          error = std::current_exception();
        }
      }
    }
  };

  {
    std::vector<std::jthread> pool;
    const auto spawned = std::min(threads, count) - 1;
    pool.reserve(spawned);
    for (std::size_t t = 0; t < spawned; ++t) {
      pool.emplace_back(worker);
    }
    worker();
  }
  if (error) {
    std::rethrow_exception(error);
  }
}

/// Number of fixed-size chunks needed to cover `rows`.
constexpr std::size_t chunk_count(std::ptrdiff_t rows) noexcept {
  return rows <= 0 ? 0 : static_cast<std::size_t>((rows + kChunkRows - 1) / kChunkRows);
}

}  // namespace rareis::parallel

#endif
