#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

namespace qb {

template <typename Result>
std::vector<Result>
run_indexed(std::int64_t count, int jobs,
            const std::function<Result(std::int64_t)> &fn) {
  std::vector<std::optional<Result>> slots(static_cast<std::size_t>(count));
  const int workers =
      static_cast<int>(std::clamp<std::int64_t>(jobs, 1, std::max<std::int64_t>(count, 1)));
  std::atomic<std::int64_t> next{0};
  std::exception_ptr failure;
  std::int64_t failed_index = count;
  std::mutex failure_mutex;

  auto work = [&] {
    for (std::int64_t i = next++; i < count; i = next++) {
      try {
        slots[static_cast<std::size_t>(i)].emplace(fn(i));
      } catch (...) {
        // Keep the failure with the lowest index so errors are reproducible.
        std::lock_guard lock(failure_mutex);
        if (i < failed_index) {
          failed_index = i;
          failure = std::current_exception();
        }
      }
    }
  };

  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w)
      pool.emplace_back(work);
  }
  if (failure)
    std::rethrow_exception(failure);

  std::vector<Result> out;
  out.reserve(slots.size());
  for (auto &s : slots)
    out.push_back(std::move(*s));
  return out;
}

} // namespace qb
