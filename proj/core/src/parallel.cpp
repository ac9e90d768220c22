#include "pme/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

namespace pme {
namespace {

std::atomic<int> g_max_threads{0};

int effective_threads(std::int64_t n) {
  int cap = g_max_threads.load();
  if (cap <= 0) cap = static_cast<int>(std::thread::hardware_concurrency());
  if (cap <= 0) cap = 1;
  return static_cast<int>(std::min<std::int64_t>(cap, std::max<std::int64_t>(n, 1)));
}

}  // namespace

void set_max_threads(int n) { g_max_threads.store(n); }

int max_threads() {
  int cap = g_max_threads.load();
  if (cap <= 0) cap = static_cast<int>(std::thread::hardware_concurrency());
  return cap > 0 ? cap : 1;
}

void parallel_for_chunked(std::int64_t n,
                          const std::function<void(std::int64_t, std::int64_t)>& fn) {
  if (n <= 0) return;
  int workers = effective_threads(n);
  if (workers == 1) {
    fn(0, n);
    return;
  }
  std::int64_t chunk = std::max<std::int64_t>(1, n / (workers * 8));
  std::atomic<std::int64_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto body = [&] {
    for (;;) {
      std::int64_t lo = next.fetch_add(chunk);
      if (lo >= n) return;
      std::int64_t hi = std::min(n, lo + chunk);
      try {
        fn(lo, hi);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (int t = 1; t < workers; ++t) pool.emplace_back(body);
  body();
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& fn) {
  parallel_for_chunked(n, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t i = lo; i < hi; ++i) fn(i);
  });
}

double deterministic_sum(std::int64_t n,
                         const std::function<double(std::int64_t)>& per_index) {
  if (n <= 0) return 0.0;
  // Chunk width is fixed so partials do not depend on the thread count.
  const std::int64_t width = 4096;
  std::int64_t chunks = (n + width - 1) / width;
  std::vector<double> partial(static_cast<std::size_t>(chunks), 0.0);
  parallel_for(chunks, [&](std::int64_t c) {
    std::int64_t lo = c * width;
    std::int64_t hi = std::min(n, lo + width);
    double s = 0.0;
    for (std::int64_t i = lo; i < hi; ++i) s += per_index(i);
    partial[static_cast<std::size_t>(c)] = s;
  });
  double total = 0.0;
  for (double s : partial) total += s;
  return total;
}

}  // namespace pme
