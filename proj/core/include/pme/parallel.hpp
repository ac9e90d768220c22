#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace pme {

/// Global cap on worker threads. 0 means "use hardware concurrency".
void set_max_threads(int n);
int max_threads();

/// Runs fn(i) for i in [0, n). Work is split into contiguous chunks; results
/// must be written to disjoint slots so the outcome is independent of
/// scheduling.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& fn);

/// Chunked variant: fn(lo, hi) handles [lo, hi).
void parallel_for_chunked(std::int64_t n,
                          const std::function<void(std::int64_t, std::int64_t)>& fn);

/// Deterministic parallel sum of per_index(i) over [0, n). Partial sums are
/// taken over fixed-width chunks and folded in chunk order, so the result is
/// bitwise identical for any thread count.
double deterministic_sum(std::int64_t n,
                         const std::function<double(std::int64_t)>& per_index);

}  // namespace pme
