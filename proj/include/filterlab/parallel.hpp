#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include <omp.h>

namespace filterlab {

inline int effective_threads(int requested) {
  return requested > 0 ? requested : omp_get_max_threads();
}

// Deterministic blocked reduction. The item range is cut into fixed-size
// blocks, each block is reduced on one thread, and block results are combined
// serially in block order, so the outcome is independent of the thread count
// and of scheduling.
template <class Partial, class BlockFn, class CombineFn>
Partial blocked_reduce(std::int64_t n_items, std::int64_t block_size,
                       Partial init, BlockFn&& block_fn, CombineFn&& combine,
                       int threads = 0) {
  const std::int64_t n_blocks =
      block_size > 0 ? (n_items + block_size - 1) / block_size : 0;
  std::vector<Partial> partials(static_cast<std::size_t>(std::max<std::int64_t>(n_blocks, 0)), init);
#pragma omp parallel for schedule(dynamic) num_threads(effective_threads(threads))
  for (std::int64_t b = 0; b < n_blocks; ++b) {
    const std::int64_t lo = b * block_size;
    const std::int64_t hi = std::min(n_items, lo + block_size);
    block_fn(lo, hi, partials[static_cast<std::size_t>(b)]);
  }
  Partial acc = std::move(init);
  for (auto& p : partials) combine(acc, p);
  return acc;
}

}  // namespace filterlab
