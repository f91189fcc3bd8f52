#ifndef SEMM_PARALLEL_HPP
#define SEMM_PARALLEL_HPP

// Ion loops are split into fixed-size chunks whose boundaries depend only on
// the problem size. Per-chunk partial results are combined in chunk order, so
// every reduction is bit-identical for any worker count.

#include <cstddef>
#include <functional>
#include <vector>

namespace semm {

inline constexpr std::size_t kChunkSize = 2048;

/// Worker count; initialised from STARK_SIM_THREADS, else 1.
unsigned thread_count();
void set_thread_count(unsigned n);

/// Calls body(chunk_index, begin, end) for every chunk of [0, n).
void parallel_chunks(std::size_t n,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& body);

inline std::size_t chunk_count(std::size_t n) { return (n + kChunkSize - 1) / kChunkSize; }

/// Fixed-order reduction: partial(begin, end) per chunk, then left fold.
template <typename T, typename Partial>
T chunked_sum(std::size_t n, T zero, Partial partial) {
  std::vector<T> parts(chunk_count(n), zero);
  parallel_chunks(n, [&](std::size_t c, std::size_t b, std::size_t e) { parts[c] = partial(b, e); });
  T total = zero;
  for (const T& p : parts) total += p;
  return total;
}

}  // namespace semm

#endif  // SEMM_PARALLEL_HPP
