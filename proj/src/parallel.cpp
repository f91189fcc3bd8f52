#include "semm/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>

namespace semm {

namespace {

unsigned initial_thread_count() {
  if (const char* env = std::getenv("STARK_SIM_THREADS")) {
    try {
      const long n = std::stol(env);
      if (n >= 1) return static_cast<unsigned>(n);
    } catch (const std::exception&) {
    }
  }
  return 1;
}

std::atomic<unsigned>& workers() {
  static std::atomic<unsigned> n{initial_thread_count()};
  return n;
}

}  // namespace

unsigned thread_count() { return workers().load(); }

void set_thread_count(unsigned n) { workers().store(std::max(1u, n)); }

void parallel_chunks(std::size_t n,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& body) {
  const std::size_t chunks = chunk_count(n);
  auto run = [&](std::size_t c) {
    const std::size_t b = c * kChunkSize;
    body(c, b, std::min(n, b + kChunkSize));
  };

  const unsigned nthreads = static_cast<unsigned>(std::min<std::size_t>(thread_count(), chunks));
  if (nthreads <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) run(c);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t c = next++; c < chunks; c = next++) {
      try {
        run(c);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(nthreads - 1);
  for (unsigned i = 1; i < nthreads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace semm
