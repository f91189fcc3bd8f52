#ifndef SEMM_SRC_RNG_HPP
#define SEMM_SRC_RNG_HPP

// Variate generation is written out by hand on top of mt19937_64 so that the
// sampled ensemble is identical across standard-library implementations
// (std::*_distribution output is implementation-defined).

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace semm::detail {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  double normal() {
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  double cauchy() {
    double u = uniform01();
    while (u <= 0.0) u = uniform01();
    return std::tan(3.141592653589793 * (u - 0.5));
  }

  std::size_t below(std::size_t n) {
    auto i = static_cast<std::size_t>(uniform01() * static_cast<double>(n));
    return i < n ? i : n - 1;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

/// Derived stream seed (splitmix64 finaliser of seed + stream).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * stream;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace semm::detail

#endif  // SEMM_SRC_RNG_HPP
