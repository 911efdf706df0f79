#pragma once

// Sampling helpers on top of std::mt19937_64 that give the same sequence on
// every platform (the standard distributions are implementation-defined).

#include <cstdint>
#include <limits>
#include <random>
#include <set>
#include <vector>

namespace regret_adjust::detail {

/// Uniform integer in [0, n) by rejection; n > 0.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

/// k distinct values from [0, n), ascending (Floyd's algorithm).
inline std::vector<std::uint64_t> sample_without_replacement(std::mt19937_64& rng, std::uint64_t n,
                                                             std::uint64_t k) {
  std::set<std::uint64_t> chosen;
  for (std::uint64_t j = n - k; j < n; ++j) {
    std::uint64_t t = uniform_below(rng, j + 1);
    if (!chosen.insert(t).second) chosen.insert(j);
  }
  return {chosen.begin(), chosen.end()};
}

}  // namespace regret_adjust::detail
