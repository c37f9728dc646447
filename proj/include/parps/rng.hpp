#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

namespace parps {

// splitmix64 finaliser; also used to derive well-separated seeds for
// independent substreams (replicas, trials).
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  return mix64(base ^ mix64(stream + 0x5851f42d4c957f2dull));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(mix64(seed)) {}

  std::uint64_t bits() { return gen_(); }

  // uniform in [0,1)
  double uniform() { return static_cast<double>(bits() >> 11) * 0x1.0p-53; }

  // uniform integer in [0, bound), unbiased
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      std::uint64_t r = bits();
      if (r >= threshold) return r % bound;
    }
  }

  // Exp(rate); rate 0 is the never-firing clock
  double exponential(double rate) {
    if (rate <= 0.0) return std::numeric_limits<double>::infinity();
    return -std::log1p(-uniform()) / rate;
  }

 private:
  std::mt19937_64 gen_;
};

// Uniformly random d-subset of {0,...,n-1}, returned sorted.
// Floyd's algorithm: every subset has probability 1/C(n,d).
inline std::vector<std::int32_t> sample_subset(Rng& rng, std::int32_t n, std::int32_t d) {
  if (d < 1 || d > n) throw std::invalid_argument("sample_subset: need 1 <= d <= n");
  std::vector<std::int32_t> out;
  out.reserve(static_cast<std::size_t>(d));
  for (std::int32_t j = n - d; j < n; ++j) {
    auto t = static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(j) + 1));
    if (std::find(out.begin(), out.end(), t) != out.end()) {
      out.push_back(j);
    } else {
      out.push_back(t);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace parps
