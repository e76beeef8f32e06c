#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace lsc {

// All randomness flows through Rng. std::mt19937_64 output is fixed by the
// standard, and the value mappings below are our own, so identically seeded
// streams produce identical draws on every platform. The std::*_distribution
// classes are implementation-defined and must not be used anywhere.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next_u64() { return eng_(); }

  // [0, 1) with 53 bits of mantissa.
  double next_double() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  // [0, bound), unbiased via rejection.
  int next_int(int bound) {
    const uint64_t n = static_cast<uint64_t>(bound);
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = eng_();
    } while (x >= limit);
    return static_cast<int>(x % n);
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(next_int(static_cast<int>(i)));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 eng_;
};

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Child seed from a base seed and a tag path, e.g. {STREAM_ACTION, episode, tick}.
inline uint64_t derive_seed(uint64_t base, std::initializer_list<uint64_t> tags) {
  uint64_t s = splitmix64(base);
  for (uint64_t t : tags) s = splitmix64(s ^ t);
  return s;
}

}  // namespace lsc
