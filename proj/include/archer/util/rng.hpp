#pragma once

#include <cstdint>
#include <random>

namespace archer::util {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Seeded generator with bounding algorithms pinned here, so that streams are
// reproducible across standard libraries (std::uniform_int_distribution is not).
class DetRng {
 public:
  explicit DetRng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  // Unbiased value in [0, bound) via rejection sampling.
  std::uint64_t next_below(std::uint64_t bound) {
    if (bound <= 1) return 0;
    const std::uint64_t limit = bound * (UINT64_MAX / bound);
    std::uint64_t v;
    do {
      v = engine_();
    } while (v >= limit);
    return v % bound;
  }

  std::uint64_t next_range(std::uint64_t lo, std::uint64_t hi) {  // inclusive bounds
    if (hi <= lo) return lo;
    const std::uint64_t width = hi - lo;
    if (width == UINT64_MAX) return engine_();
    return lo + next_below(width + 1);
  }

  // Uniform in [0, 1) with 53 bits of mantissa.
  double next_double() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double next_double_range(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  bool next_bool(double p_true) { return next_double() < p_true; }

  // Child stream whose draws are independent of this stream's position.
  DetRng fork(std::uint64_t label) const {
    std::uint64_t s = seed_ + 0x9e3779b97f4a7c15ULL * (label + 1);
    std::uint64_t a = splitmix64(s);
    std::uint64_t b = splitmix64(s);
    return DetRng(a ^ (b << 1) ^ label);
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace archer::util
