#pragma once

#include <cstdint>

namespace ctxnmt {

// xorshift64*. Hand-rolled so that seeded behaviour is a contract of this
// codebase rather than of a particular standard library build.
struct Xorshift64Star {
  std::uint64_t state;

  explicit Xorshift64Star(std::uint64_t seed)
      : state(seed ? seed : 0x9E3779B97F4A7C15ULL) {}

  std::uint64_t next() {
    state ^= state >> 12;
    state ^= state << 25;
    state ^= state >> 27;
    return state * 0x2545F4914F6CDD1DULL;
  }

  // [0, 1): 53 uniform mantissa bits
  double uniform() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + uniform() * (hi - lo); }
};

}  // namespace ctxnmt
