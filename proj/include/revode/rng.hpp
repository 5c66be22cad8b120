#pragma once

#include <cstdint>
#include <random>

namespace revode {

// Seeded 64-bit generator. The uniform draw is hand-pinned (bit shift of the
// raw output) so a recorded seed reproduces runs independent of the standard
// library's distribution implementation.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  private:
    std::mt19937_64 gen_;
};

}  // namespace revode
