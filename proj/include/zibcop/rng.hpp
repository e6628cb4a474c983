#pragma once

// Random streams keyed by (seed, cell, replicate). The engine is
// std::mt19937_64, whose output sequence is fixed by the standard; the
// uniform and normal transforms are done here because the standard
// distributions are implementation-defined.

#include <cstdint>
#include <random>

#include "zibcop/numerics.hpp"

namespace zibcop {

class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t cell = 0, std::uint64_t rep = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(cell), static_cast<std::uint32_t>(cell >> 32),
                      static_cast<std::uint32_t>(rep), static_cast<std::uint32_t>(rep >> 32)};
    engine_.seed(seq);
  }

  std::uint64_t bits() { return engine_(); }

  /// Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

  double normal() { return normal_quantile(uniform()); }

  /// Uniform integer in [0, bound) by rejection.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t r;
    do r = engine_();
    while (r >= limit);
    return r % bound;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace zibcop
