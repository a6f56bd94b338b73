#pragma once

#include <cstdint>
#include <random>

namespace peerdyn {

// Seeded generator with hand-rolled uniform/normal transforms so that draws
// do not depend on the standard library's distribution implementations.
// Identical seeds give identical streams on every platform we build for.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform double in [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; the second draw of each pair is cached.
  double normal();

  // Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t integer(std::uint64_t bound);

 private:
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace peerdyn
