#include "peerdyn/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace peerdyn {

double Rng::normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double phi = 2.0 * std::numbers::pi * uniform();
  cached_ = r * std::sin(phi);
  has_cached_ = true;
  return r * std::cos(phi);
}

std::uint64_t Rng::integer(std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("Rng::integer: bound must be > 0");
  const std::uint64_t bucket = UINT64_MAX / bound;
  const std::uint64_t limit = bucket * bound;
  std::uint64_t r = engine_();
  while (r >= limit) r = engine_();
  return r / bucket;
}

}  // namespace peerdyn
