#include "cxr/augment/rng.hpp"

#include <cmath>

namespace cxr::augment {

double RngState::next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double RngState::next_uniform(double lo, double hi) {
  const double u = next_unit();
  if (lo == hi) return lo;
  const double v = lo + u * (hi - lo);
  return v < hi ? v : std::nextafter(hi, lo);
}

std::uint64_t RngState::next_below(std::uint64_t bound) {
  const unsigned __int128 wide = static_cast<unsigned __int128>(next_u64()) * bound;
  return static_cast<std::uint64_t>(wide >> 64);
}

}  // namespace cxr::augment
