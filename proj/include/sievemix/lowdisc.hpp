#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace sievemix::lowdisc {

inline constexpr std::array<unsigned, 64> kPrimes = {
    2,   3,   5,   7,   11,  13,  17,  19,  23,  29,  31,  37,  41,  43,  47,  53,
    59,  61,  67,  71,  73,  79,  83,  89,  97,  101, 103, 107, 109, 113, 127, 131,
    137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191, 193, 197, 199, 211, 223,
    227, 229, 233, 239, 241, 251, 257, 263, 269, 271, 277, 281, 283, 293, 307, 311};

/// Van der Corput radical inverse of `index` in `base`, in [0, 1).
inline double radical_inverse(std::size_t index, unsigned base) {
  double inv_base = 1.0 / base;
  double scale = inv_base;
  double value = 0.0;
  while (index > 0) {
    value += static_cast<double>(index % base) * scale;
    index /= base;
    scale *= inv_base;
  }
  return value;
}

/// Point `index` (1-based recommended) of the Halton sequence in `dim` dimensions.
inline std::vector<double> halton(std::size_t index, std::size_t dim) {
  std::vector<double> u(dim);
  for (std::size_t k = 0; k < dim; ++k) u[k] = radical_inverse(index, kPrimes[k % kPrimes.size()]);
  return u;
}

}  // namespace sievemix::lowdisc
