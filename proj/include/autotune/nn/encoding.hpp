#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace autotune::nn {

// Maps a scalar to 2L sinusoidal features: (sin(2^l pi p^), cos(2^l pi p^))
// for l = 0..L-1 with p^ = p / p_max. Values beyond p_max simply wrap past
// the [0,1] design range.
inline std::vector<double> sinusoidal_encode(double p, double p_max, int levels) {
  if (p_max <= 0.0) throw std::invalid_argument("sinusoidal_encode: p_max must be positive");
  if (!std::isfinite(p)) throw std::invalid_argument("sinusoidal_encode: p must be finite");
  if (levels < 1) throw std::invalid_argument("sinusoidal_encode: levels must be >= 1");
  const double phat = p / p_max;
  std::vector<double> out;
  out.reserve(2 * levels);
  double freq = std::numbers::pi;
  for (int l = 0; l < levels; ++l) {
    out.push_back(std::sin(freq * phat));
    out.push_back(std::cos(freq * phat));
    freq *= 2.0;
  }
  return out;
}

}  // namespace autotune::nn
