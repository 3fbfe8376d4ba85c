#pragma once

#include <random>

#include "leray/spectral_field.hpp"

namespace leray::testing {

inline spectral::SpectralField random_div_free(int dim, int cutoff, std::uint64_t seed, double decay = 1.0,
                                               int support = 0) {
  std::mt19937_64 rng(seed);
  return spectral::random_field(spectral::Lattice::ball(dim, cutoff), rng, decay, true, support);
}

inline spectral::SpectralField random_any(int dim, int cutoff, std::uint64_t seed, double decay = 0.5) {
  std::mt19937_64 rng(seed);
  return spectral::random_field(spectral::Lattice::ball(dim, cutoff), rng, decay, false);
}

inline spectral::Mode mode(int a, int b, int c = 0) { return spectral::Mode{{a, b, c}}; }

}  // namespace leray::testing
