#pragma once
// Shared helpers for the test suites.

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "qsem/quantum_states.hpp"

namespace qsem::test {

inline double rel_gap(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-30});
}

inline bool close_rel(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({std::abs(a), std::abs(b), 1.0});
}

// Truncation that covers both the quasi-Gaussian bulk and the geometric
// number tail (ratio tanh^2 r per photon pair) of squeezed states.
inline std::size_t oracle_cutoff(const PhotonMoments& m, double r) {
  const double t = std::tanh(std::abs(r));
  const double geometric = t > 1e-6 ? 26.0 / -std::log(t) : 0.0;
  return static_cast<std::size_t>(m.mean + 12.0 * std::sqrt(m.variance) +
                                  80.0 + geometric);
}

}  // namespace qsem::test
