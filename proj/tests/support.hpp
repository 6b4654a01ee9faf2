#pragma once

// Shared fixtures for the unit and acceptance suites.

#include <cstdint>

#include "opdyn/opdyn.hpp"

namespace opdyn::testing {

struct Instance {
  InfluenceNetwork net;
  AgentParameters params;
  Vector y0;
};

/// Random k-regular network (k picked from the seed) with Beta-distributed
/// lambda, phi and y0. Satisfies the convergence hypotheses by construction.
inline Instance random_instance(std::size_t n, std::uint64_t seed,
                                ConformityWeights conformity = UniformConformity{}) {
  std::size_t k = 1;
  if (n > 2) {
    const std::size_t choices = std::min<std::size_t>(3, n - 2);  // k in [2, min(4, n-1)]
    k = 2 + static_cast<std::size_t>(seed % choices);
    if ((n * k) % 2 != 0) k = (k + 1 <= n - 1) ? k + 1 : k - 1;
  }
  return Instance{generate_k_regular(n, k, seed, conformity), sample_parameters(n, seed),
                  sample_initial_opinions(n, seed)};
}

inline Matrix m2(double a, double b, double c, double d) {
  Matrix m(2, 2);
  m << a, b, c, d;
  return m;
}

inline Vector v(std::initializer_list<double> xs) {
  Vector out(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) out[i++] = x;
  return out;
}

}  // namespace opdyn::testing
