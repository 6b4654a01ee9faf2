#pragma once

// Seeded random streams.
//
// Every random quantity in the library is drawn from an `Rng`, a thin wrapper
// over std::mt19937_64. Components that need independent randomness (network
// topology, edge weights, initial opinions, per-instance sweeps) take separate
// streams derived from one user seed with `derive_seed`, so adding draws to one
// stream never perturbs another. Reproducibility is bitwise for a fixed seed
// and standard library; distributions other than the raw engine come from
// <random> and may differ across library vendors.

#include <cstdint>
#include <random>

#include "opdyn/types.hpp"

namespace opdyn {

/// Stream identifiers for `derive_seed`. The numeric values are part of the
/// reproducibility contract and must not change.
enum class Stream : std::uint64_t {
  topology = 1,
  weights = 2,
  initial_opinions = 3,
  susceptibility = 4,
  resilience = 5,
  scenario = 6,
  sweep_instance = 7,
};

/// splitmix64 finalizer over (base, stream, index).
inline std::uint64_t derive_seed(std::uint64_t base, Stream stream,
                                 std::uint64_t index = 0) {
  auto mix = [](std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(base) ^ static_cast<std::uint64_t>(stream)) ^ index);
}

struct BetaShape {
  double alpha;
  double beta;
};

// Presets used for the random-network experiments.
inline constexpr BetaShape kInitialOpinionShape{2.0, 2.0};
inline constexpr BetaShape kResilienceShape{2.0, 2.0};
inline constexpr BetaShape kSusceptibilityShape{2.0, 8.0};

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on the open interval (0, 1).
  double uniform_open() {
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    double u = 0.0;
    do {
      u = dist(engine_);
    } while (u <= 0.0 || u >= 1.0);
    return u;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform_open(); }

  /// Beta(a, b) via the ratio of two gamma variates.
  double beta(BetaShape shape) {
    std::gamma_distribution<double> ga(shape.alpha, 1.0);
    std::gamma_distribution<double> gb(shape.beta, 1.0);
    for (;;) {
      const double x = ga(engine_);
      const double y = gb(engine_);
      const double v = x / (x + y);
      if (v > 0.0 && v < 1.0) return v;
    }
  }

  Vector beta_vector(std::size_t n, BetaShape shape) {
    Vector out(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = beta(shape);
    return out;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace opdyn
