#pragma once

// Asch conformity experiments.
//
// Agent 0 is the test subject, starting certain of the true answer
// (y = yh = 1). The other n-1 agents are confederates with lambda = 0 and
// phi = 1, so they hold and voice their scripted answer forever. In the first
// variant every confederate answers wrongly (0); in the second, confederate 1
// answers truthfully (1).
//
// For the first variant with a global public opinion the subject's limits
// have closed forms:
//   y1*  = (1 - lambda1) / (1 - lambda1 w11)
//   yh1* = g(phi1, n) y1*,  g(phi, n) = n phi / (n - 1 + phi)

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "opdyn/dynamics.hpp"
#include "opdyn/graph.hpp"
#include "opdyn/random.hpp"
#include "opdyn/types.hpp"

namespace opdyn::asch {

enum class Variant { first, second };

struct AschScenario {
  std::size_t n = 8;
  double lambda1 = 0.1;
  double phi1 = 0.9;
  std::optional<double> w11;  ///< defaults to 1 - lambda1
  Variant variant = Variant::first;
  ExpressionModel model = ExpressionModel::continuous;
  double tau1 = 0.5;  ///< threshold model only
  PublicOpinion mode = PublicOpinion::global;

  double self_weight() const { return w11.value_or(1.0 - lambda1); }
};

struct AschInstance {
  InfluenceNetwork net;
  AgentParameters params;
  Vector y0;
  PublicOpinion mode;
  ExpressionModel model;
};

inline void validate(const AschScenario& s) {
  if (s.n < 2) throw InvalidInput("Asch scenario needs n >= 2");
  if (s.variant == Variant::second && s.n < 3) {
    throw InvalidInput("second Asch variant needs n >= 3");
  }
  if (!(s.lambda1 >= 0.0 && s.lambda1 <= 1.0)) throw InvalidInput("lambda1 outside [0,1]");
  if (!(s.phi1 >= 0.0 && s.phi1 <= 1.0)) throw InvalidInput("phi1 outside [0,1]");
  const double w11 = s.self_weight();
  if (!(w11 > 0.0 && w11 < 1.0)) {
    throw InvalidInput("w11 must lie in (0,1), got " + std::to_string(w11));
  }
  if (s.model == ExpressionModel::threshold && !(s.tau1 > 0.0 && s.tau1 < 1.0)) {
    throw InvalidInput("tau1 must lie in (0,1)");
  }
}

/// Random positive W with w11 pinned; the subject's remaining weight 1 - w11
/// is split over the confederates in proportion to U(0,1) draws, every other
/// row is U(0,1) draws normalized. Draws come from
/// derive_seed(seed, Stream::scenario) in row-major order.
inline AschInstance build_scenario(const AschScenario& s, std::uint64_t seed) {
  validate(s);
  const auto n = static_cast<Eigen::Index>(s.n);
  Rng rng(derive_seed(seed, Stream::scenario));
  Matrix w(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) w(i, j) = rng.uniform_open();

  const double w11 = s.self_weight();
  const double others = w.row(0).tail(n - 1).sum();
  w.row(0).tail(n - 1) *= (1.0 - w11) / others;
  w(0, 0) = w11;

  AgentParameters params{Vector::Zero(n), Vector::Ones(n), std::nullopt};
  params.lambda[0] = s.lambda1;
  params.phi[0] = s.phi1;
  if (s.model == ExpressionModel::threshold) {
    params.threshold = Vector::Constant(n, 0.5);
    (*params.threshold)[0] = s.tau1;
  }

  Vector y0 = Vector::Zero(n);
  y0[0] = 1.0;
  if (s.variant == Variant::second) y0[1] = 1.0;

  return AschInstance{build_network(w, UniformConformity{}), std::move(params), std::move(y0),
                      s.mode, s.model};
}

inline double closed_form_private(double lambda1, double w11) {
  if (!(w11 > 0.0 && w11 < 1.0)) throw InvalidInput("w11 must lie in (0,1)");
  if (!(lambda1 >= 0.0 && lambda1 <= 1.0)) throw InvalidInput("lambda1 outside [0,1]");
  return (1.0 - lambda1) / (1.0 - lambda1 * w11);
}

/// g(phi, n) = n phi / (n - 1 + phi); the ratio yh1*/y1*.
inline double conformity_gain(double phi1, std::size_t n) {
  if (n < 2) throw InvalidInput("group size must be at least 2");
  const double nn = static_cast<double>(n);
  return nn * phi1 / (nn - 1.0 + phi1);
}

inline double closed_form_expressed(double phi1, std::size_t n, double y1_star) {
  if (!(phi1 >= 0.0 && phi1 <= 1.0)) throw InvalidInput("phi1 outside [0,1]");
  return conformity_gain(phi1, n) * y1_star;
}

/// f(lambda) = (1 - lambda) / (1 - lambda (1 - lambda)): y1* under the
/// self-weight choice w11 = 1 - lambda1.
inline double stubbornness_curve(double lambda1) {
  return (1.0 - lambda1) / (1.0 - lambda1 * (1.0 - lambda1));
}

enum class ThresholdOutcome { expresses_1, expresses_0, indeterminate };

inline std::string_view to_string(ThresholdOutcome o) {
  switch (o) {
    case ThresholdOutcome::expresses_1: return "expresses_1";
    case ThresholdOutcome::expresses_0: return "expresses_0";
    case ThresholdOutcome::indeterminate: return "indeterminate";
  }
  return "?";
}

/// Steady expressed answer of the subject in the first variant's threshold
/// model. Expressing 1 is self-sustaining when phi y* + (1-phi)/n >= tau and
/// expressing 0 when phi y* < tau; where both hold (tau in the closed band
/// [phi y*, phi y* + (1-phi)/n]) the answer depends on the initial expressed
/// opinion.
inline ThresholdOutcome threshold_prediction(double phi1, double y1_star, std::size_t n,
                                             double tau1, PublicOpinion mode) {
  if (mode != PublicOpinion::global) {
    throw InvalidInput("threshold prediction assumes a global public opinion");
  }
  if (n < 2) throw InvalidInput("group size must be at least 2");
  // Edges are closed; leave room for rounding so that, e.g., 0.4 + 0.05 == 0.45.
  constexpr double kEdge = 1e-14;
  const double low = phi1 * y1_star - kEdge;
  const double high = phi1 * y1_star + (1.0 - phi1) / static_cast<double>(n) + kEdge;
  if (tau1 < low) return ThresholdOutcome::expresses_1;
  if (tau1 > high) return ThresholdOutcome::expresses_0;
  return ThresholdOutcome::indeterminate;
}

enum class Reaction { independent, yield_judgment, yield_action, anomalous };

inline std::string_view to_string(Reaction r) {
  switch (r) {
    case Reaction::independent: return "independent";
    case Reaction::yield_judgment: return "yield_judgment";
    case Reaction::yield_action: return "yield_action";
    case Reaction::anomalous: return "anomalous";
  }
  return "?";
}

/// Midpoint cut on final private and expressed beliefs.
inline Reaction classify_individual(double y1_star, double y_hat1_star) {
  const bool private_true = y1_star >= 0.5;
  const bool expressed_true = y_hat1_star >= 0.5;
  if (private_true && expressed_true) return Reaction::independent;
  if (!private_true && !expressed_true) return Reaction::yield_judgment;
  if (private_true) return Reaction::yield_action;
  return Reaction::anomalous;
}

struct AschOutcome {
  SimulationResult run;
  double y1_star;
  double y_hat1_star;
  Reaction reaction;
};

inline AschOutcome run_scenario(const AschScenario& s, std::uint64_t seed,
                                StopCriteria stop = {1000000, 1e-13}, std::size_t stride = 0) {
  const AschInstance inst = build_scenario(s, seed);
  SimulationOptions opt;
  opt.mode = inst.mode;
  opt.model = inst.model;
  opt.stop = stop;
  opt.stride = stride;
  AschOutcome out{simulate(inst.y0, inst.net, inst.params, opt), 0.0, 0.0, Reaction::anomalous};
  out.y1_star = out.run.final_state.y[0];
  out.y_hat1_star = out.run.final_state.y_hat[0];
  out.reaction = classify_individual(out.y1_star, out.y_hat1_star);
  return out;
}

}  // namespace opdyn::asch
