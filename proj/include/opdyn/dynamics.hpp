#pragma once

// Time stepping for coupled private/expressed opinions.
//
// One round follows the discussion order: agents hear last round's expressed
// opinions and update their private opinions, then form the opinion they will
// express next from the fresh private opinion and last round's public norm:
//
//   y_i(t+1)  = l_i (w_ii y_i(t) + sum_{j!=i} w_ij yh_j(t)) + (1 - l_i) y_i(0)
//   yh_i(t+1) = f_i y_i(t+1) + (1 - f_i) norm_i(yh(t))
//
// norm_i is (M yh)_i for a local public opinion or mean(yh) for a global one.
// Both updates are evaluated as offsets from the value being mixed toward, so
// a consensus state is reproduced bit for bit.

#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "opdyn/graph.hpp"
#include "opdyn/random.hpp"
#include "opdyn/types.hpp"

namespace opdyn {

struct AgentParameters {
  Vector lambda;  ///< susceptibility to interpersonal influence, in [0,1]
  Vector phi;     ///< resilience to conformity pressure, in [0,1]
  std::optional<Vector> threshold;  ///< expression cutoffs, in (0,1)

  std::size_t n() const { return static_cast<std::size_t>(lambda.size()); }

  void validate(std::size_t agents) const {
    const auto n = static_cast<Eigen::Index>(agents);
    if (lambda.size() != n || phi.size() != n) {
      throw InvalidInput("parameter vectors have length " + std::to_string(lambda.size()) +
                         "/" + std::to_string(phi.size()) + ", expected " +
                         std::to_string(agents));
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!(lambda[i] >= 0.0 && lambda[i] <= 1.0)) {
        throw InvalidInput("lambda[" + std::to_string(i) + "] outside [0,1]");
      }
      if (!(phi[i] >= 0.0 && phi[i] <= 1.0)) {
        throw InvalidInput("phi[" + std::to_string(i) + "] outside [0,1]");
      }
    }
    if (threshold) {
      if (threshold->size() != n) throw InvalidInput("threshold vector has wrong length");
      for (Eigen::Index i = 0; i < n; ++i) {
        if (!((*threshold)[i] > 0.0 && (*threshold)[i] < 1.0)) {
          throw InvalidInput("threshold[" + std::to_string(i) + "] outside (0,1)");
        }
      }
    }
  }
};

/// Draws lambda ~ Beta(2,8) and phi ~ Beta(2,2) from their own streams.
inline AgentParameters sample_parameters(std::size_t n, std::uint64_t seed) {
  Rng lam(derive_seed(seed, Stream::susceptibility));
  Rng res(derive_seed(seed, Stream::resilience));
  return AgentParameters{lam.beta_vector(n, kSusceptibilityShape),
                         res.beta_vector(n, kResilienceShape), std::nullopt};
}

struct OpinionState {
  std::size_t t = 0;
  Vector y;      ///< private opinions y(t)
  Vector y_hat;  ///< expressed opinions yh(t)
  Vector y0;     ///< initial private opinions, the stubbornness anchor
};

inline OpinionState initial_state(const Vector& y0) {
  if (y0.size() == 0) throw InvalidInput("initial opinions are empty");
  for (Eigen::Index i = 0; i < y0.size(); ++i) {
    if (!std::isfinite(y0[i])) {
      throw InvalidInput("initial opinion " + std::to_string(i) + " is not finite");
    }
  }
  return OpinionState{0, y0, y0, y0};
}

/// y0 ~ Beta(2,2) per agent.
inline Vector sample_initial_opinions(std::size_t n, std::uint64_t seed) {
  Rng rng(derive_seed(seed, Stream::initial_opinions));
  return rng.beta_vector(n, kInitialOpinionShape);
}

namespace detail {

inline void check_dimensions(const OpinionState& s, const InfluenceNetwork& net,
                             const AgentParameters& params) {
  const auto n = static_cast<Eigen::Index>(net.n());
  if (s.y.size() != n || s.y_hat.size() != n || s.y0.size() != n) {
    throw InvalidInput("opinion state has " + std::to_string(s.y.size()) +
                       " agents but the network has " + std::to_string(n));
  }
  params.validate(net.n());
}

inline Vector private_update(const OpinionState& s, const InfluenceNetwork& net,
                             const AgentParameters& params) {
  const auto n = static_cast<Eigen::Index>(net.n());
  Vector next(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double anchor = s.y0[i];
    double pull = 0.0;
    for (const Link& l : net.links(static_cast<std::size_t>(i))) {
      const double source = l.to == i ? s.y[i] : s.y_hat[l.to];
      pull += l.w * (source - anchor);
    }
    next[i] = anchor + params.lambda[i] * pull;
  }
  return next;
}

/// Pre-threshold expressed value: f_i y_i + (1 - f_i) norm_i(yh).
inline Vector expression_value(const Vector& y_next, const Vector& y_hat,
                               const InfluenceNetwork& net, const AgentParameters& params,
                               PublicOpinion mode) {
  const auto n = y_next.size();
  Vector out(n);
  double global_norm = 0.0;
  if (mode == PublicOpinion::global) {
    const double ref = y_hat[0];
    for (Eigen::Index j = 0; j < n; ++j) global_norm += (y_hat[j] - ref);
    global_norm /= static_cast<double>(n);
    global_norm += ref;  // exact when all entries agree
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    double gap = 0.0;  // norm_i - y_i(t+1)
    if (mode == PublicOpinion::global) {
      gap = global_norm - y_next[i];
    } else {
      for (const Link& l : net.links(static_cast<std::size_t>(i))) {
        gap += l.m * (y_hat[l.to] - y_next[i]);
      }
    }
    out[i] = y_next[i] + (1.0 - params.phi[i]) * gap;
  }
  return out;
}

}  // namespace detail

inline OpinionState step(const OpinionState& state, const InfluenceNetwork& net,
                         const AgentParameters& params, PublicOpinion mode) {
  detail::check_dimensions(state, net, params);
  OpinionState next;
  next.t = state.t + 1;
  next.y = detail::private_update(state, net, params);
  next.y_hat = detail::expression_value(next.y, state.y_hat, net, params, mode);
  next.y0 = state.y0;
  return next;
}

/// Same private update as `step`; the expressed opinion is the indicator of
/// the pre-threshold value exceeding tau_i (a value equal to tau_i maps to 0).
/// Opinions must lie on the [0,1] scale.
inline OpinionState step_threshold(const OpinionState& state, const InfluenceNetwork& net,
                                   const AgentParameters& params, PublicOpinion mode) {
  detail::check_dimensions(state, net, params);
  if (!params.threshold) throw InvalidInput("threshold model requires per-agent thresholds");
  auto in_unit = [](const Vector& v) { return (v.array() >= 0.0).all() && (v.array() <= 1.0).all(); };
  if (!in_unit(state.y0) || !in_unit(state.y) || !in_unit(state.y_hat)) {
    throw InvalidInput("threshold model requires opinions in [0,1]");
  }
  OpinionState next;
  next.t = state.t + 1;
  next.y = detail::private_update(state, net, params);
  const Vector value = detail::expression_value(next.y, state.y_hat, net, params, mode);
  const Vector& tau = *params.threshold;
  next.y_hat.resize(value.size());
  for (Eigen::Index i = 0; i < value.size(); ++i) next.y_hat[i] = value[i] > tau[i] ? 1.0 : 0.0;
  next.y0 = state.y0;
  return next;
}

struct StopCriteria {
  std::size_t max_steps = 100000;
  double tol = 1e-10;  ///< on |dy|_inf + |dyh|_inf between consecutive rounds
};

struct Snapshot {
  std::size_t t;
  Vector y;
  Vector y_hat;
};

struct SimulationResult {
  std::vector<Snapshot> trajectory;
  OpinionState final_state;
  bool converged = false;
  std::size_t iterations = 0;
  double residual = 0.0;
  /// Threshold model only: period (> 1) of a detected limit cycle.
  std::optional<std::size_t> cycle_period;
};

struct SimulationOptions {
  PublicOpinion mode = PublicOpinion::local;
  ExpressionModel model = ExpressionModel::continuous;
  StopCriteria stop{};
  /// Record every `stride`-th state (and always the first and last);
  /// 0 records only the first and last.
  std::size_t stride = 1;
  /// Longest limit cycle looked for in the threshold model.
  std::size_t max_cycle = 64;
};

/// Iterates from y0 until the residual drops below tol or max_steps is hit.
/// In the threshold model a repeat of the binary expressed pattern after p
/// rounds, with private opinions repeating to within tol, ends the run: p = 1
/// is convergence, p > 1 is reported as a cycle. Non-convergence is reported
/// in the result, never thrown.
inline SimulationResult simulate(const Vector& y0, const InfluenceNetwork& net,
                                 const AgentParameters& params,
                                 const SimulationOptions& options = {}) {
  SimulationResult result;
  OpinionState state = initial_state(y0);
  detail::check_dimensions(state, net, params);

  auto record = [&](const OpinionState& s) { result.trajectory.push_back({s.t, s.y, s.y_hat}); };
  record(state);

  const bool threshold = options.model == ExpressionModel::threshold;
  std::deque<OpinionState> recent;  // threshold model cycle window

  bool last_recorded = true;
  for (std::size_t k = 0; k < options.stop.max_steps; ++k) {
    OpinionState next = threshold ? step_threshold(state, net, params, options.mode)
                                  : step(state, net, params, options.mode);
    const double residual = (next.y - state.y).lpNorm<Eigen::Infinity>() +
                            (next.y_hat - state.y_hat).lpNorm<Eigen::Infinity>();
    result.residual = residual;
    result.iterations = next.t;

    bool stop = residual < options.stop.tol;
    if (threshold && !stop) {
      for (std::size_t p = 2; p <= recent.size() + 1 && p <= options.max_cycle; ++p) {
        const OpinionState& past = recent[recent.size() - (p - 1)];
        if (past.y_hat == next.y_hat &&
            (past.y - next.y).lpNorm<Eigen::Infinity>() < options.stop.tol) {
          result.cycle_period = p;
          stop = true;
          break;
        }
      }
      recent.push_back(state);
      if (recent.size() + 1 > options.max_cycle) recent.pop_front();
    }
    state = std::move(next);
    last_recorded = options.stride != 0 && state.t % options.stride == 0;
    if (last_recorded) record(state);
    if (stop) {
      result.converged = !result.cycle_period.has_value();
      break;
    }
  }
  if (!last_recorded) record(state);
  result.final_state = std::move(state);
  return result;
}

}  // namespace opdyn
