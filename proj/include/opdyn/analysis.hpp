#pragma once

// Disagreement metrics and steady-state diagnostics.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "opdyn/steady_state.hpp"
#include "opdyn/types.hpp"

namespace opdyn {

/// Spread max(x) - min(x); zero exactly at consensus.
inline double disagreement(const Vector& x) {
  if (x.size() == 0) throw InvalidInput("disagreement of an empty vector");
  return x.maxCoeff() - x.minCoeff();
}

/// 1 - min_{i,j} sum_s min(a_is, a_js) for a row-stochastic matrix.
/// Satisfies V(Ax) <= tau(A) V(x).
inline double ergodicity_coefficient(const Matrix& a, double tol = 1e-10) {
  if (a.rows() == 0 || a.rows() != a.cols()) {
    throw InvalidInput("ergodicity coefficient needs a non-empty square matrix");
  }
  if ((a.array() < 0.0).any()) throw InvalidInput("ergodicity coefficient of a negative matrix");
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    if (std::abs(a.row(i).sum() - 1.0) > tol) {
      throw InvalidInput("ergodicity coefficient: row " + std::to_string(i) +
                         " is not stochastic");
    }
  }
  double overlap = 1.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < a.rows(); ++j) {
      overlap = std::min(overlap, a.row(i).cwiseMin(a.row(j)).sum());
    }
  }
  return std::clamp(1.0 - overlap, 0.0, 1.0);
}

/// kappa(phi) = 1 - (phi_min / phi_max)(1 - phi_max), an upper bound on the
/// ergodicity coefficient of S under a global public opinion.
inline double kappa(const Vector& phi) {
  if (phi.size() == 0) throw InvalidInput("kappa of an empty resilience vector");
  const double lo = phi.minCoeff();
  const double hi = phi.maxCoeff();
  if (!(lo > 0.0 && hi < 1.0)) throw InvalidInput("kappa requires every phi_i in (0,1)");
  return 1.0 - (lo / hi) * (1.0 - hi);
}

/// Lower bound V(yh*)/kappa(phi) on the private spread V(y*). Only proved for a
/// global public opinion, so any other mode is rejected.
inline double private_gap_lower_bound(double expressed_spread, const Vector& phi,
                                      PublicOpinion mode) {
  if (mode != PublicOpinion::global) {
    throw InvalidInput("private-gap lower bound holds only for a global public opinion");
  }
  return expressed_spread / kappa(phi);
}

struct SteadyInequalities {
  bool upper_chain = false;  ///< max y(0) > max y* > max yh*
  bool lower_chain = false;  ///< min y(0) < min y* < min yh*
  bool expressed_spread = false;  ///< min yh* != max yh*

  bool all() const { return upper_chain && lower_chain && expressed_spread; }
};

inline constexpr double kStrictMargin = 1e-12;
inline constexpr double kConsensusSpread = 1e-9;

inline SteadyInequalities check_steady_inequalities(const Vector& y0, const Vector& y_star,
                                                    const Vector& y_hat_star) {
  if (disagreement(y0) < kConsensusSpread) {
    throw InvalidInput("initial opinions are at consensus; the inequalities do not apply");
  }
  SteadyInequalities r;
  r.upper_chain = y0.maxCoeff() > y_star.maxCoeff() + kStrictMargin &&
                  y_star.maxCoeff() > y_hat_star.maxCoeff() + kStrictMargin;
  r.lower_chain = y0.minCoeff() + kStrictMargin < y_star.minCoeff() &&
                  y_star.minCoeff() + kStrictMargin < y_hat_star.minCoeff();
  r.expressed_spread = disagreement(y_hat_star) > kStrictMargin;
  return r;
}

/// dS/dphi_i = phi_i^{-2} S e_i (e_i - m_i)^T S, with m_i the i-th row of the
/// conformity matrix in use. Column i is positive; every other entry negative.
inline Matrix resilience_sensitivity(const SystemMatrices& sys, const AgentParameters& params,
                                     std::size_t agent) {
  if (!sys.completed()) throw InvalidInput("sensitivity needs a completed system");
  if (agent >= sys.n()) {
    throw InvalidInput("agent index " + std::to_string(agent) + " out of range");
  }
  const auto i = static_cast<Eigen::Index>(agent);
  const double p = params.phi[i];
  Eigen::RowVectorXd direction = -sys.conformity.row(i);
  direction[i] += 1.0;
  return (sys.S.col(i) * (direction * sys.S)) / (p * p);
}

inline constexpr double kCoincidenceTolerance = 1e-12;

struct DisagreementReport {
  Vector y_star;
  Vector y_hat_star;
  double v_y0 = 0;
  double v_y_star = 0;
  double v_yhat_star = 0;
  std::optional<double> kappa;                    ///< global mode only
  std::optional<double> private_gap_lower_bound;  ///< global mode only
  std::optional<double> tau_S;                    ///< ergodicity coefficient of S
  Vector per_agent_discrepancy;                   ///< y*_i - yh*_i
  std::vector<std::size_t> coincident_agents;     ///< |y*_i - yh*_i| < 1e-12
  std::optional<SteadyInequalities> inequalities;  ///< absent at consensus y(0)
};

inline DisagreementReport discrepancy_report(const Vector& y0, const SystemMatrices& sys,
                                             const AgentParameters& params) {
  const Limits lim = limits(sys, y0);
  DisagreementReport r;
  r.y_star = lim.y_star;
  r.y_hat_star = lim.y_hat_star;
  r.v_y0 = disagreement(y0);
  r.v_y_star = disagreement(lim.y_star);
  r.v_yhat_star = disagreement(lim.y_hat_star);
  r.per_agent_discrepancy = lim.y_star - lim.y_hat_star;
  for (Eigen::Index i = 0; i < r.per_agent_discrepancy.size(); ++i) {
    if (std::abs(r.per_agent_discrepancy[i]) < kCoincidenceTolerance) {
      r.coincident_agents.push_back(static_cast<std::size_t>(i));
    }
  }
  if ((sys.S.array() >= 0.0).all()) r.tau_S = ergodicity_coefficient(sys.S);
  const bool phi_open = params.phi.minCoeff() > 0.0 && params.phi.maxCoeff() < 1.0;
  if (sys.mode == PublicOpinion::global && phi_open) {
    r.kappa = kappa(params.phi);
    r.private_gap_lower_bound = private_gap_lower_bound(r.v_yhat_star, params.phi, sys.mode);
  }
  if (r.v_y0 >= kConsensusSpread) {
    r.inequalities = check_steady_inequalities(y0, lim.y_star, lim.y_hat_star);
  }
  return r;
}

}  // namespace opdyn
