#pragma once

// Stacked linear form of the dynamics and its exact limit.
//
// With x(t) = [y(t); yh(t-1)] the coupled updates read
//   x(t+1) = P x(t) + [(I - L) y(0); 0],
//   P = [ L(Wd + Wo F)   L Wo (I - F) M ]
//       [ F              (I - F) M      ]
// where Wd/Wo are the diagonal/off-diagonal parts of W, L = diag(lambda),
// F = diag(phi), and M is replaced by 11^T/n for a global public opinion.
// When the network is primitive and every lambda_i, phi_i lies in (0,1):
//   y* = R y(0),  R = (I - P11 - P12 S)^{-1} (I - L)
//   yh* = S y*,   S = (I - P22)^{-1} P21
// with R and S positive and row-stochastic.

#include <cmath>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "opdyn/dynamics.hpp"
#include "opdyn/graph.hpp"
#include "opdyn/linalg.hpp"
#include "opdyn/types.hpp"

namespace opdyn {

struct SystemMatrices {
  PublicOpinion mode = PublicOpinion::local;
  Matrix conformity;  ///< M actually used (11^T/n in global mode)
  Matrix P11, P12, P21, P22;
  Matrix R, S;        ///< empty until compute_RS
  double rho_P = -1;  ///< negative until compute_RS

  std::size_t n() const { return static_cast<std::size_t>(P11.rows()); }
  bool completed() const { return R.size() > 0 && S.size() > 0; }

  Matrix full() const {
    const Eigen::Index n = P11.rows();
    Matrix p(2 * n, 2 * n);
    p << P11, P12, P21, P22;
    return p;
  }
};

/// Margin used when testing lambda_i, phi_i for membership in (0,1).
inline constexpr double kOpenIntervalMargin = 1e-12;

/// Outcome of checking the hypotheses under which R and S exist and are
/// positive. Each failed condition contributes one human-readable line.
struct AssumptionReport {
  bool row_stochastic = true;
  bool strongly_connected = true;
  bool aperiodic = true;
  bool lambda_open = true;
  bool phi_open = true;
  std::vector<std::string> issues;

  bool ok() const { return issues.empty(); }

  std::string summary() const {
    std::ostringstream out;
    for (std::size_t i = 0; i < issues.size(); ++i) out << (i ? "; " : "") << issues[i];
    return out.str();
  }
};

inline AssumptionReport diagnose_assumptions(const InfluenceNetwork& net,
                                             const AgentParameters& params) {
  AssumptionReport r;
  params.validate(net.n());
  const Matrix& w = net.influence();
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    if (std::abs(w.row(i).sum() - 1.0) > kRowSumTolerance) {
      r.row_stochastic = false;
      r.issues.push_back("W row " + std::to_string(i) + " is not stochastic");
      break;
    }
  }
  r.strongly_connected = is_strongly_connected(w);
  if (!r.strongly_connected) r.issues.emplace_back("influence network is not strongly connected");
  r.aperiodic = r.strongly_connected && is_primitive(w);
  if (r.strongly_connected && !r.aperiodic) r.issues.emplace_back("influence network is periodic");

  auto scan = [&](const Vector& v, const char* name, bool& flag) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (!(v[i] > kOpenIntervalMargin && v[i] < 1.0 - kOpenIntervalMargin)) {
        flag = false;
        r.issues.push_back(std::string(name) + "[" + std::to_string(i) + "]=" +
                           std::to_string(v[i]) + " is not inside (0,1)");
        return;
      }
    }
  };
  scan(params.lambda, "lambda", r.lambda_open);
  scan(params.phi, "phi", r.phi_open);
  return r;
}

inline SystemMatrices build_P(const InfluenceNetwork& net, const AgentParameters& params,
                              PublicOpinion mode) {
  params.validate(net.n());
  const auto n = static_cast<Eigen::Index>(net.n());
  const Matrix& w = net.influence();
  const Matrix w_diag = w.diagonal().asDiagonal();
  const Matrix w_off = w - w_diag;
  const auto lam = params.lambda.asDiagonal();
  const auto phi = params.phi.asDiagonal();
  const Vector resist = Vector::Ones(n) - params.phi;  // 1 - phi

  SystemMatrices sys;
  sys.mode = mode;
  sys.conformity = mode == PublicOpinion::global
                       ? Matrix::Constant(n, n, 1.0 / static_cast<double>(n))
                       : net.conformity();
  sys.P22 = resist.asDiagonal() * sys.conformity;
  sys.P21 = Matrix(phi);
  sys.P11 = lam * (w_diag + w_off * phi);
  sys.P12 = lam * (w_off * sys.P22);
  return sys;
}

enum class Strictness {
  /// lambda, phi in (0,1); R, S positive; rho(P) < 1.
  assumption,
  /// Only nonsingularity and row-stochasticity are required. Used for
  /// configurations with frozen agents (lambda = 0 or phi = 1).
  relaxed,
};

namespace detail {

inline void check_row_stochastic(const Matrix& a, const char* name, double tol) {
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double s = a.row(i).sum();
    if (!(std::abs(s - 1.0) <= tol)) {
      throw NumericalError(std::string(name) + " row " + std::to_string(i) + " sums to " +
                               std::to_string(s) + " (ill-conditioned solve)",
                           static_cast<std::size_t>(i));
    }
  }
}

}  // namespace detail

inline SystemMatrices compute_RS(SystemMatrices sys, const AgentParameters& params,
                                 Strictness strictness = Strictness::assumption) {
  const auto n = static_cast<Eigen::Index>(sys.n());
  params.validate(sys.n());
  if (strictness == Strictness::assumption) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool open = params.lambda[i] > kOpenIntervalMargin &&
                        params.lambda[i] < 1.0 - kOpenIntervalMargin &&
                        params.phi[i] > kOpenIntervalMargin &&
                        params.phi[i] < 1.0 - kOpenIntervalMargin;
      if (!open) {
        throw AssumptionViolation("agent " + std::to_string(i) +
                                  " has lambda or phi outside the open interval (0,1)");
      }
    }
  }
  const Matrix eye = Matrix::Identity(n, n);
  const Vector stubborn = Vector::Ones(n) - params.lambda;
  try {
    sys.S = lu_solve(eye - sys.P22, sys.P21, "I - P22");
    sys.R = lu_solve(eye - sys.P11 - sys.P12 * sys.S, Matrix(stubborn.asDiagonal()),
                     "I - P11 - P12 S");
  } catch (const NumericalError& e) {
    throw AssumptionViolation(std::string("steady state does not exist: ") + e.what());
  }
  constexpr double kPostSolveTolerance = 1e-10;
  detail::check_row_stochastic(sys.S, "S", kPostSolveTolerance);
  detail::check_row_stochastic(sys.R, "R", kPostSolveTolerance);

  sys.rho_P = spectral_radius(sys.full());
  if (strictness == Strictness::assumption) {
    if (!((sys.R.array() > 0.0).all() && (sys.S.array() > 0.0).all())) {
      throw NumericalError("R or S has a non-positive entry");
    }
    if (!(sys.rho_P < 1.0)) {
      throw NumericalError("spectral radius of P is " + std::to_string(sys.rho_P) + ", not < 1");
    }
  }
  return sys;
}

/// Checks the hypotheses eagerly, then assembles P and solves for R and S.
inline SystemMatrices solve_steady_state(const InfluenceNetwork& net,
                                         const AgentParameters& params, PublicOpinion mode) {
  const AssumptionReport report = diagnose_assumptions(net, params);
  if (!report.ok()) throw AssumptionViolation(report.summary());
  return compute_RS(build_P(net, params, mode), params, Strictness::assumption);
}

struct Limits {
  Vector y_star;
  Vector y_hat_star;
};

inline Limits limits(const SystemMatrices& sys, const Vector& y0) {
  if (!sys.completed()) throw InvalidInput("limits need R and S; call compute_RS first");
  if (y0.size() != static_cast<Eigen::Index>(sys.n())) {
    throw InvalidInput("initial opinions have the wrong length");
  }
  Limits out;
  out.y_star = sys.R * y0;
  out.y_hat_star = sys.S * out.y_star;
  return out;
}

/// Consensus value when every agent is maximally susceptible (lambda = 1).
///
/// P is then row-stochastic and irreducible, so l^T x(t) is conserved along
/// x(t) = [y(t); yh(t-1)] for t >= 1, where l is the normalized left Perron
/// vector of P. The first stacked state is x(1) = [W y(0); y(0)].
inline double consensus_value(const InfluenceNetwork& net, const AgentParameters& params,
                              const Vector& y0, PublicOpinion mode) {
  params.validate(net.n());
  const auto n = static_cast<Eigen::Index>(net.n());
  if (y0.size() != n) throw InvalidInput("initial opinions have the wrong length");
  if ((params.lambda.array() != 1.0).any()) {
    throw InvalidInput("consensus value requires lambda_i = 1 for every agent");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(params.phi[i] > kOpenIntervalMargin && params.phi[i] < 1.0 - kOpenIntervalMargin)) {
      throw InvalidInput("consensus value requires phi_i in (0,1)");
    }
  }
  if (!is_primitive(net.influence())) {
    throw InvalidInput("consensus value requires a strongly connected aperiodic network");
  }
  const Vector ell = left_perron_vector(build_P(net, params, mode).full());
  Vector first(2 * n);
  first << net.influence() * y0, y0;
  return ell.dot(first);
}

}  // namespace opdyn
