#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "opdyn/types.hpp"

namespace opdyn {

/// Dense LU with partial pivoting; rejects numerically singular systems.
inline Matrix lu_solve(const Matrix& a, const Matrix& b, const char* what) {
  Eigen::PartialPivLU<Matrix> lu(a);
  const double rcond = lu.rcond();
  if (!(rcond > 1e-14)) {
    throw NumericalError(std::string(what) + " is singular to working precision (rcond=" +
                         std::to_string(rcond) + ")");
  }
  return lu.solve(b);
}

struct SpectralRadiusOptions {
  double rel_tol = 1e-10;
  int max_iterations = 20000;
};

namespace detail {

inline double dense_spectral_radius(const Matrix& a) {
  Eigen::EigenSolver<Matrix> solver(a, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("eigenvalue solver did not converge");
  }
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace detail

/// Largest eigenvalue modulus.
///
/// Nonnegative matrices go through power iteration on A + I, whose Perron root
/// is rho(A) + 1 and which is aperiodic whenever A is irreducible. The
/// Collatz-Wielandt quotients min_i (Ax)_i/x_i <= rho <= max_i (Ax)_i/x_i
/// bracket the answer at every step and give the stopping rule. Matrices with
/// negative entries, or iterations that fail to close the bracket, fall back to
/// a dense Hessenberg-QR eigensolver.
inline double spectral_radius(const Matrix& a, const SpectralRadiusOptions& opt = {}) {
  if (a.rows() == 0 || a.rows() != a.cols()) {
    throw InvalidInput("spectral radius needs a non-empty square matrix");
  }
  if (!a.allFinite()) throw InvalidInput("spectral radius of a non-finite matrix");
  if ((a.array() < 0.0).any()) return detail::dense_spectral_radius(a);

  const Eigen::Index n = a.rows();
  Vector x = Vector::Ones(n);
  for (int it = 0; it < opt.max_iterations; ++it) {
    Vector ax = a * x;
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double q = ax[i] / x[i];
      lo = std::min(lo, q);
      hi = std::max(hi, q);
    }
    if (hi - lo <= opt.rel_tol * hi) return 0.5 * (lo + hi);
    x = ax + x;  // (A + I) x keeps every entry positive
    x /= x.maxCoeff();
  }
  return detail::dense_spectral_radius(a);
}

/// Left eigenvector l of a row-stochastic irreducible matrix, l^T P = l^T,
/// normalized so its entries sum to 1. Solved directly by replacing one
/// equation of (P^T - I) l = 0 with the normalization.
inline Vector left_perron_vector(const Matrix& p) {
  const Eigen::Index n = p.rows();
  Matrix a = p.transpose() - Matrix::Identity(n, n);
  a.row(n - 1).setOnes();
  Vector rhs = Vector::Zero(n);
  rhs[n - 1] = 1.0;
  return lu_solve(a, rhs, "left Perron system");
}

}  // namespace opdyn
