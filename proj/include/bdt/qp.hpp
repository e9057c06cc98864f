#pragma once

// The quadratic programme  minimise x^T Sigma^{-1} x  subject to x >= a.
//
// Solved through its dual, min lambda^T Sigma lambda - 2 a^T lambda over
// lambda >= 0, whose solution gives a~ = Sigma lambda and the active set
// I = {lambda_i > 0}. Indices are 0-based.

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "bdt/error.hpp"
#include "bdt/tree.hpp"

namespace bdt {

template <typename Scalar = double>
struct QPSolution {
  VectorX<Scalar> a_tilde;
  std::vector<Eigen::Index> I;
  std::vector<Eigen::Index> J;
  VectorX<Scalar> lambda;
  Scalar value = 0;
};

struct QPConfig {
  /// Multipliers at or below this (relative) level are treated as zero.
  double tie_tol = 1e-12;
  int max_iterations = 1000;
};

namespace detail {

template <typename Scalar>
MatrixX<Scalar> principal(const MatrixX<Scalar>& m, const std::vector<Eigen::Index>& idx) {
  return m(idx, idx);
}

template <typename Scalar>
VectorX<Scalar> restrict(const VectorX<Scalar>& v, const std::vector<Eigen::Index>& idx) {
  return v(idx);
}

// Solves Sigma_PP s = a_P; returns false if the block is not positive definite.
template <typename Scalar>
bool solve_block(const MatrixX<Scalar>& sigma, const VectorX<Scalar>& a,
                 const std::vector<Eigen::Index>& P, VectorX<Scalar>& s) {
  const Eigen::LLT<MatrixX<Scalar>> llt(principal(sigma, P));
  if (llt.info() != Eigen::Success) return false;
  s = llt.solve(restrict(a, P));
  return true;
}

template <typename Scalar>
QPSolution<Scalar> assemble(const MatrixX<Scalar>& sigma, const VectorX<Scalar>& lambda,
                            double tol) {
  QPSolution<Scalar> sol;
  sol.lambda = lambda;
  const Scalar scale = std::max(Scalar(1), lambda.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda[i] > Scalar(tol) * scale) {
      sol.I.push_back(i);
    } else {
      sol.lambda[i] = 0;
      sol.J.push_back(i);
    }
  }
  sol.a_tilde = sigma * sol.lambda;
  sol.value = sol.lambda.dot(sol.a_tilde);
  return sol;
}

}  // namespace detail

/// Unique minimiser of x^T Sigma^{-1} x over x >= a. Tries the full active set
/// first; otherwise runs a Lawson-Hanson active-set iteration on the dual.
template <typename Scalar>
QPSolution<Scalar> solve(const MatrixX<Scalar>& sigma, const VectorX<Scalar>& a,
                         const QPConfig& config = {}) {
  const Eigen::Index d = a.size();
  if (sigma.rows() != d || sigma.cols() != d || d == 0) {
    throw Error(ErrorCode::BadArguments, "Sigma must be square and match a");
  }
  if (!sigma.isApprox(sigma.transpose(), Scalar(1e-12))) {
    throw Error(ErrorCode::NotPositiveDefinite, "Sigma is not symmetric");
  }
  const Eigen::LLT<MatrixX<Scalar>> llt(sigma);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::NotPositiveDefinite, "Cholesky factorisation failed");
  }
  if ((a.array() <= Scalar(0)).all()) {
    throw Error(ErrorCode::AllNonpositiveConstraint, "a has no positive coordinate");
  }

  const VectorX<Scalar> full = llt.solve(a);
  const Scalar scale = std::max(Scalar(1), full.cwiseAbs().maxCoeff());
  if ((full.array() > Scalar(config.tie_tol) * scale).all()) {
    return detail::assemble(sigma, full, config.tie_tol);
  }

  VectorX<Scalar> lambda = VectorX<Scalar>::Zero(d);
  std::vector<bool> passive(static_cast<std::size_t>(d), false);
  const Scalar grad_tol = Scalar(1e-13) * std::max(Scalar(1), a.cwiseAbs().maxCoeff());
  for (int outer = 0; outer < config.max_iterations; ++outer) {
    const VectorX<Scalar> w = a - sigma * lambda;
    Eigen::Index pick = -1;
    for (Eigen::Index i = 0; i < d; ++i) {
      if (!passive[static_cast<std::size_t>(i)] && w[i] > grad_tol && (pick < 0 || w[i] > w[pick])) {
        pick = i;
      }
    }
    if (pick < 0) return detail::assemble(sigma, lambda, config.tie_tol);
    passive[static_cast<std::size_t>(pick)] = true;

    for (int inner = 0; inner < config.max_iterations; ++inner) {
      std::vector<Eigen::Index> P;
      for (Eigen::Index i = 0; i < d; ++i) {
        if (passive[static_cast<std::size_t>(i)]) P.push_back(i);
      }
      VectorX<Scalar> s_P;
      if (!detail::solve_block(sigma, a, P, s_P)) {
        throw Error(ErrorCode::NotPositiveDefinite, "principal block lost definiteness");
      }
      VectorX<Scalar> s = VectorX<Scalar>::Zero(d);
      s(P) = s_P;
      if ((s_P.array() > Scalar(0)).all()) {
        lambda = s;
        break;
      }
      // step back towards the feasible region; the blocking index leaves P
      Scalar alpha = 1;
      Eigen::Index blocking = -1;
      for (const Eigen::Index i : P) {
        if (s[i] > Scalar(0)) continue;
        const Scalar step = lambda[i] / (lambda[i] - s[i]);
        if (blocking < 0 || step < alpha) {
          alpha = step;
          blocking = i;
        }
      }
      lambda += alpha * (s - lambda);
      lambda[blocking] = 0;
      for (const Eigen::Index i : P) {
        if (lambda[i] <= Scalar(0)) {
          lambda[i] = 0;
          passive[static_cast<std::size_t>(i)] = false;
        }
      }
    }
  }
  throw Error(ErrorCode::NoConvergence, "active-set iteration did not terminate");
}

struct QPCheck {
  bool active_equal = false;     // a~_I = a_I, a_I != 0
  bool feasible = false;         // a~_J >= a_J
  bool multipliers = false;      // lambda_I > 0, lambda_J = 0
  bool stationary = false;       // a~ = Sigma lambda
  bool value_identity = false;   // a~' S^-1 a~ = a' S^-1 a~ = a_I' S_II^-1 a_I > 0

  bool all() const { return active_equal && feasible && multipliers && stationary && value_identity; }
};

/// Checks the optimality conditions of a candidate solution to tolerance tol.
template <typename Scalar>
QPCheck verify(const MatrixX<Scalar>& sigma, const VectorX<Scalar>& a,
               const QPSolution<Scalar>& sol, double tol = 1e-9) {
  QPCheck check;
  const Eigen::Index d = a.size();
  if (sol.a_tilde.size() != d || sol.lambda.size() != d || sol.I.empty() ||
      static_cast<Eigen::Index>(sol.I.size() + sol.J.size()) != d) {
    return check;
  }
  const Scalar t = Scalar(tol);
  const auto rel = [t](Scalar x, Scalar y) {
    return std::abs(x - y) <= t * std::max(Scalar(1), std::max(std::abs(x), std::abs(y)));
  };

  check.active_equal = std::all_of(sol.I.begin(), sol.I.end(), [&](Eigen::Index i) {
    return rel(sol.a_tilde[i], a[i]);
  }) && sol.a_tilde(sol.I).cwiseAbs().maxCoeff() > Scalar(0);
  check.feasible = std::all_of(sol.J.begin(), sol.J.end(),
                               [&](Eigen::Index j) { return sol.a_tilde[j] >= a[j] - t; });
  check.multipliers =
      std::all_of(sol.I.begin(), sol.I.end(), [&](Eigen::Index i) { return sol.lambda[i] > 0; }) &&
      std::all_of(sol.J.begin(), sol.J.end(),
                  [&](Eigen::Index j) { return std::abs(sol.lambda[j]) <= t; });
  check.stationary = (sigma * sol.lambda - sol.a_tilde).cwiseAbs().maxCoeff() <=
                     t * std::max(Scalar(1), sol.a_tilde.cwiseAbs().maxCoeff());

  const Eigen::LLT<MatrixX<Scalar>> llt(sigma);
  const Eigen::LLT<MatrixX<Scalar>> block(detail::principal(sigma, sol.I));
  if (llt.info() == Eigen::Success && block.info() == Eigen::Success) {
    const VectorX<Scalar> inv_at = llt.solve(sol.a_tilde);
    const VectorX<Scalar> aI = detail::restrict(a, sol.I);
    const Scalar q1 = sol.a_tilde.dot(inv_at);
    const Scalar q2 = a.dot(inv_at);
    const Scalar q3 = aI.dot(block.solve(aI));
    check.value_identity = rel(q1, q2) && rel(q1, q3) && rel(q1, sol.value) && q3 > Scalar(0);
  }
  return check;
}

}  // namespace bdt
