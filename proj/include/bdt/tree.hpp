#pragma once

// Brownian decision tree: branch indexing, separation moments, the covariance
// matrix of the live branches and its closed-form spectrum.

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "bdt/error.hpp"

namespace bdt {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using BranchIndex = std::int64_t;

/// Unvalidated tree parameters as read from input.
struct RawTreeSpec {
  std::vector<double> tau;
  std::vector<std::int64_t> N;
  double c = 0.0;
  double x = 0.0;
  double T = 1.0;
};

/// A validated decision tree. Branching points with a single offspring are
/// dropped on construction, so every stored N_i is at least 2.
class TreeSpec {
 public:
  static TreeSpec validate(const RawTreeSpec& raw);
  static TreeSpec single_branch(double T, double c = 0.0, double x = 0.0);

  int eta() const noexcept { return static_cast<int>(tau_.size()); }
  /// tau(0) == 0; tau(i) for i = 1..eta are the branching times.
  double tau(int i) const { return i == 0 ? 0.0 : tau_[static_cast<std::size_t>(i - 1)]; }
  /// N(i) for i = 1..eta.
  std::int64_t N(int i) const { return N_[static_cast<std::size_t>(i - 1)]; }
  /// Cumulative branch counts, P(0) == 1.
  std::int64_t P(int i) const { return P_[static_cast<std::size_t>(i)]; }
  std::int64_t branch_count() const noexcept { return P_.back(); }

  const std::vector<double>& branching_times() const noexcept { return tau_; }
  const std::vector<std::int64_t>& offspring() const noexcept { return N_; }

  double c() const noexcept { return c_; }
  double x() const noexcept { return x_; }
  double horizon() const noexcept { return T_; }

  /// Number of branching points strictly before t; 0 for t <= tau_1.
  int stage(double t) const noexcept;

  RawTreeSpec raw() const;
  TreeSpec with_drift(double c) const;
  TreeSpec with_start(double x) const;

  friend bool operator==(const TreeSpec&, const TreeSpec&) = default;

 private:
  TreeSpec() = default;

  std::vector<double> tau_;
  std::vector<std::int64_t> N_;
  std::vector<std::int64_t> P_{1};
  double c_ = 0.0;
  double x_ = 0.0;
  double T_ = 1.0;
};

/// Mixed-radix digits a_1..a_eta with gamma = sum a_i P_{i-1}.
std::vector<std::int64_t> digits(BranchIndex gamma, const TreeSpec& spec);

/// First branching index at which the two branches live in different components.
int separation_moment(BranchIndex gamma1, BranchIndex gamma2, const TreeSpec& spec);

double covariance(BranchIndex gamma1, double t1, BranchIndex gamma2, double t2,
                  const TreeSpec& spec);

/// The digit-swap permutation: exchanges digit values b and c at position j.
BranchIndex digit_swap(BranchIndex gamma, int j, std::int64_t b, std::int64_t c,
                       const TreeSpec& spec);

/// Covariance matrix of the P_{i(t)} live components at time t, assembled by
/// the block recursion Sigma(t) = [Sigma(tau_i)]_{N_i x N_i} + (t - tau_i) I.
template <typename Scalar = double>
MatrixX<Scalar> sigma_matrix(double t, const TreeSpec& spec) {
  if (!(t > 0.0) || t > spec.horizon()) {
    throw Error(ErrorCode::BadArguments, "sigma_matrix requires t in (0, T]");
  }
  const int top = spec.stage(t);
  MatrixX<Scalar> sigma = MatrixX<Scalar>::Constant(1, 1, Scalar(top == 0 ? t : spec.tau(1)));
  for (int k = 1; k <= top; ++k) {
    const Eigen::Index reps = spec.N(k);
    const Eigen::Index block = sigma.rows();
    const double end = (k == top) ? t : spec.tau(k + 1);
    MatrixX<Scalar> next(block * reps, block * reps);
    for (Eigen::Index a = 0; a < reps; ++a) {
      for (Eigen::Index b = 0; b < reps; ++b) {
        next.block(a * block, b * block, block, block) = sigma;
      }
    }
    next.diagonal().array() += Scalar(end - spec.tau(k));
    sigma = std::move(next);
  }
  return sigma;
}

struct EigenPair {
  double mu;
  std::int64_t multiplicity;
};

/// Distinct eigenvalues of Sigma(t), mu_0 first.
struct Eigenstructure {
  double t = 0.0;
  std::vector<EigenPair> pairs;

  double top() const { return pairs.front().mu; }
  std::int64_t dimension() const;
  double trace() const;
  double log_determinant() const;
};

Eigenstructure eigenstructure(double t, const TreeSpec& spec);

}  // namespace bdt
