#pragma once

// Monte Carlo estimation of the Pickands-type constants entering the
// all-branch asymptotics. The x-integral is never sampled: for each simulated
// path it is computed exactly as the e^{sum x}-measure of a union of
// lower-left orthants (the "staircase" below the path).

#include <cstdint>
#include <limits>

#include <Eigen/Dense>

namespace bdt {

struct PickandsEstimate {
  std::int64_t N = 1;
  double lambda = 1.0;
  /// Horizon in the time units of the process with scale lambda.
  double L = 0.0;
  bool infinite_horizon = false;
  double value = 0.0;
  double std_error = 0.0;
  std::uint64_t n = 0;
  /// Change of the estimate under one step halving (NaN when not measured).
  double step_halving_delta = std::numeric_limits<double>::quiet_NaN();

  /// The one-dimensional constant, equal to 2 for every lambda.
  static PickandsEstimate exact_one_dimensional(double lambda);
};

struct PickandsConfig {
  std::uint64_t n = 20000;
  std::uint64_t seed = 1;
  /// Grid points per path for estimate_H_L / estimate_H_drift.
  std::size_t steps = 1024;
  std::size_t antichain_cap = 512;
  std::uint64_t batch_size = 1024;
  unsigned threads = 0;
  /// Draw the exact Brownian-bridge maximum between grid points when N == 1.
  bool exact_bridge_max = true;
  /// estimate_H_L samples under the drift lambda per coordinate and reweights
  /// by the exact likelihood ratio; plain sampling has variance growing like e^{L N lambda^2}.
  bool tilt_driftless = true;

  // estimate_H only
  /// Initial truncation horizon, in units of 1/lambda^2.
  double initial_horizon = 8.0;
  double tol = 1.0;
  int max_doublings = 6;
  bool measure_step_halving = true;
};

/// e^{sum x}-measure of the union of orthants {x < y_k} over the columns y_k.
double staircase_measure(const Eigen::Ref<const Eigen::MatrixXd>& points,
                         std::size_t antichain_cap = 512);

/// Columns of `points` that are not dominated by another column.
Eigen::MatrixXd pareto_frontier(const Eigen::Ref<const Eigen::MatrixXd>& points);

/// H(L) = e^{-L N lambda^2 / 2} E[staircase(lambda B(t), t in [0, L])].
PickandsEstimate estimate_H_L(std::int64_t N, double lambda, double L, const PickandsConfig& config);

/// E[staircase(lambda B(t) - lambda^2 t, t in [0, L_trunc])].
PickandsEstimate estimate_H_drift(std::int64_t N, double lambda, double L_trunc,
                                  const PickandsConfig& config);

/// Doubles the truncation horizon of estimate_H_drift (common random numbers,
/// fixed step) until successive values differ by less than tol standard errors.
PickandsEstimate estimate_H(std::int64_t N, double lambda, const PickandsConfig& config);

}  // namespace bdt
