#include "bdt/pickands.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <boost/random/normal_distribution.hpp>

#include "bdt/error.hpp"
#include "bdt/parallel.hpp"
#include "bdt/rng.hpp"

namespace bdt {

PickandsEstimate PickandsEstimate::exact_one_dimensional(double lambda) {
  PickandsEstimate h;
  h.N = 1;
  h.lambda = lambda;
  h.L = std::numeric_limits<double>::infinity();
  h.infinite_horizon = true;
  h.value = 2.0;
  return h;
}

Eigen::MatrixXd pareto_frontier(const Eigen::Ref<const Eigen::MatrixXd>& points) {
  const Eigen::Index cols = points.cols();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(cols));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const Eigen::VectorXd sums = points.colwise().sum().transpose();
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return sums(a) > sums(b); });

  std::vector<Eigen::Index> kept;
  for (const Eigen::Index k : order) {
    const bool dominated = std::any_of(kept.begin(), kept.end(), [&](Eigen::Index j) {
      return (points.col(k).array() <= points.col(j).array()).all();
    });
    if (!dominated) kept.push_back(k);
  }
  Eigen::MatrixXd out(points.rows(), static_cast<Eigen::Index>(kept.size()));
  for (std::size_t i = 0; i < kept.size(); ++i) {
    out.col(static_cast<Eigen::Index>(i)) = points.col(kept[i]);
  }
  return out;
}

namespace {

// Measure of the union of orthants below an antichain whose coordinates are
// all <= 0. Slices along the last coordinate: between consecutive values of
// that coordinate the active set is a prefix of the points sorted by it.
double union_measure(std::vector<std::vector<double>> pts, std::size_t dim) {
  if (pts.empty()) return 0.0;
  if (dim == 1) {
    double m = -std::numeric_limits<double>::infinity();
    for (const auto& p : pts) m = std::max(m, p[0]);
    return std::exp(m);
  }
  std::sort(pts.begin(), pts.end(),
            [dim](const auto& a, const auto& b) { return a[dim - 1] > b[dim - 1]; });
  if (dim == 2) {
    // descending in y2 means a staircase only if y1 increases; dominated
    // points are skipped by the running maximum of y1
    double total = 0.0;
    double best1 = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < pts.size(); ++k) {
      best1 = std::max(best1, pts[k][0]);
      const double next2 = k + 1 < pts.size() ? std::exp(pts[k + 1][1]) : 0.0;
      total += std::exp(best1) * (std::exp(pts[k][1]) - next2);
    }
    return total;
  }
  double total = 0.0;
  std::vector<std::vector<double>> active;
  active.reserve(pts.size());
  for (std::size_t k = 0; k < pts.size(); ++k) {
    active.push_back(pts[k]);
    const double next = k + 1 < pts.size() ? std::exp(pts[k + 1][dim - 1]) : 0.0;
    const double width = std::exp(pts[k][dim - 1]) - next;
    if (width > 0.0) total += union_measure(active, dim - 1) * width;
  }
  return total;
}

double log_staircase(const Eigen::Ref<const Eigen::MatrixXd>& points, std::size_t cap) {
  if (points.cols() == 0 || points.rows() == 0) {
    throw Error(ErrorCode::BadArguments, "staircase_measure needs at least one point");
  }
  const Eigen::VectorXd shift = points.rowwise().maxCoeff();
  const double log_shift = shift.sum();
  const auto dim = static_cast<std::size_t>(points.rows());
  if (dim == 1) return log_shift;

  const Eigen::MatrixXd front = pareto_frontier(points);
  if (static_cast<std::size_t>(front.cols()) > cap) {
    throw Error(ErrorCode::AntichainTooLarge, "Pareto frontier has " +
                                                  std::to_string(front.cols()) +
                                                  " points, cap is " + std::to_string(cap));
  }
  std::vector<std::vector<double>> pts(static_cast<std::size_t>(front.cols()),
                                       std::vector<double>(dim));
  for (Eigen::Index k = 0; k < front.cols(); ++k) {
    for (std::size_t i = 0; i < dim; ++i) {
      pts[static_cast<std::size_t>(k)][i] = front(static_cast<Eigen::Index>(i), k) -
                                            shift(static_cast<Eigen::Index>(i));
    }
  }
  return log_shift + std::log(union_measure(std::move(pts), dim));
}

enum class PathKind { Driftless, DriftlessTilted, Drifted };

// log of the staircase measure for one simulated path of lambda B(t) (minus
// lambda^2 t when drifted) on a uniform grid of `steps` steps over [0, L].
// DriftlessTilted samples lambda B(t) + lambda^2 t instead and adds the log
// likelihood ratio -lambda sum B_i(L) + N lambda^2 L / 2 of the driftless law;
// its second term cancels the prefactor e^{-L N lambda^2 / 2}.
double log_path_functional(std::int64_t N, double lambda, double L, std::size_t steps,
                           PathKind kind, const PickandsConfig& config, Philox4x32& rng) {
  const double dt = L / static_cast<double>(steps);
  const double sd = lambda * std::sqrt(dt);
  double drift = 0.0;
  if (kind == PathKind::Drifted) drift = lambda * lambda * dt;
  if (kind == PathKind::DriftlessTilted) drift = -lambda * lambda * dt;
  boost::random::normal_distribution<double> normal;

  if (N == 1) {
    double level = 0.0;
    double best = 0.0;
    for (std::size_t k = 0; k < steps; ++k) {
      const double next = level + sd * normal(rng) - drift;
      if (config.exact_bridge_max) {
        // maximum of a Brownian bridge from level to next with variance sd^2
        const double diff = next - level;
        const double top =
            0.5 * (level + next + std::sqrt(diff * diff - 2.0 * sd * sd * std::log(rng.uniform())));
        best = std::max(best, top);
      } else {
        best = std::max(best, next);
      }
      level = next;
    }
    return kind == PathKind::DriftlessTilted ? best - level : best;
  }

  Eigen::MatrixXd points(N, static_cast<Eigen::Index>(steps) + 1);
  points.col(0).setZero();
  for (std::size_t k = 1; k <= steps; ++k) {
    const auto col = static_cast<Eigen::Index>(k);
    for (Eigen::Index i = 0; i < N; ++i) {
      points(i, col) = points(i, col - 1) + sd * normal(rng) - drift;
    }
  }
  const double log_s = log_staircase(points, config.antichain_cap);
  if (kind != PathKind::DriftlessTilted) return log_s;
  return log_s - points.col(static_cast<Eigen::Index>(steps)).sum();
}

void check_arguments(std::int64_t N, double lambda, double L) {
  if (N < 1 || !(lambda > 0.0) || !(L > 0.0) || !std::isfinite(L)) {
    throw Error(ErrorCode::BadArguments, "need N >= 1, lambda > 0 and finite L > 0");
  }
}

PickandsEstimate run_estimate(std::int64_t N, double lambda, double L, std::size_t steps,
                              PathKind kind, const PickandsConfig& config) {
  if (config.n < 1 || steps < 1) {
    throw Error(ErrorCode::BadArguments, "need n >= 1 and steps >= 1");
  }
  const double log_prefactor =
      kind == PathKind::Driftless ? -0.5 * L * static_cast<double>(N) * lambda * lambda : 0.0;
  const auto acc = run_batches<MeanAccumulator>(
      config.n, config.batch_size, config.threads, [&](std::uint64_t batch, std::uint64_t count) {
        MeanAccumulator local;
        for (std::uint64_t k = 0; k < count; ++k) {
          Philox4x32 rng(config.seed, batch * config.batch_size + k);
          local.add(std::exp(log_prefactor +
                             log_path_functional(N, lambda, L, steps, kind, config, rng)));
        }
        return local;
      });
  PickandsEstimate est;
  est.N = N;
  est.lambda = lambda;
  est.L = L;
  est.value = acc.mean();
  est.std_error = acc.std_error();
  est.n = acc.n;
  return est;
}

}  // namespace

double staircase_measure(const Eigen::Ref<const Eigen::MatrixXd>& points,
                         std::size_t antichain_cap) {
  return std::exp(log_staircase(points, antichain_cap));
}

PickandsEstimate estimate_H_L(std::int64_t N, double lambda, double L,
                              const PickandsConfig& config) {
  check_arguments(N, lambda, L);
  return run_estimate(N, lambda, L, config.steps,
                      config.tilt_driftless ? PathKind::DriftlessTilted : PathKind::Driftless,
                      config);
}

PickandsEstimate estimate_H_drift(std::int64_t N, double lambda, double L_trunc,
                                  const PickandsConfig& config) {
  check_arguments(N, lambda, L_trunc);
  return run_estimate(N, lambda, L_trunc, config.steps, PathKind::Drifted, config);
}

PickandsEstimate estimate_H(std::int64_t N, double lambda, const PickandsConfig& config) {
  check_arguments(N, lambda, 1.0);
  const double L0 = config.initial_horizon / (lambda * lambda);
  std::size_t steps = config.steps;
  PickandsEstimate prev = run_estimate(N, lambda, L0, steps, PathKind::Drifted, config);
  for (int d = 1; d <= config.max_doublings; ++d) {
    steps *= 2;
    PickandsEstimate next = run_estimate(N, lambda, prev.L * 2.0, steps, PathKind::Drifted, config);
    const double joint = std::hypot(prev.std_error, next.std_error);
    if (std::abs(next.value - prev.value) < config.tol * joint) {
      next.infinite_horizon = true;
      if (config.measure_step_halving) {
        const PickandsEstimate fine =
            run_estimate(N, lambda, next.L, steps * 2, PathKind::Drifted, config);
        next.step_halving_delta = fine.value - next.value;
      }
      return next;
    }
    prev = std::move(next);
  }
  throw Error(ErrorCode::NoConvergence,
              "truncation horizon did not stabilise after " +
                  std::to_string(config.max_doublings) + " doublings");
}

}  // namespace bdt
