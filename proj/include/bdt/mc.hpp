#pragma once

// Path simulation of decision trees and rare-event estimation.
//
// Paths are kept in the native representation: at grid time t only the
// P_{i(t)} distinct components are stored; branch gamma reads component
// gamma mod P_{i(t)}. Stored values are B(t), i.e. the path without start
// level or drift; events compare x + B(t) - ct with the level u.

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "bdt/rng.hpp"
#include "bdt/tree.hpp"

namespace bdt {

struct GridConfig {
  /// Largest step outside the near-horizon window.
  double h = 0.01;
  /// Length of the refined window [T - window/u^2, T].
  double window = 16.0;
  /// Step inside the window, in units of 1/u^2.
  double fine_step = 1.0 / 16.0;
  /// AllBranch and Diameter: bisections of a step by Brownian-bridge midpoints
  /// when the event is within reach on that step (0 = grid points only).
  int bridge_depth = 6;
};

class TimeGrid {
 public:
  /// Grid with every branching time and T, steps <= h, refined near T for level u.
  static TimeGrid build(const TreeSpec& spec, double u, const GridConfig& config);
  /// Grid with every branching time and T and steps <= h.
  static TimeGrid uniform(const TreeSpec& spec, double h);

  const std::vector<double>& times() const noexcept { return times_; }
  std::size_t points() const noexcept { return times_.size(); }
  std::size_t steps() const noexcept { return times_.size() - 1; }
  double operator[](std::size_t k) const { return times_[k]; }

 private:
  static TimeGrid from_breakpoints(std::vector<double> breaks, double window_start, double h,
                                   double fine);
  std::vector<double> times_;
};

/// One simulated tree path on a grid.
class TreePath {
 public:
  TreePath() = default;
  TreePath(const TreeSpec& spec, const TimeGrid& grid);

  std::size_t points() const noexcept { return offsets_.size(); }
  double time(std::size_t k) const { return times_[k]; }
  /// Native components at grid point k.
  Eigen::Map<const Eigen::VectorXd> native(std::size_t k) const {
    return {values_.data() + offsets_[k], dims_[k]};
  }
  Eigen::Map<Eigen::VectorXd> native(std::size_t k) {
    return {values_.data() + offsets_[k], dims_[k]};
  }
  double branch(BranchIndex gamma, std::size_t k) const {
    return values_[offsets_[k] + static_cast<std::size_t>(gamma % dims_[k])];
  }
  std::int64_t branch_count() const noexcept { return branches_; }
  /// Rows are grid times, columns are all P_eta branches.
  Eigen::MatrixXd full() const;

 private:
  std::vector<double> times_;
  std::vector<std::size_t> offsets_;
  std::vector<Eigen::Index> dims_;
  std::vector<double> values_;
  std::int64_t branches_ = 1;
};

enum class EventKind { SingleBranch, Diameter, AllBranch, EndpointOrthant, ForestAny };

std::string_view to_string(EventKind kind) noexcept;
EventKind event_kind_from_string(std::string_view id);

struct EventSpec {
  EventKind kind = EventKind::AllBranch;
  double u = 0.0;
  /// Restricts SingleBranch to one designated branch.
  std::optional<BranchIndex> branch;
};

enum class Estimator { Crude, Tilted };
std::string_view to_string(Estimator e) noexcept;

struct McEstimate {
  double p = 0.0;
  double std_error = 0.0;
  std::uint64_t n = 0;
  Estimator estimator = Estimator::Crude;
  std::uint64_t seed = 0;
};

struct McConfig {
  std::uint64_t n = 100000;
  std::uint64_t seed = 1;
  GridConfig grid;
  std::uint64_t batch_size = 4096;
  unsigned threads = 0;
};

/// Draws one path with the exact finite-dimensional law on the grid.
TreePath sample_path(const TreeSpec& spec, const TimeGrid& grid, Philox4x32& rng);

/// Conditional probability of the event given the grid values: a Brownian
/// bridge crossing correction for SingleBranch, a 0/1 indicator otherwise.
double detect_probability(const TreePath& path, const TreeSpec& spec, const EventSpec& event);

/// As above, but AllBranch and Diameter also look at Brownian-bridge midpoints
/// drawn from rng, bisecting a step up to `depth` times wherever the event is
/// within five bridge standard deviations.
double detect_probability(const TreePath& path, const TreeSpec& spec, const EventSpec& event,
                          int depth, Philox4x32& rng);

/// Indicator of the event; SingleBranch draws the bridge crossing from rng.
bool detect(const TreePath& path, const TreeSpec& spec, const EventSpec& event, Philox4x32& rng);

/// First grid time at which every branch exceeds the level.
std::optional<double> first_all_branch_time(const TreePath& path, const TreeSpec& spec, double u);
/// The same on the path refined by bridge bisection.
std::optional<double> first_all_branch_time(const TreePath& path, const TreeSpec& spec, double u,
                                            int depth, Philox4x32& rng);

/// Crude Monte Carlo. SingleBranch averages the bridge-corrected conditional
/// crossing probability, every other event the grid indicator.
McEstimate estimate(const TreeSpec& spec, const EventSpec& event, const McConfig& config);

/// Importance sampling under a Gaussian mean shift. AllBranch and
/// EndpointOrthant shift every independent component so that E W(T) = u 1;
/// SingleBranch shifts one branch to E W_gamma(T) = u, for a designated branch
/// or for a uniformly chosen one (mixture over all branches).
McEstimate estimate_tilted(const TreeSpec& spec, const EventSpec& event, const McConfig& config);

struct TailPoint {
  double x = 0.0;
  double tail = 0.0;
  double std_error = 0.0;
};

/// Estimates P{u^2 (T - first passage) >= x | first passage <= T - y/u^2} for
/// the all-branch event under the all-branch tilt.
std::vector<TailPoint> estimate_ruintime_tail(const TreeSpec& spec, double u, double y,
                                              const std::vector<double>& xs,
                                              const McConfig& config);

/// P{X1 > h, X2 > h} for a standard bivariate normal with correlation rho.
double exact_bivariate_orthant(double rho, double h);

/// Classical branching Brownian motion (binary splits, Exp(1) clocks per
/// particle): probability that at some t <= T every living particle exceeds
/// u + ct. The single-particle phase is bridge corrected; later phases use
/// the grid of step h.
McEstimate estimate_classical_bbm(double u, double c, double T, double h, const McConfig& config);

namespace detail {

/// Per-stage drift of every native component under a mean shift.
using StageDrifts = std::vector<Eigen::VectorXd>;

/// Simulates a path under the given drifts and returns log(dP/dQ).
double simulate_tilted(const TreeSpec& spec, const TimeGrid& grid, const StageDrifts& drifts,
                       Philox4x32& rng, TreePath& path);

/// log(dQ/dP) of a path already simulated, for the measure Q with the given drifts.
double log_tilt_ratio(const TreeSpec& spec, const TimeGrid& grid, const StageDrifts& drifts,
                      const TreePath& path);

/// Drifts making the terminal mean of every branch equal to `target`.
StageDrifts all_branch_drifts(const TreeSpec& spec, double target);

/// Drifts moving only the components on branch gamma, terminal mean `target`.
StageDrifts single_branch_drifts(const TreeSpec& spec, BranchIndex gamma, double target);

}  // namespace detail

}  // namespace bdt
