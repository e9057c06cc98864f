#include "bdt/mc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/random/normal_distribution.hpp>

#include "bdt/error.hpp"
#include "bdt/normal.hpp"
#include "bdt/parallel.hpp"

namespace bdt {

// --- grid -------------------------------------------------------------------

TimeGrid TimeGrid::from_breakpoints(std::vector<double> breaks, double window_start, double h,
                                    double fine) {
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  TimeGrid grid;
  grid.times_.push_back(breaks.front());
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double a = breaks[i];
    const double b = breaks[i + 1];
    const double cap = a >= window_start ? fine : h;
    const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil((b - a) / cap - 1e-9)));
    for (std::size_t k = 1; k < n; ++k) {
      grid.times_.push_back(a + (b - a) * static_cast<double>(k) / static_cast<double>(n));
    }
    grid.times_.push_back(b);
  }
  return grid;
}

TimeGrid TimeGrid::build(const TreeSpec& spec, double u, const GridConfig& config) {
  if (!(config.h > 0.0) || !(config.fine_step > 0.0) || config.window < 0.0) {
    throw Error(ErrorCode::BadArguments, "grid steps must be positive");
  }
  const double T = spec.horizon();
  std::vector<double> breaks{0.0, T};
  breaks.insert(breaks.end(), spec.branching_times().begin(), spec.branching_times().end());
  double window_start = std::numeric_limits<double>::infinity();
  double fine = config.h;
  if (u > 0.0 && config.window > 0.0) {
    window_start = std::max(0.0, T - config.window / (u * u));
    fine = std::min(config.h, config.fine_step / (u * u));
    breaks.push_back(window_start);
  }
  return from_breakpoints(std::move(breaks), window_start, config.h, fine);
}

TimeGrid TimeGrid::uniform(const TreeSpec& spec, double h) {
  return build(spec, 0.0, GridConfig{h, 0.0, h});
}

// --- paths ------------------------------------------------------------------

TreePath::TreePath(const TreeSpec& spec, const TimeGrid& grid)
    : times_(grid.times()), branches_(spec.branch_count()) {
  offsets_.reserve(times_.size());
  dims_.reserve(times_.size());
  std::size_t offset = 0;
  for (const double t : times_) {
    offsets_.push_back(offset);
    const auto d = static_cast<Eigen::Index>(spec.P(spec.stage(t)));
    dims_.push_back(d);
    offset += static_cast<std::size_t>(d);
  }
  values_.assign(offset, 0.0);
}

Eigen::MatrixXd TreePath::full() const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(points()), branches_);
  for (std::size_t k = 0; k < points(); ++k) {
    for (BranchIndex g = 0; g < branches_; ++g) {
      out(static_cast<Eigen::Index>(k), g) = branch(g, k);
    }
  }
  return out;
}

std::string_view to_string(EventKind kind) noexcept {
  switch (kind) {
    case EventKind::SingleBranch: return "single";
    case EventKind::Diameter: return "diameter";
    case EventKind::AllBranch: return "all";
    case EventKind::EndpointOrthant: return "endpoint";
    case EventKind::ForestAny: return "forest";
  }
  return "unknown";
}

EventKind event_kind_from_string(std::string_view id) {
  for (const auto kind : {EventKind::SingleBranch, EventKind::Diameter, EventKind::AllBranch,
                          EventKind::EndpointOrthant, EventKind::ForestAny}) {
    if (to_string(kind) == id) return kind;
  }
  throw Error(ErrorCode::BadArguments, "unknown event '" + std::string(id) + "'");
}

std::string_view to_string(Estimator e) noexcept {
  return e == Estimator::Crude ? "crude" : "tilted";
}

namespace detail {

double simulate_tilted(const TreeSpec& spec, const TimeGrid& grid, const StageDrifts& drifts,
                       Philox4x32& rng, TreePath& path) {
  boost::random::normal_distribution<double> normal;
  double log_lr = 0.0;
  path.native(0).setZero();
  for (std::size_t k = 0; k + 1 < grid.points(); ++k) {
    const double dt = grid[k + 1] - grid[k];
    const double sd = std::sqrt(dt);
    const int s = spec.stage(grid[k + 1]);
    const auto prev = path.native(k);
    auto cur = path.native(k + 1);
    const Eigen::Index d_prev = prev.size();
    if (drifts.empty()) {
      for (Eigen::Index j = 0; j < cur.size(); ++j) {
        cur[j] = prev[j % d_prev] + sd * normal(rng);
      }
      continue;
    }
    const Eigen::VectorXd& theta = drifts[static_cast<std::size_t>(s)];
    for (Eigen::Index j = 0; j < cur.size(); ++j) {
      const double inc = theta[j] * dt + sd * normal(rng);
      cur[j] = prev[j % d_prev] + inc;
      if (theta[j] != 0.0) log_lr += -theta[j] * inc + 0.5 * theta[j] * theta[j] * dt;
    }
  }
  return log_lr;
}

double log_tilt_ratio(const TreeSpec& spec, const TimeGrid& grid, const StageDrifts& drifts,
                      const TreePath& path) {
  double out = 0.0;
  for (std::size_t k = 0; k + 1 < grid.points(); ++k) {
    const double dt = grid[k + 1] - grid[k];
    const Eigen::VectorXd& theta = drifts[static_cast<std::size_t>(spec.stage(grid[k + 1]))];
    const auto prev = path.native(k);
    const auto cur = path.native(k + 1);
    for (Eigen::Index j = 0; j < cur.size(); ++j) {
      if (theta[j] == 0.0) continue;
      out += theta[j] * (cur[j] - prev[j % prev.size()]) - 0.5 * theta[j] * theta[j] * dt;
    }
  }
  return out;
}

StageDrifts all_branch_drifts(const TreeSpec& spec, double target) {
  const double mu0 = eigenstructure(spec.horizon(), spec).top();
  StageDrifts drifts;
  for (int i = 0; i <= spec.eta(); ++i) {
    const double rate = target * static_cast<double>(spec.branch_count()) /
                        (static_cast<double>(spec.P(i)) * mu0);
    drifts.push_back(Eigen::VectorXd::Constant(spec.P(i), rate));
  }
  return drifts;
}

StageDrifts single_branch_drifts(const TreeSpec& spec, BranchIndex gamma, double target) {
  if (gamma < 0 || gamma >= spec.branch_count()) {
    throw Error(ErrorCode::IndexOutOfRange, "designated branch out of range");
  }
  StageDrifts drifts;
  for (int i = 0; i <= spec.eta(); ++i) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(spec.P(i));
    v[gamma % spec.P(i)] = target / spec.horizon();
    drifts.push_back(std::move(v));
  }
  return drifts;
}

}  // namespace detail

TreePath sample_path(const TreeSpec& spec, const TimeGrid& grid, Philox4x32& rng) {
  TreePath path(spec, grid);
  detail::simulate_tilted(spec, grid, {}, rng, path);
  return path;
}

// --- detection --------------------------------------------------------------

namespace {

double single_branch_probability(const TreePath& path, const TreeSpec& spec, double u,
                                 std::optional<BranchIndex> only) {
  const double x = spec.x();
  const double c = spec.c();
  if (x > u) return 1.0;
  double log_clear = 0.0;
  for (std::size_t k = 0; k + 1 < path.points(); ++k) {
    const double t0 = path.time(k);
    const double t1 = path.time(k + 1);
    const double dt = t1 - t0;
    const auto prev = path.native(k);
    const auto cur = path.native(k + 1);
    const auto visit = [&](Eigen::Index j) {
      const double a = u - (x + prev[j % prev.size()] - c * t0);
      const double b = u - (x + cur[j] - c * t1);
      if (a <= 0.0 || b <= 0.0) return false;
      log_clear += std::log1p(-std::exp(-2.0 * a * b / dt));
      return true;
    };
    if (only) {
      if (!visit(static_cast<Eigen::Index>(*only % cur.size()))) return 1.0;
    } else {
      for (Eigen::Index j = 0; j < cur.size(); ++j) {
        if (!visit(j)) return 1.0;
      }
    }
  }
  return -std::expm1(log_clear);
}

}  // namespace

double detect_probability(const TreePath& path, const TreeSpec& spec, const EventSpec& event) {
  const double u = event.u;
  const double x = spec.x();
  const double c = spec.c();
  switch (event.kind) {
    case EventKind::SingleBranch:
      return single_branch_probability(path, spec, u, event.branch);
    case EventKind::AllBranch:
      for (std::size_t k = 0; k < path.points(); ++k) {
        if (x + path.native(k).minCoeff() - c * path.time(k) > u) return 1.0;
      }
      return 0.0;
    case EventKind::Diameter:
      for (std::size_t k = 0; k < path.points(); ++k) {
        const auto v = path.native(k);
        if (v.maxCoeff() - v.minCoeff() > u) return 1.0;
      }
      return 0.0;
    case EventKind::EndpointOrthant: {
      const std::size_t last = path.points() - 1;
      return x + path.native(last).minCoeff() - c * path.time(last) > u ? 1.0 : 0.0;
    }
    case EventKind::ForestAny:
      break;
  }
  throw Error(ErrorCode::UnsupportedEvent, "forest events need a forest of paths");
}

bool detect(const TreePath& path, const TreeSpec& spec, const EventSpec& event, Philox4x32& rng) {
  const double p = detect_probability(path, spec, event);
  if (p >= 1.0) return true;
  if (p <= 0.0) return false;
  return rng.uniform() < p;
}

namespace {

// Bridge standard deviations beyond which a crossing inside a step is ignored.
constexpr double kReach = 5.0;

// First time in (t0, t1) at which `hit` holds on the bridge midpoints, found
// by recursive bisection. Left halves are searched before right halves.
template <class Hit, class Near>
std::optional<double> bisect(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double t0, double t1,
                             int depth, const Hit& hit, const Near& near, Philox4x32& rng) {
  const double dt = t1 - t0;
  if (depth <= 0 || !near(a, b, t0, t1, std::sqrt(dt))) return std::nullopt;
  boost::random::normal_distribution<double> normal;
  const double sd = 0.5 * std::sqrt(dt);
  Eigen::VectorXd m(a.size());
  for (Eigen::Index j = 0; j < m.size(); ++j) m[j] = 0.5 * (a[j] + b[j]) + sd * normal(rng);
  const double tm = t0 + 0.5 * dt;
  if (auto left = bisect(a, m, t0, tm, depth - 1, hit, near, rng)) return left;
  if (hit(m, tm)) return tm;
  return bisect(m, b, tm, t1, depth - 1, hit, near, rng);
}

// First grid or midpoint time at which `hit` holds, scanning steps in order.
template <class Hit, class Near>
std::optional<double> refined_first(const TreePath& path, int depth, const Hit& hit, const Near& near,
                                    Philox4x32& rng) {
  const auto first = path.native(0);
  if (hit(first, path.time(0))) return path.time(0);
  Eigen::VectorXd a, b;
  for (std::size_t k = 0; k + 1 < path.points(); ++k) {
    const auto prev = path.native(k);
    const auto cur = path.native(k + 1);
    if (depth > 0) {
      a.resize(cur.size());
      for (Eigen::Index j = 0; j < cur.size(); ++j) a[j] = prev[j % prev.size()];
      b = cur;
      if (auto t = bisect(a, b, path.time(k), path.time(k + 1), depth, hit, near, rng)) return t;
    }
    if (hit(cur, path.time(k + 1))) return path.time(k + 1);
  }
  return std::nullopt;
}

}  // namespace

std::optional<double> first_all_branch_time(const TreePath& path, const TreeSpec& spec, double u,
                                            int depth, Philox4x32& rng) {
  const double x = spec.x();
  const double c = spec.c();
  const auto hit = [&](const auto& v, double t) { return x + v.minCoeff() - c * t > u; };
  const auto near = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b, double t0, double t1,
                        double sd) {
    const double floor = u - x - kReach * sd;
    for (Eigen::Index j = 0; j < a.size(); ++j) {
      if (std::max(a[j] - c * t0, b[j] - c * t1) <= floor) return false;
    }
    return true;
  };
  return refined_first(path, depth, hit, near, rng);
}

double detect_probability(const TreePath& path, const TreeSpec& spec, const EventSpec& event,
                          int depth, Philox4x32& rng) {
  if (depth <= 0) return detect_probability(path, spec, event);
  switch (event.kind) {
    case EventKind::AllBranch:
      return first_all_branch_time(path, spec, event.u, depth, rng) ? 1.0 : 0.0;
    case EventKind::Diameter: {
      const double u = event.u;
      const auto hit = [u](const auto& v, double) { return v.maxCoeff() - v.minCoeff() > u; };
      const auto near = [u](const Eigen::VectorXd& a, const Eigen::VectorXd& b, double, double,
                            double sd) {
        return std::max(a.maxCoeff(), b.maxCoeff()) - std::min(a.minCoeff(), b.minCoeff()) >
               u - 2.0 * kReach * sd;
      };
      return refined_first(path, depth, hit, near, rng) ? 1.0 : 0.0;
    }
    default:
      return detect_probability(path, spec, event);
  }
}

std::optional<double> first_all_branch_time(const TreePath& path, const TreeSpec& spec, double u) {
  for (std::size_t k = 0; k < path.points(); ++k) {
    const double t = path.time(k);
    if (spec.x() + path.native(k).minCoeff() - spec.c() * t > u) return t;
  }
  return std::nullopt;
}

// --- estimators -------------------------------------------------------------

namespace {

void check_config(const McConfig& config) {
  if (config.n < 1) throw Error(ErrorCode::BadArguments, "need n >= 1");
}

McEstimate finish(const MeanAccumulator& acc, Estimator est, std::uint64_t seed) {
  return McEstimate{std::clamp(acc.mean(), 0.0, 1.0), acc.std_error(), acc.n, est, seed};
}

std::uint64_t path_stream(std::uint64_t batch, std::uint64_t batch_size, std::uint64_t k) {
  return batch * batch_size + k;
}

}  // namespace

McEstimate estimate(const TreeSpec& spec, const EventSpec& event, const McConfig& config) {
  check_config(config);
  if (event.kind == EventKind::ForestAny) {
    throw Error(ErrorCode::UnsupportedEvent, "use simulate_forest_event for forests");
  }
  const TimeGrid grid = TimeGrid::build(spec, event.u - spec.x(), config.grid);
  const auto acc = run_batches<MeanAccumulator>(
      config.n, config.batch_size, config.threads, [&](std::uint64_t batch, std::uint64_t count) {
        MeanAccumulator local;
        TreePath path(spec, grid);
        for (std::uint64_t k = 0; k < count; ++k) {
          Philox4x32 rng(config.seed, path_stream(batch, config.batch_size, k));
          detail::simulate_tilted(spec, grid, {}, rng, path);
          local.add(detect_probability(path, spec, event, config.grid.bridge_depth, rng));
        }
        return local;
      });
  return finish(acc, Estimator::Crude, config.seed);
}

McEstimate estimate_tilted(const TreeSpec& spec, const EventSpec& event, const McConfig& config) {
  check_config(config);
  const double target = event.u - spec.x() + spec.c() * spec.horizon();
  const TimeGrid grid = TimeGrid::build(spec, event.u - spec.x(), config.grid);
  const std::int64_t P = spec.branch_count();

  std::vector<detail::StageDrifts> drifts;
  bool mixture = false;
  switch (event.kind) {
    case EventKind::AllBranch:
    case EventKind::EndpointOrthant:
      drifts.push_back(detail::all_branch_drifts(spec, target));
      break;
    case EventKind::SingleBranch:
      if (event.branch) {
        drifts.push_back(detail::single_branch_drifts(spec, *event.branch, target));
      } else {
        mixture = true;
        for (BranchIndex g = 0; g < P; ++g) {
          drifts.push_back(detail::single_branch_drifts(spec, g, target));
        }
      }
      break;
    default:
      throw Error(ErrorCode::UnsupportedEvent,
                  "no tilted estimator for event '" + std::string(to_string(event.kind)) + "'");
  }

  const double theta = target / spec.horizon();
  const double T = spec.horizon();
  const auto acc = run_batches<MeanAccumulator>(
      config.n, config.batch_size, config.threads, [&](std::uint64_t batch, std::uint64_t count) {
        MeanAccumulator local;
        TreePath path(spec, grid);
        const std::size_t last = grid.points() - 1;
        for (std::uint64_t k = 0; k < count; ++k) {
          Philox4x32 rng(config.seed, path_stream(batch, config.batch_size, k));
          std::size_t pick = 0;
          if (mixture) {
            pick = std::min(static_cast<std::size_t>(rng.uniform() * static_cast<double>(P)),
                            static_cast<std::size_t>(P - 1));
          }
          double log_lr = detail::simulate_tilted(spec, grid, drifts[pick], rng, path);
          if (mixture) {
            // dQ/dP is the average over branches of exp(theta B_g(T) - theta^2 T / 2)
            double log_mix = -std::numeric_limits<double>::infinity();
            for (BranchIndex g = 0; g < P; ++g) {
              log_mix = log_add(log_mix, theta * path.branch(g, last) - 0.5 * theta * theta * T);
            }
            log_lr = -(log_mix - std::log(static_cast<double>(P)));
          }
          const double hit = detect_probability(path, spec, event, config.grid.bridge_depth, rng);
          local.add(hit > 0.0 ? hit * std::exp(log_lr) : 0.0);
        }
        return local;
      });
  return finish(acc, Estimator::Tilted, config.seed);
}

namespace {

struct TailAccumulator {
  std::vector<double> a, aa, ab;
  double b = 0.0, bb = 0.0;
  std::uint64_t n = 0;

  void merge(const TailAccumulator& o) {
    if (a.empty()) {
      a.assign(o.a.size(), 0.0);
      aa = ab = a;
    }
    for (std::size_t i = 0; i < o.a.size(); ++i) {
      a[i] += o.a[i];
      aa[i] += o.aa[i];
      ab[i] += o.ab[i];
    }
    b += o.b;
    bb += o.bb;
    n += o.n;
  }
};

}  // namespace

std::vector<TailPoint> estimate_ruintime_tail(const TreeSpec& spec, double u, double y,
                                              const std::vector<double>& xs,
                                              const McConfig& config) {
  check_config(config);
  if (!(y > 0.0) || std::any_of(xs.begin(), xs.end(), [y](double x) { return !(x > y); })) {
    throw Error(ErrorCode::BadArguments, "need 0 < y < x for every x");
  }
  const double ue = u - spec.x();
  const double T = spec.horizon();
  const TimeGrid grid = TimeGrid::build(spec, ue, config.grid);
  const auto drifts = detail::all_branch_drifts(spec, ue + spec.c() * T);
  const double y_cut = T - y / (ue * ue);

  const auto acc = run_batches<TailAccumulator>(
      config.n, config.batch_size, config.threads, [&](std::uint64_t batch, std::uint64_t count) {
        TailAccumulator local;
        local.a.assign(xs.size(), 0.0);
        local.aa = local.ab = local.a;
        TreePath path(spec, grid);
        for (std::uint64_t k = 0; k < count; ++k) {
          Philox4x32 rng(config.seed, path_stream(batch, config.batch_size, k));
          const double log_lr = detail::simulate_tilted(spec, grid, drifts, rng, path);
          ++local.n;
          const auto hit = first_all_branch_time(path, spec, u, config.grid.bridge_depth, rng);
          if (!hit || *hit > y_cut) continue;
          const double w = std::exp(log_lr);
          local.b += w;
          local.bb += w * w;
          for (std::size_t i = 0; i < xs.size(); ++i) {
            if (*hit <= T - xs[i] / (ue * ue)) {
              local.a[i] += w;
              local.aa[i] += w * w;
              local.ab[i] += w * w;
            }
          }
        }
        return local;
      });

  std::vector<TailPoint> out;
  const double n = static_cast<double>(acc.n);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    TailPoint tp;
    tp.x = xs[i];
    if (acc.b > 0.0) {
      const double r = acc.a[i] / acc.b;
      const double mb = acc.b / n;
      // delta method for a ratio of means
      const double m2 = (acc.aa[i] - 2.0 * r * acc.ab[i] + r * r * acc.bb) / n;
      tp.tail = r;
      tp.std_error = std::sqrt(std::max(0.0, m2) / n) / mb;
    }
    out.push_back(tp);
  }
  return out;
}

double exact_bivariate_orthant(double rho, double h) {
  if (!(std::abs(rho) < 1.0)) {
    throw Error(ErrorCode::BadArguments, "correlation must lie in (-1, 1)");
  }
  // P = Phi(-h)^2 + (1 / 2 pi) int_0^{asin rho} exp(-h^2 / (1 + sin s)) ds
  const auto integrand = [h](double s) { return std::exp(-h * h / (1.0 + std::sin(s))); };
  double error = 0.0;
  const double integral = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      integrand, 0.0, std::asin(rho), 20, 1e-14, &error);
  const double tail = normal_sf(h);
  return tail * tail + integral / (2.0 * M_PI);
}

McEstimate estimate_classical_bbm(double u, double c, double T, double h, const McConfig& config) {
  check_config(config);
  if (!(T > 0.0) || !(h > 0.0)) throw Error(ErrorCode::BadArguments, "need T > 0 and h > 0");

  const auto acc = run_batches<MeanAccumulator>(
      config.n, config.batch_size, config.threads, [&](std::uint64_t batch, std::uint64_t count) {
        MeanAccumulator local;
        boost::random::normal_distribution<double> normal;
        std::vector<double> particles;
        for (std::uint64_t k = 0; k < count; ++k) {
          Philox4x32 rng(config.seed, path_stream(batch, config.batch_size, k));
          const double first_split = -std::log(rng.uniform());
          const double end = std::min(first_split, T);

          // single particle: exact bridge crossing probabilities
          const auto steps = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(end / h)));
          const double dt = end / static_cast<double>(steps);
          double level = 0.0;
          double log_clear = 0.0;
          bool crossed = false;
          for (std::size_t s = 0; s < steps && !crossed; ++s) {
            const double t0 = dt * static_cast<double>(s);
            const double next = level + std::sqrt(dt) * normal(rng);
            const double a = u - (level - c * t0);
            const double b = u - (next - c * (t0 + dt));
            if (a <= 0.0 || b <= 0.0) {
              crossed = true;
            } else {
              log_clear += std::log1p(-std::exp(-2.0 * a * b / dt));
            }
            level = next;
          }
          if (crossed) {
            local.add(1.0);
            continue;
          }
          const double p_single = -std::expm1(log_clear);
          if (first_split >= T) {
            local.add(p_single);
            continue;
          }

          // branching phase: grid detection of the all-particle event
          particles.assign(2, level);
          double t = first_split;
          bool hit = false;
          while (t < T && !hit) {
            const double next_split = t - std::log(rng.uniform()) / static_cast<double>(particles.size());
            const double stop = std::min(next_split, T);
            const auto n_steps = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil((stop - t) / h)));
            const double step = (stop - t) / static_cast<double>(n_steps);
            for (std::size_t s = 0; s < n_steps && !hit; ++s) {
              double lowest = std::numeric_limits<double>::infinity();
              for (double& p : particles) {
                p += std::sqrt(step) * normal(rng);
                lowest = std::min(lowest, p);
              }
              hit = lowest - c * (t + step * static_cast<double>(s + 1)) > u;
            }
            t = stop;
            if (!hit && t < T) {
              const auto pick = std::min(
                  static_cast<std::size_t>(rng.uniform() * static_cast<double>(particles.size())),
                  particles.size() - 1);
              particles.push_back(particles[pick]);
            }
          }
          local.add(hit ? 1.0 : p_single);
        }
        return local;
      });
  return finish(acc, Estimator::Crude, config.seed);
}

}  // namespace bdt
