#include "bdt/forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "bdt/error.hpp"
#include "bdt/normal.hpp"
#include "bdt/parallel.hpp"

namespace bdt {

ForestSpec ForestSpec::validate(double T, const std::vector<RawTreeSpec>& raw) {
  if (raw.empty()) throw Error(ErrorCode::BadArguments, "a forest needs at least one tree");
  ForestSpec forest;
  forest.T = T;
  for (const auto& r : raw) {
    if (r.T != T) {
      throw Error(ErrorCode::MismatchedHorizon,
                  "tree horizon " + std::to_string(r.T) + " differs from forest horizon " +
                      std::to_string(T));
    }
    forest.trees.push_back(TreeSpec::validate(r));
  }
  return forest;
}

namespace {

constexpr std::int64_t kMaxDenominator = 1 << 20;
constexpr __int128 kLimit = static_cast<__int128>(1) << 62;

__int128 gcd128(__int128 a, __int128 b) {
  if (a < 0) a = -a;
  while (b != 0) {
    const __int128 t = a % b;
    a = b;
    b = t;
  }
  return a;
}

// Exact p/q == d with q <= kMaxDenominator, via continued-fraction convergents.
std::optional<Fraction> exact_fraction(double d) {
  if (!std::isfinite(d) || std::abs(d) > 1e12) return std::nullopt;
  std::int64_t p0 = 0, q0 = 1, p1 = 1, q1 = 0;
  double r = d;
  for (int it = 0; it < 64; ++it) {
    const double a = std::floor(r);
    if (std::abs(a) > 1e12) return std::nullopt;
    const auto ai = static_cast<std::int64_t>(a);
    const std::int64_t p2 = ai * p1 + p0;
    const std::int64_t q2 = ai * q1 + q0;
    if (q2 > kMaxDenominator) return std::nullopt;
    if (static_cast<double>(p2) / static_cast<double>(q2) == d) return Fraction{p2, q2};
    p0 = p1;
    q0 = q1;
    p1 = p2;
    q1 = q2;
    const double frac = r - a;
    if (frac == 0.0) return std::nullopt;
    r = 1.0 / frac;
  }
  return std::nullopt;
}

std::optional<Fraction> add(const Fraction& a, const Fraction& b) {
  const __int128 g = gcd128(a.den, b.den);
  const __int128 den = a.den / g * b.den;
  const __int128 num = a.num * (b.den / g) + b.num * (a.den / g);
  if (den > kLimit || num > kLimit || num < -kLimit) return std::nullopt;
  const __int128 h = gcd128(num, den);
  return Fraction{num / h, den / h};
}

// mu_0(T) / P_eta = sum_i (tau_{i+1} - tau_i) / P_i with tau_0 = 0, tau_{eta+1} = T.
std::optional<Fraction> exact_spread(const TreeSpec& spec) {
  Fraction total{0, 1};
  std::optional<Fraction> prev = Fraction{0, 1};
  for (int i = 0; i <= spec.eta(); ++i) {
    const double end = i == spec.eta() ? spec.horizon() : spec.tau(i + 1);
    const auto next = exact_fraction(end);
    if (!next) return std::nullopt;
    const auto diff = add(*next, Fraction{-prev->num, prev->den});
    if (!diff) return std::nullopt;
    const __int128 den = diff->den * spec.P(i);
    if (den > kLimit) return std::nullopt;
    const auto sum = add(total, Fraction{diff->num, den});
    if (!sum) return std::nullopt;
    total = *sum;
    prev = next;
  }
  return total;
}

template <typename T>
Ordering order_of(const T& a, const T& b) {
  if (a > b) return Ordering::Greater;
  if (a < b) return Ordering::Less;
  return Ordering::Equivalent;
}

}  // namespace

OrderKey order_key(const TreeSpec& spec) {
  OrderKey key;
  key.spread = eigenstructure(spec.horizon(), spec).top() / static_cast<double>(spec.branch_count());
  key.spread_exact = exact_spread(spec);
  key.level = spec.x() - spec.c() * spec.horizon();
  key.neg_branches = -spec.branch_count();
  return key;
}

Ordering compare(const TreeSpec& a, const TreeSpec& b) {
  if (a.horizon() != b.horizon()) {
    throw Error(ErrorCode::MismatchedHorizon, "trees compared on different horizons");
  }
  const OrderKey ka = order_key(a);
  const OrderKey kb = order_key(b);
  Ordering first;
  if (ka.spread_exact && kb.spread_exact) {
    first = order_of(ka.spread_exact->num * kb.spread_exact->den,
                     kb.spread_exact->num * ka.spread_exact->den);
  } else {
    first = order_of(ka.spread, kb.spread);
  }
  if (first != Ordering::Equivalent) return first;
  const Ordering second = order_of(ka.level, kb.level);
  if (second != Ordering::Equivalent) return second;
  return order_of(ka.neg_branches, kb.neg_branches);
}

std::vector<std::size_t> maximal_set(const ForestSpec& forest) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < forest.trees.size(); ++i) {
    if (compare(forest.trees[i], forest.trees[best]) == Ordering::Greater) best = i;
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < forest.trees.size(); ++i) {
    if (compare(forest.trees[i], forest.trees[best]) == Ordering::Equivalent) out.push_back(i);
  }
  return out;
}

AsymptoticsResult forest_asym(double u, const ForestSpec& forest,
                              const std::vector<PickandsEstimate>& H) {
  if (H.size() != forest.trees.size()) {
    throw Error(ErrorCode::BadArguments, "need one constant per tree");
  }
  const auto A = maximal_set(forest);
  double log_value = -std::numeric_limits<double>::infinity();
  std::string members;
  for (const std::size_t i : A) {
    log_value = log_add(log_value, all_branch_asym(u, forest.trees[i], H[i]).log_value);
    members += (members.empty() ? "" : ",") + std::to_string(i);
  }
  AsymptoticsResult r{Formula::Forest, u, log_value, {}, "maximal set {" + members + "}"};
  return r;
}

McEstimate simulate_forest_event(const ForestSpec& forest, double u, const McConfig& config,
                                 Estimator estimator) {
  if (config.n < 1) throw Error(ErrorCode::BadArguments, "need n >= 1");
  const std::size_t M = forest.trees.size();
  std::vector<TimeGrid> grids;
  std::vector<detail::StageDrifts> drifts;
  std::vector<double> log_q;
  for (const auto& tree : forest.trees) {
    grids.push_back(TimeGrid::build(tree, u - tree.x(), config.grid));
    const double target = u - tree.x() + tree.c() * tree.horizon();
    drifts.push_back(detail::all_branch_drifts(tree, target));
    // mixture weight from the exponential rate of the endpoint orthant
    const double v = std::max(0.0, target);
    const double mu0 = eigenstructure(tree.horizon(), tree).top();
    log_q.push_back(-v * v * static_cast<double>(tree.branch_count()) / (2.0 * mu0));
  }
  double log_norm = -std::numeric_limits<double>::infinity();
  for (const double l : log_q) log_norm = log_add(log_norm, l);
  std::vector<double> q;
  for (double& l : log_q) {
    l -= log_norm;
    q.push_back(std::exp(l));
  }

  const auto acc = run_batches<MeanAccumulator>(
      config.n, config.batch_size, config.threads, [&](std::uint64_t batch, std::uint64_t count) {
        MeanAccumulator local;
        std::vector<TreePath> paths;
        for (std::size_t i = 0; i < M; ++i) paths.emplace_back(forest.trees[i], grids[i]);
        std::vector<double> log_ratio(M);
        for (std::uint64_t k = 0; k < count; ++k) {
          Philox4x32 rng(config.seed, batch * config.batch_size + k);
          std::size_t pick = M;
          if (estimator == Estimator::Tilted) {
            double r = rng.uniform();
            pick = 0;
            while (pick + 1 < M && r >= q[pick]) r -= q[pick++];
          }
          bool hit = false;
          for (std::size_t i = 0; i < M; ++i) {
            const TreeSpec& tree = forest.trees[i];
            if (i == pick) {
              log_ratio[i] = -detail::simulate_tilted(tree, grids[i], drifts[i], rng, paths[i]);
            } else {
              detail::simulate_tilted(tree, grids[i], {}, rng, paths[i]);
              if (estimator == Estimator::Tilted) {
                log_ratio[i] = detail::log_tilt_ratio(tree, grids[i], drifts[i], paths[i]);
              }
            }
            hit = hit || first_all_branch_time(paths[i], tree, u, config.grid.bridge_depth, rng).has_value();
          }
          if (!hit) {
            local.add(0.0);
            continue;
          }
          if (estimator == Estimator::Crude) {
            local.add(1.0);
            continue;
          }
          double log_mix = -std::numeric_limits<double>::infinity();
          for (std::size_t i = 0; i < M; ++i) log_mix = log_add(log_mix, log_q[i] + log_ratio[i]);
          local.add(std::exp(-log_mix));
        }
        return local;
      });
  return McEstimate{std::clamp(acc.mean(), 0.0, 1.0), acc.std_error(), acc.n, estimator,
                    config.seed};
}

}  // namespace bdt
