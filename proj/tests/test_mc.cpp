#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "bdt/analytics.hpp"
#include "bdt/mc.hpp"
#include "bdt/normal.hpp"
#include "helpers.hpp"

using namespace bdt;
using bdt::testing::binary3;
using bdt::testing::random_spec;
using bdt::testing::two_branch;

namespace {

McConfig config(std::uint64_t n, std::uint64_t seed) {
  McConfig c;
  c.n = n;
  c.seed = seed;
  return c;
}

double joint(const McEstimate& a, const McEstimate& b) { return std::hypot(a.std_error, b.std_error); }

}  // namespace

TEST(Philox, KnownAnswers) {
  const auto zero = Philox4x32::block({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(zero, (Philox4x32::counter_type{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
  const auto ones = Philox4x32::block({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                      {0xffffffffu, 0xffffffffu});
  EXPECT_EQ(ones, (Philox4x32::counter_type{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
  const auto pi = Philox4x32::block({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                                    {0xa4093822u, 0x299f31d0u});
  EXPECT_EQ(pi, (Philox4x32::counter_type{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(Philox, StreamsDiffer) {
  Philox4x32 a(1, 0), b(1, 1), c(2, 0);
  const auto x = a(), y = b(), z = c();
  EXPECT_NE(x, y);
  EXPECT_NE(x, z);
  Philox4x32 u(5, 9);
  for (int i = 0; i < 1000; ++i) {
    const double v = u.uniform();
    ASSERT_GT(v, 0.0);
    ASSERT_LT(v, 1.0);
  }
}

TEST(Grid, ContainsBranchingTimesAndRespectsSteps) {
  const TreeSpec s = binary3();
  const TimeGrid g = TimeGrid::build(s, 4.0, GridConfig{0.05, 16.0, 1.0 / 16.0});
  EXPECT_EQ(g[0], 0.0);
  EXPECT_EQ(g.times().back(), 3.0);
  for (const double tau : {1.0, 2.0}) {
    EXPECT_NE(std::find(g.times().begin(), g.times().end(), tau), g.times().end());
  }
  for (std::size_t k = 0; k + 1 < g.points(); ++k) {
    const double dt = g[k + 1] - g[k];
    EXPECT_GT(dt, 0.0);
    EXPECT_LE(dt, 0.05 + 1e-12);
    if (g[k] >= 2.0) {
      EXPECT_LE(dt, 1.0 / 256.0 + 1e-12);
    }
  }
  const TimeGrid uni = TimeGrid::uniform(s, 0.1);
  EXPECT_EQ(uni.steps(), 30u);
}

TEST(Paths, CoincideBeforeSeparation) {
  const TreeSpec s = binary3();
  const TimeGrid g = TimeGrid::uniform(s, 0.25);
  Philox4x32 rng(3, 0);
  const TreePath p = sample_path(s, g, rng);
  const Eigen::MatrixXd full = p.full();
  ASSERT_EQ(full.cols(), 4);
  for (std::size_t k = 0; k < p.points(); ++k) {
    const double t = p.time(k);
    for (BranchIndex a = 0; a < 4; ++a) {
      for (BranchIndex b = a + 1; b < 4; ++b) {
        if (t <= s.tau(separation_moment(a, b, s))) {
          EXPECT_EQ(full(static_cast<Eigen::Index>(k), a), full(static_cast<Eigen::Index>(k), b));
        } else {
          EXPECT_NE(full(static_cast<Eigen::Index>(k), a), full(static_cast<Eigen::Index>(k), b));
        }
      }
    }
  }
}

TEST(Paths, EmpiricalCovariance) {
  const std::uint64_t n = 200000;
  std::mt19937_64 gen(61);
  for (int rep = 0; rep < 4; ++rep) {
    const TreeSpec s = rep == 0 ? binary3() : random_spec(gen);
    const TimeGrid g = TimeGrid::uniform(s, 0.1);
    std::uniform_int_distribution<std::size_t> kd(1, g.points() - 1);
    std::uniform_int_distribution<BranchIndex> bd(0, s.branch_count() - 1);
    std::size_t k1 = g.points() - 1, k2 = g.points() - 1;
    BranchIndex b1 = 0, b2 = rep == 0 ? 2 : 0;
    if (rep > 0) {
      k1 = kd(gen);
      k2 = kd(gen);
      b1 = bd(gen);
      b2 = bd(gen);
    }
    double sx = 0, sy = 0, sxy = 0, sxxyy = 0;
    std::vector<double> xs(n), ys(n);
    TreePath path(s, g);
    for (std::uint64_t i = 0; i < n; ++i) {
      Philox4x32 rng(100 + rep, i);
      detail::simulate_tilted(s, g, {}, rng, path);
      xs[i] = path.branch(b1, k1);
      ys[i] = path.branch(b2, k2);
      sx += xs[i];
      sy += ys[i];
    }
    const double mx = sx / n, my = sy / n;
    for (std::uint64_t i = 0; i < n; ++i) {
      const double prod = (xs[i] - mx) * (ys[i] - my);
      sxy += prod;
      sxxyy += prod * prod;
    }
    const double cov = sxy / n;
    const double se = std::sqrt((sxxyy / n - cov * cov) / n);
    const double expected = covariance(b1, g[k1], b2, g[k2], s);
    EXPECT_LT(std::abs(cov - expected), 4.0 * se) << "rep " << rep << " expected " << expected;
    if (rep == 0) {
      EXPECT_DOUBLE_EQ(expected, 2.0);
    }
  }
}

TEST(Detect, HandBuiltPaths) {
  const TreeSpec s = two_branch();
  const TimeGrid g = TimeGrid::uniform(s, 0.25);
  TreePath p(s, g);
  // values at t = 0, 0.25, 0.5 (one component), 0.75, 1 (two components)
  p.native(1)[0] = 1.0;
  p.native(2)[0] = 2.0;
  p.native(3) << 3.2, 2.5;
  p.native(4) << 3.1, 2.9;
  EXPECT_EQ(detect_probability(p, s, EventSpec{EventKind::SingleBranch, 3.0, std::nullopt}), 1.0);
  EXPECT_EQ(detect_probability(p, s, EventSpec{EventKind::AllBranch, 3.0, std::nullopt}), 0.0);
  EXPECT_EQ(detect_probability(p, s, EventSpec{EventKind::AllBranch, 2.8, std::nullopt}), 1.0);
  EXPECT_EQ(detect_probability(p, s, EventSpec{EventKind::EndpointOrthant, 2.95, std::nullopt}), 0.0);
  EXPECT_EQ(detect_probability(p, s, EventSpec{EventKind::EndpointOrthant, 2.85, std::nullopt}), 1.0);
  EXPECT_EQ(detect_probability(p, s, EventSpec{EventKind::Diameter, 0.5, std::nullopt}), 1.0);
  EXPECT_EQ(detect_probability(p, s, EventSpec{EventKind::Diameter, 0.8, std::nullopt}), 0.0);
  // below the level on every grid point: the bridge gives a probability in (0, 1)
  const double q = detect_probability(p, s, EventSpec{EventKind::SingleBranch, 3.3, std::nullopt});
  EXPECT_GT(q, 0.0);
  EXPECT_LT(q, 1.0);
  const double only = detect_probability(p, s, EventSpec{EventKind::SingleBranch, 3.3, BranchIndex{1}});
  EXPECT_LT(only, q);
  Philox4x32 rng(1, 1);
  EXPECT_TRUE(detect(p, s, EventSpec{EventKind::SingleBranch, 3.0, std::nullopt}, rng));
  ASSERT_TRUE(first_all_branch_time(p, s, 2.8).has_value());
  EXPECT_EQ(*first_all_branch_time(p, s, 2.8), 1.0);
  // drift lowers the effective path
  const TreeSpec drifted = s.with_drift(1.0);
  EXPECT_EQ(detect_probability(p, drifted, EventSpec{EventKind::AllBranch, 2.0, std::nullopt}), 0.0);
}

TEST(Estimate, BridgeCorrectedCrossing) {
  const TreeSpec one = TreeSpec::single_branch(1.0);
  const McEstimate e = estimate(one, EventSpec{EventKind::SingleBranch, 2.0, std::nullopt}, config(1000000, 71));
  EXPECT_LT(std::abs(e.p - bm_crossing_exact(2.0, 0.0, 1.0)), 3.0 * e.std_error);
  EXPECT_EQ(e.estimator, Estimator::Crude);
  EXPECT_EQ(e.n, 1000000u);
}

TEST(Estimate, LevelZeroIsCertain) {
  const McEstimate e = estimate(binary3(), EventSpec{EventKind::SingleBranch, 0.0, std::nullopt}, config(100, 1));
  EXPECT_EQ(e.p, 1.0);
}

TEST(Estimate, KorshunovBound) {
  const TreeSpec s = binary3();
  for (const double u : {1.0, 1.5}) {
    const auto all = estimate(s, EventSpec{EventKind::AllBranch, u, std::nullopt}, config(100000, 73));
    const auto end = estimate_tilted(s, EventSpec{EventKind::EndpointOrthant, u, std::nullopt}, config(100000, 74));
    EXPECT_LE(all.p - 2.0 * all.std_error, korshunov_constant(0.0, 4) * (end.p + 2.0 * end.std_error));
  }
}

TEST(Estimate, TiltedMatchesCrude) {
  const TreeSpec s = binary3();
  const EventSpec ev{EventKind::EndpointOrthant, 1.0, std::nullopt};
  const auto crude = estimate(s, ev, config(200000, 75));
  const auto tilted = estimate_tilted(s, ev, config(200000, 76));
  EXPECT_LT(std::abs(crude.p - tilted.p), 3.0 * joint(crude, tilted));
  EXPECT_EQ(tilted.estimator, Estimator::Tilted);

  const EventSpec all{EventKind::AllBranch, 1.5, std::nullopt};
  const auto c2 = estimate(s, all, config(200000, 77));
  const auto t2 = estimate_tilted(s, all, config(200000, 78));
  EXPECT_LT(std::abs(c2.p - t2.p), 3.0 * joint(c2, t2));
}

TEST(Estimate, TiltedSingleBranchMatchesCrude) {
  const TreeSpec s = binary3();
  McConfig c = config(200000, 79);
  const EventSpec ev{EventKind::SingleBranch, 3.5, std::nullopt};
  const auto crude = estimate(s, ev, c);
  c.seed = 80;
  const auto tilted = estimate_tilted(s, ev, c);
  EXPECT_LT(std::abs(crude.p - tilted.p), 3.0 * joint(crude, tilted));
  const EventSpec one{EventKind::SingleBranch, 3.5, BranchIndex{2}};
  const auto branch = estimate_tilted(s, one, c);
  EXPECT_LT(std::abs(branch.p - bm_crossing_exact(3.5, 0.0, 3.0)), 3.0 * branch.std_error);
}

TEST(Estimate, TiltedEndpointMatchesExactOrthant) {
  const TreeSpec s = two_branch();
  McConfig c = config(200000, 81);
  c.grid.window = 0.0;
  const auto e = estimate_tilted(s, EventSpec{EventKind::EndpointOrthant, 5.0, std::nullopt}, c);
  const double exact = exact_bivariate_orthant(0.5, 5.0);
  EXPECT_LT(std::abs(e.p - exact), 3.0 * e.std_error);
  EXPECT_LT(e.std_error / e.p, 0.02);
}

TEST(Estimate, TiltReducesVariance) {
  const TreeSpec one = TreeSpec::single_branch(1.0);
  McConfig c = config(500000, 83);
  c.grid.window = 0.0;
  const EventSpec ev{EventKind::EndpointOrthant, 4.0, std::nullopt};
  const auto crude = estimate(one, ev, c);
  const auto tilted = estimate_tilted(one, ev, c);
  const double p = normal_sf(4.0);
  ASSERT_GT(crude.p, 0.0);
  const double crude_rel = crude.std_error / crude.p;
  const double tilted_rel = tilted.std_error / tilted.p;
  EXPECT_GT(crude_rel, 10.0 * tilted_rel);
  EXPECT_LT(std::abs(tilted.p - p), 3.0 * tilted.std_error);
}

TEST(Estimate, UnsupportedTilt) {
  try {
    estimate_tilted(binary3(), EventSpec{EventKind::Diameter, 2.0, std::nullopt}, config(10, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnsupportedEvent);
  }
}

TEST(Estimate, Reproducible) {
  const TreeSpec s = binary3();
  const EventSpec ev{EventKind::AllBranch, 2.0, std::nullopt};
  McConfig c = config(20000, 85);
  c.threads = 1;
  const auto a = estimate_tilted(s, ev, c);
  const auto b = estimate_tilted(s, ev, c);
  c.threads = 4;
  const auto d = estimate_tilted(s, ev, c);
  EXPECT_EQ(a.p, b.p);
  EXPECT_EQ(a.std_error, b.std_error);
  EXPECT_EQ(a.p, d.p);
  EXPECT_EQ(a.std_error, d.std_error);
}

TEST(Estimate, NonincreasingInLevel) {
  const TreeSpec s = two_branch();
  McEstimate prev{};
  bool first = true;
  for (const double u : {1.0, 1.5, 2.0, 2.5, 3.0}) {
    const auto e = estimate_tilted(s, EventSpec{EventKind::AllBranch, u, std::nullopt}, config(20000, 87));
    if (!first) {
      EXPECT_LE(e.p, prev.p + 2.0 * joint(e, prev));
    }
    prev = e;
    first = false;
  }
}

TEST(Estimate, BonferroniSandwich) {
  const TreeSpec s = binary3();
  McConfig c = config(100000, 89);
  const auto uni = estimate_tilted(s, EventSpec{EventKind::SingleBranch, 4.0, std::nullopt}, c);
  double sum = 0.0, sum_var = 0.0, best = 0.0, best_se = 0.0;
  for (BranchIndex g = 0; g < s.branch_count(); ++g) {
    c.seed = 90 + static_cast<std::uint64_t>(g);
    const auto e = estimate_tilted(s, EventSpec{EventKind::SingleBranch, 4.0, g}, c);
    sum += e.p;
    sum_var += e.std_error * e.std_error;
    if (e.p > best) {
      best = e.p;
      best_se = e.std_error;
    }
  }
  EXPECT_LE(best, uni.p + 3.0 * std::hypot(best_se, uni.std_error));
  EXPECT_LE(uni.p, sum + 3.0 * std::sqrt(sum_var + uni.std_error * uni.std_error));
}

TEST(Estimate, GridRefinement) {
  // halving the coarse step h; the window near T keeps its own step
  const TreeSpec s = two_branch();
  for (const double u : {2.0, 3.0}) {
    const EventSpec ev{EventKind::AllBranch, u, std::nullopt};
    McConfig c = config(100000, 93);
    const auto coarse = estimate_tilted(s, ev, c);
    c.grid.h /= 2.0;
    c.seed = 94;
    const auto fine = estimate_tilted(s, ev, c);
    EXPECT_LT(std::abs(fine.p - coarse.p), 2.0 * joint(fine, coarse)) << "u " << u;
  }
}

TEST(Ruintime, TailIsMonotone) {
  const TreeSpec s = two_branch();
  const auto tail = estimate_ruintime_tail(s, 4.0, 1.0, {2.0, 3.0, 4.0}, config(20000, 95));
  ASSERT_EQ(tail.size(), 3u);
  EXPECT_GE(tail[0].tail, tail[1].tail);
  EXPECT_GE(tail[1].tail, tail[2].tail);
  EXPECT_LE(tail[0].tail, 1.0);
  EXPECT_GT(tail[2].std_error, 0.0);
  EXPECT_THROW(estimate_ruintime_tail(s, 3.0, 1.0, {0.5}, config(10, 1)), Error);
}

TEST(BivariateOrthant, FrozenValues) {
  // independent high-precision quadrature of the conditional form
  EXPECT_NEAR(exact_bivariate_orthant(0.5, 0.0), 1.0 / 3.0, 1e-14);
  EXPECT_NEAR(exact_bivariate_orthant(0.5, 2.0) / 0.0040529462351629797, 1.0, 1e-11);
  EXPECT_NEAR(exact_bivariate_orthant(0.5, 5.0) / 8.2470864326516678e-10, 1.0, 1e-10);
  EXPECT_NEAR(exact_bivariate_orthant(0.5, 6.0) / 3.8935880669598157e-13, 1.0, 1e-10);
  EXPECT_NEAR(exact_bivariate_orthant(0.9, 3.0) / 0.00061040438530377868, 1.0, 1e-11);
  EXPECT_NEAR(exact_bivariate_orthant(-0.5, 1.0) / 0.0037823020728542639, 1.0, 1e-11);
  EXPECT_NEAR(exact_bivariate_orthant(0.3, 4.0) / 6.7736005953272958e-8, 1.0, 1e-11);
}

TEST(BivariateOrthant, Limits) {
  EXPECT_NEAR(exact_bivariate_orthant(0.0, 1.3), normal_sf(1.3) * normal_sf(1.3), 1e-15);
  EXPECT_NEAR(exact_bivariate_orthant(1.0 - 1e-12, 1.3), normal_sf(1.3), 1e-6);
  EXPECT_THROW(exact_bivariate_orthant(1.0, 1.0), Error);
}

TEST(ClassicalBbm, SmallLevelAgreesWithCrudeReasoning) {
  // at a level reached almost surely by the first particle the estimate is near 1
  McConfig c = config(2000, 97);
  const auto e = estimate_classical_bbm(0.05, 0.0, 1.0, 0.01, c);
  EXPECT_GT(e.p, 0.8);
  const auto a = estimate_classical_bbm(2.0, 0.0, 1.0, 0.01, config(20000, 98));
  const auto b = estimate_classical_bbm(2.0, 0.0, 1.0, 0.01, config(20000, 98));
  EXPECT_EQ(a.p, b.p);
  // bounded below by the no-branching contribution
  EXPECT_GT(a.p + 3.0 * a.std_error, std::exp(-1.0) * bm_crossing_exact(2.0, 0.0, 1.0));
}

TEST(ClassicalBbm, SingleParticlePhaseOracle) {
  // E[exp(-tau_3); tau_3 <= 1] for the first passage tau_3 of level 3, by
  // high-precision quadrature of the first-passage density: the event before
  // the first split. Later phases only add to it.
  const double before_split = 0.0011631084979518319;
  const auto e = estimate_classical_bbm(3.0, 0.0, 1.0, 0.01, config(200000, 99));
  EXPECT_GT(e.p + 3.0 * e.std_error, before_split);
  EXPECT_LT(e.p - 3.0 * e.std_error, 1.15 * before_split);
}
