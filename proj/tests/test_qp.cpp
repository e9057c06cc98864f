#include <gtest/gtest.h>

#include <limits>
#include <random>

#include "bdt/qp.hpp"
#include "helpers.hpp"

using namespace bdt;
using bdt::testing::binary3;
using bdt::testing::random_spec;

namespace {

// Exhaustive active-set enumeration: the unique index set with positive
// multipliers whose induced point is feasible.
double enumerate_value(const Eigen::MatrixXd& sigma, const Eigen::VectorXd& a, int* matches) {
  const int d = static_cast<int>(a.size());
  double best = std::numeric_limits<double>::quiet_NaN();
  *matches = 0;
  for (int mask = 1; mask < (1 << d); ++mask) {
    std::vector<Eigen::Index> I;
    for (int i = 0; i < d; ++i) {
      if (mask & (1 << i)) I.push_back(i);
    }
    const Eigen::VectorXd lamI = sigma(I, I).llt().solve(a(I));
    if ((lamI.array() <= 0.0).any()) continue;
    Eigen::VectorXd lam = Eigen::VectorXd::Zero(d);
    lam(I) = lamI;
    const Eigen::VectorXd x = sigma * lam;
    if (((x - a).array() < -1e-12).any()) continue;
    best = lam.dot(x);
    ++*matches;
  }
  return best;
}

Eigen::MatrixXd random_pd(std::mt19937_64& gen, int d) {
  std::normal_distribution<double> z;
  Eigen::MatrixXd A(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) A(i, j) = z(gen);
  return A * A.transpose() + 0.1 * Eigen::MatrixXd::Identity(d, d);
}

Eigen::VectorXd random_constraint(std::mt19937_64& gen, int d) {
  std::normal_distribution<double> z;
  Eigen::VectorXd a(d);
  do {
    for (int i = 0; i < d; ++i) a[i] = z(gen);
  } while ((a.array() <= 0.0).all());
  return a;
}

}  // namespace

TEST(QP, IdentityAllActive) {
  const auto sol = solve<double>(Eigen::MatrixXd::Identity(3, 3), Eigen::VectorXd::Ones(3));
  EXPECT_EQ(sol.I, (std::vector<Eigen::Index>{0, 1, 2}));
  EXPECT_TRUE(sol.J.empty());
  EXPECT_NEAR(sol.value, 3.0, 1e-15);
  EXPECT_LT((sol.a_tilde - Eigen::VectorXd::Ones(3)).norm(), 1e-15);
}

TEST(QP, BinaryTreeFullSet) {
  const Eigen::MatrixXd sigma = sigma_matrix(3.0, binary3());
  const auto sol = solve<double>(sigma, Eigen::VectorXd::Ones(4));
  EXPECT_EQ(sol.I.size(), 4u);
  EXPECT_NEAR(sol.value, 4.0 / 7.0, 1e-12);
  EXPECT_LT((sol.a_tilde - Eigen::VectorXd::Ones(4)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_TRUE(verify(sigma, Eigen::VectorXd::Ones(4).eval(), sol).all());
}

TEST(QP, CorrelatedPair) {
  Eigen::Matrix2d s;
  s << 1.0, 0.9, 0.9, 1.0;
  Eigen::Vector2d a(1.0, -5.0);
  const auto sol = solve<double>(s, a);
  EXPECT_EQ(sol.I, (std::vector<Eigen::Index>{0}));
  EXPECT_EQ(sol.J, (std::vector<Eigen::Index>{1}));
  EXPECT_NEAR(sol.a_tilde[0], 1.0, 1e-14);
  EXPECT_NEAR(sol.a_tilde[1], 0.9, 1e-14);
  EXPECT_NEAR(sol.value, 1.0, 1e-14);
  EXPECT_EQ(sol.lambda[1], 0.0);
  int matches = 0;
  EXPECT_NEAR(enumerate_value(s, a, &matches), 1.0, 1e-14);
  EXPECT_EQ(matches, 1);
}

TEST(QP, Errors) {
  Eigen::Matrix2d indefinite;
  indefinite << 1.0, 2.0, 2.0, 1.0;
  try {
    solve<double>(indefinite, Eigen::Vector2d(1.0, 1.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotPositiveDefinite);
  }
  try {
    solve<double>(Eigen::MatrixXd::Identity(2, 2), Eigen::Vector2d(0.0, -1.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AllNonpositiveConstraint);
  }
}

TEST(QP, VerifyDetectsInfeasibility) {
  Eigen::Matrix2d s;
  s << 1.0, 0.9, 0.9, 1.0;
  const Eigen::Vector2d a(1.0, -5.0);
  auto sol = solve<double>(s, a);
  EXPECT_TRUE(verify<double>(s, a, sol).all());
  sol.a_tilde[1] = -6.0;
  const QPCheck check = verify<double>(s, a, sol);
  EXPECT_FALSE(check.feasible);
  EXPECT_FALSE(check.all());
}

TEST(QP, AgreesWithEnumeration) {
  std::mt19937_64 gen(31);
  for (int rep = 0; rep < 400; ++rep) {
    const int d = 1 + rep % 4;
    const Eigen::MatrixXd s = random_pd(gen, d);
    const Eigen::VectorXd a = random_constraint(gen, d);
    const auto sol = solve<double>(s, a);
    int matches = 0;
    const double oracle = enumerate_value(s, a, &matches);
    ASSERT_EQ(matches, 1) << "rep " << rep;
    EXPECT_NEAR(sol.value, oracle, 1e-9 * std::max(1.0, oracle));
    EXPECT_TRUE(verify(s, a, sol).all()) << "rep " << rep;
  }
}

TEST(QP, GridSearchOracle) {
  std::mt19937_64 gen(37);
  for (int rep = 0; rep < 3; ++rep) {
    Eigen::MatrixXd s = random_pd(gen, 2);
    s /= s.trace() / 2.0;
    s.diagonal().array() += 0.3;
    const Eigen::VectorXd a = random_constraint(gen, 2);
    const Eigen::MatrixXd inv = s.inverse();
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 5000; ++i) {
      const double x0 = a[0] + 1e-3 * i;
      for (int j = 0; j <= 5000; ++j) {
        const double x1 = a[1] + 1e-3 * j;
        best = std::min(best, inv(0, 0) * x0 * x0 + 2.0 * inv(0, 1) * x0 * x1 + inv(1, 1) * x1 * x1);
      }
    }
    EXPECT_NEAR(solve<double>(s, a).value, best, 1e-6);
  }
}

TEST(QP, TreeInstancesUseFullSet) {
  std::mt19937_64 gen(41);
  for (int rep = 0; rep < 40; ++rep) {
    const TreeSpec t = random_spec(gen);
    const Eigen::MatrixXd s = sigma_matrix(t.horizon(), t);
    const auto sol = solve<double>(s, Eigen::VectorXd::Ones(s.rows()));
    EXPECT_EQ(static_cast<std::int64_t>(sol.I.size()), t.branch_count());
    const double expected = static_cast<double>(t.branch_count()) / eigenstructure(t.horizon(), t).top();
    EXPECT_NEAR(sol.value / expected, 1.0, 1e-9);
  }
}

TEST(QP, PermutationEquivariance) {
  std::mt19937_64 gen(43);
  for (int rep = 0; rep < 50; ++rep) {
    const int d = 2 + rep % 3;
    const Eigen::MatrixXd s = random_pd(gen, d);
    const Eigen::VectorXd a = random_constraint(gen, d);
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(d));
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    std::shuffle(perm.begin(), perm.end(), gen);
    const auto direct = solve<double>(s, a);
    const Eigen::MatrixXd sp = s(perm, perm);
    const Eigen::VectorXd ap = a(perm);
    const auto permuted = solve<double>(sp, ap);
    Eigen::VectorXd back(d);
    for (int i = 0; i < d; ++i) back[perm[static_cast<std::size_t>(i)]] = permuted.a_tilde[i];
    EXPECT_LT((back - direct.a_tilde).cwiseAbs().maxCoeff(),
              1e-12 * std::max(1.0, direct.a_tilde.cwiseAbs().maxCoeff()));
  }
}

TEST(QP, LongDoubleScalar) {
  using M = MatrixX<long double>;
  using V = VectorX<long double>;
  const M s = sigma_matrix<long double>(3.0, binary3());
  const auto sol = solve<long double>(s, V::Ones(4));
  EXPECT_NEAR(static_cast<double>(sol.value), 4.0 / 7.0, 1e-15);
}
