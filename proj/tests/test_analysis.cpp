#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <cmath>

#include "fixtures.hpp"

using namespace fxd;
using namespace fxd::testing;

namespace {
const CostSummary kReferenceCs{0.164, 1.21};

AlgorithmParams default_params() { return AlgorithmParams{}; }

bool all_true(const std::vector<bool>& v) {
  for (bool b : v)
    if (!b) return false;
  return true;
}
}  // namespace

TEST(CheckA1, ReferenceModelPasses) { EXPECT_TRUE(all_true(check_a1(reference_loss(), 600.0))); }

TEST(CheckA1, LosslessPassesForAnyDemand) {
  for (double d : {1e-3, 1.0, 600.0, 1e6}) EXPECT_TRUE(all_true(check_a1(KronLossModel::lossless(3), d)));
}

TEST(CheckA1, ScaledModelFails) {
  const auto m = reference_loss();
  const KronLossModel scaled(m.B() * 1e4, m.B0(), m.B00());
  const auto ok = check_a1(scaled, 600.0);
  EXPECT_FALSE(all_true(ok));
}

TEST(CheckA2, ReferenceValue) {
  const auto r = check_a2(reference_loss(), kReferenceCs);
  EXPECT_TRUE(r.ok);
  EXPECT_NEAR(r.value, 0.1641, 5e-5);
  EXPECT_DOUBLE_EQ(r.rho, 1e-3);
  EXPECT_NEAR(r.b1, -1.61e-5, 1e-7);
  EXPECT_NEAR(r.b1, -1.61155654e-5, 1e-12);
  EXPECT_NEAR(r.bN, 3.86547472e-4, 1e-12);
}

TEST(CheckA2, LosslessUnitValue) {
  const auto r = check_a2(KronLossModel::lossless(3), CostSummary{1.0, 1.0});
  EXPECT_TRUE(r.ok);
  EXPECT_DOUBLE_EQ(r.value, 1.0);
}

TEST(CheckA2, NegativeDeltaUsesLargestEigenvalue) {
  const auto r = check_a2(reference_loss(), CostSummary{0.164, -1.0});
  Eigen::SelfAdjointEigenSolver<Matrix> ref(reference_b());
  EXPECT_NEAR(r.value, 1.001 * 0.164 - ref.eigenvalues()[3], 1e-14);
  EXPECT_NEAR(r.value, 0.163777452528272, 1e-13);
}

TEST(CheckA2, FailsWhenNegativeDeltaDominates) {
  const auto r = check_a2(reference_loss(), CostSummary{0.164, -1000.0});
  EXPECT_FALSE(r.ok);
  EXPECT_LT(r.value, 0.0);
}

TEST(CheckA2, ZeroDeltaThrows) {
  EXPECT_THROW(check_a2(reference_loss(), CostSummary{0.164, 0.0}), AssumptionViolation);
}

TEST(SMatrix, ReferenceMatrixToFourDecimals) {
  Matrix printed(4, 4);
  printed << 0.1646, 0.0000, 0.0001, 0.0000,
             0.0000, 0.1645, 0.0001, 0.0002,
             0.0001, 0.0001, 0.1648, 0.0002,
             0.0000, 0.0002, 0.0002, 0.1646;
  const auto s = build_s_matrix(reference_loss(), kReferenceCs);
  for (Eigen::Index i = 0; i < 4; ++i)
    for (Eigen::Index j = 0; j < 4; ++j) EXPECT_NEAR(s.S(i, j), printed(i, j), 5e-5 + 1e-15) << i << "," << j;
  EXPECT_NEAR(s.tau[0], 0.1644, 5e-5);
  EXPECT_EQ(s.S, s.S.transpose());
}

TEST(SMatrix, EntriesFollowDefinition) {
  const auto m = reference_loss();
  const auto s = build_s_matrix(m, kReferenceCs);
  for (Eigen::Index i = 0; i < 4; ++i)
    for (Eigen::Index j = 0; j < 4; ++j) {
      const double expected = i == j ? (1 + m.B0()[i]) * 0.164 + 2 * m.B()(i, i) * 1.21 : m.B()(i, j) * 1.21;
      EXPECT_DOUBLE_EQ(s.S(i, j), expected);
    }
}

TEST(SMatrix, LosslessIsScaledIdentity) {
  const auto s = build_s_matrix(KronLossModel::lossless(3), CostSummary{0.7, 1.0});
  EXPECT_EQ(s.S, Matrix(0.7 * Matrix::Identity(3, 3)));
  for (Eigen::Index i = 0; i < 3; ++i) EXPECT_NEAR(s.tau[i], 0.7, 1e-15);
}

TEST(SMatrix, TwoByTwoClosedForm) {
  const double beta = 3e-4, gamma = 1e-4, sigma = 0.2, delta = 1.5;
  Matrix b(2, 2);
  b << beta, gamma, gamma, beta;
  const auto s = build_s_matrix(KronLossModel(b, Vector::Zero(2), 0.0), CostSummary{sigma, delta});
  EXPECT_NEAR(s.tau[0], sigma + 2 * beta * delta - gamma * delta, 1e-15);
  EXPECT_NEAR(s.tau[1], sigma + 2 * beta * delta + gamma * delta, 1e-15);
}

TEST(AppendixBounds, ReferenceModelAtInitialPowers) {
  const auto r = verify_appendix_bounds(reference_loss(), reference_generators(), vec({170, 110, 140, 180}));
  EXPECT_TRUE(r.r1);
  EXPECT_TRUE(r.r2);
  EXPECT_TRUE(r.r3);
  EXPECT_TRUE(r.r4);
  EXPECT_TRUE(r.r5_lower);
  EXPECT_TRUE(r.r5_weyl);
  // The upper half with b_N delta is violated here: the diagonal of S carries
  // 2 B_ii delta, which pushes tau_N above sigma (1 + B_i0) + b_N delta.
  EXPECT_FALSE(r.r5_upper);
  EXPECT_FALSE(r.r5);
}

TEST(AppendixBounds, WeylSandwichAndLowerHalfHoldOnRandomModels) {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 2000; ++trial) {
    const Eigen::Index n = 2 + trial % 5;
    const auto m = random_loss(rng, n);
    const auto g = random_generators(rng, static_cast<std::size_t>(n));
    const auto r = verify_appendix_bounds(m, g, random_power(rng, n));
    EXPECT_TRUE(r.r1 && r.r2 && r.r3 && r.r4);
    EXPECT_TRUE(r.r5_lower);
    EXPECT_TRUE(r.r5_weyl);
  }
}

TEST(AppendixBounds, LosslessCollapse) {
  const auto g = reference_generators();
  const auto r = verify_appendix_bounds(KronLossModel::lossless(4), g, vec({10, 20, 30, 40}));
  EXPECT_TRUE(r.all());
  EXPECT_EQ(r.jacobians.dF, Matrix(Matrix::Zero(4, 4)));
  EXPECT_EQ(r.jacobians.dM, Matrix(Matrix::Zero(4, 4)));
  for (Eigen::Index i = 0; i < 4; ++i) {
    EXPECT_DOUBLE_EQ(r.jacobians.Q(i, i), g[static_cast<std::size_t>(i)].curvature());
    EXPECT_GE(r.jacobians.Q(i, i), 0.164);
  }
  EXPECT_EQ(r.s.S, Matrix(0.164 * Matrix::Identity(4, 4)));
}

TEST(AppendixBounds, NegativePowerRejected) {
  EXPECT_THROW(verify_appendix_bounds(reference_loss(), reference_generators(), vec({170, -1, 140, 180})),
               std::invalid_argument);
}

TEST(AppendixBounds, JacobiansMatchFiniteDifferences) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index n = 2 + trial % 5;
    const auto m = random_loss(rng, n);
    const auto g = random_generators(rng, static_cast<std::size_t>(n));
    const Vector p = random_power(rng, n);
    const auto jac = loss_cost_jacobians(m, g, p);
    const double h = 1e-4;
    for (Eigen::Index k = 0; k < n; ++k) {
      Vector up = p, dn = p;
      up[k] += h;
      dn[k] -= h;
      const Vector dF = (loss_cost_product(m, g, up) - loss_cost_product(m, g, dn)) / (2 * h);
      const Vector dM = (own_share_cost_product(m, g, up) - own_share_cost_product(m, g, dn)) / (2 * h);
      for (Eigen::Index i = 0; i < n; ++i) {
        EXPECT_NEAR(jac.dF(i, k), dF[i], 1e-6);
        EXPECT_NEAR(jac.dM(i, k), dM[i], 1e-6);
      }
    }
  }
}

TEST(SettlingBound, ReferenceValue) {
  const auto s = build_s_matrix(reference_loss(), kReferenceCs);
  const auto b = settling_bound(default_params(), 1e-3, s.tau[0], 2 - std::sqrt(2.0), 4);
  EXPECT_NEAR(b.ts, 154.47, 0.5);
  EXPECT_NEAR(b.ts, 154.47608566, 1e-6);
  EXPECT_DOUBLE_EQ(b.p, 0.875);
  EXPECT_DOUBLE_EQ(b.q, 1.25);
  EXPECT_NEAR(settling_bound(default_params(), 1e-3, 0.1644, 0.5858, 4).ts, 154.47, 0.5);
}

TEST(SettlingBound, DoublingGainsHalvesBound) {
  auto p = default_params();
  const double base = settling_bound(p, 1e-3, 0.1644, 0.5858, 4).ts;
  p.k1 *= 2;
  p.k2 *= 2;
  EXPECT_NEAR(settling_bound(p, 1e-3, 0.1644, 0.5858, 4).ts, base / 2, 1e-12 * base);
}

TEST(SettlingBound, UnitArgumentsClosedForm) {
  AlgorithmParams p;
  p.k1 = p.k2 = 1;
  // (1+rho) tau1 phi2^2 = 1 with rho = 0, tau1 = 1, phi2 = 1.
  EXPECT_NEAR(settling_bound(p, 0.0, 1.0, 1.0, 1).ts, 12.0928608056483, 1e-12);
}

TEST(SettlingBound, FasterExponentVariant) {
  auto p = default_params();
  p.mu = 0.9;
  const auto s = build_s_matrix(reference_loss(), kReferenceCs);
  EXPECT_NEAR(settling_bound(p, 1e-3, s.tau[0], 2 - std::sqrt(2.0), 4).ts, 262.416510805, 1e-6);
}

TEST(SettlingBound, MonotoneDecreasingInEachArgument) {
  const auto p = default_params();
  const double base = settling_bound(p, 1e-3, 0.1644, 0.5858, 4).ts;
  auto k1 = p;
  k1.k1 *= 1.5;
  auto k2 = p;
  k2.k2 *= 1.5;
  EXPECT_LT(settling_bound(k1, 1e-3, 0.1644, 0.5858, 4).ts, base);
  EXPECT_LT(settling_bound(k2, 1e-3, 0.1644, 0.5858, 4).ts, base);
  EXPECT_LT(settling_bound(p, 1e-3, 0.2, 0.5858, 4).ts, base);
  EXPECT_LT(settling_bound(p, 1e-3, 0.1644, 0.7, 4).ts, base);
}

TEST(SettlingBound, RejectsUndefinedCases) {
  EXPECT_THROW(settling_bound(default_params(), 1e-3, 0.0, 0.5858, 4), AssumptionViolation);
  EXPECT_THROW(settling_bound(default_params(), 1e-3, 0.1644, 0.0, 4), AssumptionViolation);
  auto p = default_params();
  p.mu = 1.0;
  EXPECT_THROW(settling_bound(p, 1e-3, 0.1644, 0.5858, 4), std::invalid_argument);
}

TEST(PowerMean, EqualityCases) {
  const double pair[] = {1.0, 1.0};
  EXPECT_TRUE(power_mean_check(pair, 2.0));
  const double single[] = {4.0};
  for (double m : {0.3, 1.0, 2.5}) EXPECT_TRUE(power_mean_check(single, m));
}

TEST(PowerMean, RandomDraws) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> z(1 + static_cast<std::size_t>(trial % 8));
    for (auto& x : z) x = u(rng);
    for (double m : {0.3, 0.75, 1.5, 3.0}) EXPECT_TRUE(power_mean_check(z, m));
  }
}

TEST(Assumptions, ReferenceConfigurationPassesAllGates) {
  const auto r = assess_assumptions(reference_generators(), reference_loss(), LocalTopology::path(4), vec({170, 110, 140, 180}));
  EXPECT_TRUE(r.all_passed());
  EXPECT_NEAR(r.a2_value, 0.1641, 5e-5);
}

TEST(Assumptions, DisconnectedTopologyFails) {
  const auto r = assess_assumptions(reference_generators(), reference_loss(), LocalTopology(4, {{0, 1, 1}, {2, 3, 1}}),
                                    vec({170, 110, 140, 180}));
  EXPECT_FALSE(r.connected_ok);
  EXPECT_FALSE(r.all_passed());
}

TEST(Assumptions, Tau1PositiveWheneverA2Holds) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 500; ++trial) {
    const Eigen::Index n = 2 + trial % 5;
    const auto m = random_loss(rng, n, 5e-2);
    const auto g = random_generators(rng, static_cast<std::size_t>(n));
    const auto cs = cost_summary(g);
    if (check_a2(m, cs).ok) {
      EXPECT_GT(build_s_matrix(m, cs).tau[0], 0.0);
    }
  }
}
