#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <cmath>

#include "fixtures.hpp"

using namespace fxd;

TEST(Laplacian, SingleEdge) {
  const Matrix l = laplacian(LocalTopology(2, {{0, 1, 1.0}}));
  Matrix expected(2, 2);
  expected << 1, -1, -1, 1;
  EXPECT_EQ(l, expected);
}

TEST(Laplacian, PathIsTridiagonal) {
  const Matrix l = laplacian(LocalTopology::path(4));
  EXPECT_EQ(Vector(l.diagonal()), fxd::testing::vec({1, 2, 2, 1}));
  for (Eigen::Index i = 0; i + 1 < 4; ++i) {
    EXPECT_EQ(l(i, i + 1), -1.0);
    EXPECT_EQ(l(i + 1, i), -1.0);
  }
  EXPECT_EQ(l(0, 2), 0.0);
  EXPECT_EQ(l(0, 3), 0.0);
  EXPECT_EQ(l(1, 3), 0.0);
}

TEST(Laplacian, RelabelingPermutesRowsAndColumns) {
  const LocalTopology a(4, {{0, 1, 0.5}, {1, 2, 2.0}, {2, 3, 1.5}, {0, 3, 0.7}});
  const std::size_t perm[4] = {2, 0, 3, 1};
  std::vector<Edge> relabeled;
  for (const auto& e : a.edges()) relabeled.push_back({perm[e.i], perm[e.j], e.weight});
  const Matrix la = laplacian(a);
  const Matrix lb = laplacian(LocalTopology(4, relabeled));
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      EXPECT_EQ(lb(static_cast<Eigen::Index>(perm[i]), static_cast<Eigen::Index>(perm[j])),
                la(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
}

TEST(Laplacian, RowsSumToZeroOnRandomGraphs) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> w(0.1, 10.0);
  std::bernoulli_distribution keep(0.5);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(trial % 9);
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (keep(rng)) edges.push_back({i, j, w(rng)});
    const Matrix l = laplacian(LocalTopology(n, edges));
    EXPECT_LE((l * Vector::Ones(static_cast<Eigen::Index>(n))).lpNorm<Eigen::Infinity>(), 1e-12);
    EXPECT_EQ(l, l.transpose());
  }
}

TEST(Spectrum, PathAlgebraicConnectivity) {
  const auto s = spectrum(LocalTopology::path(4));
  EXPECT_NEAR(s.phi2, 2.0 - std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(s.phi2, 0.5858, 1e-4);
  EXPECT_NEAR(s.eigenvalues[0], 0.0, 1e-10);
}

TEST(Spectrum, CompleteGraph) {
  const auto s = spectrum(LocalTopology::complete(4));
  EXPECT_NEAR(s.eigenvalues[0], 0.0, 1e-10);
  for (Eigen::Index i = 1; i < 4; ++i) EXPECT_NEAR(s.eigenvalues[i], 4.0, 1e-12);
}

TEST(Spectrum, NullVectorIsAllOnes) {
  const auto s = spectrum(LocalTopology(5, {{0, 1, 1.0}, {1, 2, 3.0}, {2, 3, 0.5}, {3, 4, 2.0}, {0, 4, 1.0}}));
  const Vector v = s.eigenvectors.col(0);
  const Vector ones = Vector::Ones(5) / std::sqrt(5.0);
  EXPECT_NEAR(std::abs(v.dot(ones)), 1.0, 1e-12);
}

TEST(Spectrum, DisconnectedIsAssumptionViolation) {
  EXPECT_THROW(spectrum(LocalTopology(4, {{0, 1, 1.0}, {2, 3, 1.0}})), AssumptionViolation);
}

TEST(Spectrum, AgreesWithIndependentEigensolver) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> w(0.1, 5.0);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(trial % 12);
    std::vector<Edge> edges;
    for (std::size_t k = 0; k + 1 < n; ++k) edges.push_back({k, k + 1, w(rng)});
    std::uniform_int_distribution<std::size_t> node(0, n - 1);
    for (int extra = 0; extra < 3; ++extra) {
      std::size_t i = node(rng), j = node(rng);
      if (i == j || j == i + 1 || i == j + 1) continue;
      bool dup = false;
      for (const auto& e : edges) dup |= (e.i == std::min(i, j) && e.j == std::max(i, j));
      if (!dup) edges.push_back({std::min(i, j), std::max(i, j), w(rng)});
    }
    const LocalTopology top(n, edges);
    const auto s = spectrum(top);
    Eigen::SelfAdjointEigenSolver<Matrix> ref(laplacian(top));
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(n); ++k) {
      EXPECT_NEAR(s.eigenvalues[k], ref.eigenvalues()[k], 1e-10);
      EXPECT_GE(s.eigenvalues[k], -1e-10);
    }
    EXPECT_NEAR(s.phi2, ref.eigenvalues()[1], 1e-10);
  }
}

TEST(CheckConnected, Cases) {
  EXPECT_TRUE(check_connected(LocalTopology::path(6)));
  EXPECT_FALSE(check_connected(LocalTopology(4, {{0, 1, 1.0}, {2, 3, 1.0}})));
  EXPECT_TRUE(check_connected(LocalTopology(1, {})));
}

TEST(LocalTopology, StructuralValidation) {
  EXPECT_THROW(LocalTopology(0, {}), ConfigError);
  EXPECT_THROW(LocalTopology(3, {{1, 1, 1.0}}), ConfigError);
  EXPECT_THROW(LocalTopology(3, {{0, 3, 1.0}}), ConfigError);
  EXPECT_THROW(LocalTopology(3, {{0, 1, 0.0}}), ConfigError);
  EXPECT_THROW(LocalTopology(3, {{0, 1, -2.0}}), ConfigError);
  EXPECT_THROW(LocalTopology(3, {{0, 1, 1.0}, {1, 0, 1.0}}), ConfigError);
}

TEST(LocalTopology, NormalisesEdgeOrder) {
  const LocalTopology t(3, {{2, 0, 1.5}});
  EXPECT_EQ(t.edges()[0].i, 0u);
  EXPECT_EQ(t.edges()[0].j, 2u);
}

TEST(JacobiEigen, MatchesIndependentSolverOnRandomSymmetric) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index n = 1 + trial % 10;
    Matrix a(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i; j < n; ++j) a(i, j) = a(j, i) = g(rng);
    const auto mine = jacobi_eigen(a);
    Eigen::SelfAdjointEigenSolver<Matrix> ref(a);
    for (Eigen::Index k = 0; k < n; ++k) EXPECT_NEAR(mine.values[k], ref.eigenvalues()[k], 1e-10);
    const Matrix recon = mine.vectors * mine.values.asDiagonal() * mine.vectors.transpose();
    EXPECT_LE((recon - a).norm(), 1e-10 * (1.0 + a.norm()));
    EXPECT_LE((mine.vectors.transpose() * mine.vectors - Matrix::Identity(n, n)).norm(), 1e-10);
  }
}
