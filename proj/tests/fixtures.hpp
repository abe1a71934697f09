#pragma once

#include <random>
#include <vector>

#include "fxdispatch/fxdispatch.hpp"

namespace fxd::testing {

inline std::vector<GeneratorSpec> reference_generators() {
  return {{53, 1.21, 0.094, 170, 170},
          {34, 3.47, 0.082, 110, 110},
          {45, 2.24, 0.086, 140, 140},
          {78, 2.55, 0.105, 180, 180}};
}

inline Matrix reference_b() {
  Matrix b(4, 4);
  b << 0.1200, 0.0286, 0.0481, 0.0321,
       0.0286, 0.1341, 0.0511, 0.1251,
       0.0481, 0.0511, 0.1539, 0.1463,
       0.0321, 0.1251, 0.1463, 0.1612;
  return b * 1e-3;
}

inline KronLossModel reference_loss() {
  Vector b0(4);
  b0 << 2.0e-3, 1.0e-3, 2.5e-3, 1.5e-3;
  return KronLossModel(reference_b(), b0, 4.0);
}

inline Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

// Random symmetric nonnegative loss model with entries of realistic magnitude.
inline KronLossModel random_loss(std::mt19937_64& rng, Eigen::Index n, double scale = 2e-4) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix b(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) b(i, j) = b(j, i) = scale * u(rng);
  Vector b0(n);
  for (Eigen::Index i = 0; i < n; ++i) b0[i] = 3e-3 * u(rng);
  return KronLossModel(b, b0, 5.0 * u(rng));
}

inline std::vector<GeneratorSpec> random_generators(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> a(10, 100), b(1, 5), c(0.05, 0.15), p(50, 250);
  std::vector<GeneratorSpec> g(n);
  for (auto& x : g) {
    x.a = a(rng);
    x.b = b(rng);
    x.c = c(rng);
    x.p0 = x.d0 = p(rng);
  }
  return g;
}

inline Vector random_power(std::mt19937_64& rng, Eigen::Index n, double hi = 300.0) {
  std::uniform_real_distribution<double> u(0.0, hi);
  Vector p(n);
  for (Eigen::Index i = 0; i < n; ++i) p[i] = u(rng);
  return p;
}

}  // namespace fxd::testing
