#pragma once

#include <sstream>

#include "fxdispatch/errors.hpp"

namespace fxd {

/// Gains and exponents of the consensus law plus integrator settings.
struct AlgorithmParams {
  double k1 = 5.0;
  double k2 = 5.0;
  double mu = 0.5;  // 0 < mu < 1
  double nu = 2.0;  // nu > 1
  double dt = 1e-3;
  double t_end = 200.0;
  double fp_tol = 1e-10;  // MW, power-equation residual
  int fp_max_iter = 200;
  double settle_tol = 1e-6;
  double settle_window = 1.0;  // s of simulated time below settle_tol
  bool stop_on_settle = false;

  bool operator==(const AlgorithmParams&) const = default;
};

inline void validate(const AlgorithmParams& p) {
  auto fail = [](const char* what) { throw ConfigError(std::string("params: ") + what); };
  if (!(p.k1 > 0.0)) fail("k1 must be > 0");
  if (!(p.k2 > 0.0)) fail("k2 must be > 0");
  if (!(p.mu > 0.0 && p.mu < 1.0)) fail("mu must lie in (0, 1)");
  if (!(p.nu > 1.0)) fail("nu must be > 1");
  if (!(p.dt > 0.0)) fail("dt must be > 0");
  if (!(p.t_end >= 0.0)) fail("t_end must be >= 0");
  if (!(p.fp_tol > 0.0)) fail("fp_tol must be > 0");
  if (p.fp_max_iter < 1) fail("fp_max_iter must be >= 1");
  if (!(p.settle_tol > 0.0)) fail("settle_tol must be > 0");
  if (!(p.settle_window >= 0.0)) fail("settle_window must be >= 0");
}

}  // namespace fxd
