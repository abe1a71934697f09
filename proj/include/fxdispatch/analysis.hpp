#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "fxdispatch/errors.hpp"
#include "fxdispatch/grid_model.hpp"
#include "fxdispatch/linalg.hpp"
#include "fxdispatch/params.hpp"
#include "fxdispatch/topology.hpp"

namespace fxd {

// Row-sum sufficient condition for dP_Li/dP_i < 1 whenever the total output
// stays near the aggregate demand dbar:
//   sum_{j != i} B_ij + 2 B_ii + B_i0 / dbar < 1 / dbar.
inline std::vector<bool> check_a1(const KronLossModel& m, double dbar) {
  if (!(dbar > 0.0)) throw std::invalid_argument("check_a1: dbar must be > 0");
  const auto& b = m.B();
  std::vector<bool> ok(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const double lhs = b.row(i).sum() + b(i, i) + m.B0()[i] / dbar;
    ok[static_cast<std::size_t>(i)] = lhs < 1.0 / dbar;
  }
  return ok;
}

// 0 <= dP_Li/dP_i < 1 evaluated at a concrete operating point.
inline std::vector<bool> check_a1_at(const KronLossModel& m, const Vector& p) {
  const Vector d = own_loss_derivatives(m, p);
  std::vector<bool> ok(static_cast<std::size_t>(d.size()));
  for (Eigen::Index i = 0; i < d.size(); ++i) ok[static_cast<std::size_t>(i)] = d[i] >= 0.0 && d[i] < 1.0;
  return ok;
}

struct A2Check {
  bool ok = false;
  double value = 0.0;  // (1+rho) sigma + b1 delta  or  (1+rho) sigma + bN delta
  double rho = 0.0;
  double b1 = 0.0;
  double bN = 0.0;
};

inline A2Check check_a2(const KronLossModel& m, const CostSummary& s) {
  if (s.delta == 0.0) throw AssumptionViolation("check_a2: delta is zero");
  const Vector eig = symmetric_eigenvalues(m.B());
  A2Check r;
  r.rho = m.B0().minCoeff();
  r.b1 = eig[0];
  r.bN = eig[eig.size() - 1];
  const double extreme = s.delta > 0.0 ? r.b1 : r.bN;
  r.value = (1.0 + r.rho) * s.sigma + extreme * s.delta;
  r.ok = r.value > 0.0;
  return r;
}

/// Full set of standing-assumption gates for one configuration.
struct AssumptionReport {
  bool connected_ok = false;
  bool assumption2_ok = false;           // sigma > 0 and delta != 0
  std::vector<bool> a1_per_generator;    // 0 <= dP_Li/dP_i < 1 at the initial powers
  bool a1_ok = false;
  std::vector<bool> remark2_per_generator;
  bool remark2_ok = false;
  bool a2_ok = false;
  double a2_value = std::numeric_limits<double>::quiet_NaN();
  double sigma = std::numeric_limits<double>::quiet_NaN();
  double delta = std::numeric_limits<double>::quiet_NaN();
  double rho = std::numeric_limits<double>::quiet_NaN();
  double b1 = std::numeric_limits<double>::quiet_NaN();
  double bN = std::numeric_limits<double>::quiet_NaN();

  bool all_passed() const {
    return connected_ok && assumption2_ok && a1_ok && remark2_ok && a2_ok;
  }
};

inline AssumptionReport assess_assumptions(std::span<const GeneratorSpec> gens, const KronLossModel& m,
                                           const LocalTopology& top, const Vector& p_initial) {
  AssumptionReport r;
  r.connected_ok = check_connected(top);

  double dbar = 0.0;
  for (const auto& g : gens) dbar += g.d0;
  if (dbar > 0.0) {
    r.remark2_per_generator = check_a1(m, dbar);
    r.remark2_ok = std::all_of(r.remark2_per_generator.begin(), r.remark2_per_generator.end(),
                               [](bool b) { return b; });
  }
  r.a1_per_generator = check_a1_at(m, p_initial);
  r.a1_ok = std::all_of(r.a1_per_generator.begin(), r.a1_per_generator.end(), [](bool b) { return b; });

  try {
    const CostSummary s = cost_summary(gens);
    r.sigma = s.sigma;
    r.delta = s.delta;
    r.assumption2_ok = s.sigma > 0.0;
    const A2Check a2 = check_a2(m, s);
    r.a2_ok = a2.ok;
    r.a2_value = a2.value;
    r.rho = a2.rho;
    r.b1 = a2.b1;
    r.bN = a2.bN;
  } catch (const AssumptionViolation&) {
    r.assumption2_ok = false;
    const Vector eig = symmetric_eigenvalues(m.B());
    r.rho = m.B0().minCoeff();
    r.b1 = eig[0];
    r.bN = eig[eig.size() - 1];
    double min_c = gens.empty() ? 0.0 : gens[0].c;
    for (const auto& g : gens) min_c = std::min(min_c, g.c);
    r.sigma = 2.0 * min_c;
    r.delta = 0.0;
  }
  return r;
}

/// Symmetric comparison matrix with S_ii = (1 + B_i0) sigma + 2 B_ii delta and
/// S_ij = B_ij delta; tau holds its eigenvalues in ascending order.
struct SMatrix {
  Matrix S;
  Vector tau;
};

inline SMatrix build_s_matrix(const KronLossModel& m, const CostSummary& s) {
  if (!(s.sigma > 0.0)) throw AssumptionViolation("build_s_matrix: sigma must be > 0");
  SMatrix out;
  out.S = s.delta * m.B();
  for (Eigen::Index i = 0; i < m.size(); ++i)
    out.S(i, i) = (1.0 + m.B0()[i]) * s.sigma + 2.0 * m.B()(i, i) * s.delta;
  out.tau = symmetric_eigenvalues(out.S);
  return out;
}

/// Analytic Jacobians of F = grad P_L (.) grad C and M = grad R (.) grad C,
/// with grad R_i = B_ii P_i + B_i0 / 2, and Q = hess C + 0.5 dF + dM.
struct LossCostJacobians {
  Matrix dF;
  Matrix dM;  // diagonal
  Matrix Q;
};

inline Vector loss_cost_product(const KronLossModel& m, std::span<const GeneratorSpec> gens,
                                const Vector& p) {
  return (loss_gradient(m, p).array() * marginal_costs(gens, p).array()).matrix();
}

inline Vector own_share_cost_product(const KronLossModel& m, std::span<const GeneratorSpec> gens,
                                     const Vector& p) {
  const Vector r = (m.B().diagonal().array() * p.array() + 0.5 * m.B0().array()).matrix();
  return (r.array() * marginal_costs(gens, p).array()).matrix();
}

inline LossCostJacobians loss_cost_jacobians(const KronLossModel& m, std::span<const GeneratorSpec> gens,
                                             const Vector& p) {
  const Eigen::Index n = m.size();
  const Vector lambda = marginal_costs(gens, p);
  const Vector grad_pl = loss_gradient(m, p);
  LossCostJacobians j;
  j.dF.resize(n, n);
  j.dM = Matrix::Zero(n, n);
  j.Q.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double curv = gens[static_cast<std::size_t>(i)].curvature();
    for (Eigen::Index k = 0; k < n; ++k) j.dF(i, k) = 2.0 * m.B()(i, k) * lambda[i];
    j.dF(i, i) += grad_pl[i] * curv;
    j.dM(i, i) = m.B()(i, i) * lambda[i] + (m.B()(i, i) * p[i] + 0.5 * m.B0()[i]) * curv;
  }
  j.Q = 0.5 * j.dF + j.dM;
  for (Eigen::Index i = 0; i < n; ++i) j.Q(i, i) += gens[static_cast<std::size_t>(i)].curvature();
  return j;
}

struct AppendixBoundReport {
  bool r1 = false;  // dF lower bounds
  bool r2 = false;  // dM diagonal lower bounds
  bool r3 = false;  // Q lower bounds
  bool r4 = false;  // S <= Q elementwise
  bool r5 = false;  // eigenvalue sandwich with extremes of delta*B, sorted pairing
  bool r5_lower = false;
  bool r5_upper = false;
  bool r5_index_pairing = false;  // same sandwich with tau_i paired to generator i
  // S - diag(sigma (1 + B_i0)) is delta (B + diag B), not delta B, so the
  // sandwich that Weyl's inequalities actually guarantee uses its spectrum.
  bool r5_weyl = false;
  LossCostJacobians jacobians;
  SMatrix s;

  bool all() const { return r1 && r2 && r3 && r4 && r5; }
};

/// Evaluates the elementwise and spectral bounds relating dF, dM, Q and S at
/// a nonnegative power vector. `slack` absorbs roundoff.
inline AppendixBoundReport verify_appendix_bounds(const KronLossModel& m, std::span<const GeneratorSpec> gens,
                                                  const Vector& p, double slack = 1e-12) {
  if ((p.array() < 0.0).any())
    throw std::invalid_argument("verify_appendix_bounds: power vector must be nonnegative");
  const CostSummary cs = cost_summary(gens);
  const double sigma = cs.sigma;
  const double delta = cs.delta;
  const Eigen::Index n = m.size();
  const auto& b = m.B();

  AppendixBoundReport r;
  r.jacobians = loss_cost_jacobians(m, gens, p);
  r.s = build_s_matrix(m, cs);
  const auto& j = r.jacobians;

  r.r1 = r.r2 = r.r3 = r.r4 = true;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < n; ++k) {
      if (i == k) {
        r.r1 &= j.dF(i, i) >= 2.0 * b(i, i) * delta + m.B0()[i] * sigma - slack;
        r.r2 &= j.dM(i, i) >= b(i, i) * delta + 0.5 * m.B0()[i] * sigma - slack;
        r.r3 &= j.Q(i, i) >= sigma + 2.0 * b(i, i) * delta + m.B0()[i] * sigma - slack;
      } else {
        r.r1 &= j.dF(i, k) >= 2.0 * b(i, k) * delta - slack;
        r.r2 &= j.dM(i, k) == 0.0;
        r.r3 &= j.Q(i, k) >= b(i, k) * delta - slack;
      }
      r.r4 &= r.s.S(i, k) <= j.Q(i, k) + slack;
    }
  }

  const Vector eig_b = symmetric_eigenvalues(b);
  const double lo = delta > 0.0 ? eig_b[0] * delta : eig_b[n - 1] * delta;
  const double hi = delta > 0.0 ? eig_b[n - 1] * delta : eig_b[0] * delta;
  Matrix shift = b;
  shift.diagonal() *= 2.0;
  const Vector eig_e = symmetric_eigenvalues(delta * shift);
  std::vector<double> base(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) base[static_cast<std::size_t>(i)] = sigma * (1.0 + m.B0()[i]);
  std::vector<double> sorted = base;
  std::sort(sorted.begin(), sorted.end());

  r.r5_lower = r.r5_upper = r.r5_index_pairing = r.r5_weyl = true;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = r.s.tau[i];
    const double ds = t - sorted[static_cast<std::size_t>(i)];
    const double du = t - base[static_cast<std::size_t>(i)];
    r.r5_lower &= ds >= lo - slack;
    r.r5_upper &= ds <= hi + slack;
    r.r5_index_pairing &= du >= lo - slack && du <= hi + slack;
    r.r5_weyl &= ds >= eig_e[0] - slack && ds <= eig_e[n - 1] + slack;
  }
  r.r5 = r.r5_lower && r.r5_upper;
  return r;
}

/// Coefficients of dV/dt <= -(alpha V^p + beta V^q) and the resulting
/// settling-time estimate 1/(alpha (1-p)) + 1/(beta (q-1)).
struct SettlingBound {
  double ts = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double p = 0.0;
  double q = 0.0;
};

inline SettlingBound settling_bound(const AlgorithmParams& params, double rho, double tau1, double phi2,
                                    std::size_t n) {
  if (!(params.mu > 0.0 && params.mu < 1.0)) throw std::invalid_argument("settling_bound: mu must lie in (0,1)");
  if (!(params.nu > 1.0)) throw std::invalid_argument("settling_bound: nu must be > 1");
  if (!(params.k1 > 0.0 && params.k2 > 0.0)) throw std::invalid_argument("settling_bound: gains must be > 0");
  if (!(phi2 > 0.0)) throw AssumptionViolation("settling_bound: phi2 must be > 0");
  if (!(tau1 > 0.0)) throw AssumptionViolation("settling_bound: tau1 <= 0, bound undefined");
  if (n == 0) throw std::invalid_argument("settling_bound: n must be positive");

  const double mu = params.mu;
  const double nu = params.nu;
  const double g = (1.0 + rho) * tau1 * phi2 * phi2;
  SettlingBound s;
  s.alpha = params.k1 * std::pow(g, 0.5 * (1.0 + mu)) * std::pow(2.0, 0.25 * (1.0 - mu));
  s.beta = params.k2 * std::pow(static_cast<double>(n), 0.5 * (1.0 - nu)) * std::pow(g, 0.5 * (1.0 + nu)) *
           std::pow(2.0, 0.25 * (1.0 - nu));
  s.p = 0.25 * (3.0 + mu);
  s.q = 0.25 * (3.0 + nu);
  s.ts = 1.0 / (s.alpha * (1.0 - s.p)) + 1.0 / (s.beta * (s.q - 1.0));
  return s;
}

// sum z_i^m >= (sum z_i)^m           for 0 < m <= 1
// sum z_i^m >= N^(1-m) (sum z_i)^m   for m > 1
inline bool power_mean_check(std::span<const double> zeta, double m, double rel_tol = 1e-12) {
  if (!(m > 0.0)) throw std::invalid_argument("power_mean_check: m must be > 0");
  double lhs = 0.0;
  double sum = 0.0;
  for (double z : zeta) {
    if (z < 0.0) throw std::invalid_argument("power_mean_check: entries must be nonnegative");
    lhs += std::pow(z, m);
    sum += z;
  }
  double rhs = std::pow(sum, m);
  if (m > 1.0) rhs *= std::pow(static_cast<double>(zeta.size()), 1.0 - m);
  return lhs >= rhs - rel_tol * std::max(std::abs(lhs), std::abs(rhs));
}

}  // namespace fxd
