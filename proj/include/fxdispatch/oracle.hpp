#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>

#include "fxdispatch/errors.hpp"
#include "fxdispatch/grid_model.hpp"

namespace fxd {

/// How marginal costs are weighted before they are required to agree.
enum class Coordination {
  LossAugmented,  // (1 + dP_Li/dP_i) lambda_i, the consensus law's fixed point
  PenaltyFactor,  // lambda_i / (1 - dP_Li/dP_i)
  EqualLambda,    // lambda_i, losses enter only through the balance constraint
};

struct EquilibriumSolution {
  Vector P_star;
  double mu_star = 0.0;
  double cost_star = 0.0;
  double loss_star = 0.0;
  double constraint_residual = 0.0;
  double consensus_residual = 0.0;
  int iterations = 0;
};

namespace detail {

struct CoordinationTerms {
  Vector y;     // weighted marginal costs
  Matrix dy;    // dy_i / dP_j
};

inline CoordinationTerms coordination_terms(std::span<const GeneratorSpec> gens, const KronLossModel& m,
                                            const Vector& p, Coordination mode) {
  const Eigen::Index n = p.size();
  const Vector lambda = marginal_costs(gens, p);
  const Vector own = own_loss_derivatives(m, p);
  // d(own_i)/dP_j = B_ij off the diagonal, 2 B_ii on it.
  Matrix d_own = m.B();
  d_own.diagonal() *= 2.0;

  CoordinationTerms t;
  t.y.resize(n);
  t.dy = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double curv = gens[static_cast<std::size_t>(i)].curvature();
    double g = 1.0;
    double dg = 0.0;  // dg / d(own_i)
    switch (mode) {
      case Coordination::LossAugmented:
        g = 1.0 + own[i];
        dg = 1.0;
        break;
      case Coordination::PenaltyFactor:
        g = 1.0 / (1.0 - own[i]);
        dg = g * g;
        break;
      case Coordination::EqualLambda:
        break;
    }
    t.y[i] = g * lambda[i];
    if (dg != 0.0) t.dy.row(i) = lambda[i] * dg * d_own.row(i);
    t.dy(i, i) += g * curv;
  }
  return t;
}

inline Vector coordination_residual(std::span<const GeneratorSpec> gens, const KronLossModel& m,
                                    double d_total, const Vector& x, Coordination mode) {
  const Eigen::Index n = x.size() - 1;
  const Vector p = x.head(n);
  const auto t = coordination_terms(gens, m, p, mode);
  Vector r(n + 1);
  r.head(n) = t.y.array() - x[n];
  r[n] = p.sum() - d_total - total_loss(m, p);
  return r;
}

}  // namespace detail

/// Damped Newton on (P, mu) for { y_i(P) = mu for all i, sum P = d_total + P_L(P) }.
/// Starts from the uniform split and the mean weighted marginal cost there;
/// halves the step up to 30 times whenever the residual norm would grow.
inline EquilibriumSolution solve_coordinated(std::span<const GeneratorSpec> gens, const KronLossModel& m,
                                             double d_total, Coordination mode, double tol = 1e-11,
                                             int max_iter = 100) {
  const Eigen::Index n = m.size();
  if (static_cast<std::size_t>(n) != gens.size())
    throw ConfigError("equilibrium: generator count does not match loss model");
  for (std::size_t i = 0; i < gens.size(); ++i) validate(gens[i], i);

  Vector x(n + 1);
  x.head(n).setConstant(d_total / static_cast<double>(n));
  x[n] = detail::coordination_terms(gens, m, x.head(n), mode).y.mean();

  Vector r = detail::coordination_residual(gens, m, d_total, x, mode);
  double res = r.lpNorm<Eigen::Infinity>();
  int it = 0;
  for (; it < max_iter && !(res < tol); ++it) {
    const Vector p = x.head(n);
    const auto t = detail::coordination_terms(gens, m, p, mode);
    Matrix jac = Matrix::Zero(n + 1, n + 1);
    jac.topLeftCorner(n, n) = t.dy;
    jac.topRightCorner(n, 1).setConstant(-1.0);
    jac.bottomLeftCorner(1, n) = (1.0 - loss_gradient(m, p).array()).matrix().transpose();
    const Vector step = jac.fullPivLu().solve(r);

    double scale = 1.0;
    Vector trial = x - step;
    Vector trial_r = detail::coordination_residual(gens, m, d_total, trial, mode);
    for (int h = 0; h < 30 && !(trial_r.norm() < r.norm()); ++h) {
      scale *= 0.5;
      trial = x - scale * step;
      trial_r = detail::coordination_residual(gens, m, d_total, trial, mode);
    }
    if (!(trial_r.norm() < r.norm())) break;
    x = trial;
    r = trial_r;
    res = r.lpNorm<Eigen::Infinity>();
  }

  if (!(res < tol)) {
    std::ostringstream os;
    os << "equilibrium Newton solve did not converge (residual " << res << " after " << it << " iterations)";
    throw SolverFailure(os.str(), x, res);
  }

  EquilibriumSolution s;
  s.P_star = x.head(n);
  s.mu_star = x[n];
  s.cost_star = total_cost(gens, s.P_star);
  s.loss_star = total_loss(m, s.P_star);
  s.constraint_residual = std::abs(r[n]);
  s.consensus_residual = r.head(n).lpNorm<Eigen::Infinity>();
  s.iterations = it;
  return s;
}

// Fixed point of the consensus law: (1 + dP_Li/dP_i) lambda_i equal across i.
inline EquilibriumSolution solve_equilibrium(std::span<const GeneratorSpec> gens, const KronLossModel& m,
                                             double d_total) {
  return solve_coordinated(gens, m, d_total, Coordination::LossAugmented);
}

// Classical coordination with penalty factors 1 / (1 - dP_Li/dP_i).
inline EquilibriumSolution kkt_penalty_solution(std::span<const GeneratorSpec> gens, const KronLossModel& m,
                                                double d_total) {
  return solve_coordinated(gens, m, d_total, Coordination::PenaltyFactor);
}

inline EquilibriumSolution equal_lambda_dispatch(std::span<const GeneratorSpec> gens, const KronLossModel& m,
                                                 double d_total) {
  return solve_coordinated(gens, m, d_total, Coordination::EqualLambda);
}

namespace detail {

// Solves p_last = d_total + P_L(p) - sum(others) for the last coordinate.
inline std::optional<double> close_balance(const KronLossModel& m, Vector& p, double d_total) {
  const Eigen::Index last = p.size() - 1;
  const double others = p.head(last).sum();
  double x = std::max(0.0, d_total - others);
  for (int k = 0; k < 500; ++k) {
    p[last] = x;
    const double next = d_total + total_loss(m, p) - others;
    if (!std::isfinite(next)) return std::nullopt;
    if (std::abs(next - x) < 1e-12 * std::max(1.0, std::abs(next))) {
      p[last] = next;
      return next;
    }
    x = next;
  }
  return std::nullopt;
}

}  // namespace detail

/// Exhaustive grid search over P_1..P_{N-1} >= 0 (N <= 3). The last output is
/// fixed by the balance constraint; infeasible points (no convergence or a
/// negative last output) are skipped.
inline std::optional<Vector> brute_force_optimum(std::span<const GeneratorSpec> gens, const KronLossModel& m,
                                                 double d_total, double grid_step) {
  const Eigen::Index n = m.size();
  if (n < 1 || n > 3) throw std::invalid_argument("brute_force_optimum: supports 1 <= N <= 3");
  if (!(grid_step > 0.0)) throw std::invalid_argument("brute_force_optimum: grid_step must be > 0");
  if (static_cast<std::size_t>(n) != gens.size())
    throw ConfigError("brute_force_optimum: generator count does not match loss model");

  const double upper = 2.0 * (std::abs(d_total) + std::abs(m.B00())) + grid_step;
  const auto steps = static_cast<long>(std::floor(upper / grid_step));

  std::optional<Vector> best;
  double best_cost = std::numeric_limits<double>::infinity();
  Vector p = Vector::Zero(n);
  auto consider = [&] {
    if (!detail::close_balance(m, p, d_total)) return;
    if (p[n - 1] < 0.0) return;
    const double c = total_cost(gens, p);
    if (c < best_cost) {
      best_cost = c;
      best = p;
    }
  };

  if (n == 1) {
    consider();
  } else if (n == 2) {
    for (long a = 0; a <= steps; ++a) {
      p[0] = static_cast<double>(a) * grid_step;
      consider();
    }
  } else {
    for (long a = 0; a <= steps; ++a) {
      for (long b = 0; b <= steps; ++b) {
        p[0] = static_cast<double>(a) * grid_step;
        p[1] = static_cast<double>(b) * grid_step;
        if (p[0] + p[1] > upper) break;
        consider();
      }
    }
  }
  return best;
}

}  // namespace fxd
