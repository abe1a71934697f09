#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fxdispatch/errors.hpp"
#include "fxdispatch/grid_model.hpp"
#include "fxdispatch/params.hpp"
#include "fxdispatch/topology.hpp"

namespace fxd {

/// Generators, loss model and local topology with a consistent size N.
class DispatchSystem {
 public:
  DispatchSystem(std::vector<GeneratorSpec> gens, KronLossModel loss, LocalTopology topology)
      : gens_(std::move(gens)), loss_(std::move(loss)), topology_(std::move(topology)) {
    if (gens_.empty()) throw ConfigError("dispatch system: no generators");
    const auto n = gens_.size();
    if (static_cast<std::size_t>(loss_.size()) != n)
      throw ConfigError("dispatch system: loss model size does not match generator count");
    if (topology_.size() != n)
      throw ConfigError("dispatch system: topology node count does not match generator count");
    for (std::size_t i = 0; i < n; ++i) validate(gens_[i], i);
    laplacian_ = laplacian(topology_);
    d0_.resize(static_cast<Eigen::Index>(n));
    p0_.resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      d0_[static_cast<Eigen::Index>(i)] = gens_[i].d0;
      p0_[static_cast<Eigen::Index>(i)] = gens_[i].p0;
    }
  }

  std::size_t size() const noexcept { return gens_.size(); }
  const std::vector<GeneratorSpec>& generators() const noexcept { return gens_; }
  const KronLossModel& loss() const noexcept { return loss_; }
  const LocalTopology& topology() const noexcept { return topology_; }
  const Matrix& laplacian_matrix() const noexcept { return laplacian_; }
  const Vector& demand_shares() const noexcept { return d0_; }
  const Vector& initial_powers() const noexcept { return p0_; }
  double total_demand() const noexcept { return d0_.sum(); }

 private:
  std::vector<GeneratorSpec> gens_;
  KronLossModel loss_;
  LocalTopology topology_;
  Matrix laplacian_;
  Vector d0_;
  Vector p0_;
};

// |x|^m sign(x)
inline double sig_pow(double x, double m) noexcept {
  if (x == 0.0) return 0.0;
  const double mag = std::pow(std::abs(x), m);
  return x > 0.0 ? mag : -mag;
}

struct PowerSolve {
  Vector P;
  int iterations = 0;
  double residual = 0.0;
  bool used_newton = false;
};

namespace detail {

inline Vector power_residual(const KronLossModel& m, const Vector& drive, const Vector& p) {
  return p - drive - generator_losses(m, p);
}

// d(P_Li)/d(P_j) = P_i B_ij off the diagonal, dP_Li/dP_i on it.
inline Matrix generator_loss_jacobian(const KronLossModel& m, const Vector& p) {
  Matrix j = p.asDiagonal() * m.B();
  j.diagonal() = own_loss_derivatives(m, p);
  return j;
}

}  // namespace detail

/// Solves the implicit power equation
///   P_i = sum_j a_ij (z_j - z_i) + D_i0 + P_Li(P)
/// by damped fixed-point iteration from `warm`, falling back to Newton on the
/// residual if the iteration stalls or hits the cap.
inline PowerSolve solve_power(const DispatchSystem& sys, const Vector& z, const Vector& warm, double tol,
                              int max_iter) {
  const auto& m = sys.loss();
  const Vector drive = -(sys.laplacian_matrix() * z) + sys.demand_shares();

  PowerSolve out;
  Vector p = warm.size() == drive.size() ? warm : drive;
  double res = detail::power_residual(m, drive, p).lpNorm<Eigen::Infinity>();
  double omega = 1.0;
  int stalled = 0;
  int it = 0;
  while (res >= tol && it < max_iter) {
    ++it;
    const Vector target = drive + generator_losses(m, p);
    const Vector next = (1.0 - omega) * p + omega * target;
    const double next_res = detail::power_residual(m, drive, next).lpNorm<Eigen::Infinity>();
    if (next_res > res) {
      omega *= 0.5;
      if (omega < 1e-3) break;
      continue;
    }
    stalled = next_res > 0.95 * res ? stalled + 1 : 0;
    p = next;
    res = next_res;
    if (stalled >= 5) break;
  }
  out.iterations = it;

  if (res >= tol) {
    out.used_newton = true;
    const Eigen::Index n = p.size();
    for (int k = 0; k < 50 && res >= tol; ++k) {
      const Vector r = detail::power_residual(m, drive, p);
      const Matrix jac = Matrix::Identity(n, n) - detail::generator_loss_jacobian(m, p);
      const Vector step = jac.partialPivLu().solve(r);
      double scale = 1.0;
      Vector trial = p - step;
      double trial_res = detail::power_residual(m, drive, trial).lpNorm<Eigen::Infinity>();
      for (int h = 0; h < 30 && !(trial_res < res); ++h) {
        scale *= 0.5;
        trial = p - scale * step;
        trial_res = detail::power_residual(m, drive, trial).lpNorm<Eigen::Infinity>();
      }
      ++out.iterations;
      if (!(trial_res < res)) break;
      p = trial;
      res = trial_res;
    }
  }

  out.P = p;
  out.residual = res;
  if (!(res < tol)) {
    std::ostringstream os;
    os << "power equation did not converge (residual " << res << " MW after " << out.iterations
       << " iterations); dP_Li/dP_i < 1 may be violated at this state";
    throw SolverFailure(os.str(), p, res);
  }
  return out;
}

/// Bounded zero-mean additive disturbance on the auxiliary dynamics.
struct DisturbanceSpec {
  enum class Kind { Sine, Square };

  bool enabled = false;
  double amplitude = 0.0;
  std::uint64_t seed = 1;
  Kind kind = Kind::Sine;

  bool operator==(const DisturbanceSpec&) const = default;
};

// amplitude * sin(omega_i t + theta_i) per channel (or its sign for Square),
// with omega_i in [1.5, 6] rad/s and theta_i in [0, 2 pi) drawn from the seed.
class Disturbance {
 public:
  Disturbance() = default;

  Disturbance(const DisturbanceSpec& spec, std::size_t n) : spec_(spec) {
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> freq(1.5, 6.0);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    omega_.resize(static_cast<Eigen::Index>(n));
    theta_.resize(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
      omega_[i] = freq(rng);
      theta_[i] = phase(rng);
    }
  }

  bool active() const noexcept { return spec_.enabled && spec_.amplitude != 0.0; }

  Vector at(double t) const {
    Vector w = Vector::Zero(omega_.size());
    if (!active()) return w;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      const double s = std::sin(omega_[i] * t + theta_[i]);
      w[i] = spec_.amplitude * (spec_.kind == DisturbanceSpec::Kind::Sine ? s : (s > 0.0 ? 1.0 : (s < 0.0 ? -1.0 : 0.0)));
    }
    return w;
  }

 private:
  DisturbanceSpec spec_;
  Vector omega_;
  Vector theta_;
};

inline Vector make_disturbance(const DisturbanceSpec& spec, std::size_t n, double t) {
  return Disturbance(spec, n).at(t);
}

struct SimulationState {
  double t = 0.0;
  Vector z;
  Vector P;
  Vector lambda;
  Vector H;  // 1 + dP_Li/dP_i
  double total_cost = 0.0;
  double total_loss = 0.0;
  double total_power = 0.0;
  double residual = 0.0;       // max_i |H_i lambda_i - mean(H lambda)|
  double balance_error = 0.0;  // sum P - sum D_i0 - P_L
  double V = std::numeric_limits<double>::quiet_NaN();
};

inline double lyapunov_value(double cost, double c_star) noexcept {
  const double gap = cost - c_star;
  return 0.5 * gap * gap;
}

inline double lyapunov_value(const SimulationState& s, double c_star) noexcept {
  return lyapunov_value(s.total_cost, c_star);
}

inline double consensus_residual(const Vector& weighted_marginals) {
  const double mean = weighted_marginals.mean();
  return (weighted_marginals.array() - mean).abs().maxCoeff();
}

/// Fills lambda, H and the scalar monitors from z and a solved P.
inline SimulationState make_state(const DispatchSystem& sys, double t, Vector z, Vector p, double c_star) {
  SimulationState s;
  s.t = t;
  s.z = std::move(z);
  s.P = std::move(p);
  s.lambda = marginal_costs(sys.generators(), s.P);
  s.H = (1.0 + own_loss_derivatives(sys.loss(), s.P).array()).matrix();
  s.total_cost = total_cost(sys.generators(), s.P);
  s.total_loss = total_loss(sys.loss(), s.P);
  s.total_power = s.P.sum();
  s.residual = consensus_residual((s.H.array() * s.lambda.array()).matrix());
  s.balance_error = s.total_power - sys.total_demand() - s.total_loss;
  s.V = std::isnan(c_star) ? c_star : lyapunov_value(s.total_cost, c_star);
  return s;
}

/// z_i' = -k1 sig(r_i)^mu - k2 sig(r_i)^nu + w_i, r_i = sum_j a_ij (H_j lambda_j - H_i lambda_i).
inline Vector z_derivative(const DispatchSystem& sys, const Vector& p, const AlgorithmParams& params,
                           const Vector* w = nullptr) {
  const Vector lambda = marginal_costs(sys.generators(), p);
  const Vector h = (1.0 + own_loss_derivatives(sys.loss(), p).array()).matrix();
  const Vector y = (h.array() * lambda.array()).matrix();
  const Vector r = -(sys.laplacian_matrix() * y);
  Vector dz(r.size());
  for (Eigen::Index i = 0; i < r.size(); ++i)
    dz[i] = -params.k1 * sig_pow(r[i], params.mu) - params.k2 * sig_pow(r[i], params.nu);
  if (w != nullptr) dz += *w;
  return dz;
}

inline Vector z_derivative(const DispatchSystem& sys, const SimulationState& s, const AlgorithmParams& params,
                           const Vector* w = nullptr) {
  return z_derivative(sys, s.P, params, w);
}

struct RunResult {
  SimulationState final_state;
  bool settled = false;
  double settling_time = std::numeric_limits<double>::quiet_NaN();
  std::size_t steps = 0;
  bool failed = false;
  std::string failure;
  std::size_t negative_power_steps = 0;
  double first_negative_time = std::numeric_limits<double>::quiet_NaN();
  double max_balance_error = 0.0;
  int max_solver_iterations = 0;
  std::size_t newton_fallbacks = 0;
};

using StepSink = std::function<void(const SimulationState&)>;

/// Fixed-step simulation of the consensus dynamics. Each of the four RK
/// stages re-solves the power equation at its z.
class Simulator {
 public:
  Simulator(DispatchSystem sys, AlgorithmParams params, DisturbanceSpec dist = {},
            double c_star = std::numeric_limits<double>::quiet_NaN())
      : sys_(std::move(sys)), params_(params), dist_spec_(dist), dist_(dist, sys_.size()), c_star_(c_star) {
    validate(params_);
  }

  const DispatchSystem& system() const noexcept { return sys_; }
  const AlgorithmParams& params() const noexcept { return params_; }
  double c_star() const noexcept { return c_star_; }

  SimulationState initial_state(const Vector& z0) const {
    const auto solve = solve_power(sys_, z0, sys_.initial_powers(), params_.fp_tol, params_.fp_max_iter);
    return make_state(sys_, 0.0, z0, solve.P, c_star_);
  }

  SimulationState initial_state() const { return initial_state(Vector::Zero(static_cast<Eigen::Index>(sys_.size()))); }

  Vector rhs(double t, const Vector& z, Vector& warm) const {
    warm = solve_power(sys_, z, warm, params_.fp_tol, params_.fp_max_iter).P;
    if (dist_.active()) {
      const Vector w = dist_.at(t);
      return z_derivative(sys_, warm, params_, &w);
    }
    return z_derivative(sys_, warm, params_);
  }

  SimulationState step(const SimulationState& s, double t_next) const { return step_impl(s, t_next, nullptr); }

  SimulationState step(const SimulationState& s) const { return step(s, s.t + params_.dt); }

  std::size_t step_count() const {
    return static_cast<std::size_t>(std::floor(params_.t_end / params_.dt * (1.0 + 1e-12)));
  }

  /// Integrates from z0 to t_end (or until settled when stop_on_settle is set).
  /// The sink sees the initial state, every `stride`-th state and the last one.
  RunResult run(const Vector& z0, const StepSink& sink = {}, std::size_t stride = 1) const;

  RunResult run(const StepSink& sink = {}, std::size_t stride = 1) const {
    return run(Vector::Zero(static_cast<Eigen::Index>(sys_.size())), sink, stride);
  }

 private:
  SimulationState step_impl(const SimulationState& s, double t_next, PowerSolve* info) const {
    const double h = t_next - s.t;
    Vector warm = s.P;
    const Vector k1 = rhs(s.t, s.z, warm);
    const Vector k2 = rhs(s.t + 0.5 * h, s.z + 0.5 * h * k1, warm);
    const Vector k3 = rhs(s.t + 0.5 * h, s.z + 0.5 * h * k2, warm);
    const Vector k4 = rhs(s.t + h, s.z + h * k3, warm);
    Vector z = s.z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    auto solve = solve_power(sys_, z, warm, params_.fp_tol, params_.fp_max_iter);
    if (info != nullptr) {
      info->iterations = solve.iterations;
      info->used_newton = solve.used_newton;
    }
    return make_state(sys_, t_next, std::move(z), std::move(solve.P), c_star_);
  }

  static void track(RunResult& r, const SimulationState& s) {
    r.max_balance_error = std::max(r.max_balance_error, std::abs(s.balance_error));
    if ((s.P.array() < 0.0).any()) {
      if (r.negative_power_steps == 0) r.first_negative_time = s.t;
      ++r.negative_power_steps;
    }
  }

  DispatchSystem sys_;
  AlgorithmParams params_;
  DisturbanceSpec dist_spec_;
  Disturbance dist_;
  double c_star_;
};

inline RunResult Simulator::run(const Vector& z0, const StepSink& sink, std::size_t stride) const {
  if (stride == 0) stride = 1;
  RunResult r;
  SimulationState s;
  try {
    s = initial_state(z0);
  } catch (const SolverFailure& e) {
    r.failed = true;
    r.failure = e.what();
    r.final_state = make_state(sys_, 0.0, z0, e.best_iterate(), c_star_);
    return r;
  }
  track(r, s);
  if (sink) sink(s);

  bool in_window = false;
  double window_start = 0.0;
  auto update_settling = [&](const SimulationState& st) {
    if (st.residual < params_.settle_tol) {
      if (!in_window) {
        in_window = true;
        window_start = st.t;
      }
      if (!r.settled && st.t - window_start >= params_.settle_window - 1e-9) {
        r.settled = true;
        r.settling_time = window_start;
      }
    } else {
      in_window = false;
      r.settled = false;
      r.settling_time = std::numeric_limits<double>::quiet_NaN();
    }
  };
  update_settling(s);

  const std::size_t n_steps = step_count();
  PowerSolve info;
  for (std::size_t k = 1; k <= n_steps; ++k) {
    try {
      s = step_impl(s, static_cast<double>(k) * params_.dt, &info);
    } catch (const SolverFailure& e) {
      r.failed = true;
      std::ostringstream os;
      os << "step " << k << " (t = " << static_cast<double>(k) * params_.dt << " s): " << e.what();
      r.failure = os.str();
      break;
    }
    r.steps = k;
    r.max_solver_iterations = std::max(r.max_solver_iterations, info.iterations);
    if (info.used_newton) ++r.newton_fallbacks;
    track(r, s);
    update_settling(s);
    if (sink && (k % stride == 0)) sink(s);
    if (params_.stop_on_settle && r.settled) break;
  }
  if (sink && r.steps % stride != 0) sink(s);
  r.final_state = s;
  return r;
}

}  // namespace fxd
