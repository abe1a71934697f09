#pragma once

#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <ostream>
#include <string>

#include "fxdispatch/analysis.hpp"
#include "fxdispatch/config.hpp"
#include "fxdispatch/dynamics.hpp"
#include "fxdispatch/oracle.hpp"
#include "fxdispatch/report.hpp"
#include "fxdispatch/topology.hpp"

namespace fxd {

// Process exit codes shared by all subcommands.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

struct CommandOptions {
  std::optional<std::string> out_dir;
  bool force = false;
  std::optional<std::uint64_t> seed;
  std::optional<double> dt;
  std::optional<double> t_end;
};

inline void apply_overrides(RunConfig& cfg, const CommandOptions& opt) {
  if (opt.out_dir) cfg.output.dir = *opt.out_dir;
  if (opt.seed) cfg.disturbance.seed = *opt.seed;
  if (opt.dt) cfg.params.dt = *opt.dt;
  if (opt.t_end) cfg.params.t_end = *opt.t_end;
  validate(cfg.params);
}

/// Assumption gates plus the spectral quantities that feed the settling bound.
/// Quantities that are undefined because a gate failed are left empty.
struct StaticAnalysis {
  AssumptionReport assumptions;
  std::optional<AppendixBoundReport> appendix;
  std::optional<SpectralSummary> laplacian_spectrum;
  std::optional<SMatrix> s_matrix;
  std::optional<SettlingBound> bound;
  std::string bound_message;
};

inline StaticAnalysis analyze(const RunConfig& cfg) {
  StaticAnalysis a;
  Vector p0(static_cast<Eigen::Index>(cfg.size()));
  for (std::size_t i = 0; i < cfg.size(); ++i) p0[static_cast<Eigen::Index>(i)] = cfg.generators[i].p0;
  a.assumptions = assess_assumptions(cfg.generators, cfg.loss, cfg.topology, p0);

  if (a.assumptions.assumption2_ok) a.appendix = verify_appendix_bounds(cfg.loss, cfg.generators, p0);
  if (a.assumptions.connected_ok) a.laplacian_spectrum = spectrum(cfg.topology);
  if (a.assumptions.sigma > 0.0)
    a.s_matrix = build_s_matrix(cfg.loss, CostSummary{a.assumptions.sigma, a.assumptions.delta});

  if (!a.assumptions.a2_ok || !a.assumptions.assumption2_ok) {
    a.bound_message = "assumption (A2) fails; tau1 is not guaranteed positive";
  } else if (!a.laplacian_spectrum || cfg.size() < 2) {
    a.bound_message = "local topology has no positive algebraic connectivity";
  } else {
    try {
      a.bound = settling_bound(cfg.params, a.assumptions.rho, a.s_matrix->tau[0], a.laplacian_spectrum->phi2,
                               cfg.size());
    } catch (const std::exception& e) {
      a.bound_message = e.what();
    }
  }
  return a;
}

namespace detail {
inline void print_flag(std::ostream& os, const char* label, bool ok) {
  os << "  " << std::left << std::setw(38) << label << (ok ? "pass" : "FAIL") << "\n";
}
inline void print_value(std::ostream& os, const char* label, double v) {
  os << "  " << std::left << std::setw(38) << label << std::setprecision(8) << v << "\n";
}
inline void print_vector(std::ostream& os, const Vector& v) {
  os << "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? ", " : "") << std::setprecision(10) << v[i];
  os << "]";
}
}  // namespace detail

inline int cmd_check(const RunConfig& cfg, std::ostream& os) {
  const auto a = analyze(cfg);
  const auto& r = a.assumptions;
  os << "assumption gates\n";
  detail::print_flag(os, "local topology connected", r.connected_ok);
  detail::print_flag(os, "cost convexity (sigma>0, delta!=0)", r.assumption2_ok);
  detail::print_flag(os, "loss derivative bound at p0 (A1)", r.a1_ok);
  detail::print_flag(os, "row-sum loss bound", r.remark2_ok);
  detail::print_flag(os, "eigenvalue condition (A2)", r.a2_ok);
  os << "values\n";
  detail::print_value(os, "sigma", r.sigma);
  detail::print_value(os, "delta", r.delta);
  detail::print_value(os, "rho", r.rho);
  detail::print_value(os, "b1", r.b1);
  detail::print_value(os, "bN", r.bN);
  detail::print_value(os, "A2 value", r.a2_value);
  if (a.s_matrix) detail::print_value(os, "tau1", a.s_matrix->tau[0]);
  if (a.laplacian_spectrum) detail::print_value(os, "phi2", a.laplacian_spectrum->phi2);
  if (a.appendix) {
    const auto& b = *a.appendix;
    os << "matrix bounds at p0 (informational)\n";
    detail::print_flag(os, "R1 dF lower bounds", b.r1);
    detail::print_flag(os, "R2 dM lower bounds", b.r2);
    detail::print_flag(os, "R3 Q lower bounds", b.r3);
    detail::print_flag(os, "R4 S <= Q", b.r4);
    detail::print_flag(os, "R5 lower (b1 delta)", b.r5_lower);
    detail::print_flag(os, "R5 upper (bN delta)", b.r5_upper);
    detail::print_flag(os, "R5 with index pairing", b.r5_index_pairing);
    detail::print_flag(os, "R5 with spectrum of B + diag B", b.r5_weyl);
  }
  os << (r.all_passed() ? "all checks passed\n" : "one or more checks FAILED\n");
  return r.all_passed() ? kExitOk : kExitValidation;
}

inline int cmd_bound(const RunConfig& cfg, std::ostream& os) {
  const auto a = analyze(cfg);
  if (!a.bound) {
    os << "refusing to compute the settling-time bound: " << a.bound_message << "\n";
    return kExitValidation;
  }
  const auto& b = *a.bound;
  detail::print_value(os, "alpha", b.alpha);
  detail::print_value(os, "beta", b.beta);
  detail::print_value(os, "p", b.p);
  detail::print_value(os, "q", b.q);
  detail::print_value(os, "T_s [s]", b.ts);
  return kExitOk;
}

inline int cmd_oracle(const RunConfig& cfg, std::ostream& os) {
  const double d = cfg.total_demand();
  auto describe = [&](const char* title, const EquilibriumSolution& s) {
    os << title << "\n  P* = ";
    detail::print_vector(os, s.P_star);
    os << "\n";
    detail::print_value(os, "common weighted marginal cost", s.mu_star);
    detail::print_value(os, "cost [$/h]", s.cost_star);
    detail::print_value(os, "loss [MW]", s.loss_star);
    detail::print_value(os, "total power [MW]", s.P_star.sum());
    detail::print_value(os, "constraint residual", s.constraint_residual);
    detail::print_value(os, "consensus residual", s.consensus_residual);
    os << "  iterations                        " << s.iterations << "\n";
  };
  try {
    const auto eq = solve_equilibrium(cfg.generators, cfg.loss, d);
    const auto pen = kkt_penalty_solution(cfg.generators, cfg.loss, d);
    describe("consensus-law equilibrium ((1 + dP_Li/dP_i) lambda_i equal)", eq);
    describe("penalty-factor coordination (lambda_i / (1 - dP_Li/dP_i) equal)", pen);
    describe("equal-lambda coordination (lambda_i equal)", equal_lambda_dispatch(cfg.generators, cfg.loss, d));
    os << "dispatch gap |P_eq - P_pf| = ";
    detail::print_vector(os, (eq.P_star - pen.P_star).cwiseAbs());
    os << "\n";
    detail::print_value(os, "max gap [MW]", (eq.P_star - pen.P_star).cwiseAbs().maxCoeff());
    return kExitOk;
  } catch (const SolverFailure& e) {
    os << "oracle failed: " << e.what() << "\n  best iterate = ";
    detail::print_vector(os, e.best_iterate());
    os << "\n";
    return kExitRuntime;
  }
}

struct RunOutcome {
  ConvergenceReport report;
  std::string csv;
  int exit_code = kExitOk;
};

/// Runs the gates, the oracle and (unless refused) the simulation, and builds
/// the report and trajectory text. Performs no I/O.
inline RunOutcome execute_run(const RunConfig& cfg, bool force) {
  RunOutcome out;
  auto& rep = out.report;
  const auto a = analyze(cfg);
  rep.n = cfg.size();
  rep.assumptions = a.assumptions;
  rep.appendix = a.appendix;
  rep.laplacian_spectrum = a.laplacian_spectrum;
  rep.s_matrix = a.s_matrix;
  rep.bound = a.bound;
  rep.total_demand = cfg.total_demand();
  rep.t_end = cfg.params.t_end;
  rep.dt = cfg.params.dt;
  rep.settle_tol = cfg.params.settle_tol;
  rep.settle_window = cfg.params.settle_window;

  try {
    rep.equilibrium = solve_equilibrium(cfg.generators, cfg.loss, rep.total_demand);
  } catch (const SolverFailure& e) {
    rep.oracle_message = std::string("equilibrium: ") + e.what();
  }
  try {
    rep.penalty = kkt_penalty_solution(cfg.generators, cfg.loss, rep.total_demand);
  } catch (const SolverFailure& e) {
    rep.oracle_message += (rep.oracle_message.empty() ? "" : "; ") + std::string("penalty factor: ") + e.what();
  }

  const DispatchSystem sys = cfg.system();
  const bool gates_ok = a.assumptions.all_passed();

  // Lyapunov reference: the equilibrium cost, or the initial cost if the
  // oracle could not provide one.
  double c_star = rep.equilibrium ? rep.equilibrium->cost_star : std::numeric_limits<double>::quiet_NaN();
  Simulator sim(sys, cfg.params, cfg.disturbance, c_star);

  std::string& csv = out.csv;
  csv = csv_header(cfg.size());

  auto fill_terminal = [&](const SimulationState& s) {
    rep.P = s.P;
    rep.total_power = s.total_power;
    rep.total_loss = s.total_loss;
    rep.total_cost = s.total_cost;
    rep.consensus_residual = s.residual;
  };

  if (!gates_ok && !force) {
    rep.status = "refused";
    rep.message = "assumption gates failed; rerun with --force to simulate anyway";
    try {
      auto s0 = sim.initial_state();
      fill_terminal(s0);
      rep.max_balance_error = std::abs(s0.balance_error);
    } catch (const SolverFailure& e) {
      rep.P = e.best_iterate();
    }
    out.exit_code = kExitValidation;
    return out;
  }
  if (!gates_ok) rep.message = "assumption gates failed; simulated because --force was given";

  if (std::isnan(c_star)) {
    try {
      c_star = sim.initial_state().total_cost;
      sim = Simulator(sys, cfg.params, cfg.disturbance, c_star);
    } catch (const SolverFailure&) {
    }
  }

  const auto result = sim.run([&](const SimulationState& s) { append_csv_row(csv, s); }, cfg.output.stride);
  fill_terminal(result.final_state);
  rep.max_balance_error = result.max_balance_error;
  rep.settled = result.settled;
  rep.settling_time = result.settling_time;
  rep.settled_within_bound = result.settled && rep.bound && result.settling_time <= rep.bound->ts;
  rep.steps = result.steps;
  rep.max_solver_iterations = result.max_solver_iterations;
  rep.newton_fallbacks = result.newton_fallbacks;
  rep.negative_power_steps = result.negative_power_steps;
  rep.first_negative_time = result.first_negative_time;
  if (result.failed) {
    rep.status = "step_failure";
    rep.message = result.failure;
    out.exit_code = kExitRuntime;
  }
  return out;
}

inline int cmd_run(const RunConfig& cfg, const CommandOptions& opt, std::ostream& os) {
  const auto outcome = execute_run(cfg, opt.force);
  const auto& rep = outcome.report;
  const std::filesystem::path dir = cfg.output.dir;
  std::filesystem::create_directories(dir);
  if (cfg.output.trajectory) atomic_write(dir / "trajectory.csv", outcome.csv);
  if (cfg.output.report) atomic_write(dir / "report.json", to_json(rep).dump(2) + "\n");

  os << "status: " << rep.status << (rep.message.empty() ? "" : " (" + rep.message + ")") << "\n";
  if (rep.negative_power_steps > 0)
    os << "warning: negative generator output at " << rep.negative_power_steps << " steps (first at t = "
       << rep.first_negative_time << " s); marginal-cost bound delta assumes P >= 0\n";
  os << "  P = ";
  detail::print_vector(os, rep.P);
  os << "\n";
  detail::print_value(os, "total power [MW]", rep.total_power);
  detail::print_value(os, "loss [MW]", rep.total_loss);
  detail::print_value(os, "cost [$/h]", rep.total_cost);
  detail::print_value(os, "consensus residual", rep.consensus_residual);
  if (rep.settled)
    detail::print_value(os, "settling time [s]", rep.settling_time);
  else
    os << "  not settled within the horizon\n";
  if (rep.bound) {
    detail::print_value(os, "T_s bound [s]", rep.bound->ts);
    os << "  settled within bound              " << (rep.settled_within_bound ? "yes" : "no") << "\n";
  }
  os << "wrote " << (dir / "").string() << "\n";
  return outcome.exit_code;
}

}  // namespace fxd
