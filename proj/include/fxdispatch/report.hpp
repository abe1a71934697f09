#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "fxdispatch/analysis.hpp"
#include "fxdispatch/dynamics.hpp"
#include "fxdispatch/errors.hpp"
#include "fxdispatch/oracle.hpp"
#include "fxdispatch/topology.hpp"

namespace fxd {

using json = nlohmann::json;

/// Everything a run reports about its terminal state, the standing
/// assumptions, spectral quantities, the oracle comparison and timing.
struct ConvergenceReport {
  std::string status = "ok";  // ok | refused | step_failure
  std::string message;
  std::size_t n = 0;

  Vector P;
  double total_power = 0.0;
  double total_loss = 0.0;
  double total_cost = 0.0;
  double total_demand = 0.0;
  double consensus_residual = 0.0;
  double max_balance_error = 0.0;
  bool settled = false;
  bool settled_within_bound = false;

  AssumptionReport assumptions;
  std::optional<AppendixBoundReport> appendix;  // evaluated at the initial powers

  std::optional<SpectralSummary> laplacian_spectrum;
  std::optional<SMatrix> s_matrix;
  std::optional<SettlingBound> bound;

  std::optional<EquilibriumSolution> equilibrium;
  std::optional<EquilibriumSolution> penalty;
  std::string oracle_message;

  double t_end = 0.0;
  double dt = 0.0;
  std::size_t steps = 0;
  double settling_time = std::numeric_limits<double>::quiet_NaN();
  double settle_tol = 0.0;
  double settle_window = 0.0;

  int max_solver_iterations = 0;
  std::size_t newton_fallbacks = 0;
  std::size_t negative_power_steps = 0;
  double first_negative_time = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

inline json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json vec(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(number(v[i]));
  return a;
}

inline json flags(const std::vector<bool>& f) {
  json a = json::array();
  for (bool b : f) a.push_back(b);
  return a;
}

inline json solution(const std::optional<EquilibriumSolution>& s) {
  if (!s) return nullptr;
  return {{"P", vec(s->P_star)},
          {"mu", number(s->mu_star)},
          {"cost", number(s->cost_star)},
          {"loss", number(s->loss_star)},
          {"constraint_residual", number(s->constraint_residual)},
          {"consensus_residual", number(s->consensus_residual)},
          {"iterations", s->iterations}};
}

inline double max_gap(const Vector& a, const std::optional<EquilibriumSolution>& s) {
  if (!s || a.size() != s->P_star.size()) return std::numeric_limits<double>::quiet_NaN();
  return (a - s->P_star).cwiseAbs().maxCoeff();
}

}  // namespace detail

inline json to_json(const ConvergenceReport& r) {
  using detail::number;
  const auto& a = r.assumptions;
  json j;
  j["status"] = r.status;
  j["message"] = r.message;
  j["n"] = r.n;
  j["P"] = detail::vec(r.P);
  j["total_power"] = number(r.total_power);
  j["total_loss"] = number(r.total_loss);
  j["total_cost"] = number(r.total_cost);
  j["total_demand"] = number(r.total_demand);
  j["consensus_residual"] = number(r.consensus_residual);
  j["max_balance_error"] = number(r.max_balance_error);
  j["settled"] = r.settled;
  j["settled_within_bound"] = r.settled_within_bound;
  j["max_solver_iterations"] = r.max_solver_iterations;
  j["newton_fallbacks"] = r.newton_fallbacks;
  j["negative_power_steps"] = r.negative_power_steps;
  j["first_negative_time"] = number(r.first_negative_time);

  j["assumptions"] = {{"all_passed", a.all_passed()},
                      {"connected", a.connected_ok},
                      {"assumption2", a.assumption2_ok},
                      {"a1", a.a1_ok},
                      {"a1_per_generator", detail::flags(a.a1_per_generator)},
                      {"remark2", a.remark2_ok},
                      {"remark2_per_generator", detail::flags(a.remark2_per_generator)},
                      {"a2", a.a2_ok},
                      {"a2_value", number(a.a2_value)},
                      {"sigma", number(a.sigma)},
                      {"delta", number(a.delta)}};
  if (r.appendix) {
    const auto& b = *r.appendix;
    j["assumptions"]["appendix_bounds"] = {{"r1", b.r1},           {"r2", b.r2},
                                           {"r3", b.r3},           {"r4", b.r4},
                                           {"r5", b.r5},           {"r5_lower", b.r5_lower},
                                           {"r5_upper", b.r5_upper}, {"r5_index_pairing", b.r5_index_pairing},
                                           {"r5_weyl", b.r5_weyl}};
  } else {
    j["assumptions"]["appendix_bounds"] = nullptr;
  }

  const double nan = std::numeric_limits<double>::quiet_NaN();
  j["spectra"] = {{"phi2", number(r.laplacian_spectrum ? r.laplacian_spectrum->phi2 : nan)},
                  {"laplacian_eigenvalues", r.laplacian_spectrum ? detail::vec(r.laplacian_spectrum->eigenvalues)
                                                                 : json::array()},
                  {"b1", number(a.b1)},
                  {"bN", number(a.bN)},
                  {"rho", number(a.rho)},
                  {"tau1", number(r.s_matrix ? r.s_matrix->tau[0] : nan)},
                  {"tau", r.s_matrix ? detail::vec(r.s_matrix->tau) : json::array()}};

  const double gap_eq = detail::max_gap(r.P, r.equilibrium);
  const double gap_pen = detail::max_gap(r.P, r.penalty);
  const double gap_between =
      r.equilibrium && r.penalty ? (r.equilibrium->P_star - r.penalty->P_star).cwiseAbs().maxCoeff() : nan;
  j["oracle_gap"] = {{"equilibrium", detail::solution(r.equilibrium)},
                     {"penalty_factor", detail::solution(r.penalty)},
                     {"max_abs_gap_equilibrium", number(gap_eq)},
                     {"max_abs_gap_penalty_factor", number(gap_pen)},
                     {"equilibrium_vs_penalty_factor", number(gap_between)},
                     {"message", r.oracle_message}};

  j["timing"] = {{"t_end", number(r.t_end)},
                 {"dt", number(r.dt)},
                 {"steps", r.steps},
                 {"settling_time", number(r.settling_time)},
                 {"settle_tol", number(r.settle_tol)},
                 {"settle_window", number(r.settle_window)},
                 {"ts_bound", number(r.bound ? r.bound->ts : nan)},
                 {"alpha", number(r.bound ? r.bound->alpha : nan)},
                 {"beta", number(r.bound ? r.bound->beta : nan)},
                 {"p", number(r.bound ? r.bound->p : nan)},
                 {"q", number(r.bound ? r.bound->q : nan)}};
  return j;
}

/// Checks a report document against the documented layout. Returns one
/// message per problem; empty when the document conforms.
inline std::vector<std::string> validate_report_schema(const json& j) {
  std::vector<std::string> problems;
  auto expect = [&](const json& obj, const std::string& path, const char* key, auto pred, const char* what) {
    if (!obj.is_object() || !obj.contains(key)) {
      problems.push_back("missing " + path + key);
      return;
    }
    if (!pred(obj.at(key))) problems.push_back(path + key + " is not " + what);
  };
  auto is_num = [](const json& v) { return v.is_number(); };
  auto is_num_or_null = [](const json& v) { return v.is_number() || v.is_null(); };
  auto is_bool = [](const json& v) { return v.is_boolean(); };
  auto is_str = [](const json& v) { return v.is_string(); };
  auto is_uint = [](const json& v) { return v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0); };
  auto is_num_array = [](const json& v) {
    if (!v.is_array()) return false;
    for (const auto& e : v)
      if (!(e.is_number() || e.is_null())) return false;
    return true;
  };
  auto is_bool_array = [](const json& v) {
    if (!v.is_array()) return false;
    for (const auto& e : v)
      if (!e.is_boolean()) return false;
    return true;
  };
  auto is_obj = [](const json& v) { return v.is_object(); };
  auto is_obj_or_null = [](const json& v) { return v.is_object() || v.is_null(); };

  if (!j.is_object()) return {"report is not an object"};
  expect(j, "", "status", [](const json& v) {
    return v.is_string() && (v == "ok" || v == "refused" || v == "step_failure");
  }, "one of ok/refused/step_failure");
  expect(j, "", "message", is_str, "a string");
  expect(j, "", "n", is_uint, "an unsigned integer");
  expect(j, "", "P", is_num_array, "a numeric array");
  for (const char* k : {"total_power", "total_loss", "total_cost", "total_demand", "consensus_residual",
                        "max_balance_error"})
    expect(j, "", k, is_num_or_null, "a number");
  expect(j, "", "settled", is_bool, "a boolean");
  expect(j, "", "settled_within_bound", is_bool, "a boolean");
  expect(j, "", "max_solver_iterations", is_uint, "an unsigned integer");
  expect(j, "", "newton_fallbacks", is_uint, "an unsigned integer");
  expect(j, "", "negative_power_steps", is_uint, "an unsigned integer");
  expect(j, "", "first_negative_time", is_num_or_null, "a number or null");

  expect(j, "", "assumptions", is_obj, "an object");
  if (j.contains("assumptions") && j["assumptions"].is_object()) {
    const auto& a = j["assumptions"];
    for (const char* k : {"all_passed", "connected", "assumption2", "a1", "remark2", "a2"})
      expect(a, "assumptions.", k, is_bool, "a boolean");
    expect(a, "assumptions.", "a1_per_generator", is_bool_array, "a boolean array");
    expect(a, "assumptions.", "remark2_per_generator", is_bool_array, "a boolean array");
    for (const char* k : {"a2_value", "sigma", "delta"}) expect(a, "assumptions.", k, is_num_or_null, "a number or null");
  }
  expect(j, "", "spectra", is_obj, "an object");
  if (j.contains("spectra") && j["spectra"].is_object()) {
    const auto& s = j["spectra"];
    for (const char* k : {"phi2", "b1", "bN", "rho", "tau1"}) expect(s, "spectra.", k, is_num_or_null, "a number or null");
    expect(s, "spectra.", "laplacian_eigenvalues", is_num_array, "a numeric array");
    expect(s, "spectra.", "tau", is_num_array, "a numeric array");
  }
  expect(j, "", "oracle_gap", is_obj, "an object");
  if (j.contains("oracle_gap") && j["oracle_gap"].is_object()) {
    const auto& o = j["oracle_gap"];
    expect(o, "oracle_gap.", "equilibrium", is_obj_or_null, "an object or null");
    expect(o, "oracle_gap.", "penalty_factor", is_obj_or_null, "an object or null");
    for (const char* k : {"max_abs_gap_equilibrium", "max_abs_gap_penalty_factor", "equilibrium_vs_penalty_factor"})
      expect(o, "oracle_gap.", k, is_num_or_null, "a number or null");
    expect(o, "oracle_gap.", "message", is_str, "a string");
    for (const char* sub : {"equilibrium", "penalty_factor"}) {
      if (o.contains(sub) && o[sub].is_object()) {
        const std::string path = std::string("oracle_gap.") + sub + ".";
        expect(o[sub], path, "P", is_num_array, "a numeric array");
        for (const char* k : {"mu", "cost", "loss", "constraint_residual", "consensus_residual"})
          expect(o[sub], path, k, is_num_or_null, "a number or null");
        expect(o[sub], path, "iterations", is_uint, "an unsigned integer");
      }
    }
  }
  expect(j, "", "timing", is_obj, "an object");
  if (j.contains("timing") && j["timing"].is_object()) {
    const auto& t = j["timing"];
    expect(t, "timing.", "steps", is_uint, "an unsigned integer");
    for (const char* k : {"t_end", "dt", "settle_tol", "settle_window"}) expect(t, "timing.", k, is_num, "a number");
    for (const char* k : {"settling_time", "ts_bound", "alpha", "beta", "p", "q"})
      expect(t, "timing.", k, is_num_or_null, "a number or null");
  }
  return problems;
}

// 12 significant digits, locale independent.
inline void append_number(std::string& out, double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 12);
  out.append(buf, res.ptr);
}

inline std::string csv_header(std::size_t n) {
  std::string h = "t";
  for (std::size_t i = 1; i <= n; ++i) h += ",P" + std::to_string(i);
  for (std::size_t i = 1; i <= n; ++i) h += ",z" + std::to_string(i);
  h += ",PL,Ptotal,cost,residual,V\n";
  return h;
}

inline void append_csv_row(std::string& out, const SimulationState& s) {
  append_number(out, s.t);
  for (Eigen::Index i = 0; i < s.P.size(); ++i) {
    out += ',';
    append_number(out, s.P[i]);
  }
  for (Eigen::Index i = 0; i < s.z.size(); ++i) {
    out += ',';
    append_number(out, s.z[i]);
  }
  for (double v : {s.total_loss, s.total_power, s.total_cost, s.residual, s.V}) {
    out += ',';
    append_number(out, v);
  }
  out += '\n';
}

/// Writes to a sibling temporary file and renames it over the target.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw std::runtime_error("cannot rename '" + tmp.string() + "': " + ec.message());
}

}  // namespace fxd
