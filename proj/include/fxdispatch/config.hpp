#pragma once

#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fxdispatch/dynamics.hpp"
#include "fxdispatch/errors.hpp"
#include "fxdispatch/grid_model.hpp"
#include "fxdispatch/params.hpp"
#include "fxdispatch/topology.hpp"

namespace fxd {

/// How per-bus demand shares are derived when the config does not pin them.
enum class Initialization {
  DemandFromP0,  // d0 = p0 unless given explicitly
  ReproduceP0,   // d0 = p0 - P_Li(p0), so z(0) = 0 reproduces p0 exactly
};

struct OutputSpec {
  std::string dir = "out";
  bool trajectory = true;
  bool report = true;
  std::size_t stride = 100;

  bool operator==(const OutputSpec&) const = default;
};

struct RunConfig {
  std::vector<std::string> names;
  std::vector<GeneratorSpec> generators;
  KronLossModel loss;
  LocalTopology topology;
  AlgorithmParams params;
  Initialization initialization = Initialization::DemandFromP0;
  DisturbanceSpec disturbance;
  OutputSpec output;

  bool operator==(const RunConfig&) const = default;

  std::size_t size() const noexcept { return generators.size(); }
  double total_demand() const {
    double d = 0.0;
    for (const auto& g : generators) d += g.d0;
    return d;
  }
  DispatchSystem system() const { return {generators, loss, topology}; }
};

namespace detail {

using json = nlohmann::json;

inline std::string join_path(std::string_view base, std::string_view key) {
  return base.empty() ? std::string(key) : std::string(base) + "." + std::string(key);
}

inline void reject_unknown(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!ok.count(it.key())) throw ConfigError("unknown field '" + join_path(path, it.key()) + "'");
}

inline const json& require(const json& obj, const std::string& path, const char* key) {
  if (!obj.is_object()) throw ConfigError("'" + path + "' must be an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError("missing field '" + join_path(path, key) + "'");
  return *it;
}

inline double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError("field '" + path + "' must be a number");
  return v.get<double>();
}

inline double number_or(const json& obj, const std::string& path, const char* key, double fallback) {
  auto it = obj.find(key);
  return it == obj.end() ? fallback : as_number(*it, join_path(path, key));
}

inline bool bool_or(const json& obj, const std::string& path, const char* key, bool fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_boolean()) throw ConfigError("field '" + join_path(path, key) + "' must be a boolean");
  return it->get<bool>();
}

inline std::size_t index_of(const json& v, const std::string& path) {
  if (!v.is_number_integer() || v.get<long long>() < 0)
    throw ConfigError("field '" + path + "' must be a nonnegative integer");
  return v.get<std::size_t>();
}

inline std::string line_context(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t k = 0; k < byte && k < text.size(); ++k) {
    if (text[k] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace detail

/// Parses and validates a run configuration from JSON text. All dimension and
/// sign invariants are enforced here; errors name the offending field.
inline RunConfig parse_config(std::string_view text) {
  using detail::json;
  json root;
  try {
    root = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError("parse error at " + detail::line_context(text, e.byte) + ": " + e.what());
  }
  if (!root.is_object()) throw ConfigError("top level must be an object");
  detail::reject_unknown(root, "", {"generators", "loss", "topology", "params", "disturbance", "output"});

  RunConfig cfg;

  const json& gens = detail::require(root, "", "generators");
  if (!gens.is_array() || gens.empty()) throw ConfigError("'generators' must be a non-empty array");
  std::vector<bool> has_d0;
  for (std::size_t i = 0; i < gens.size(); ++i) {
    const std::string path = "generators[" + std::to_string(i) + "]";
    const json& g = gens[i];
    if (!g.is_object()) throw ConfigError("'" + path + "' must be an object");
    detail::reject_unknown(g, path, {"name", "a", "b", "c", "p0", "d0"});
    GeneratorSpec spec;
    spec.a = detail::as_number(detail::require(g, path, "a"), path + ".a");
    spec.b = detail::as_number(detail::require(g, path, "b"), path + ".b");
    spec.c = detail::as_number(detail::require(g, path, "c"), path + ".c");
    spec.p0 = detail::as_number(detail::require(g, path, "p0"), path + ".p0");
    has_d0.push_back(g.contains("d0"));
    spec.d0 = detail::number_or(g, path, "d0", spec.p0);
    if (!(spec.c > 0.0)) throw ConfigError("field '" + path + ".c' must be > 0");
    if (!(spec.p0 >= 0.0)) throw ConfigError("field '" + path + ".p0' must be >= 0");
    if (!(spec.d0 >= 0.0)) throw ConfigError("field '" + path + ".d0' must be >= 0");
    std::string name = "G" + std::to_string(i + 1);
    if (auto it = g.find("name"); it != g.end()) {
      if (!it->is_string()) throw ConfigError("field '" + path + ".name' must be a string");
      name = it->get<std::string>();
    }
    cfg.names.push_back(std::move(name));
    cfg.generators.push_back(spec);
  }
  const auto n = static_cast<Eigen::Index>(cfg.generators.size());

  const json& loss = detail::require(root, "", "loss");
  detail::reject_unknown(loss, "loss", {"B", "B0", "B00"});
  const json& jb = detail::require(loss, "loss", "B");
  if (!jb.is_array() || static_cast<Eigen::Index>(jb.size()) != n)
    throw ConfigError("field 'loss.B' must have " + std::to_string(n) + " rows");
  Matrix b(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const json& row = jb[static_cast<std::size_t>(i)];
    const std::string rpath = "loss.B[" + std::to_string(i) + "]";
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n)
      throw ConfigError("field '" + rpath + "' must have " + std::to_string(n) + " entries");
    for (Eigen::Index j = 0; j < n; ++j)
      b(i, j) = detail::as_number(row[static_cast<std::size_t>(j)], rpath + "[" + std::to_string(j) + "]");
  }
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      if (b(i, j) != b(j, i))
        throw ConfigError("field 'loss.B' is not symmetric: B[" + std::to_string(i) + "][" + std::to_string(j) +
                          "] != B[" + std::to_string(j) + "][" + std::to_string(i) + "]");
  const json& jb0 = detail::require(loss, "loss", "B0");
  if (!jb0.is_array() || static_cast<Eigen::Index>(jb0.size()) != n)
    throw ConfigError("field 'loss.B0' must have " + std::to_string(n) + " entries");
  Vector b0(n);
  for (Eigen::Index i = 0; i < n; ++i)
    b0[i] = detail::as_number(jb0[static_cast<std::size_t>(i)], "loss.B0[" + std::to_string(i) + "]");
  const double b00 = detail::number_or(loss, "loss", "B00", 0.0);
  cfg.loss = KronLossModel(std::move(b), std::move(b0), b00);

  const json& top = detail::require(root, "", "topology");
  detail::reject_unknown(top, "topology", {"nodes", "edges"});
  const std::size_t nodes = detail::index_of(detail::require(top, "topology", "nodes"), "topology.nodes");
  if (nodes != cfg.generators.size())
    throw ConfigError("field 'topology.nodes' (" + std::to_string(nodes) + ") does not match generator count (" +
                      std::to_string(cfg.generators.size()) + ")");
  const json& jedges = detail::require(top, "topology", "edges");
  if (!jedges.is_array()) throw ConfigError("field 'topology.edges' must be an array");
  std::vector<Edge> edges;
  for (std::size_t k = 0; k < jedges.size(); ++k) {
    const std::string path = "topology.edges[" + std::to_string(k) + "]";
    const json& e = jedges[k];
    if (!e.is_object()) throw ConfigError("'" + path + "' must be an object");
    detail::reject_unknown(e, path, {"i", "j", "weight"});
    Edge edge;
    edge.i = detail::index_of(detail::require(e, path, "i"), path + ".i");
    edge.j = detail::index_of(detail::require(e, path, "j"), path + ".j");
    edge.weight = detail::number_or(e, path, "weight", 1.0);
    if (!(edge.weight > 0.0)) throw ConfigError("field '" + path + ".weight' must be > 0");
    edges.push_back(edge);
  }
  cfg.topology = LocalTopology(nodes, std::move(edges));

  if (auto it = root.find("params"); it != root.end()) {
    const json& p = *it;
    detail::reject_unknown(p, "params",
                           {"k1", "k2", "mu", "nu", "dt", "t_end", "fp_tol", "fp_max_iter", "settle_tol",
                            "settle_window", "stop_on_settle", "initialization"});
    auto& a = cfg.params;
    a.k1 = detail::number_or(p, "params", "k1", a.k1);
    a.k2 = detail::number_or(p, "params", "k2", a.k2);
    a.mu = detail::number_or(p, "params", "mu", a.mu);
    a.nu = detail::number_or(p, "params", "nu", a.nu);
    a.dt = detail::number_or(p, "params", "dt", a.dt);
    a.t_end = detail::number_or(p, "params", "t_end", a.t_end);
    a.fp_tol = detail::number_or(p, "params", "fp_tol", a.fp_tol);
    if (auto f = p.find("fp_max_iter"); f != p.end())
      a.fp_max_iter = static_cast<int>(detail::index_of(*f, "params.fp_max_iter"));
    a.settle_tol = detail::number_or(p, "params", "settle_tol", a.settle_tol);
    a.settle_window = detail::number_or(p, "params", "settle_window", a.settle_window);
    a.stop_on_settle = detail::bool_or(p, "params", "stop_on_settle", a.stop_on_settle);
    if (auto f = p.find("initialization"); f != p.end()) {
      const std::string mode = f->is_string() ? f->get<std::string>() : "";
      if (mode == "demand_from_p0")
        cfg.initialization = Initialization::DemandFromP0;
      else if (mode == "reproduce_p0")
        cfg.initialization = Initialization::ReproduceP0;
      else
        throw ConfigError("field 'params.initialization' must be \"demand_from_p0\" or \"reproduce_p0\"");
    }
    validate(a);
  }

  if (auto it = root.find("disturbance"); it != root.end()) {
    const json& d = *it;
    detail::reject_unknown(d, "disturbance", {"enabled", "amplitude", "seed", "kind"});
    auto& s = cfg.disturbance;
    s.enabled = detail::bool_or(d, "disturbance", "enabled", s.enabled);
    s.amplitude = detail::number_or(d, "disturbance", "amplitude", s.amplitude);
    if (!(s.amplitude >= 0.0)) throw ConfigError("field 'disturbance.amplitude' must be >= 0");
    if (auto f = d.find("seed"); f != d.end()) {
      if (!f->is_number_unsigned()) throw ConfigError("field 'disturbance.seed' must be an unsigned integer");
      s.seed = f->get<std::uint64_t>();
    }
    if (auto f = d.find("kind"); f != d.end()) {
      const std::string kind = f->is_string() ? f->get<std::string>() : "";
      if (kind == "sine")
        s.kind = DisturbanceSpec::Kind::Sine;
      else if (kind == "square")
        s.kind = DisturbanceSpec::Kind::Square;
      else
        throw ConfigError("field 'disturbance.kind' must be \"sine\" or \"square\"");
    }
  }

  if (auto it = root.find("output"); it != root.end()) {
    const json& o = *it;
    detail::reject_unknown(o, "output", {"dir", "trajectory", "report", "stride"});
    if (auto f = o.find("dir"); f != o.end()) {
      if (!f->is_string()) throw ConfigError("field 'output.dir' must be a string");
      cfg.output.dir = f->get<std::string>();
    }
    cfg.output.trajectory = detail::bool_or(o, "output", "trajectory", cfg.output.trajectory);
    cfg.output.report = detail::bool_or(o, "output", "report", cfg.output.report);
    if (auto f = o.find("stride"); f != o.end()) {
      cfg.output.stride = detail::index_of(*f, "output.stride");
      if (cfg.output.stride == 0) throw ConfigError("field 'output.stride' must be >= 1");
    }
  }

  if (cfg.initialization == Initialization::ReproduceP0) {
    Vector p0(n);
    for (Eigen::Index i = 0; i < n; ++i) p0[i] = cfg.generators[static_cast<std::size_t>(i)].p0;
    const Vector own = generator_losses(cfg.loss, p0);
    for (Eigen::Index i = 0; i < n; ++i) {
      auto& g = cfg.generators[static_cast<std::size_t>(i)];
      if (has_d0[static_cast<std::size_t>(i)])
        throw ConfigError("field 'generators[" + std::to_string(i) +
                          "].d0' conflicts with params.initialization = \"reproduce_p0\"");
      g.d0 = g.p0 - own[i];
    }
  }
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

/// Serialises a config so that parse_config(write_config(c)) == c. Demand
/// shares are always written explicitly unless they were derived from p0.
inline std::string write_config(const RunConfig& cfg) {
  using detail::json;
  json root;
  json gens = json::array();
  for (std::size_t i = 0; i < cfg.generators.size(); ++i) {
    const auto& g = cfg.generators[i];
    json jg = {{"name", cfg.names.size() > i ? cfg.names[i] : "G" + std::to_string(i + 1)},
               {"a", g.a},
               {"b", g.b},
               {"c", g.c},
               {"p0", g.p0}};
    if (cfg.initialization == Initialization::DemandFromP0) jg["d0"] = g.d0;
    gens.push_back(std::move(jg));
  }
  root["generators"] = std::move(gens);

  const auto n = cfg.loss.size();
  json b = json::array();
  for (Eigen::Index i = 0; i < n; ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < n; ++j) row.push_back(cfg.loss.B()(i, j));
    b.push_back(std::move(row));
  }
  json b0 = json::array();
  for (Eigen::Index i = 0; i < n; ++i) b0.push_back(cfg.loss.B0()[i]);
  root["loss"] = {{"B", std::move(b)}, {"B0", std::move(b0)}, {"B00", cfg.loss.B00()}};

  json edges = json::array();
  for (const auto& e : cfg.topology.edges()) edges.push_back({{"i", e.i}, {"j", e.j}, {"weight", e.weight}});
  root["topology"] = {{"nodes", cfg.topology.size()}, {"edges", std::move(edges)}};

  const auto& p = cfg.params;
  root["params"] = {{"k1", p.k1},
                    {"k2", p.k2},
                    {"mu", p.mu},
                    {"nu", p.nu},
                    {"dt", p.dt},
                    {"t_end", p.t_end},
                    {"fp_tol", p.fp_tol},
                    {"fp_max_iter", p.fp_max_iter},
                    {"settle_tol", p.settle_tol},
                    {"settle_window", p.settle_window},
                    {"stop_on_settle", p.stop_on_settle},
                    {"initialization",
                     cfg.initialization == Initialization::DemandFromP0 ? "demand_from_p0" : "reproduce_p0"}};
  const auto& d = cfg.disturbance;
  root["disturbance"] = {{"enabled", d.enabled},
                         {"amplitude", d.amplitude},
                         {"seed", d.seed},
                         {"kind", d.kind == DisturbanceSpec::Kind::Sine ? "sine" : "square"}};
  root["output"] = {{"dir", cfg.output.dir},
                    {"trajectory", cfg.output.trajectory},
                    {"report", cfg.output.report},
                    {"stride", cfg.output.stride}};
  return root.dump(2) + "\n";
}

}  // namespace fxd
