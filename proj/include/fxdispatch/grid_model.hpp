#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fxdispatch/errors.hpp"

namespace fxd {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// One generator with quadratic cost C(p) = c p^2 + b p + a.
///
/// Units: a in $/h, b in $/MWh, c in $/MW^2h, powers in MW. `d0` is the
/// share of total demand attached to this generator's bus.
struct GeneratorSpec {
  double a = 0.0;
  double b = 0.0;
  double c = 1.0;
  double p0 = 0.0;
  double d0 = 0.0;

  double cost(double p) const noexcept { return (c * p + b) * p + a; }
  double marginal(double p) const noexcept { return 2.0 * c * p + b; }
  double curvature() const noexcept { return 2.0 * c; }

  bool operator==(const GeneratorSpec&) const = default;
};

inline void validate(const GeneratorSpec& g, std::size_t index = 0) {
  if (!(g.c > 0.0)) {
    std::ostringstream os;
    os << "generator " << index << ": quadratic coefficient c must be > 0 (got " << g.c << ")";
    throw ConfigError(os.str());
  }
  if (!(g.p0 >= 0.0)) {
    std::ostringstream os;
    os << "generator " << index << ": initial power p0 must be >= 0 (got " << g.p0 << ")";
    throw ConfigError(os.str());
  }
}

/// Uniform lower bounds on cost curvature (sigma) and marginal cost (delta)
/// over the nonnegative orthant.
struct CostSummary {
  double sigma = 0.0;
  double delta = 0.0;
};

inline double marginal_cost(const GeneratorSpec& gen, double p) noexcept { return gen.marginal(p); }

inline CostSummary cost_summary(std::span<const GeneratorSpec> gens) {
  if (gens.empty()) throw ConfigError("cost_summary: no generators");
  double min_c = gens[0].c;
  double min_b = gens[0].b;
  for (std::size_t i = 0; i < gens.size(); ++i) {
    validate(gens[i], i);
    min_c = std::min(min_c, gens[i].c);
    min_b = std::min(min_b, gens[i].b);
  }
  if (min_b == 0.0)
    throw AssumptionViolation("cost_summary: marginal-cost lower bound delta is zero");
  return {2.0 * min_c, min_b};
}

inline double total_cost(std::span<const GeneratorSpec> gens, const Vector& p) {
  if (static_cast<std::size_t>(p.size()) != gens.size())
    throw ConfigError("total_cost: power vector length does not match generator count");
  double sum = 0.0;
  for (std::size_t i = 0; i < gens.size(); ++i) sum += gens[i].cost(p[static_cast<Eigen::Index>(i)]);
  return sum;
}

inline Vector marginal_costs(std::span<const GeneratorSpec> gens, const Vector& p) {
  Vector out(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) out[i] = gens[static_cast<std::size_t>(i)].marginal(p[i]);
  return out;
}

/// Kron's quadratic loss model P_L = P'BP + B0'P + B00.
///
/// B must be symmetric as stored and, with B0, elementwise nonnegative. The
/// constant B00 is attributed to generators in equal shares B00/N when a
/// per-generator loss is requested; no quantity used by the dispatch
/// dynamics depends on how B00 is split.
class KronLossModel {
 public:
  KronLossModel() = default;

  KronLossModel(Matrix b, Vector b0, double b00)
      : b_(std::move(b)), b0_(std::move(b0)), b00_(b00) {
    const Eigen::Index n = b_.rows();
    if (n == 0) throw ConfigError("loss model: B is empty");
    if (b_.cols() != n) throw ConfigError("loss model: B is not square");
    if (b0_.size() != n) throw ConfigError("loss model: B0 length does not match B");
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!(b0_[i] >= 0.0)) {
        std::ostringstream os;
        os << "loss model: B0[" << i << "] is negative";
        throw ConfigError(os.str());
      }
      for (Eigen::Index j = 0; j < n; ++j) {
        if (!(b_(i, j) >= 0.0)) {
          std::ostringstream os;
          os << "loss model: B[" << i << "][" << j << "] is negative";
          throw ConfigError(os.str());
        }
        if (j > i && b_(i, j) != b_(j, i)) {
          std::ostringstream os;
          os << "loss model: B is not symmetric at (" << i << "," << j << ")";
          throw ConfigError(os.str());
        }
      }
    }
    if (!std::isfinite(b00_)) throw ConfigError("loss model: B00 is not finite");
  }

  static KronLossModel lossless(Eigen::Index n) {
    return {Matrix::Zero(n, n), Vector::Zero(n), 0.0};
  }

  Eigen::Index size() const noexcept { return b_.rows(); }
  const Matrix& B() const noexcept { return b_; }
  const Vector& B0() const noexcept { return b0_; }
  double B00() const noexcept { return b00_; }

  bool operator==(const KronLossModel& o) const {
    return b_.rows() == o.b_.rows() && b_ == o.b_ && b0_ == o.b0_ && b00_ == o.b00_;
  }

 private:
  Matrix b_;
  Vector b0_;
  double b00_ = 0.0;
};

namespace detail {
inline void check_dims(const KronLossModel& m, const Vector& p) {
  if (p.size() != m.size()) {
    std::ostringstream os;
    os << "power vector has length " << p.size() << ", loss model expects " << m.size();
    throw ConfigError(os.str());
  }
}
inline void check_index(const KronLossModel& m, Eigen::Index i) {
  if (i < 0 || i >= m.size()) throw std::out_of_range("generator index out of range");
}
}  // namespace detail

inline double total_loss(const KronLossModel& m, const Vector& p) {
  detail::check_dims(m, p);
  return p.dot(m.B() * p) + m.B0().dot(p) + m.B00();
}

inline double generator_loss(const KronLossModel& m, const Vector& p, Eigen::Index i) {
  detail::check_dims(m, p);
  detail::check_index(m, i);
  return p[i] * m.B().row(i).dot(p) + p[i] * m.B0()[i] + m.B00() / static_cast<double>(m.size());
}

// dP_L / dP_i
inline double dloss_total_dPi(const KronLossModel& m, const Vector& p, Eigen::Index i) {
  detail::check_dims(m, p);
  detail::check_index(m, i);
  return 2.0 * m.B().row(i).dot(p) + m.B0()[i];
}

// dP_Li / dP_i, the generator's own share. Equals
// 0.5 * dP_L/dP_i + B_ii P_i + B_i0 / 2 for symmetric B.
inline double dloss_own_dPi(const KronLossModel& m, const Vector& p, Eigen::Index i) {
  detail::check_dims(m, p);
  detail::check_index(m, i);
  return m.B().row(i).dot(p) + m.B()(i, i) * p[i] + m.B0()[i];
}

inline Vector generator_losses(const KronLossModel& m, const Vector& p) {
  detail::check_dims(m, p);
  const double share = m.B00() / static_cast<double>(m.size());
  return (p.array() * (m.B() * p).array() + p.array() * m.B0().array() + share).matrix();
}

inline Vector loss_gradient(const KronLossModel& m, const Vector& p) {
  detail::check_dims(m, p);
  return 2.0 * (m.B() * p) + m.B0();
}

inline Vector own_loss_derivatives(const KronLossModel& m, const Vector& p) {
  detail::check_dims(m, p);
  return (m.B() * p).array() + m.B().diagonal().array() * p.array() + m.B0().array();
}

}  // namespace fxd
