#ifndef HYPOLANG_POTENTIAL_HPP
#define HYPOLANG_POTENTIAL_HPP

#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <string>
#include <utility>

#include "hypolang/types.hpp"

namespace hypolang {

/// A scalar function phi on the real line with a declared bound on |phi'|.
///
/// The composite potential Phi(u) = int_0^1 phi(u(xi)) dxi is built from it
/// in GibbsPotential below.
class ScalarPotential {
 public:
  enum class Kind { Zero, LogCosh, ExplicitPair };

  static ScalarPotential zero() {
    ScalarPotential p;
    p.kind_ = Kind::Zero;
    p.derivative_sup_ = 0.0;
    p.lower_bound_ = 0.0;
    p.convex_ = true;
    return p;
  }

  /// phi(t) = c log cosh t; sup |phi'| = c; convex; inf phi = 0.
  static ScalarPotential log_cosh(double c) {
    if (!(c >= 0.0) || !std::isfinite(c)) throw Error("logcosh: c must be finite and >= 0");
    ScalarPotential p;
    p.kind_ = Kind::LogCosh;
    p.c_ = c;
    p.derivative_sup_ = c;
    p.lower_bound_ = 0.0;
    p.convex_ = true;
    return p;
  }

  /// User-supplied phi and phi'. The declared bounds are validated by sampling
  /// t over [-50, 50]; declarations that fail are rejected.
  static ScalarPotential explicit_pair(std::function<double(double)> value,
                                       std::function<double(double)> derivative,
                                       double derivative_sup, double lower_bound, bool convex,
                                       std::string name = "explicit") {
    if (!value || !derivative) throw Error("explicit potential needs value and derivative");
    ScalarPotential p;
    p.kind_ = Kind::ExplicitPair;
    p.value_ = std::move(value);
    p.derivative_ = std::move(derivative);
    p.derivative_sup_ = derivative_sup;
    p.lower_bound_ = lower_bound;
    p.convex_ = convex;
    p.name_ = std::move(name);
    p.validate();
    return p;
  }

  Kind kind() const { return kind_; }
  double c() const { return c_; }
  double derivative_sup() const { return derivative_sup_; }
  double lower_bound() const { return lower_bound_; }
  bool convex() const { return convex_; }

  std::string name() const {
    switch (kind_) {
      case Kind::Zero: return "zero";
      case Kind::LogCosh: return "logcosh";
      case Kind::ExplicitPair: return name_;
    }
    return name_;
  }

  double value(double t) const {
    switch (kind_) {
      case Kind::Zero: return 0.0;
      case Kind::LogCosh: {
        const double a = std::fabs(t);
        return c_ * (a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2);
      }
      case Kind::ExplicitPair: return value_(t);
    }
    return 0.0;
  }

  double derivative(double t) const {
    switch (kind_) {
      case Kind::Zero: return 0.0;
      case Kind::LogCosh: return c_ * std::tanh(t);
      case Kind::ExplicitPair: return derivative_(t);
    }
    return 0.0;
  }

  /// Grid check of lower_bound and derivative_sup over [-50, 50].
  void validate(std::size_t points = 20001) const {
    if (!std::isfinite(lower_bound_)) throw Error("potential lower bound must be finite");
    if (!(derivative_sup_ >= 0.0) || !std::isfinite(derivative_sup_))
      throw Error("potential derivative_sup must be finite and >= 0");
    for (std::size_t j = 0; j < points; ++j) {
      const double t = -50.0 + 100.0 * static_cast<double>(j) / static_cast<double>(points - 1);
      const double f = value(t);
      const double df = derivative(t);
      const double slack = 1e-12 * (1.0 + std::fabs(f));
      if (!(f >= lower_bound_ - slack))
        throw Error("potential " + name() + ": value below declared lower bound at t = " +
                    std::to_string(t));
      if (!(std::fabs(df) <= derivative_sup_ * (1.0 + 1e-12) + 1e-15))
        throw Error("potential " + name() + ": |phi'| exceeds declared bound at t = " +
                    std::to_string(t));
    }
  }

 private:
  ScalarPotential() = default;

  Kind kind_ = Kind::Zero;
  double c_ = 0.0;
  double derivative_sup_ = 0.0;
  double lower_bound_ = 0.0;
  bool convex_ = true;
  std::string name_;
  std::function<double(double)> value_;
  std::function<double(double)> derivative_;
};

/// Composite midpoint rule on (0,1) with the sine table sqrt(2) sin(k pi xi_j).
class PhysicalGrid {
 public:
  PhysicalGrid(std::size_t modes, std::size_t points) : n_(modes), m_(points) {
    if (modes == 0) throw Error("grid needs at least one mode");
    if (points == 0) throw Error("grid needs at least one quadrature point");
    xi_.resize(m_);
    for (std::size_t j = 0; j < m_; ++j)
      xi_[j] = (static_cast<double>(j) + 0.5) / static_cast<double>(m_);
    table_.resize(n_ * m_);
    for (std::size_t k = 0; k < n_; ++k)
      for (std::size_t j = 0; j < m_; ++j)
        table_[k * m_ + j] =
            std::numbers::sqrt2 * std::sin(static_cast<double>(k + 1) * std::numbers::pi * xi_[j]);
  }

  /// Default resolution: four points per mode.
  explicit PhysicalGrid(std::size_t modes) : PhysicalGrid(modes, 4 * modes) {}

  std::size_t capacity() const { return n_; }
  std::size_t points() const { return m_; }
  double weight() const { return 1.0 / static_cast<double>(m_); }
  double point(std::size_t j) const { return xi_[j]; }
  /// sqrt(2) sin(k pi xi_j), k 1-based
  double basis(std::size_t k, std::size_t j) const { return table_[(k - 1) * m_ + j]; }

 private:
  std::size_t n_;
  std::size_t m_;
  Vec xi_;
  Vec table_;
};

/// u(xi_j) = sum_k u_k sqrt(2) sin(k pi xi_j)
inline Vec to_physical(const Vec& u, const PhysicalGrid& grid) {
  if (u.size() > grid.capacity()) throw Error("to_physical: more modes than the grid supports");
  Vec out(grid.points(), 0.0);
  for (std::size_t k = 1; k <= u.size(); ++k) {
    const double c = u[k - 1];
    if (c == 0.0) continue;
    for (std::size_t j = 0; j < grid.points(); ++j) out[j] += c * grid.basis(k, j);
  }
  return out;
}

/// Phi(u) by composite midpoint quadrature.
inline double Phi(const Vec& u, const ScalarPotential& pot, const PhysicalGrid& grid) {
  if (pot.kind() == ScalarPotential::Kind::Zero) return 0.0;
  const Vec phys = to_physical(u, grid);
  double s = 0.0;
  for (double x : phys) s += pot.value(x);
  return s * grid.weight();
}

/// Spectral coefficients of phi' o u; exactly the gradient of the quadrature Phi.
inline Vec grad_Phi(const Vec& u, const ScalarPotential& pot, const PhysicalGrid& grid) {
  Vec g(u.size(), 0.0);
  if (pot.kind() == ScalarPotential::Kind::Zero) return g;
  Vec phys = to_physical(u, grid);
  for (double& x : phys) x = pot.derivative(x);
  const double w = grid.weight();
  for (std::size_t k = 1; k <= u.size(); ++k) {
    double s = 0.0;
    for (std::size_t j = 0; j < grid.points(); ++j) s += phys[j] * grid.basis(k, j);
    g[k - 1] = s * w;
  }
  return g;
}

/// phi together with the grid it is integrated on.
class GibbsPotential {
 public:
  GibbsPotential(ScalarPotential phi, PhysicalGrid grid)
      : phi_(std::move(phi)), grid_(std::move(grid)) {}

  const ScalarPotential& scalar() const { return phi_; }
  const PhysicalGrid& grid() const { return grid_; }
  bool is_zero() const { return phi_.kind() == ScalarPotential::Kind::Zero; }

  double value(const Vec& u) const { return Phi(u, phi_, grid_); }
  Vec gradient(const Vec& u) const { return grad_Phi(u, phi_, grid_); }

  /// Allocation-free gradient for inner loops; `phys` is scratch space.
  void gradient_into(const Vec& u, Vec& out, Vec& phys) const {
    out.assign(u.size(), 0.0);
    if (is_zero()) return;
    phys.assign(grid_.points(), 0.0);
    for (std::size_t k = 1; k <= u.size(); ++k) {
      const double c = u[k - 1];
      for (std::size_t j = 0; j < grid_.points(); ++j) phys[j] += c * grid_.basis(k, j);
    }
    for (double& x : phys) x = phi_.derivative(x);
    const double w = grid_.weight();
    for (std::size_t k = 1; k <= u.size(); ++k) {
      double s = 0.0;
      for (std::size_t j = 0; j < grid_.points(); ++j) s += phys[j] * grid_.basis(k, j);
      out[k - 1] = s * w;
    }
  }
  /// Phi >= inf phi because (0,1) has unit measure.
  double lower_bound() const { return phi_.lower_bound(); }

 private:
  ScalarPotential phi_;
  PhysicalGrid grid_;
};

}  // namespace hypolang

#endif  // HYPOLANG_POTENTIAL_HPP
