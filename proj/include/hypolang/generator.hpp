#ifndef HYPOLANG_GENERATOR_HPP
#define HYPOLANG_GENERATOR_HPP

// Exact evaluation of the Langevin generator L = S - A on cylinder functions,
// the velocity projection P_S, and the Gaussian moment formulas.
//
// With every operator diagonal in the shared basis, for f = f(u_1..u_n, v_1..v_n):
//   S f = sum_k lambda_k^b2 d2f/dv_k^2 - sum_k lambda_k^(b2-a2) v_k df/dv_k
//   A f = sum_k lambda_k^(b1-a1) u_k df/dv_k + sum_k lambda_k^b1 dPhi_k df/dv_k
//         - sum_k lambda_k^(b1-a2) v_k df/du_k

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hypolang/gauss_hermite.hpp"
#include "hypolang/model.hpp"
#include "hypolang/potential.hpp"
#include "hypolang/types.hpp"

namespace hypolang {

enum class JetOrder { Value = 0, First = 1, Second = 2 };

/// Value and partial derivatives of a cylinder function at one state.
/// Vectors are sized to the state's mode count; Hessians are row-major n x n.
struct Jet {
  double value = 0.0;
  Vec du, dv;
  Vec huu, hvv;

  double huu_at(std::size_t i, std::size_t j) const { return huu[i * du.size() + j]; }
  double hvv_at(std::size_t i, std::size_t j) const { return hvv[i * dv.size() + j]; }
};

class CylinderFunction;
using FunctionPtr = std::shared_ptr<const CylinderFunction>;

/// A smooth function of the first modes() coordinates of u and v.
class CylinderFunction {
 public:
  virtual ~CylinderFunction() = default;

  virtual std::size_t modes() const = 0;
  virtual std::string name() const = 0;
  virtual double value(const StateVector& x) const = 0;
  virtual Jet jet(const StateVector& x, JetOrder order) const = 0;

  /// 1-based v-modes the function actually depends on (drives the quadrature fallback).
  virtual std::vector<std::size_t> active_v_modes() const {
    std::vector<std::size_t> all(modes());
    for (std::size_t k = 0; k < all.size(); ++k) all[k] = k + 1;
    return all;
  }

  /// Closed-form u -> int f(u, v) dmu2(v), or nullptr when unavailable.
  virtual FunctionPtr closed_form_projection(const GaussianSpec&, std::size_t) const {
    return nullptr;
  }

 protected:
  void check_state(const StateVector& x) const {
    if (x.u.size() < modes() || x.v.size() < modes())
      throw Error(name() + ": state has fewer modes than the function uses");
  }

  static Jet blank_jet(const StateVector& x, JetOrder order) {
    Jet j;
    const std::size_t n = x.modes();
    if (order >= JetOrder::First) {
      j.du.assign(n, 0.0);
      j.dv.assign(n, 0.0);
    }
    if (order >= JetOrder::Second) {
      j.huu.assign(n * n, 0.0);
      j.hvv.assign(n * n, 0.0);
    }
    return j;
  }
};

namespace catalog {

/// f_i(u, v) = u_i
class CoordinateU final : public CylinderFunction {
 public:
  explicit CoordinateU(std::size_t i) : i_(i) {
    if (i == 0) throw Error("mode indices are 1-based");
  }
  std::size_t modes() const override { return i_; }
  std::string name() const override { return "u" + std::to_string(i_); }
  double value(const StateVector& x) const override { return x.u[i_ - 1]; }
  Jet jet(const StateVector& x, JetOrder order) const override {
    check_state(x);
    Jet j = blank_jet(x, order);
    j.value = value(x);
    if (order >= JetOrder::First) j.du[i_ - 1] = 1.0;
    return j;
  }
  std::vector<std::size_t> active_v_modes() const override { return {}; }
  FunctionPtr closed_form_projection(const GaussianSpec&, std::size_t) const override {
    return std::make_shared<CoordinateU>(i_);
  }

 private:
  std::size_t i_;
};

/// g_i(u, v) = v_i
class CoordinateV final : public CylinderFunction {
 public:
  explicit CoordinateV(std::size_t i) : i_(i) {
    if (i == 0) throw Error("mode indices are 1-based");
  }
  std::size_t modes() const override { return i_; }
  std::string name() const override { return "v" + std::to_string(i_); }
  double value(const StateVector& x) const override { return x.v[i_ - 1]; }
  Jet jet(const StateVector& x, JetOrder order) const override {
    check_state(x);
    Jet j = blank_jet(x, order);
    j.value = value(x);
    if (order >= JetOrder::First) j.dv[i_ - 1] = 1.0;
    return j;
  }
  std::vector<std::size_t> active_v_modes() const override { return {i_}; }
  FunctionPtr closed_form_projection(const GaussianSpec&, std::size_t) const override;

 private:
  std::size_t i_;
};

/// Constant function.
class Constant final : public CylinderFunction {
 public:
  explicit Constant(double c) : c_(c) {}
  std::size_t modes() const override { return 0; }
  std::string name() const override { return "const"; }
  double value(const StateVector&) const override { return c_; }
  Jet jet(const StateVector& x, JetOrder order) const override {
    Jet j = blank_jet(x, order);
    j.value = c_;
    return j;
  }
  std::vector<std::size_t> active_v_modes() const override { return {}; }
  FunctionPtr closed_form_projection(const GaussianSpec&, std::size_t) const override {
    return std::make_shared<Constant>(c_);
  }

 private:
  double c_;
};

inline FunctionPtr CoordinateV::closed_form_projection(const GaussianSpec&, std::size_t) const {
  return std::make_shared<Constant>(0.0);
}

/// u_i u_j
class ProductUU final : public CylinderFunction {
 public:
  ProductUU(std::size_t i, std::size_t j) : i_(i), j_(j) {
    if (i == 0 || j == 0) throw Error("mode indices are 1-based");
  }
  std::size_t modes() const override { return std::max(i_, j_); }
  std::string name() const override {
    return "u" + std::to_string(i_) + "*u" + std::to_string(j_);
  }
  double value(const StateVector& x) const override { return x.u[i_ - 1] * x.u[j_ - 1]; }
  Jet jet(const StateVector& x, JetOrder order) const override {
    check_state(x);
    Jet jt = blank_jet(x, order);
    jt.value = value(x);
    const std::size_t n = x.modes();
    if (order >= JetOrder::First) {
      jt.du[i_ - 1] += x.u[j_ - 1];
      jt.du[j_ - 1] += x.u[i_ - 1];
    }
    if (order >= JetOrder::Second) {
      jt.huu[(i_ - 1) * n + (j_ - 1)] += 1.0;
      jt.huu[(j_ - 1) * n + (i_ - 1)] += 1.0;
    }
    return jt;
  }
  std::vector<std::size_t> active_v_modes() const override { return {}; }
  FunctionPtr closed_form_projection(const GaussianSpec&, std::size_t) const override {
    return std::make_shared<ProductUU>(i_, j_);
  }

 private:
  std::size_t i_, j_;
};

/// v_i v_j
class ProductVV final : public CylinderFunction {
 public:
  ProductVV(std::size_t i, std::size_t j) : i_(i), j_(j) {
    if (i == 0 || j == 0) throw Error("mode indices are 1-based");
  }
  std::size_t modes() const override { return std::max(i_, j_); }
  std::string name() const override {
    return "v" + std::to_string(i_) + "*v" + std::to_string(j_);
  }
  double value(const StateVector& x) const override { return x.v[i_ - 1] * x.v[j_ - 1]; }
  Jet jet(const StateVector& x, JetOrder order) const override {
    check_state(x);
    Jet jt = blank_jet(x, order);
    jt.value = value(x);
    const std::size_t n = x.modes();
    if (order >= JetOrder::First) {
      jt.dv[i_ - 1] += x.v[j_ - 1];
      jt.dv[j_ - 1] += x.v[i_ - 1];
    }
    if (order >= JetOrder::Second) {
      jt.hvv[(i_ - 1) * n + (j_ - 1)] += 1.0;
      jt.hvv[(j_ - 1) * n + (i_ - 1)] += 1.0;
    }
    return jt;
  }
  std::vector<std::size_t> active_v_modes() const override {
    if (i_ == j_) return {i_};
    return {std::min(i_, j_), std::max(i_, j_)};
  }
  FunctionPtr closed_form_projection(const GaussianSpec& mu2, std::size_t) const override {
    return std::make_shared<Constant>(i_ == j_ ? mu2.variances.at(i_ - 1) : 0.0);
  }

 private:
  std::size_t i_, j_;
};

/// 1/2 u'Auu u + 1/2 v'Avv v + u'Muv v + bu.u + bv.v + c, with symmetric Auu, Avv.
class QuadraticForm final : public CylinderFunction {
 public:
  struct Coefficients {
    std::size_t n = 0;
    Vec Auu, Avv, Muv;  ///< row-major n x n
    Vec bu, bv;
    double c = 0.0;
  };

  explicit QuadraticForm(Coefficients q) : q_(std::move(q)) {
    const std::size_t n = q_.n;
    if (n == 0) throw Error("quadratic form needs n >= 1");
    auto fit = [n](Vec& m, std::size_t len) {
      if (m.empty()) m.assign(len, 0.0);
      if (m.size() != len) throw Error("quadratic form: coefficient size mismatch");
    };
    fit(q_.Auu, n * n);
    fit(q_.Avv, n * n);
    fit(q_.Muv, n * n);
    fit(q_.bu, n);
    fit(q_.bv, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < i; ++j) {
        const double a = 0.5 * (q_.Auu[i * n + j] + q_.Auu[j * n + i]);
        q_.Auu[i * n + j] = q_.Auu[j * n + i] = a;
        const double b = 0.5 * (q_.Avv[i * n + j] + q_.Avv[j * n + i]);
        q_.Avv[i * n + j] = q_.Avv[j * n + i] = b;
      }
  }

  const Coefficients& coefficients() const { return q_; }
  std::size_t modes() const override { return q_.n; }
  std::string name() const override { return "quadratic"; }

  double value(const StateVector& x) const override {
    const std::size_t n = q_.n;
    double s = q_.c;
    for (std::size_t i = 0; i < n; ++i) {
      s += q_.bu[i] * x.u[i] + q_.bv[i] * x.v[i];
      for (std::size_t j = 0; j < n; ++j)
        s += 0.5 * x.u[i] * q_.Auu[i * n + j] * x.u[j] + 0.5 * x.v[i] * q_.Avv[i * n + j] * x.v[j] +
             x.u[i] * q_.Muv[i * n + j] * x.v[j];
    }
    return s;
  }

  Jet jet(const StateVector& x, JetOrder order) const override {
    check_state(x);
    Jet jt = blank_jet(x, order);
    jt.value = value(x);
    const std::size_t n = q_.n;
    const std::size_t N = x.modes();
    if (order >= JetOrder::First) {
      for (std::size_t i = 0; i < n; ++i) {
        double gu = q_.bu[i];
        double gv = q_.bv[i];
        for (std::size_t j = 0; j < n; ++j) {
          gu += q_.Auu[i * n + j] * x.u[j] + q_.Muv[i * n + j] * x.v[j];
          gv += q_.Avv[i * n + j] * x.v[j] + q_.Muv[j * n + i] * x.u[j];
        }
        jt.du[i] = gu;
        jt.dv[i] = gv;
      }
    }
    if (order >= JetOrder::Second) {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          jt.huu[i * N + j] = q_.Auu[i * n + j];
          jt.hvv[i * N + j] = q_.Avv[i * n + j];
        }
    }
    return jt;
  }

  std::vector<std::size_t> active_v_modes() const override {
    std::vector<std::size_t> out;
    const std::size_t n = q_.n;
    for (std::size_t k = 0; k < n; ++k) {
      bool used = q_.bv[k] != 0.0;
      for (std::size_t j = 0; j < n && !used; ++j)
        used = q_.Avv[k * n + j] != 0.0 || q_.Muv[j * n + k] != 0.0;
      if (used) out.push_back(k + 1);
    }
    return out;
  }

  FunctionPtr closed_form_projection(const GaussianSpec& mu2, std::size_t) const override {
    Coefficients p;
    p.n = q_.n;
    p.Auu = q_.Auu;
    p.bu = q_.bu;
    p.c = q_.c;
    for (std::size_t k = 0; k < q_.n; ++k) p.c += 0.5 * q_.Avv[k * q_.n + k] * mu2.variances.at(k);
    return std::make_shared<QuadraticForm>(std::move(p));
  }

 private:
  Coefficients q_;
};

/// E_Z[tanh(wu.u + wv.v + offset + sigma Z)], Z standard normal.
/// sigma = 0 is the plain tanh of a linear form; sigma > 0 arises from P_S
/// and is evaluated by Gauss-Hermite quadrature of the given order.
class TanhLinearForm final : public CylinderFunction {
 public:
  TanhLinearForm(Vec wu, Vec wv, double offset = 0.0, double sigma = 0.0,
                 std::size_t hermite_order = 20)
      : wu_(std::move(wu)), wv_(std::move(wv)), offset_(offset), sigma_(sigma),
        order_(hermite_order) {
    const std::size_t n = std::max(wu_.size(), wv_.size());
    if (n == 0) throw Error("tanh form needs weights");
    wu_.resize(n, 0.0);
    wv_.resize(n, 0.0);
    if (!(sigma_ >= 0.0)) throw Error("tanh form: smoothing must be >= 0");
    if (sigma_ > 0.0) rule_ = std::make_shared<HermiteRule>(HermiteRule::make(order_));
  }

  const Vec& wu() const { return wu_; }
  const Vec& wv() const { return wv_; }
  double offset() const { return offset_; }
  double sigma() const { return sigma_; }

  std::size_t modes() const override { return wu_.size(); }
  std::string name() const override { return sigma_ > 0.0 ? "tanh_smoothed" : "tanh"; }

  double value(const StateVector& x) const override { return moments(argument(x), 0)[0]; }

  Jet jet(const StateVector& x, JetOrder order) const override {
    check_state(x);
    Jet jt = blank_jet(x, order);
    const auto m = moments(argument(x), static_cast<int>(order));
    jt.value = m[0];
    const std::size_t n = wu_.size();
    const std::size_t N = x.modes();
    if (order >= JetOrder::First)
      for (std::size_t i = 0; i < n; ++i) {
        jt.du[i] = wu_[i] * m[1];
        jt.dv[i] = wv_[i] * m[1];
      }
    if (order >= JetOrder::Second)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          jt.huu[i * N + j] = wu_[i] * wu_[j] * m[2];
          jt.hvv[i * N + j] = wv_[i] * wv_[j] * m[2];
        }
    return jt;
  }

  std::vector<std::size_t> active_v_modes() const override {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < wv_.size(); ++k)
      if (wv_[k] != 0.0) out.push_back(k + 1);
    return out;
  }

  FunctionPtr closed_form_projection(const GaussianSpec& mu2,
                                     std::size_t hermite_order) const override {
    // wv.v is centered Gaussian with variance sum wv_k^2 nu_k.
    double var = sigma_ * sigma_;
    for (std::size_t k = 0; k < wv_.size(); ++k) var += wv_[k] * wv_[k] * mu2.variances.at(k);
    return std::make_shared<TanhLinearForm>(wu_, Vec(wu_.size(), 0.0), offset_, std::sqrt(var),
                                            hermite_order);
  }

 private:
  double argument(const StateVector& x) const {
    check_state(x);
    double a = offset_;
    for (std::size_t k = 0; k < wu_.size(); ++k) a += wu_[k] * x.u[k] + wv_[k] * x.v[k];
    return a;
  }

  // [E tanh, E sech^2, E (-2 tanh sech^2)] at argument a + sigma Z
  std::array<double, 3> moments(double a, int order) const {
    auto one = [order](double y) {
      const double t = std::tanh(y);
      const double s2 = 1.0 - t * t;
      return std::array<double, 3>{t, order >= 1 ? s2 : 0.0, order >= 2 ? -2.0 * t * s2 : 0.0};
    };
    if (!rule_) return one(a);
    std::array<double, 3> acc{0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < rule_->order(); ++i) {
      const auto r = one(a + sigma_ * rule_->nodes[i]);
      for (int q = 0; q < 3; ++q) acc[q] += rule_->weights[i] * r[q];
    }
    return acc;
  }

  Vec wu_, wv_;
  double offset_;
  double sigma_;
  std::size_t order_;
  std::shared_ptr<const HermiteRule> rule_;
};

/// f - c
class Shifted final : public CylinderFunction {
 public:
  Shifted(FunctionPtr f, double c) : f_(std::move(f)), c_(c) {}
  std::size_t modes() const override { return f_->modes(); }
  std::string name() const override { return f_->name() + "-mean"; }
  double value(const StateVector& x) const override { return f_->value(x) - c_; }
  Jet jet(const StateVector& x, JetOrder order) const override {
    Jet j = f_->jet(x, order);
    j.value -= c_;
    return j;
  }
  std::vector<std::size_t> active_v_modes() const override { return f_->active_v_modes(); }
  FunctionPtr closed_form_projection(const GaussianSpec& mu2, std::size_t order) const override {
    FunctionPtr inner = f_->closed_form_projection(mu2, order);
    if (!inner) return nullptr;
    return std::make_shared<Shifted>(std::move(inner), c_);
  }

 private:
  FunctionPtr f_;
  double c_;
};

/// Tensor Gauss-Hermite integration of f over its active v-modes.
/// The generic route for functions without a closed-form P_S.
class HermiteProjected final : public CylinderFunction {
 public:
  static constexpr std::size_t kMaxActiveModes = 4;

  HermiteProjected(FunctionPtr f, const GaussianSpec& mu2, std::size_t order)
      : f_(std::move(f)), active_(f_->active_v_modes()), rule_(HermiteRule::make(order)) {
    if (active_.size() > kMaxActiveModes)
      throw Error("P_S quadrature: " + std::to_string(active_.size()) +
                  " active v-modes exceed the tensor limit of " +
                  std::to_string(kMaxActiveModes));
    for (std::size_t k : active_) scale_.push_back(std::sqrt(mu2.variances.at(k - 1)));
  }

  std::size_t modes() const override { return f_->modes(); }
  std::string name() const override { return "PS[" + f_->name() + "]"; }
  std::vector<std::size_t> active_v_modes() const override { return {}; }

  double value(const StateVector& x) const override {
    double s = 0.0;
    integrate(x, [&](const StateVector& y, double w) { s += w * f_->value(y); });
    return s;
  }

  Jet jet(const StateVector& x, JetOrder order) const override {
    Jet acc = blank_jet(x, order);
    integrate(x, [&](const StateVector& y, double w) {
      const Jet j = f_->jet(y, order);
      acc.value += w * j.value;
      for (std::size_t i = 0; i < acc.du.size(); ++i) acc.du[i] += w * j.du[i];
      for (std::size_t i = 0; i < acc.huu.size(); ++i) acc.huu[i] += w * j.huu[i];
    });
    return acc;
  }

  FunctionPtr closed_form_projection(const GaussianSpec&, std::size_t) const override {
    return std::make_shared<HermiteProjected>(*this);
  }

 private:
  template <class Visit>
  void integrate(const StateVector& x, Visit&& visit) const {
    StateVector y(x.u, Vec(x.v.size(), 0.0), x.t);
    const std::size_t d = active_.size();
    const std::size_t q = rule_.order();
    std::vector<std::size_t> idx(d, 0);
    for (;;) {
      double w = 1.0;
      for (std::size_t a = 0; a < d; ++a) {
        y.v[active_[a] - 1] = scale_[a] * rule_.nodes[idx[a]];
        w *= rule_.weights[idx[a]];
      }
      visit(y, w);
      std::size_t a = 0;
      while (a < d && ++idx[a] == q) idx[a++] = 0;
      if (a == d) break;
    }
  }

  FunctionPtr f_;
  std::vector<std::size_t> active_;
  Vec scale_;
  HermiteRule rule_;
};

inline FunctionPtr coordinate_u(std::size_t i) { return std::make_shared<CoordinateU>(i); }
inline FunctionPtr coordinate_v(std::size_t i) { return std::make_shared<CoordinateV>(i); }
inline FunctionPtr product_uu(std::size_t i, std::size_t j) {
  return std::make_shared<ProductUU>(i, j);
}
inline FunctionPtr product_vv(std::size_t i, std::size_t j) {
  return std::make_shared<ProductVV>(i, j);
}
inline FunctionPtr constant(double c) { return std::make_shared<Constant>(c); }
inline FunctionPtr tanh_linear(Vec wu, Vec wv, double offset = 0.0) {
  return std::make_shared<TanhLinearForm>(std::move(wu), std::move(wv), offset);
}
inline FunctionPtr quadratic(QuadraticForm::Coefficients q) {
  return std::make_shared<QuadraticForm>(std::move(q));
}

/// A fixed mixed quadratic form over the first min(n, 3) modes.
inline FunctionPtr sample_quadratic(std::size_t n) {
  const std::size_t m = std::min<std::size_t>(n, 3);
  QuadraticForm::Coefficients q;
  q.n = m;
  q.Auu.assign(m * m, 0.0);
  q.Avv.assign(m * m, 0.0);
  q.Muv.assign(m * m, 0.0);
  q.bu.assign(m, 0.0);
  q.bv.assign(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    q.Auu[i * m + i] = 2.0 / static_cast<double>(i + 1);
    q.Avv[i * m + i] = 1.0 + 0.5 * static_cast<double>(i);
    q.bu[i] = 0.3 * static_cast<double>(i + 1);
    q.bv[i] = -0.2;
    if (i + 1 < m) {
      q.Auu[i * m + i + 1] = q.Auu[(i + 1) * m + i] = 0.4;
      q.Avv[i * m + i + 1] = q.Avv[(i + 1) * m + i] = -0.3;
      q.Muv[i * m + i + 1] = 0.7;
    }
  }
  q.Muv[0] = 0.5;
  q.c = 0.25;
  return quadratic(std::move(q));
}

/// Test functions used by the invariance and operator-identity suites.
inline std::vector<FunctionPtr> default_catalog(std::size_t n) {
  std::vector<FunctionPtr> out{coordinate_u(1), coordinate_v(1), product_uu(1, 1),
                               product_vv(1, 1), sample_quadratic(n)};
  if (n >= 2) {
    out.push_back(product_uu(1, 2));
    out.push_back(product_vv(1, 2));
    out.push_back(tanh_linear({2.0, -1.0}, {1.5, 0.5}, 0.1));
  } else {
    out.push_back(tanh_linear({2.0}, {1.5}, 0.1));
  }
  return out;
}

/// Functions of u only, for the Poincare check.
inline std::vector<FunctionPtr> u_catalog(std::size_t n) {
  const std::size_t j = n >= 2 ? 2 : 1;
  QuadraticForm::Coefficients q;
  q.n = j;
  q.Auu.assign(j * j, 0.0);
  for (std::size_t i = 0; i < j; ++i) q.Auu[i * j + i] = 1.0 + static_cast<double>(i);
  if (j == 2) q.Auu[1] = q.Auu[2] = 0.5;
  q.bu.assign(j, 0.4);
  return {coordinate_u(1), product_uu(1, 1), product_uu(1, j),
          tanh_linear(j == 2 ? Vec{3.0, -2.0} : Vec{3.0}, {}, 0.2), quadratic(std::move(q))};
}

}  // namespace catalog

// ---------------------------------------------------------------------------
// Generator

inline void check_model_state(const StateVector& x, const Model& model) {
  if (x.u.size() != model.modes() || x.v.size() != model.modes())
    throw Error("state has " + std::to_string(x.u.size()) + " modes, model has " +
                std::to_string(model.modes()));
}

inline double apply_S(const CylinderFunction& f, const StateVector& x, const Model& model) {
  check_model_state(x, model);
  const std::size_t n = model.modes();
  if (f.modes() > n) throw Error("apply_S: function uses more modes than the model");
  const Jet j = f.jet(x, JetOrder::Second);
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const ModeCoefficients& m = model.mode(k + 1);
    s += m.diffusion * j.hvv[k * n + k] - m.damping * x.v[k] * j.dv[k];
  }
  return s;
}

/// A f with a precomputed dPhi(u).
inline double apply_A(const CylinderFunction& f, const StateVector& x, const Model& model,
                      const Vec& dphi) {
  check_model_state(x, model);
  const std::size_t n = model.modes();
  if (f.modes() > n) throw Error("apply_A: function uses more modes than the model");
  const Jet j = f.jet(x, JetOrder::First);
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const ModeCoefficients& m = model.mode(k + 1);
    s += (m.restoring * x.u[k] + m.force * dphi[k]) * j.dv[k] - m.coupling * x.v[k] * j.du[k];
  }
  return s;
}

inline double apply_A(const CylinderFunction& f, const StateVector& x, const Model& model,
                      const GibbsPotential& pot) {
  return apply_A(f, x, model, pot.gradient(x.u));
}

inline double apply_L(const CylinderFunction& f, const StateVector& x, const Model& model,
                      const Vec& dphi) {
  return apply_S(f, x, model) - apply_A(f, x, model, dphi);
}

inline double apply_L(const CylinderFunction& f, const StateVector& x, const Model& model,
                      const GibbsPotential& pot) {
  return apply_L(f, x, model, pot.gradient(x.u));
}

/// (K22 D2 f, D2 f), the integrand of the Dirichlet form of S.
inline double carre_du_champ_v(const CylinderFunction& f, const StateVector& x,
                               const Model& model) {
  const Jet j = f.jet(x, JetOrder::First);
  double s = 0.0;
  for (std::size_t k = 0; k < model.modes(); ++k) s += model.mode(k + 1).diffusion * j.dv[k] * j.dv[k];
  return s;
}

/// (Q1 D f, D f) for a function of u.
inline double carre_du_champ_u(const CylinderFunction& f, const StateVector& x,
                               const Model& model) {
  const Jet j = f.jet(x, JetOrder::First);
  double s = 0.0;
  for (std::size_t k = 0; k < model.modes(); ++k) s += model.mode(k + 1).var_u * j.du[k] * j.du[k];
  return s;
}

// ---------------------------------------------------------------------------
// Projections

struct Projection {
  FunctionPtr f_S;
  /// largest change seen when refining the Hermite order (0 for exact rules)
  double refinement_change = 0.0;
  bool resolved = true;
  bool closed_form = true;
};

inline constexpr std::size_t kHermiteOrder = 20;
inline constexpr std::size_t kHermiteRefinedOrder = 28;
inline constexpr double kHermiteTolerance = 1e-8;

/// P_S f = int f(., v) dmu2(v). Closed form for catalog functions, tensor
/// Gauss-Hermite otherwise; the refinement check probes a few fixed states.
inline Projection project_PS(const FunctionPtr& f, const GaussianSpec& mu2,
                             std::size_t order = kHermiteOrder) {
  Projection p;
  FunctionPtr refined;
  if (FunctionPtr closed = f->closed_form_projection(mu2, order)) {
    p.f_S = std::move(closed);
    refined = f->closed_form_projection(mu2, kHermiteRefinedOrder);
  } else {
    p.closed_form = false;
    p.f_S = std::make_shared<catalog::HermiteProjected>(f, mu2, order);
    refined = std::make_shared<catalog::HermiteProjected>(f, mu2, kHermiteRefinedOrder);
  }
  const std::size_t n = std::max<std::size_t>(mu2.modes(), f->modes());
  for (int probe = 0; probe < 5; ++probe) {
    StateVector x(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double scale = k < mu2.modes() ? std::sqrt(mu2.variances[k]) : 1.0;
      x.u[k] = 0.3 * static_cast<double>(probe - 2) * scale * (k % 2 == 0 ? 1.0 : -0.5);
    }
    p.refinement_change =
        std::max(p.refinement_change, std::fabs(p.f_S->value(x) - refined->value(x)));
  }
  p.resolved = p.refinement_change <= kHermiteTolerance;
  return p;
}

/// P f = P_S f - mean, with the mean taken over the supplied mu^Phi samples.
inline Projection project_P(const FunctionPtr& f, const GaussianSpec& mu2,
                            std::span<const StateVector> samples) {
  if (samples.empty()) throw Error("project_P needs mu^Phi samples for the mean");
  Projection p = project_PS(f, mu2);
  double mean = 0.0;
  for (const StateVector& x : samples) mean += p.f_S->value(x);
  mean /= static_cast<double>(samples.size());
  p.f_S = std::make_shared<catalog::Shifted>(p.f_S, mean);
  return p;
}

// ---------------------------------------------------------------------------
// Gaussian moments

/// (Q l1, l2) for the diagonal covariance of `spec`.
inline double gaussian_pair(const Vec& l1, const Vec& l2, const GaussianSpec& spec) {
  if (l1.size() != l2.size()) throw Error("isserlis: vectors must have equal length");
  if (l1.size() > spec.modes()) throw Error("isserlis: vectors longer than the covariance");
  double s = 0.0;
  for (std::size_t k = 0; k < l1.size(); ++k) s += spec.variances[k] * l1[k] * l2[k];
  return s;
}

/// order 2: q12; order 4: q12 q34 + q13 q24 + q14 q23.
inline double isserlis_moment(const Vec& l1, const Vec& l2, const Vec& l3, const Vec& l4,
                              const GaussianSpec& spec, int order) {
  if (order == 2) return gaussian_pair(l1, l2, spec);
  if (order != 4) throw Error("isserlis: order must be 2 or 4");
  if (l3.size() != l1.size() || l4.size() != l1.size())
    throw Error("isserlis: vectors must have equal length");
  const double q12 = gaussian_pair(l1, l2, spec), q34 = gaussian_pair(l3, l4, spec);
  const double q13 = gaussian_pair(l1, l3, spec), q24 = gaussian_pair(l2, l4, spec);
  const double q14 = gaussian_pair(l1, l4, spec), q23 = gaussian_pair(l2, l3, spec);
  return q12 * q34 + q13 * q24 + q14 * q23;
}

// ---------------------------------------------------------------------------
// Second-order structure

/// A^2 P f from the displayed closed form, given f_S = P_S f.
inline double A_squared_P(const CylinderFunction& f_S, const StateVector& x, const Model& model,
                          const Vec& dphi) {
  check_model_state(x, model);
  const std::size_t n = model.modes();
  const Jet j = f_S.jet(x, JetOrder::Second);
  const DiagonalOperator C = model.C();
  const DiagonalOperator Q1invC = model.Q1inv_C();
  double quad = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    const double ca = model.mode(a + 1).coupling * x.v[a];
    for (std::size_t b = 0; b < n; ++b)
      quad += ca * model.mode(b + 1).coupling * x.v[b] * j.huu[a * n + b];
  }
  double drift = 0.0;
  for (std::size_t k = 0; k < n; ++k)
    drift += (Q1invC.eigenvalue(k + 1) * x.u[k] + C.eigenvalue(k + 1) * dphi[k]) * j.du[k];
  return quad - drift;
}

inline double A_squared_P(const FunctionPtr& f, const StateVector& x, const Model& model,
                          const GibbsPotential& pot) {
  const Projection p = project_PS(f, GaussianSpec::mu2(model));
  return A_squared_P(*p.f_S, x, model, pot.gradient(x.u));
}

/// N g = tr[C D^2 g] - (u, Q1^{-1} C D g) - (dPhi, C D g) for a function g of u.
inline double operator_N(const CylinderFunction& g, const StateVector& x, const Model& model,
                         const Vec& dphi) {
  check_model_state(x, model);
  const std::size_t n = model.modes();
  const Jet j = g.jet(x, JetOrder::Second);
  const DiagonalOperator C = model.C();
  const DiagonalOperator Q1invC = model.Q1inv_C();
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double c = C.eigenvalue(k + 1);
    s += c * j.huu[k * n + k] - (Q1invC.eigenvalue(k + 1) * x.u[k] + c * dphi[k]) * j.du[k];
  }
  return s;
}

/// P_S A^2 P f = N f_S, evaluated at u (v is ignored).
inline double PS_A_squared_P(const FunctionPtr& f, const Vec& u, const Model& model,
                             const GibbsPotential& pot) {
  const Projection p = project_PS(f, GaussianSpec::mu2(model));
  StateVector x(u, Vec(u.size(), 0.0));
  return operator_N(*p.f_S, x, model, pot.gradient(u));
}

}  // namespace hypolang

#endif  // HYPOLANG_GENERATOR_HPP
