#ifndef HYPOLANG_CERTIFIER_HPP
#define HYPOLANG_CERTIFIER_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "hypolang/model.hpp"
#include "hypolang/potential.hpp"
#include "hypolang/types.hpp"

namespace hypolang {

/// One checked inequality.
struct Condition {
  std::string name;
  std::string inequality;  ///< the requirement, as text
  bool passed = false;
  std::string detail;      ///< evaluated numbers
};

/// Verdicts on the structural parameter conditions of the model.
struct ConditionReport {
  Condition summable_alpha1;
  Condition summable_alpha2;
  Condition m_dissipative;
  Condition trace_class_K22;
  Condition process_ok;
  Condition gradient_bound;
  Condition convex_potential;
  Condition hypo_ok;
  Condition macroscopic;  ///< 2 beta1 - alpha2 <= alpha1, implied by hypo_ok
  double c_K = 0.0;       ///< sup_k lambda_k^{2 beta1 - beta2}; +inf when unbounded

  std::vector<const Condition*> all() const {
    return {&summable_alpha1, &summable_alpha2, &m_dissipative, &trace_class_K22, &process_ok,
            &gradient_bound,  &convex_potential, &hypo_ok,       &macroscopic};
  }
  bool summable_base() const { return summable_alpha1.passed && summable_alpha2.passed; }
  bool passed() const {
    for (const Condition* c : all())
      if (!c->passed) return false;
    return true;
  }
  std::vector<std::string> failures() const {
    std::vector<std::string> out;
    for (const Condition* c : all())
      if (!c->passed) out.push_back(c->name + ": " + c->inequality + " violated (" + c->detail + ")");
    return out;
  }
};

inline constexpr double kInequalitySlack = 1e-12;

namespace detail {
inline std::string num(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}
}  // namespace detail

inline ConditionReport check_conditions(const Model& model, const ScalarPotential& phi) {
  const Exponents& e = model.exponents();
  const double a1 = e.alpha1, a2 = e.alpha2, b1 = e.beta1, b2 = e.beta2;
  const double lambda1 = model.spectrum().eigenvalue(1);
  using detail::num;
  ConditionReport r;

  auto summable = [&](const char* name, const char* ineq, double a) {
    Condition c{name, ineq, false, ""};
    const SummabilityVerdict s = model.op(a).is_summable();
    c.passed = s.summable;
    c.detail = "exponent " + num(a) + (s.note.empty() ? "" : "; " + s.note);
    return c;
  };
  r.summable_alpha1 = summable("summable_alpha1", "alpha1 > 1/2", a1);
  r.summable_alpha2 = summable("summable_alpha2", "alpha2 > 1/2", a2);

  r.m_dissipative = {"m_dissipative", "beta2 <= 2 beta1", b2 <= 2.0 * b1 + kInequalitySlack,
                     "beta2 = " + num(b2) + ", 2 beta1 = " + num(2.0 * b1)};
  r.trace_class_K22 = {"trace_class_K22", "beta2 > 1/2", b2 > 0.5, "beta2 = " + num(b2)};

  {
    const double p = b1 + (a2 - a1) / 2.0, q = b1 + (a1 - a2) / 2.0;
    const bool equal = std::fabs(a1 - a2) <= kInequalitySlack;
    r.process_ok = {"process_ok",
                    "alpha1 = alpha2, or beta1 + (alpha2 - alpha1)/2 > 1/2 and "
                    "beta1 + (alpha1 - alpha2)/2 > 1/2",
                    equal || (p > 0.5 && q > 0.5),
                    "alpha1 - alpha2 = " + num(a1 - a2) + ", beta1 +- (alpha2 - alpha1)/2 = " +
                        num(p) + ", " + num(q)};
  }

  {
    const double bound = 0.5 * std::pow(lambda1, -a1 / 2.0);
    r.gradient_bound = {"gradient_bound", "sup |phi'| < (1/2) lambda1^{-alpha1/2}",
                        phi.derivative_sup() < bound,
                        "sup |phi'| = " + num(phi.derivative_sup()) + ", bound = " + num(bound)};
  }
  r.convex_potential = {"convex_potential", "phi convex", phi.convex(), phi.name()};

  {
    const bool first = b2 - a2 <= kInequalitySlack;
    const bool second = 2.0 * b1 - a1 <= 2.0 * b2 - a2 + kInequalitySlack;
    r.hypo_ok = {"hypo_ok", "beta2 - alpha2 <= 0 and 2 beta1 - alpha1 <= 2 beta2 - alpha2",
                 first && second,
                 "beta2 - alpha2 = " + num(b2 - a2) + ", 2 beta1 - alpha1 = " + num(2 * b1 - a1) +
                     ", 2 beta2 - alpha2 = " + num(2 * b2 - a2)};
  }
  r.macroscopic = {"macroscopic", "2 beta1 - alpha2 <= alpha1",
                   2.0 * b1 - a2 <= a1 + kInequalitySlack,
                   "2 beta1 - alpha2 = " + num(2 * b1 - a2) + ", alpha1 = " + num(a1)};

  // lambda_k < 1 decreasing: the sup sits at k = 1 for a nonnegative exponent
  const double g = 2.0 * b1 - b2;
  r.c_K = g >= -kInequalitySlack ? std::pow(lambda1, std::max(g, 0.0))
                                 : std::numeric_limits<double>::infinity();
  return r;
}

enum class RateVariant { Thm5_2, Thm6_10 };

inline std::string to_string(RateVariant v) {
  return v == RateVariant::Thm5_2 ? "thm5_2" : "thm6_10";
}

inline RateVariant parse_variant(const std::string& s) {
  if (s == "thm5_2") return RateVariant::Thm5_2;
  if (s == "thm6_10") return RateVariant::Thm6_10;
  throw Error("unknown rate variant '" + s + "' (expected thm5_2 or thm6_10)");
}

/// Hypocoercivity constants of a certified configuration.
struct RateCertificate {
  double omega1 = 0.0;  ///< microscopic coercivity
  double omega2 = 0.0;  ///< macroscopic coercivity
  double C1 = 0.0;
  double c2 = 2.0 * std::numbers::sqrt2;
  RateVariant variant = RateVariant::Thm5_2;

  double Lambda_m() const { return std::min(omega1, C1); }
  double Lambda_M() const { return omega2; }
};

/// omega1 = lambda1^{beta2 - alpha2}, omega2 = lambda1^{alpha1}, C1 = 2, c2 = 2 sqrt 2.
inline RateCertificate derive_constants(const Model& model, const ConditionReport& report,
                                        RateVariant variant = RateVariant::Thm5_2) {
  std::vector<std::string> missing;
  if (!report.summable_base()) missing.push_back("summable_base");
  if (!report.m_dissipative.passed) missing.push_back("m_dissipative");
  if (!report.gradient_bound.passed) missing.push_back("gradient_bound");
  if (!report.hypo_ok.passed) missing.push_back("hypo_ok");
  if (!missing.empty()) {
    std::string msg = "derive_constants: preconditions fail:";
    for (const auto& m : missing) msg += " " + m;
    throw Error(msg);
  }
  const Exponents& e = model.exponents();
  const double lambda1 = model.spectrum().eigenvalue(1);
  RateCertificate c;
  c.omega1 = std::pow(lambda1, e.beta2 - e.alpha2);
  c.omega2 = std::pow(lambda1, e.alpha1);
  c.C1 = 2.0;
  c.variant = variant;
  return c;
}

/// Constants for the damping pattern K22 = a Q2 with the top eigenvalue lambda1:
/// omega1 = a lambda1 and C1 = a.
struct ScaledDampingConstants {
  double omega1;
  double C1;
};

inline ScaledDampingConstants scaled_damping_constants(double a, double lambda1) {
  if (!(a > 0.0) || !(lambda1 > 0.0)) throw Error("scaled damping needs a > 0 and lambda1 > 0");
  return {a * lambda1, a};
}

inline double compute_theta2(const RateCertificate& cert, double theta1,
                             RateVariant variant) {
  if (!(theta1 > 1.0) || !std::isfinite(theta1)) throw Error("theta1 must be finite and > 1");
  for (double x : {cert.omega1, cert.omega2, cert.C1, cert.c2})
    if (!(x > 0.0) || !std::isfinite(x)) throw Error("certificate constants must be positive");
  const double Lm = cert.Lambda_m(), LM = cert.Lambda_M();
  const double c1 = cert.C1, c2 = cert.c2;
  const double k = 1.0 + c1 + c2;
  const double r = k * (1.0 + (1.0 + LM) / (2.0 * LM) * k);
  const double s = 0.5 * LM / (1.0 + LM);
  const double base = 0.25 * ((theta1 - 1.0) / theta1) * Lm / (r + s) * LM / (1.0 + LM);
  return variant == RateVariant::Thm6_10 ? 2.0 * base : base;
}

inline double compute_theta2(const RateCertificate& cert, double theta1) {
  return compute_theta2(cert, theta1, cert.variant);
}

/// 1 - (1 - e^{-x})/x, with a series below x = 1e-4.
inline double ergodic_bracket(double x) {
  if (x < 1e-4) return x / 2.0 - x * x / 6.0 + x * x * x / 24.0 - x * x * x * x / 120.0;
  return 1.0 + std::expm1(-x) / x;
}

/// (1/sqrt t) sqrt((2 theta1/theta2) (1 - (1 - e^{-t theta2})/(t theta2))) * base_norm
inline double ergodic_bound(double theta1, double theta2, double t, double base_norm) {
  if (!(t > 0.0)) throw Error("ergodic_bound: t must be > 0");
  if (!(theta2 > 0.0)) throw Error("ergodic_bound: theta2 must be > 0");
  const double x = t * theta2;
  return std::sqrt(2.0 * theta1 / theta2 * ergodic_bracket(x)) / std::sqrt(t) * base_norm;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const Condition& c) {
  return {{"passed", c.passed}, {"requires", c.inequality}, {"detail", c.detail}};
}

inline nlohmann::json to_json(const ConditionReport& r) {
  nlohmann::json j = nlohmann::json::object();
  for (const Condition* c : r.all()) j[c->name] = to_json(*c);
  j["summable_base"] = r.summable_base();
  if (std::isfinite(r.c_K))
    j["c_K"] = r.c_K;
  else
    j["c_K"] = "inf";
  j["all_passed"] = r.passed();
  j["failures"] = r.failures();
  return j;
}

inline nlohmann::json to_json(const RateCertificate& c) {
  return {{"omega1", c.omega1}, {"omega2", c.omega2}, {"C1", c.C1}, {"c2", c.c2},
          {"Lambda_m", c.Lambda_m()}, {"Lambda_M", c.Lambda_M()}};
}

}  // namespace hypolang

#endif  // HYPOLANG_CERTIFIER_HPP
