#ifndef HYPOLANG_DYNAMICS_HPP
#define HYPOLANG_DYNAMICS_HPP

#include <cmath>
#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "hypolang/generator.hpp"
#include "hypolang/model.hpp"
#include "hypolang/potential.hpp"
#include "hypolang/rng.hpp"
#include "hypolang/types.hpp"

namespace hypolang {

/// Row-major 2x2 matrix [[a, b], [c, d]].
struct Mat2 {
  double a = 0.0, b = 0.0, c = 0.0, d = 0.0;

  static Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
  double trace() const { return a + d; }
  double det() const { return a * d - b * c; }
  Mat2 transpose() const { return {a, c, b, d}; }

  friend Mat2 operator*(const Mat2& x, const Mat2& y) {
    return {x.a * y.a + x.b * y.c, x.a * y.b + x.b * y.d, x.c * y.a + x.d * y.c,
            x.c * y.b + x.d * y.d};
  }
  friend Mat2 operator+(const Mat2& x, const Mat2& y) {
    return {x.a + y.a, x.b + y.b, x.c + y.c, x.d + y.d};
  }
  friend Mat2 operator-(const Mat2& x, const Mat2& y) {
    return {x.a - y.a, x.b - y.b, x.c - y.c, x.d - y.d};
  }
  friend Mat2 operator*(double s, const Mat2& x) { return {s * x.a, s * x.b, s * x.c, s * x.d}; }
};

/// Drift block of mode k acting on (u_k, v_k).
inline Mat2 drift_block(const ModeCoefficients& m) {
  return {0.0, m.coupling, -m.restoring, -m.damping};
}

/// exp(A t) for a 2x2 matrix.
///
/// With tau = tr A / 2 and B = A - tau I one has B^2 = delta2 I, delta2 = tau^2 - det A,
/// so exp(A t) = e^{tau t} (cosh(delta t) I + sinh(delta t)/delta B). The three
/// branches are real, complex and (near-)defective eigenvalues.
inline Mat2 expm2(const Mat2& A, double t) {
  const double tau = 0.5 * A.trace();
  const double delta2 = tau * tau - A.det();
  const Mat2 B = A - tau * Mat2::identity();
  const double z = delta2 * t * t;
  if (std::fabs(z) < 1e-10) {
    const double ch = 1.0 + z / 2.0 + z * z / 24.0;
    const double sh = t * (1.0 + z / 6.0 + z * z / 120.0);
    return std::exp(tau * t) * (ch * Mat2::identity() + sh * B);
  }
  if (delta2 > 0.0) {
    // e^{tau t} cosh, sinh rewritten around the slow exponent to avoid overflow
    const double delta = std::sqrt(delta2);
    const double lead = 0.5 * std::exp((tau + delta) * t);
    const double decay = std::exp(-2.0 * delta * t);
    const double ch = lead * (1.0 + decay);
    const double sh = lead * -std::expm1(-2.0 * delta * t) / delta;
    return ch * Mat2::identity() + sh * B;
  }
  const double omega = std::sqrt(-delta2);
  const double e = std::exp(tau * t);
  return e * (std::cos(omega * t) * Mat2::identity() + (std::sin(omega * t) / omega) * B);
}

/// int_0^h exp(A s) diag(0, q) exp(A^T s) ds.
///
/// Van Loan: exp([[A, N], [0, -A^T]] h) = [[F, G], [0, *]] and the integral is G F^T.
/// When |A| h is large the block exponential loses accuracy, and for a stable A
/// the stationary identity Sigma_inf - E Sigma_inf E^T is used instead.
inline Mat2 step_covariance(const Mat2& A, double q, double h) {
  const double scale = (std::fabs(A.a) + std::fabs(A.b) + std::fabs(A.c) + std::fabs(A.d)) * h;
  if (scale > 20.0 && A.trace() < 0.0 && A.det() > 0.0) {
    // A S + S A^T + diag(0, q) = 0 for the companion-type block
    Eigen::Matrix3d M;
    M << 2 * A.a, 2 * A.b, 0.0,
         A.c, A.a + A.d, A.b,
         0.0, 2 * A.c, 2 * A.d;
    const Eigen::Vector3d s = M.fullPivLu().solve(Eigen::Vector3d(0.0, 0.0, -q));
    const Mat2 S{s(0), s(1), s(1), s(2)};
    const Mat2 E = expm2(A, h);
    const Mat2 out = S - E * S * E.transpose();
    return {out.a, 0.5 * (out.b + out.c), 0.5 * (out.b + out.c), out.d};
  }
  Eigen::Matrix4d M = Eigen::Matrix4d::Zero();
  M(0, 0) = A.a, M(0, 1) = A.b, M(1, 0) = A.c, M(1, 1) = A.d;
  M(1, 3) = q;
  M(2, 2) = -A.a, M(2, 3) = -A.c, M(3, 2) = -A.b, M(3, 3) = -A.d;
  const Eigen::Matrix4d X = (M * h).exp();
  const Mat2 F{X(0, 0), X(0, 1), X(1, 0), X(1, 1)};
  const Mat2 G{X(0, 2), X(0, 3), X(1, 2), X(1, 3)};
  const Mat2 S = G * F.transpose();
  return {S.a, 0.5 * (S.b + S.c), 0.5 * (S.b + S.c), S.d};
}

/// Lower Cholesky factor [[l11, 0], [l21, l22]] of a 2x2 PSD matrix; round-off
/// negatives below 1e-14 trace are clamped to zero.
struct Chol2 {
  double l11 = 0.0, l21 = 0.0, l22 = 0.0;

  static Chol2 of(const Mat2& S) {
    const double tol = 1e-14 * std::fabs(S.trace());
    if (S.a < -tol || S.d < -tol) throw Error("step covariance is not positive semidefinite");
    Chol2 L;
    const double s11 = S.a > tol ? S.a : 0.0;
    L.l11 = std::sqrt(s11);
    L.l21 = L.l11 > 0.0 ? S.b / L.l11 : 0.0;
    double r = S.d - L.l21 * L.l21;
    if (r < -tol) throw Error("step covariance is not positive semidefinite");
    L.l22 = r > tol ? std::sqrt(r) : 0.0;
    return L;
  }
};

/// Per-mode transition data for a fixed step h.
struct ModeStep {
  Mat2 A;
  Mat2 E;      ///< exp(A h)
  Mat2 Sigma;  ///< step covariance
  Chol2 L;
};

class ModePropagator {
 public:
  ModePropagator(const Model& model, double h) : h_(h) {
    if (!(h > 0.0) || !std::isfinite(h)) throw Error("propagator step must be finite and > 0");
    modes_.reserve(model.modes());
    for (std::size_t k = 1; k <= model.modes(); ++k) {
      const ModeCoefficients& m = model.mode(k);
      ModeStep s;
      s.A = drift_block(m);
      s.E = expm2(s.A, h);
      s.Sigma = step_covariance(s.A, 2.0 * m.diffusion, h);
      s.L = Chol2::of(s.Sigma);
      for (double x : {s.E.a, s.E.b, s.E.c, s.E.d, s.Sigma.a, s.Sigma.b, s.Sigma.d})
        if (!std::isfinite(x))
          throw Error("propagator for mode " + std::to_string(k) + " is not finite");
      modes_.push_back(s);
    }
  }

  double h() const { return h_; }
  std::size_t modes() const { return modes_.size(); }
  /// k is 1-based
  const ModeStep& mode(std::size_t k) const { return modes_.at(k - 1); }

 private:
  double h_;
  std::vector<ModeStep> modes_;
};

inline ModePropagator build_propagator(const Model& model, double h) {
  return ModePropagator(model, h);
}

/// Hard integrator failure; `step` is the index of the offending step.
class IntegrationError : public Error {
 public:
  IntegrationError(std::size_t step, const std::string& what)
      : Error(what + " at step " + std::to_string(step)), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

/// Strang splitting: half kick, exact OU step, half kick.
///
/// The force at the end of a step is cached and reused as the first half kick
/// of the next, so each step costs one gradient evaluation.
class SplittingIntegrator {
 public:
  SplittingIntegrator(const Model& model, const GibbsPotential& pot, double h, bool noise = true)
      : model_(model), pot_(pot), prop_(model, h), noise_(noise) {
    if (pot.grid().capacity() < model.modes())
      throw Error("potential grid has fewer modes than the model");
  }

  const ModePropagator& propagator() const { return prop_; }
  double h() const { return prop_.h(); }

  /// Must be called when x is set from outside.
  void reset(const StateVector& x) {
    check_model_state(x, model_);
    pot_.gradient_into(x.u, dphi_, phys_);
    cached_ = true;
  }

  void advance(StateVector& x, RngStream& rng) {
    const std::size_t n = model_.modes();
    xi_.resize(2 * n);
    if (noise_) {
      for (std::size_t k = 0; k < n; ++k) {
        const Chol2& L = prop_.mode(k + 1).L;
        const double z1 = rng.normal(), z2 = rng.normal();
        xi_[2 * k] = L.l11 * z1;
        xi_[2 * k + 1] = L.l21 * z1 + L.l22 * z2;
      }
    } else {
      std::fill(xi_.begin(), xi_.end(), 0.0);
    }
    advance_with_increment(x, xi_);
  }

  /// One step with the Gaussian increment of the linear part supplied by the
  /// caller as (u_1, v_1, u_2, v_2, ...). Used for coupled coarse/fine runs.
  void advance_with_increment(StateVector& x, const Vec& xi) {
    const std::size_t n = model_.modes();
    if (xi.size() != 2 * n) throw Error("increment must have 2n entries");
    if (!cached_) reset(x);
    const double half = 0.5 * prop_.h();
    for (std::size_t k = 0; k < n; ++k) x.v[k] -= half * model_.mode(k + 1).force * dphi_[k];
    for (std::size_t k = 0; k < n; ++k) {
      const Mat2& E = prop_.mode(k + 1).E;
      const double u = x.u[k], v = x.v[k];
      x.u[k] = E.a * u + E.b * v + xi[2 * k];
      x.v[k] = E.c * u + E.d * v + xi[2 * k + 1];
    }
    pot_.gradient_into(x.u, dphi_, phys_);
    for (std::size_t k = 0; k < n; ++k) x.v[k] -= half * model_.mode(k + 1).force * dphi_[k];
    x.t += prop_.h();
    ++steps_;
    if (!x.finite()) throw IntegrationError(steps_, "non-finite state");
  }

  std::size_t steps_taken() const { return steps_; }

 private:
  const Model& model_;
  const GibbsPotential& pot_;
  ModePropagator prop_;
  bool noise_;
  bool cached_ = false;
  std::size_t steps_ = 0;
  Vec dphi_, phys_, xi_;
};

/// One splitting step from `state`, returning the new state.
inline StateVector step(const StateVector& state, const Model& model, const GibbsPotential& pot,
                        double h, RngStream& rng, bool noise = true) {
  if (!state.finite()) throw Error("step: state is not finite");
  SplittingIntegrator integ(model, pot, h, noise);
  StateVector x = state;
  integ.reset(x);
  integ.advance(x, rng);
  return x;
}

/// Euler-Maruyama step of the same SDE; kept for cross-checks.
inline void euler_maruyama_step(StateVector& x, const Model& model, const GibbsPotential& pot,
                                double h, RngStream& rng, bool noise = true) {
  check_model_state(x, model);
  const Vec dphi = pot.gradient(x.u);
  for (std::size_t k = 0; k < model.modes(); ++k) {
    const ModeCoefficients& m = model.mode(k + 1);
    const double u = x.u[k], v = x.v[k];
    x.u[k] = u + h * m.coupling * v;
    x.v[k] = v - h * (m.damping * v + m.restoring * u + m.force * dphi[k]);
    if (noise) x.v[k] += std::sqrt(2.0 * m.diffusion * h) * rng.normal();
  }
  x.t += h;
  if (!x.finite()) throw Error("euler_maruyama_step: non-finite state");
}

/// Observable values on the output grid.
struct TimeSeries {
  std::vector<std::string> names;
  Vec times;
  std::vector<Vec> values;         ///< values[i][j]: observable j at times[i]
  std::vector<StateVector> states;  ///< filled only when requested

  void write_csv(std::ostream& os) const {
    os << "t";
    for (const auto& nm : names) os << ',' << nm;
    os << '\n';
    os.precision(17);
    for (std::size_t i = 0; i < times.size(); ++i) {
      os << times[i];
      for (double v : values[i]) os << ',' << v;
      os << '\n';
    }
  }
};

/// Number of steps of size h in an interval of length len; len must be a multiple of h.
inline std::size_t steps_in(double len, double h, const char* what) {
  const double r = len / h;
  const double k = std::round(r);
  if (k < 1.0 || std::fabs(r - k) > 1e-9 * std::max(1.0, r))
    throw Error(std::string(what) + " must be a positive multiple of the step size");
  return static_cast<std::size_t>(k);
}

struct SimulateOptions {
  double output_dt = 0.0;  ///< 0 means every step
  bool keep_states = false;
  bool noise = true;
};

inline TimeSeries simulate(const StateVector& initial, double T, double h, const Model& model,
                           const GibbsPotential& pot, RngStream& rng,
                           const std::vector<FunctionPtr>& observables,
                           const SimulateOptions& opt = {}) {
  if (!(T > 0.0)) throw Error("simulate: horizon must be > 0");
  if (!initial.finite()) throw Error("simulate: initial state is not finite");
  const double out_dt = opt.output_dt > 0.0 ? opt.output_dt : h;
  const std::size_t per_out = steps_in(out_dt, h, "output interval");
  const std::size_t outputs = steps_in(T, out_dt, "horizon");

  TimeSeries ts;
  for (const auto& f : observables) {
    if (f->modes() > model.modes()) throw Error("observable " + f->name() + " uses too many modes");
    ts.names.push_back(f->name());
  }
  auto record = [&](const StateVector& x) {
    ts.times.push_back(x.t);
    Vec row;
    row.reserve(observables.size());
    for (const auto& f : observables) row.push_back(f->value(x));
    ts.values.push_back(std::move(row));
    if (opt.keep_states) ts.states.push_back(x);
  };

  SplittingIntegrator integ(model, pot, h, opt.noise);
  StateVector x = initial;
  integ.reset(x);
  record(x);
  const double t0 = x.t;
  for (std::size_t i = 1; i <= outputs; ++i) {
    for (std::size_t s = 0; s < per_out; ++s) integ.advance(x, rng);
    x.t = t0 + static_cast<double>(i * per_out) * h;  // no drift from repeated addition
    record(x);
  }
  return ts;
}

// ---------------------------------------------------------------------------
// Linear (Phi = 0) moments

/// Stationary covariance of mode k for Phi = 0: diag(lambda^alpha1, lambda^alpha2).
inline Mat2 stationary_covariance(const ModeCoefficients& m) { return {m.var_u, 0.0, 0.0, m.var_v}; }

/// Mean and covariance of one mode of the linear SDE at time t.
struct ModeMoments {
  double mean_u = 0.0, mean_v = 0.0;
  Mat2 cov;
};

/// Exact moments at time t from (mean0, cov0), built from exp(A t) and the
/// stationary covariance: cov_t = E cov0 E^T + Sigma_inf - E Sigma_inf E^T.
inline ModeMoments linear_moments(const ModeCoefficients& m, double t, double mean_u0,
                                  double mean_v0, const Mat2& cov0) {
  const Mat2 A = drift_block(m);
  const Mat2 E = expm2(A, t);
  const Mat2 S = stationary_covariance(m);
  ModeMoments r;
  r.mean_u = E.a * mean_u0 + E.b * mean_v0;
  r.mean_v = E.c * mean_u0 + E.d * mean_v0;
  r.cov = E * cov0 * E.transpose() + S - E * S * E.transpose();
  return r;
}

/// Moments after `steps` applications of the propagator (no Monte Carlo).
inline ModeMoments propagate_moments(const ModeStep& s, std::size_t steps, double mean_u0,
                                     double mean_v0, const Mat2& cov0) {
  ModeMoments r{mean_u0, mean_v0, cov0};
  for (std::size_t i = 0; i < steps; ++i) {
    const double u = r.mean_u, v = r.mean_v;
    r.mean_u = s.E.a * u + s.E.b * v;
    r.mean_v = s.E.c * u + s.E.d * v;
    r.cov = s.E * r.cov * s.E.transpose() + s.Sigma;
  }
  return r;
}

}  // namespace hypolang

#endif  // HYPOLANG_DYNAMICS_HPP
