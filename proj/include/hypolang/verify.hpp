#ifndef HYPOLANG_VERIFY_HPP
#define HYPOLANG_VERIFY_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include "hypolang/dynamics.hpp"
#include "hypolang/experiments.hpp"
#include "hypolang/gauss_hermite.hpp"
#include "hypolang/generator.hpp"
#include "hypolang/measures.hpp"
#include "hypolang/model.hpp"
#include "hypolang/potential.hpp"
#include "hypolang/rng.hpp"
#include "hypolang/stats.hpp"

namespace hypolang {

/// One oracle comparison: `value` is the observed error (or statistic) and
/// passes when it is <= tolerance.
struct CheckResult {
  std::string suite;
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  std::string detail;
};

struct VerifyReport {
  std::vector<CheckResult> checks;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
  }
  bool suite_passed(const std::string& suite) const {
    bool any = false;
    for (const auto& c : checks)
      if (c.suite == suite) {
        any = true;
        if (!c.passed) return false;
      }
    return any;
  }
  void append(const VerifyReport& o) { checks.insert(checks.end(), o.checks.begin(), o.checks.end()); }
};

inline CheckResult make_check(std::string suite, std::string name, double value, double tol,
                              std::string detail = {}) {
  CheckResult c{std::move(suite), std::move(name), value, tol, false, std::move(detail)};
  c.passed = std::isfinite(value) && value <= tol;
  return c;
}

struct VerifyOptions {
  std::uint64_t seed = 20240917;
  std::size_t workers = 1;
  std::size_t random_states = 100;
  std::size_t samples = 100000;   ///< Monte Carlo draws for the Poincare and sampler suites
  std::size_t projection_modes = 3;
  double variance_scale = 1.0;    ///< fault injection into the Isserlis covariance table
};

/// |a - b| / max(1, |b|)
inline double rel_err(double a, double b) { return std::fabs(a - b) / std::max(1.0, std::fabs(b)); }

/// x -> (A P f)(x) = -sum_k c_k v_k d_k f_S(u), with f_S = P_S f; the inner
/// step of the nested A(A P f) evaluation.
class AppliedAP final : public CylinderFunction {
 public:
  AppliedAP(FunctionPtr f_S, const Model& model) : f_S_(std::move(f_S)), n_(model.modes()) {
    for (std::size_t k = 1; k <= n_; ++k) c_.push_back(model.mode(k).coupling);
  }
  std::size_t modes() const override { return n_; }
  std::string name() const override { return "AP[" + f_S_->name() + "]"; }

  double value(const StateVector& x) const override {
    const Jet j = f_S_->jet(x, JetOrder::First);
    double s = 0.0;
    for (std::size_t k = 0; k < n_; ++k) s -= c_[k] * x.v[k] * j.du[k];
    return s;
  }

  Jet jet(const StateVector& x, JetOrder order) const override {
    if (order == JetOrder::Second) throw Error("AppliedAP provides first derivatives only");
    check_state(x);
    const std::size_t N = x.modes();
    const Jet j = f_S_->jet(x, JetOrder::Second);
    Jet out = blank_jet(x, order);
    for (std::size_t k = 0; k < n_; ++k) out.value -= c_[k] * x.v[k] * j.du[k];
    if (order >= JetOrder::First) {
      for (std::size_t k = 0; k < n_; ++k) out.dv[k] = -c_[k] * j.du[k];
      for (std::size_t i = 0; i < n_; ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k < n_; ++k) s -= c_[k] * x.v[k] * j.huu[k * N + i];
        out.du[i] = s;
      }
    }
    return out;
  }

 private:
  FunctionPtr f_S_;
  std::size_t n_;
  Vec c_;
};

/// Random state with coordinates of the stationary scale, times 2.
inline StateVector random_state(const Model& model, RngStream& rng) {
  StateVector x(model.modes());
  for (std::size_t k = 0; k < model.modes(); ++k) {
    x.u[k] = 2.0 * std::sqrt(model.mode(k + 1).var_u) * rng.normal();
    x.v[k] = 2.0 * std::sqrt(model.mode(k + 1).var_v) * rng.normal();
  }
  return x;
}

// ---------------------------------------------------------------------------
// Generator identities

inline VerifyReport verify_generator(const Model& model, const GibbsPotential& pot,
                                     const VerifyOptions& opt) {
  const std::string suite = "generator";
  VerifyReport rep;
  const std::size_t n = model.modes();
  RngStream rng(opt.seed, streams::kVerify + 1);
  const std::size_t pairs = std::min<std::size_t>(n, 3);

  double e_f = 0, e_g = 0, e_gg = 0, e_ff = 0;
  for (std::size_t s = 0; s < opt.random_states; ++s) {
    const StateVector x = random_state(model, rng);
    const Vec dphi = pot.gradient(x.u);
    auto Lf = [&](std::size_t i) { return model.mode(i).coupling * x.v[i - 1]; };
    auto Lg = [&](std::size_t i) {
      const ModeCoefficients& m = model.mode(i);
      return -m.damping * x.v[i - 1] - m.restoring * x.u[i - 1] - m.force * dphi[i - 1];
    };
    for (std::size_t i = 1; i <= n; ++i) {
      e_f = std::max(e_f, rel_err(apply_L(catalog::CoordinateU(i), x, model, dphi), Lf(i)));
      e_g = std::max(e_g, rel_err(apply_L(catalog::CoordinateV(i), x, model, dphi), Lg(i)));
    }
    for (std::size_t i = 1; i <= pairs; ++i)
      for (std::size_t j = 1; j <= pairs; ++j) {
        const double gg = (i == j ? 2.0 * model.mode(i).diffusion : 0.0) + x.v[j - 1] * Lg(i) +
                          x.v[i - 1] * Lg(j);
        e_gg = std::max(e_gg, rel_err(apply_L(catalog::ProductVV(i, j), x, model, dphi), gg));
        const double ff = x.u[j - 1] * Lf(i) + x.u[i - 1] * Lf(j);
        e_ff = std::max(e_ff, rel_err(apply_L(catalog::ProductUU(i, j), x, model, dphi), ff));
      }
  }
  const double tol = 1e-10;
  const std::string states = std::to_string(opt.random_states) + " random states";
  rep.checks.push_back(make_check(suite, "L f_i = c_i v_i", e_f, tol, states));
  rep.checks.push_back(make_check(suite, "L g_i (drift of v_i)", e_g, tol, states));
  rep.checks.push_back(make_check(suite, "L(g_i g_j) product rule", e_gg, tol, states));
  rep.checks.push_back(make_check(suite, "L(f_i f_j) product rule", e_ff, tol, states));

  // Second-order structure on a small truncation so tensor quadrature stays exact and cheap.
  const std::size_t np = std::min(opt.projection_modes, n);
  const Model small(model.exponents(), np, model.spectrum());
  const GibbsPotential spot(pot.scalar(), PhysicalGrid(np));
  const GaussianSpec mu2 = GaussianSpec::mu2(small);
  const HermiteRule rule = HermiteRule::make(4);  // exact for the quadratic v-dependence
  double e_nested = 0, e_proj = 0, e_pap = 0, e_idem = 0, refine = 0;
  for (const FunctionPtr& f : catalog::default_catalog(np)) {
    const Projection p = project_PS(f, mu2);
    refine = std::max(refine, p.refinement_change);
    const FunctionPtr ap = std::make_shared<AppliedAP>(p.f_S, small);
    const Projection pp = project_PS(p.f_S, mu2);
    const Projection pap = project_PS(ap, mu2);
    for (std::size_t s = 0; s < 20; ++s) {
      const StateVector x = random_state(small, rng);
      const Vec dphi = spot.gradient(x.u);
      const double formula = A_squared_P(*p.f_S, x, small, dphi);
      e_nested = std::max(e_nested, rel_err(formula, apply_A(*ap, x, small, dphi)));

      // int A^2 P f (u, v) dmu2(v) by tensor Gauss-Hermite over all v-modes
      double quad = 0.0;
      std::vector<std::size_t> idx(np, 0);
      StateVector y = x;
      for (;;) {
        double w = 1.0;
        for (std::size_t k = 0; k < np; ++k) {
          y.v[k] = std::sqrt(mu2.variances[k]) * rule.nodes[idx[k]];
          w *= rule.weights[idx[k]];
        }
        quad += w * A_squared_P(*p.f_S, y, small, dphi);
        std::size_t k = 0;
        while (k < np && ++idx[k] == rule.order()) idx[k++] = 0;
        if (k == np) break;
      }
      e_proj = std::max(e_proj, rel_err(operator_N(*p.f_S, x, small, dphi), quad));
      e_pap = std::max(e_pap, std::fabs(pap.f_S->value(x)));
      e_idem = std::max(e_idem, rel_err(pp.f_S->value(x), p.f_S->value(x)));
    }
  }
  rep.checks.push_back(make_check(suite, "A^2 P f: formula vs nested A(A P f)", e_nested, 1e-8));
  rep.checks.push_back(
      make_check(suite, "P_S A^2 P f = N f_S vs Hermite projection", e_proj, 1e-8));
  rep.checks.push_back(make_check(suite, "P A P f = 0", e_pap, 1e-12));
  rep.checks.push_back(make_check(suite, "P_S P_S = P_S", e_idem, 1e-12));
  rep.checks.push_back(make_check(suite, "P_S quadrature refinement", refine, kHermiteTolerance));
  return rep;
}

// ---------------------------------------------------------------------------
// Gaussian moments

/// E[prod_i (l_i, x)] for x ~ N(0, diag nu) by tensor Gauss-Hermite of order 3
/// (exact through degree 5 in each coordinate).
inline double gaussian_moment_quadrature(const std::vector<Vec>& ls, const GaussianSpec& spec) {
  const std::size_t n = ls.front().size();
  const HermiteRule rule = HermiteRule::make(3);
  std::vector<std::size_t> idx(n, 0);
  Vec x(n);
  double s = 0.0;
  for (;;) {
    double w = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
      x[k] = std::sqrt(spec.variances[k]) * rule.nodes[idx[k]];
      w *= rule.weights[idx[k]];
    }
    double p = 1.0;
    for (const Vec& l : ls) p *= dot(l, x);
    s += w * p;
    std::size_t k = 0;
    while (k < n && ++idx[k] == rule.order()) idx[k++] = 0;
    if (k == n) break;
  }
  return s;
}

inline VerifyReport verify_isserlis(const Model& model, const VerifyOptions& opt) {
  const std::string suite = "isserlis";
  VerifyReport rep;
  const std::size_t n = std::min<std::size_t>(model.modes(), 8);
  RngStream rng(opt.seed, streams::kVerify + 2);
  double e2 = 0, e4 = 0;
  for (const bool first : {true, false}) {
    GaussianSpec truth = first ? GaussianSpec::mu1(model) : GaussianSpec::mu2(model);
    truth.variances.resize(n);
    GaussianSpec table = truth;
    for (double& v : table.variances) v *= opt.variance_scale;
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<Vec> ls(4, Vec(n));
      for (Vec& l : ls)
        for (double& c : l) c = rng.normal();
      // scale of the fourth moment, for a relative error
      double scale = 1.0;
      for (const Vec& l : ls) scale *= std::sqrt(gaussian_pair(l, l, truth));
      const double q2 = gaussian_moment_quadrature({ls[0], ls[1]}, truth);
      const double q4 = gaussian_moment_quadrature(ls, truth);
      const double s2 = std::sqrt(gaussian_pair(ls[0], ls[0], truth) *
                                  gaussian_pair(ls[1], ls[1], truth));
      e2 = std::max(e2, std::fabs(isserlis_moment(ls[0], ls[1], {}, {}, table, 2) - q2) / s2);
      e4 = std::max(e4,
                    std::fabs(isserlis_moment(ls[0], ls[1], ls[2], ls[3], table, 4) - q4) / scale);
    }
  }
  const std::string d = opt.variance_scale == 1.0
                            ? "tensor Gauss-Hermite oracle"
                            : "variance table scaled by " + detail::num(opt.variance_scale);
  rep.checks.push_back(make_check(suite, "second moment (Q l1, l2)", e2, 1e-12, d));
  rep.checks.push_back(make_check(suite, "fourth moment pair sum", e4, 1e-12, d));
  return rep;
}

// ---------------------------------------------------------------------------
// Poincare inequality

inline VerifyReport verify_poincare(const Model& model, const GibbsPotential& pot,
                                    const VerifyOptions& opt) {
  VerifyReport rep;
  const auto draws = stationary_draws(model, pot, opt.seed, streams::kVerify + (3ull << 32),
                                      opt.samples, opt.workers);
  for (const PoincareEntry& e : poincare_checks(catalog::u_catalog(model.modes()), model, draws)) {
    // value = deficit below the lower bound in SE units
    const double z = e.se > 0.0 ? -e.margin / e.se : (e.margin >= 0.0 ? -1.0 : 1e300);
    rep.checks.push_back(make_check("poincare", e.name, z, 3.0,
                                    "dirichlet " + detail::num(e.dirichlet) + ", lambda1 Var " +
                                        detail::num(e.lower)));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Samplers

/// Kolmogorov-Smirnov distance of sorted samples to a tabulated CDF.
inline double ks_distance(Vec sorted, const Vec& grid, const Vec& cdf) {
  std::sort(sorted.begin(), sorted.end());
  const double N = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double x = sorted[i];
    double F;
    if (x <= grid.front()) {
      F = 0.0;
    } else if (x >= grid.back()) {
      F = 1.0;
    } else {
      const auto it = std::upper_bound(grid.begin(), grid.end(), x);
      const std::size_t j = static_cast<std::size_t>(it - grid.begin());
      const double w = (x - grid[j - 1]) / (grid[j] - grid[j - 1]);
      F = (1.0 - w) * cdf[j - 1] + w * cdf[j];
    }
    d = std::max({d, std::fabs(static_cast<double>(i + 1) / N - F),
                  std::fabs(static_cast<double>(i) / N - F)});
  }
  return d;
}

inline VerifyReport verify_sampler(const Model& model, const GibbsPotential& pot,
                                   const VerifyOptions& opt) {
  const std::string suite = "sampler";
  VerifyReport rep;
  const std::size_t N = opt.samples;

  // One-mode rejection sampler against the integrated density.
  {
    const Model one(model.exponents(), 1, model.spectrum());
    const GibbsPotential p1(pot.scalar(), PhysicalGrid(1));
    const double sd = std::sqrt(one.mode(1).var_u);
    const std::size_t G = 20001;
    Vec grid(G), cdf(G, 0.0);
    Vec dens(G);
    for (std::size_t j = 0; j < G; ++j) {
      grid[j] = sd * (-10.0 + 20.0 * static_cast<double>(j) / static_cast<double>(G - 1));
      const double z = grid[j] / sd;
      dens[j] = std::exp(-p1.value(Vec{grid[j]}) - 0.5 * z * z);
    }
    for (std::size_t j = 1; j < G; ++j)
      cdf[j] = cdf[j - 1] + 0.5 * (dens[j] + dens[j - 1]) * (grid[j] - grid[j - 1]);
    for (double& c : cdf) c /= cdf.back();
    RngStream rng(opt.seed, streams::kVerify + 4);
    RejectionStats st;
    Vec u(N);
    for (std::size_t i = 0; i < N; ++i) u[i] = sample_mu1_Phi(one, p1, rng, &st)[0];
    rep.checks.push_back(make_check(suite, "KS distance, one-mode mu1^Phi", ks_distance(u, grid, cdf),
                                    0.01, "acceptance " + detail::num(st.acceptance_rate())));
    if (pot.is_zero())
      rep.checks.push_back(
          make_check(suite, "zero potential accepts every proposal", 1.0 - st.acceptance_rate(), 0.0));
  }

  // Gaussian marginals and product structure of mu^Phi.
  {
    const std::size_t n = model.modes();
    const GaussianSpec mu1 = GaussianSpec::mu1(model), mu2 = GaussianSpec::mu2(model);
    RngStream rng(opt.seed, streams::kVerify + 5);
    std::vector<RunningStats> g1(n);
    for (std::size_t i = 0; i < N; ++i) {
      const Vec x = sample_gaussian(mu1, n, rng);
      for (std::size_t k = 0; k < n; ++k) g1[k].add(x[k]);
    }
    double var_err = 0.0, mean_z = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      var_err = std::max(var_err, std::fabs(g1[k].variance() / mu1.variances[k] - 1.0));
      mean_z = std::max(mean_z, std::fabs(g1[k].mean()) / g1[k].sem());
    }
    rep.checks.push_back(make_check(suite, "mu1 variances (relative)", var_err, 0.05));
    rep.checks.push_back(make_check(suite, "mu1 means (SE units)", mean_z, 3.0));

    const auto draws = stationary_draws(model, pot, opt.seed, streams::kVerify + (6ull << 32), N,
                                        opt.workers);
    double v_err = 0.0, corr_z = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      RunningStats v, uv;
      for (const StateVector& x : draws) {
        v.add(x.v[k]);
        uv.add(x.u[k] * x.v[k]);
      }
      v_err = std::max(v_err, std::fabs(v.variance() / mu2.variances[k] - 1.0));
      corr_z = std::max(corr_z, std::fabs(uv.mean()) / uv.sem());
    }
    rep.checks.push_back(make_check(suite, "mu^Phi v-marginal variances (relative)", v_err, 0.05));
    rep.checks.push_back(make_check(suite, "mu^Phi E[u_k v_k] = 0 (SE units)", corr_z, 3.0));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Propagator

/// Solves A S + S A^T + N = 0 for symmetric S (2x2).
inline Mat2 solve_lyapunov2(const Mat2& A, const Mat2& N) {
  Eigen::Matrix3d M;
  M << 2 * A.a, 2 * A.b, 0.0,
       A.c, A.a + A.d, A.b,
       0.0, 2 * A.c, 2 * A.d;
  const Eigen::Vector3d s = M.fullPivLu().solve(Eigen::Vector3d(-N.a, -N.b, -N.d));
  return {s(0), s(1), s(1), s(2)};
}

inline Mat2 eigen_expm(const Mat2& A, double t) {
  Eigen::Matrix2d M;
  M << A.a, A.b, A.c, A.d;
  const Eigen::Matrix2d E = (M * t).exp();
  return {E(0, 0), E(0, 1), E(1, 0), E(1, 1)};
}

/// Composite Simpson rule for int_0^h exp(A s) N exp(A^T s) ds.
inline Mat2 covariance_quadrature(const Mat2& A, double q, double h, std::size_t panels = 2000) {
  const Mat2 N{0.0, 0.0, 0.0, q};
  Mat2 acc;
  for (std::size_t i = 0; i <= 2 * panels; ++i) {
    const double s = h * static_cast<double>(i) / static_cast<double>(2 * panels);
    const Mat2 E = eigen_expm(A, s);
    const double w = (i == 0 || i == 2 * panels) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    acc = acc + w * (E * N * E.transpose());
  }
  return (h / (6.0 * static_cast<double>(panels))) * acc;
}

inline double mat_rel_err(const Mat2& a, const Mat2& b) {
  const double scale = std::max({std::fabs(b.a), std::fabs(b.b), std::fabs(b.c), std::fabs(b.d)});
  const double diff = std::max({std::fabs(a.a - b.a), std::fabs(a.b - b.b), std::fabs(a.c - b.c),
                                std::fabs(a.d - b.d)});
  return scale > 0.0 ? diff / scale : diff;
}

inline VerifyReport verify_propagator(const Model& model, double h) {
  const std::string suite = "propagator";
  VerifyReport rep;
  const ModePropagator prop(model, h);
  const std::size_t steps = steps_in(1.0, h, "propagator check horizon");
  double e_lyap = 0, e_diag = 0, e_comp = 0, e_mean = 0, e_E = 0;
  for (std::size_t k = 1; k <= model.modes(); ++k) {
    const ModeCoefficients& m = model.mode(k);
    const Mat2 A = drift_block(m);
    const Mat2 S = solve_lyapunov2(A, {0.0, 0.0, 0.0, 2.0 * m.diffusion});
    const Mat2 res = A * S + S * A.transpose() + Mat2{0.0, 0.0, 0.0, 2.0 * m.diffusion};
    e_lyap = std::max(e_lyap, mat_rel_err(S + res, S));
    e_diag = std::max(e_diag, mat_rel_err(stationary_covariance(m), S));
    e_E = std::max(e_E, mat_rel_err(prop.mode(k).E, eigen_expm(A, h)));

    // point mass at (1, -0.5): exact moments at t = 1 from the matrix exponential
    const Mat2 E1 = eigen_expm(A, 1.0);
    const Mat2 cov1 = S - E1 * S * E1.transpose();
    const ModeMoments comp = propagate_moments(prop.mode(k), steps, 1.0, -0.5, Mat2{});
    e_comp = std::max(e_comp, mat_rel_err(comp.cov, cov1));
    const double mu = E1.a - 0.5 * E1.b, mv = E1.c - 0.5 * E1.d;
    e_mean = std::max(e_mean, std::max(std::fabs(comp.mean_u - mu), std::fabs(comp.mean_v - mv)) /
                                  std::max(std::fabs(mu), std::fabs(mv)));
  }
  rep.checks.push_back(make_check(suite, "Lyapunov residual", e_lyap, 1e-10));
  rep.checks.push_back(make_check(suite, "stationary covariance = diag(var_u, var_v)", e_diag, 1e-10));
  rep.checks.push_back(make_check(suite, "closed-form exp(A h)", e_E, 1e-12));
  rep.checks.push_back(make_check(suite, "composed covariance at t = 1", e_comp, 1e-8));
  rep.checks.push_back(make_check(suite, "composed mean at t = 1", e_mean, 1e-8));

  // mode-1 step covariance at h = 0.5 against Simpson quadrature
  const ModeCoefficients& m1 = model.mode(1);
  const Mat2 A1 = drift_block(m1);
  const double e_simpson =
      mat_rel_err(step_covariance(A1, 2.0 * m1.diffusion, 0.5),
                  covariance_quadrature(A1, 2.0 * m1.diffusion, 0.5));
  rep.checks.push_back(make_check(suite, "step covariance vs Simpson (h = 0.5)", e_simpson, 1e-9));

  // two steps of h equal one step of 2h in law
  const ModePropagator prop2(model, 2.0 * h);
  double e_two = 0;
  for (std::size_t k = 1; k <= model.modes(); ++k) {
    const ModeMoments two = propagate_moments(prop.mode(k), 2, 0.3, 0.7, Mat2{});
    const ModeMoments one = propagate_moments(prop2.mode(k), 1, 0.3, 0.7, Mat2{});
    e_two = std::max(e_two, mat_rel_err(two.cov, one.cov));
  }
  rep.checks.push_back(make_check(suite, "two steps of h = one step of 2h", e_two, 1e-9));
  return rep;
}

inline VerifyReport run_verify(const Model& model, const GibbsPotential& pot,
                               const VerifyOptions& opt, double h) {
  VerifyReport rep;
  rep.append(verify_generator(model, pot, opt));
  rep.append(verify_isserlis(model, opt));
  rep.append(verify_poincare(model, pot, opt));
  rep.append(verify_sampler(model, pot, opt));
  rep.append(verify_propagator(model, h));
  return rep;
}

inline nlohmann::json to_json(const VerifyReport& r) {
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : r.checks)
    checks.push_back({{"suite", c.suite},
                      {"name", c.name},
                      {"value", c.value},
                      {"tolerance", c.tolerance},
                      {"passed", c.passed},
                      {"detail", c.detail}});
  return {{"checks", checks}, {"all_passed", r.passed()}};
}

}  // namespace hypolang

#endif  // HYPOLANG_VERIFY_HPP
