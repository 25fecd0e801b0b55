#include <cmath>

#include <gtest/gtest.h>

#include "hypolang/experiments.hpp"

using namespace hypolang;

namespace {

Model unit_model(std::size_t n) { return Model(Exponents{1, 1, 1, 1}, n); }

GibbsPotential zero_pot(std::size_t n) { return GibbsPotential(ScalarPotential::zero(), PhysicalGrid(n)); }

MonteCarloParams small_mc() {
  MonteCarloParams mc;
  mc.M_out = 2000;
  mc.M_in = 20;
  mc.h = 0.05;
  mc.samples = 20000;
  mc.trajectories = 2000;
  mc.workers = default_workers();
  mc.seed = 99;
  return mc;
}

Eigen::Matrix2d block(const ModeCoefficients& m) {
  Eigen::Matrix2d A;
  A << 0.0, m.coupling, -m.restoring, -m.damping;
  return A;
}

}  // namespace

TEST(ClosedForm, DecayNormAgainstEigen) {
  const Model m(Exponents{1.2, 0.9, 1.0, 0.8}, 3);
  for (std::size_t k = 1; k <= 3; ++k)
    for (double t : {0.0, 0.3, 2.0, 7.0}) {
      const ModeCoefficients& c = m.mode(k);
      const Eigen::Vector2d w = (block(c) * t).exp().transpose() * Eigen::Vector2d(0.7, -1.1);
      const double ref = std::sqrt(w(0) * w(0) * c.var_u + w(1) * w(1) * c.var_v);
      EXPECT_NEAR(ou_decay_norm(m, k, 0.7, -1.1, t), ref, 1e-12 * ref);
    }
}

TEST(ClosedForm, TimeAverageErrorAgainstAutocovarianceIntegral) {
  // e^2 = (2/T^2) int_0^T (T - s) C(s) ds, C(s) = w' Sigma exp(A s)' w
  const Model m(Exponents{1.0, 1.3, 1.1, 1.0}, 2);
  for (std::size_t k = 1; k <= 2; ++k)
    for (double T : {0.5, 2.0, 10.0}) {
      const ModeCoefficients& c = m.mode(k);
      const Eigen::Matrix2d A = block(c);
      const Eigen::Vector2d w(0.4, 1.0);
      const Eigen::Matrix2d S = Eigen::Vector2d(c.var_u, c.var_v).asDiagonal();
      const int N = 4000;
      double acc = 0.0;
      for (int i = 0; i <= N; ++i) {
        const double s = T * i / N;
        const double C = w.dot(S * (A * s).exp().transpose() * w);
        const double wt = (i == 0 || i == N) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        acc += wt * (T - s) * C;
      }
      const double ref = std::sqrt(2.0 / (T * T) * acc * (T / N) / 3.0);
      EXPECT_NEAR(ou_time_average_error(m, k, 0.4, 1.0, T), ref, 1e-9 * ref) << k << " " << T;
    }
}

TEST(ClosedForm, ShortHorizonLimit) {
  const Model m = unit_model(1);
  const double sd = std::sqrt(m.mode(1).var_v);
  EXPECT_NEAR(ou_time_average_error(m, 1, 0.0, 1.0, 1e-4), sd, 1e-4 * sd);
  EXPECT_NEAR(ou_decay_norm(m, 1, 0.0, 1.0, 0.0), sd, 1e-15);
  EXPECT_THROW(ou_time_average_error(m, 1, 0.0, 1.0, 0.0), Error);
}

TEST(FitRate, RecoversExponent) {
  const Vec t{0.0, 0.5, 1.0, 2.0, 5.0};
  Vec D, SE(t.size(), 1e-6);
  for (double x : t) D.push_back(0.3 * std::exp(-0.7 * x));
  EXPECT_NEAR(fit_decay_rate(t, D, SE), 0.7, 1e-12);
  // points below 3 SE are dropped
  SE.back() = 1.0;
  EXPECT_NEAR(fit_decay_rate(t, D, SE), 0.7, 1e-12);
  EXPECT_TRUE(std::isnan(fit_decay_rate({0.0}, {1.0}, {0.0})));
}

TEST(Decay, ConstantObservableHasNoDecay) {
  const Model m = unit_model(2);
  const auto pot = zero_pot(2);
  MonteCarloParams mc = small_mc();
  mc.M_out = 50;
  mc.M_in = 4;
  const DecayCurve c =
      estimate_decay(catalog::constant(3.0), {0.0, 0.5, 1.0}, m, pot, mc, 2.0, 0.01);
  for (double d : c.D) EXPECT_EQ(d, 0.0);
  EXPECT_DOUBLE_EQ(c.mean, 3.0);
  EXPECT_TRUE(c.passed());
  EXPECT_TRUE(std::isnan(c.fitted_rate));
}

TEST(Decay, InputValidation) {
  const Model m = unit_model(2);
  const auto pot = zero_pot(2);
  MonteCarloParams mc = small_mc();
  mc.M_out = 4;
  mc.M_in = 2;
  const auto g = catalog::coordinate_v(1);
  EXPECT_THROW(estimate_decay(g, {0.5, 1.0}, m, pot, mc, 2, 0.1), Error);
  EXPECT_THROW(estimate_decay(g, {0.0, 1.0, 0.5}, m, pot, mc, 2, 0.1), Error);
  EXPECT_THROW(estimate_decay(g, {0.0, 0.52}, m, pot, mc, 2, 0.1), Error);
  mc.M_in = 1;
  EXPECT_THROW(estimate_decay(g, {0.0, 1.0}, m, pot, mc, 2, 0.1), Error);
}

TEST(Decay, MatchesLinearClosedForm) {
  const Model m = unit_model(2);
  const auto pot = zero_pot(2);
  const Vec times{0.0, 0.5, 1.0, 2.0};
  const auto curves = estimate_decay({catalog::coordinate_v(1), catalog::coordinate_u(1)}, times,
                                     m, pot, small_mc(), 2.0, 0.01);
  const double ab[2][2] = {{0.0, 1.0}, {1.0, 0.0}};
  for (std::size_t g = 0; g < 2; ++g)
    for (std::size_t k = 0; k < times.size(); ++k) {
      const double ref = ou_decay_norm(m, 1, ab[g][0], ab[g][1], times[k]);
      EXPECT_NEAR(curves[g].D[k], ref, 4 * curves[g].SE[k] + 1e-12)
          << curves[g].name << " t=" << times[k];
      EXPECT_FALSE(curves[g].under_resolved[k]);
    }
}

TEST(Decay, BiasCorrectionWithFewInnerPaths) {
  // with M_in = 3 the raw variance of inner means is inflated by var/M_in;
  // the corrected estimate still matches the closed form
  const Model m = unit_model(1);
  const auto pot = zero_pot(1);
  MonteCarloParams mc = small_mc();
  mc.M_out = 20000;
  mc.M_in = 3;
  const double t = 2.0;
  const DecayCurve c = estimate_decay(catalog::coordinate_v(1), {0.0, t}, m, pot, mc, 2.0, 0.01);
  const double ref = ou_decay_norm(m, 1, 0.0, 1.0, t);
  EXPECT_NEAR(c.D2[1], ref * ref, 4 * c.SE2[1]);
  // the uncorrected value would sit well above
  const ModeMoments mm = linear_moments(m.mode(1), t, 0.0, 0.0, Mat2{});
  EXPECT_GT(ref * ref + mm.cov.d / 3.0 - 4 * c.SE2[1], c.D2[1]);
}

TEST(Decay, RobustToTruncationLevel) {
  // for Phi = 0 the first mode decouples, so n does not matter
  const auto g = catalog::coordinate_v(1);
  MonteCarloParams mc = small_mc();
  const DecayCurve a = estimate_decay(g, {0.0, 1.0}, unit_model(2), zero_pot(2), mc, 2.0, 0.01);
  const DecayCurve b = estimate_decay(g, {0.0, 1.0}, unit_model(6), zero_pot(6), mc, 2.0, 0.01);
  EXPECT_NEAR(a.D[1], b.D[1], 4 * std::hypot(a.SE[1], b.SE[1]));
}

TEST(Decay, DeterministicAcrossWorkerCounts) {
  const Model m = unit_model(3);
  const GibbsPotential pot(ScalarPotential::log_cosh(0.5), PhysicalGrid(3));
  MonteCarloParams mc = small_mc();
  mc.M_out = 64;
  mc.M_in = 5;
  mc.workers = 1;
  const auto fs = catalog::default_catalog(3);
  const auto a = estimate_decay(fs, {0.0, 0.5}, m, pot, mc, 2.0, 0.01);
  mc.workers = 4;
  const auto b = estimate_decay(fs, {0.0, 0.5}, m, pot, mc, 2.0, 0.01);
  for (std::size_t g = 0; g < fs.size(); ++g) {
    EXPECT_EQ(a[g].D, b[g].D);
    EXPECT_EQ(a[g].SE, b[g].SE);
  }
}

TEST(Ergodic, MatchesLinearClosedForm) {
  const Model m = unit_model(2);
  const auto pot = zero_pot(2);
  MonteCarloParams mc = small_mc();
  mc.M_out = 4000;
  const Vec Ts{1.0, 2.0, 5.0};
  const auto r = ergodic_average_test({catalog::coordinate_v(1), catalog::coordinate_u(1)}, Ts, m,
                                      pot, mc, 2.0, 6e-5);
  const double ab[2][2] = {{0.0, 1.0}, {1.0, 0.0}};
  for (std::size_t g = 0; g < 2; ++g) {
    EXPECT_TRUE(r[g].passed());
    for (std::size_t k = 0; k < Ts.size(); ++k) {
      const double ref = ou_time_average_error(m, 1, ab[g][0], ab[g][1], Ts[k]);
      EXPECT_NEAR(r[g].error[k], ref, 4 * r[g].SE[k]) << r[g].name << " T=" << Ts[k];
    }
  }
}

TEST(Ergodic, DeterministicAcrossWorkerCounts) {
  const Model m = unit_model(2);
  const GibbsPotential pot(ScalarPotential::log_cosh(0.5), PhysicalGrid(2));
  MonteCarloParams mc = small_mc();
  mc.M_out = 40;
  mc.samples = 200;
  mc.workers = 1;
  const auto a = ergodic_average_test({catalog::coordinate_u(1)}, {1.0}, m, pot, mc, 2.0, 0.01);
  mc.workers = 3;
  const auto b = ergodic_average_test({catalog::coordinate_u(1)}, {1.0}, m, pot, mc, 2.0, 0.01);
  EXPECT_EQ(a[0].error, b[0].error);
  EXPECT_EQ(a[0].mean, b[0].mean);
}

TEST(Invariance, SmallConfiguration) {
  const Model m = unit_model(3);
  const GibbsPotential pot(ScalarPotential::log_cosh(0.5), PhysicalGrid(3));
  MonteCarloParams mc = small_mc();
  mc.h = 0.02;
  const InvarianceReport rep = invariance_suite(catalog::default_catalog(3), m, pot, mc);
  for (const auto& e : rep.entries) {
    EXPECT_TRUE(e.generator.passed) << e.name << " mean " << e.generator.mean << " se "
                                    << e.generator.se;
    for (const auto& d : e.dynamic)
      EXPECT_TRUE(d.passed) << e.name << " t=" << d.t << " drift " << d.drift << " se " << d.se;
  }
}

TEST(Invariance, DetectsWrongMeasure) {
  // draws from mu (no potential) are not invariant for the LogCosh dynamics
  const Model m = unit_model(2);
  const GibbsPotential strong(ScalarPotential::log_cosh(1.5), PhysicalGrid(2));
  const auto draws = stationary_draws(m, zero_pot(2), 5, streams::kStationary, 100000, default_workers());
  const auto checks = generator_mean_checks({catalog::product_vv(1, 1), catalog::product_uu(1, 1),
                                             catalog::sample_quadratic(2)}, m, strong, draws);
  bool any_failed = false;
  for (const auto& c : checks) any_failed = any_failed || !c.passed;
  EXPECT_TRUE(any_failed);
}

TEST(Identities, AntisymmetryAndDirichletForm) {
  const Model m(Exponents{1.2, 1.0, 0.9, 1.0}, 3);
  const GibbsPotential pot(ScalarPotential::log_cosh(0.5), PhysicalGrid(3));
  const auto draws = stationary_draws(m, pot, 17, streams::kStationary, 50000, default_workers());
  const auto fs = catalog::default_catalog(3);
  for (const auto& c : antisymmetry_checks(fs, m, pot, draws))
    EXPECT_TRUE(c.passed) << c.name << " " << c.mean << " se " << c.se;
  for (const auto& c : dirichlet_identity_checks(fs, m, draws))
    EXPECT_TRUE(c.passed) << c.name << " " << c.mean << " se " << c.se;
}

TEST(Poincare, UCatalog) {
  const Model m = unit_model(4);
  const GibbsPotential pot(ScalarPotential::log_cosh(0.5), PhysicalGrid(4));
  const auto draws = stationary_draws(m, pot, 23, streams::kStationary, 50000, default_workers());
  const auto res = poincare_checks(catalog::u_catalog(4), m, draws);
  ASSERT_EQ(res.size(), 5u);
  for (const auto& e : res) {
    EXPECT_TRUE(e.passed) << e.name;
    EXPECT_GT(e.dirichlet, 0.0);
  }
  // u1 under mu1^Phi: Dirichlet form is lambda1 exactly
  EXPECT_DOUBLE_EQ(res[0].dirichlet, m.mode(1).var_u);
}
