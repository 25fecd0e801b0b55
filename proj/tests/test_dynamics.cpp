#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "hypolang/dynamics.hpp"
#include "hypolang/measures.hpp"
#include "hypolang/stats.hpp"

using namespace hypolang;

namespace {

Model unit_model(std::size_t n) { return Model(Exponents{1, 1, 1, 1}, n); }

Eigen::Matrix2d to_eigen(const Mat2& m) {
  Eigen::Matrix2d x;
  x << m.a, m.b, m.c, m.d;
  return x;
}

double max_abs_diff(const Mat2& m, const Eigen::Matrix2d& e) {
  return (to_eigen(m) - e).cwiseAbs().maxCoeff();
}

// Composite Simpson for int_0^h e^{As} diag(0, q) e^{A^T s} ds using Eigen's exp.
Eigen::Matrix2d simpson_covariance(const Mat2& A, double q, double h, int panels) {
  const Eigen::Matrix2d Ae = to_eigen(A);
  Eigen::Matrix2d N = Eigen::Matrix2d::Zero();
  N(1, 1) = q;
  Eigen::Matrix2d acc = Eigen::Matrix2d::Zero();
  const double ds = h / panels;
  for (int i = 0; i <= panels; ++i) {
    const Eigen::Matrix2d E = (Ae * (ds * i)).exp();
    const double w = (i == 0 || i == panels) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    acc += w * E * N * E.transpose();
  }
  return acc * ds / 3.0;
}

}  // namespace

TEST(Expm2, BranchesAgreeWithEigen) {
  const std::vector<Mat2> cases{
      {0.0, 1.0, -1.0, -3.0},     // real eigenvalues
      {0.0, 1.0, -1.0, -0.5},     // complex pair
      {0.0, 1.0, -1.0, -2.0},     // double eigenvalue
      {0.0, 9.0, -0.1, -0.01},    // slow oscillation
      {0.0, 1.0, -1e-3, -80.0},   // stiff real
      {0.5, 2.0, 0.3, -1.0}};     // generic
  for (const Mat2& A : cases)
    for (double t : {0.0, 1e-6, 0.01, 0.5, 2.0, 10.0}) {
      const Eigen::Matrix2d ref = (to_eigen(A) * t).exp();
      EXPECT_LE(max_abs_diff(expm2(A, t), ref), 1e-12 * std::max(1.0, ref.cwiseAbs().maxCoeff()))
          << A.b << " " << A.d << " t=" << t;
    }
}

TEST(Expm2, NoOverflowForStiffBlocks) {
  const Mat2 A{0.0, 1.0, -1e-6, -1e4};
  const Mat2 E = expm2(A, 1.0);
  for (double x : {E.a, E.b, E.c, E.d}) EXPECT_TRUE(std::isfinite(x));
  EXPECT_NEAR(E.a, 1.0, 1e-9);
}

TEST(StepCovariance, MatchesQuadrature) {
  const Model m(Exponents{1.3, 0.9, 1.0, 0.8}, 4);
  for (std::size_t k = 1; k <= 4; ++k)
    for (double h : {0.01, 0.1, 0.5}) {
      const Mat2 A = drift_block(m.mode(k));
      const double q = 2 * m.mode(k).diffusion;
      const Eigen::Matrix2d ref = simpson_covariance(A, q, h, 2000);
      EXPECT_LE(max_abs_diff(step_covariance(A, q, h), ref), 1e-9 * ref.cwiseAbs().maxCoeff())
          << k << " " << h;
    }
}

TEST(StepCovariance, StationaryFallbackForStiffBlocks) {
  const Mat2 A{0.0, 1.0, -2.0, -60.0};
  const double q = 0.3, h = 0.5;  // |A| h = 31.5, above the Van Loan cutoff
  const Eigen::Matrix2d ref = simpson_covariance(A, q, h, 20000);
  EXPECT_LE(max_abs_diff(step_covariance(A, q, h), ref), 1e-9 * ref.cwiseAbs().maxCoeff());
}

TEST(StepCovariance, SmallStepLimit) {
  // Sigma ~ q [[c^2 h^3/3, c h^2/2], [c h^2/2, h]]
  const Mat2 A{0.0, 2.0, -1.0, -1.0};
  const double q = 0.4;
  for (double h : {1e-3, 1e-4}) {
    const Mat2 S = step_covariance(A, q, h);
    EXPECT_NEAR(S.d / (q * h), 1.0, 2 * h);
    EXPECT_NEAR(S.b / (q * 2.0 * h * h / 2), 1.0, 2 * h);
    EXPECT_NEAR(S.a / (q * 4.0 * h * h * h / 3), 1.0, 4 * h);
  }
}

TEST(StepCovariance, TwoStepsEqualOneDoubleStep) {
  const Model m = unit_model(3);
  const double h = 0.05;
  const ModePropagator p1(m, h), p2(m, 2 * h);
  for (std::size_t k = 1; k <= 3; ++k) {
    const ModeStep& s = p1.mode(k);
    const Mat2 two = s.E * s.Sigma * s.E.transpose() + s.Sigma;
    const Mat2& one = p2.mode(k).Sigma;
    EXPECT_NEAR(two.a, one.a, 1e-14);
    EXPECT_NEAR(two.b, one.b, 1e-14);
    EXPECT_NEAR(two.d, one.d, 1e-14);
  }
}

TEST(Chol2, FactorsAndDegenerateCases) {
  const Mat2 S{4.0, 2.0, 2.0, 5.0};
  const Chol2 L = Chol2::of(S);
  EXPECT_DOUBLE_EQ(L.l11, 2.0);
  EXPECT_DOUBLE_EQ(L.l21, 1.0);
  EXPECT_DOUBLE_EQ(L.l22, 2.0);
  const Chol2 z = Chol2::of(Mat2{0.0, 0.0, 0.0, 1.0});
  EXPECT_EQ(z.l11, 0.0);
  EXPECT_EQ(z.l21, 0.0);
  EXPECT_EQ(z.l22, 1.0);
  EXPECT_NO_THROW(Chol2::of(Mat2{1.0, 1.0, 1.0, 1.0}));
  EXPECT_THROW(Chol2::of(Mat2{-1.0, 0.0, 0.0, 1.0}), Error);
  EXPECT_THROW(Chol2::of(Mat2{1.0, 2.0, 2.0, 1.0}), Error);
}

TEST(Propagator, RejectsBadStep) {
  const Model m = unit_model(2);
  EXPECT_THROW(ModePropagator(m, 0.0), Error);
  EXPECT_THROW(ModePropagator(m, -0.1), Error);
  EXPECT_THROW(ModePropagator(m, NAN), Error);
}

TEST(LinearMoments, ComposedStepsMatchClosedForm) {
  const Model m(Exponents{1.2, 1.0, 0.9, 1.1}, 3);
  const double h = 0.02;
  const ModePropagator p(m, h);
  const Mat2 cov0{0.01, 0.002, 0.002, 0.03};
  for (std::size_t k = 1; k <= 3; ++k) {
    const ModeMoments a = propagate_moments(p.mode(k), 50, 1.0, -0.5, cov0);
    const ModeMoments b = linear_moments(m.mode(k), 1.0, 1.0, -0.5, cov0);
    EXPECT_NEAR(a.mean_u, b.mean_u, 1e-12);
    EXPECT_NEAR(a.mean_v, b.mean_v, 1e-12);
    EXPECT_NEAR(a.cov.a, b.cov.a, 1e-12);
    EXPECT_NEAR(a.cov.b, b.cov.b, 1e-12);
    EXPECT_NEAR(a.cov.d, b.cov.d, 1e-12);
  }
}

TEST(LinearMoments, StationaryCovarianceIsInvariant) {
  const Model m(Exponents{1.5, 0.7, 1.1, 0.9}, 5);
  for (std::size_t k = 1; k <= 5; ++k) {
    const Mat2 S = stationary_covariance(m.mode(k));
    // A S + S A^T + diag(0, 2 lambda^beta2) = 0
    const Mat2 A = drift_block(m.mode(k));
    const Mat2 R = A * S + S * A.transpose() + Mat2{0, 0, 0, 2 * m.mode(k).diffusion};
    for (double x : {R.a, R.b, R.c, R.d}) EXPECT_NEAR(x, 0.0, 1e-14);
    const ModeMoments mm = linear_moments(m.mode(k), 3.0, 0.0, 0.0, S);
    EXPECT_NEAR(mm.cov.a, S.a, 1e-14);
    EXPECT_NEAR(mm.cov.d, S.d, 1e-14);
    EXPECT_NEAR(mm.cov.b, 0.0, 1e-14);
  }
}

TEST(LinearMoments, PointMassRelaxes) {
  const Model m = unit_model(1);
  const ModeMoments late = linear_moments(m.mode(1), 60.0, 2.0, 1.0, Mat2{});
  EXPECT_NEAR(late.mean_u, 0.0, 1e-10);
  EXPECT_NEAR(late.cov.a, m.mode(1).var_u, 1e-10);
  EXPECT_NEAR(late.cov.d, m.mode(1).var_v, 1e-10);
}

TEST(Integrator, ZeroNoiseEquilibrium) {
  const Model m = unit_model(4);
  const GibbsPotential pot(ScalarPotential::log_cosh(2.0), PhysicalGrid(4));
  RngStream rng(1, 1);
  StateVector x(4);
  SplittingIntegrator integ(m, pot, 0.01, false);
  integ.reset(x);
  for (int i = 0; i < 100; ++i) integ.advance(x, rng);
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_EQ(x.u[k], 0.0);
    EXPECT_EQ(x.v[k], 0.0);
  }
  EXPECT_NEAR(x.t, 1.0, 1e-12);
  EXPECT_EQ(integ.steps_taken(), 100u);
}

TEST(Integrator, ZeroNoiseDecaysToRest) {
  const Model m = unit_model(2);
  const GibbsPotential pot(ScalarPotential::log_cosh(1.0), PhysicalGrid(2));
  RngStream rng(1, 1);
  StateVector x({0.5, -0.3}, {0.2, 0.1});
  SplittingIntegrator integ(m, pot, 0.05, false);
  integ.reset(x);
  for (int i = 0; i < 1000; ++i) integ.advance(x, rng);
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_NEAR(x.u[k], 0.0, 1e-6);
    EXPECT_NEAR(x.v[k], 0.0, 1e-6);
  }
}

TEST(Integrator, ReportsNonFiniteStep) {
  const Model m = unit_model(2);
  const GibbsPotential pot(ScalarPotential::log_cosh(1.0), PhysicalGrid(2));
  RngStream rng(1, 1);
  StateVector x(2);
  SplittingIntegrator integ(m, pot, 0.01);
  integ.reset(x);
  for (int i = 0; i < 3; ++i) integ.advance(x, rng);
  x.v[1] = NAN;
  try {
    integ.advance(x, rng);
    FAIL() << "expected IntegrationError";
  } catch (const IntegrationError& e) {
    EXPECT_EQ(e.step(), 4u);
  }
  EXPECT_THROW(step(x, m, pot, 0.01, rng), Error);
}

TEST(Integrator, StepMatchesIntegratorAdvance) {
  const Model m = unit_model(3);
  const GibbsPotential pot(ScalarPotential::log_cosh(0.5), PhysicalGrid(3));
  const StateVector x0({0.2, -0.1, 0.05}, {0.1, 0.3, -0.2});
  RngStream a(9, 3), b(9, 3);
  const StateVector y = step(x0, m, pot, 0.01, a);
  SplittingIntegrator integ(m, pot, 0.01);
  StateVector z = x0;
  integ.reset(z);
  integ.advance(z, b);
  EXPECT_EQ(y.u, z.u);
  EXPECT_EQ(y.v, z.v);
}

TEST(Integrator, WeakOrderTwoWithCoupledNoise) {
  // Coarse increments are built from the fine ones: xi_2h = E_h xi_1 + xi_2,
  // which has exactly the law of the coarse OU increment.
  const Model m = unit_model(1);
  const GibbsPotential pot(ScalarPotential::log_cosh(5.0), PhysicalGrid(1, 16));
  const double T = 2.0;
  const Vec hs{0.1, 0.05, 0.025};
  const std::size_t paths = 40000;
  auto f = [](const StateVector& x) { return x.u[0] * x.u[0] + std::sin(3 * x.v[0]); };
  Vec mean(hs.size(), 0.0);
  std::vector<RunningStats> diff(hs.size() - 1);
  const ModePropagator fine(m, hs.back()), mid(m, hs[1]);
  RngStream rng(11, streams::kVerify);
  for (std::size_t p = 0; p < paths; ++p) {
    const std::size_t nf = steps_in(T, hs.back(), "T");
    std::vector<Vec> xi_f(nf, Vec(2));
    const Chol2& L = fine.mode(1).L;
    for (auto& xi : xi_f) {
      const double z1 = rng.normal(), z2 = rng.normal();
      xi = {L.l11 * z1, L.l21 * z1 + L.l22 * z2};
    }
    auto coarsen = [](const std::vector<Vec>& xs, const Mat2& E) {
      std::vector<Vec> out;
      for (std::size_t i = 0; i + 1 < xs.size(); i += 2)
        out.push_back({E.a * xs[i][0] + E.b * xs[i][1] + xs[i + 1][0],
                       E.c * xs[i][0] + E.d * xs[i][1] + xs[i + 1][1]});
      return out;
    };
    const std::vector<Vec> xi_m = coarsen(xi_f, fine.mode(1).E);
    const std::vector<Vec> xi_c = coarsen(xi_m, mid.mode(1).E);
    const std::vector<const std::vector<Vec>*> incs{&xi_c, &xi_m, &xi_f};
    Vec vals(hs.size());
    for (std::size_t l = 0; l < hs.size(); ++l) {
      SplittingIntegrator integ(m, pot, hs[l]);
      StateVector x({0.6}, {-0.4});
      integ.reset(x);
      for (const Vec& xi : *incs[l]) integ.advance_with_increment(x, xi);
      vals[l] = f(x);
      mean[l] += vals[l] / paths;
    }
    for (std::size_t l = 0; l + 1 < hs.size(); ++l) diff[l].add(vals[l] - vals[l + 1]);
  }
  const double d1 = diff[0].mean(), d2 = diff[1].mean();
  ASSERT_GT(std::fabs(d2), 5 * diff[1].sem()) << "weak error not resolved";
  const double order = std::log2(d1 / d2);
  EXPECT_NEAR(order, 2.0, 0.4) << "d1=" << d1 << " d2=" << d2;
}

TEST(Simulate, EmptyObservableList) {
  const Model m = unit_model(2);
  const GibbsPotential pot(ScalarPotential::zero(), PhysicalGrid(2));
  RngStream rng(1, 1);
  const TimeSeries ts = simulate(StateVector(2), 1.0, 0.1, m, pot, rng, {});
  EXPECT_TRUE(ts.names.empty());
  ASSERT_EQ(ts.times.size(), 11u);
  EXPECT_NEAR(ts.times.back(), 1.0, 1e-15);
  for (const Vec& row : ts.values) EXPECT_TRUE(row.empty());
}

TEST(Simulate, CsvLayoutAndGrid) {
  const Model m = unit_model(2);
  const GibbsPotential pot(ScalarPotential::log_cosh(0.5), PhysicalGrid(2));
  RngStream rng(1, 1);
  SimulateOptions opt;
  opt.output_dt = 0.25;
  opt.keep_states = true;
  const TimeSeries ts = simulate(StateVector({0.1, 0.2}, {0.0, 0.0}), 1.0, 0.05, m, pot, rng,
                                 {catalog::coordinate_u(1), catalog::product_vv(1, 2)}, opt);
  ASSERT_EQ(ts.times.size(), 5u);
  ASSERT_EQ(ts.states.size(), 5u);
  EXPECT_EQ(ts.values[0][0], 0.1);
  EXPECT_EQ(ts.values[2][0], ts.states[2].u[0]);
  std::ostringstream os;
  ts.write_csv(os);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "t,u1,v1*v2");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 5);
  EXPECT_THROW(simulate(StateVector(2), 1.0, 0.3, m, pot, rng, {}), Error);
  opt.output_dt = 0.07;
  EXPECT_THROW(simulate(StateVector(2), 1.0, 0.05, m, pot, rng, {}, opt), Error);
}

TEST(Simulate, SecondMomentsStayStationaryWithoutPotential) {
  const Model m = unit_model(3);
  const GibbsPotential pot(ScalarPotential::zero(), PhysicalGrid(3));
  const std::size_t N = 20000;
  RunningStats u1, v2, uv;
  RngStream rng(12, streams::kTrajectories);
  SplittingIntegrator integ(m, pot, 0.1);
  for (std::size_t i = 0; i < N; ++i) {
    StateVector x = sample_mu_Phi(m, pot, rng);
    integ.reset(x);
    for (int s = 0; s < 20; ++s) integ.advance(x, rng);
    u1.add(x.u[0] * x.u[0] / m.mode(1).var_u);
    v2.add(x.v[1] * x.v[1] / m.mode(2).var_v);
    uv.add(x.u[0] * x.v[0] / m.mode(1).lambda);
  }
  EXPECT_TRUE(Estimate::from(u1).within(1.0, 4.0)) << u1.mean();
  EXPECT_TRUE(Estimate::from(v2).within(1.0, 4.0)) << v2.mean();
  EXPECT_TRUE(Estimate::from(uv).within(0.0, 4.0)) << uv.mean();
}

TEST(Simulate, PointMassMomentsMatchClosedForm) {
  const Model m(Exponents{1.0, 1.2, 1.1, 1.0}, 2);
  const GibbsPotential pot(ScalarPotential::zero(), PhysicalGrid(2));
  const std::size_t N = 20000;
  RunningStats mu, mv, su;
  RngStream rng(13, streams::kTrajectories);
  SplittingIntegrator integ(m, pot, 0.05);
  for (std::size_t i = 0; i < N; ++i) {
    StateVector x({1.0, 0.0}, {-0.5, 0.0});
    integ.reset(x);
    for (int s = 0; s < 20; ++s) integ.advance(x, rng);
    mu.add(x.u[0]);
    mv.add(x.v[0]);
    su.add(x.u[0] * x.u[0]);
  }
  const ModeMoments ref = linear_moments(m.mode(1), 1.0, 1.0, -0.5, Mat2{});
  EXPECT_TRUE(Estimate::from(mu).within(ref.mean_u, 4.0));
  EXPECT_TRUE(Estimate::from(mv).within(ref.mean_v, 4.0));
  EXPECT_TRUE(Estimate::from(su).within(ref.cov.a + ref.mean_u * ref.mean_u, 4.0));
}

TEST(Simulate, EulerMaruyamaAgreesAtSmallStep) {
  // both schemes approximate the same law; compare the mean of u1 at t = 1
  const Model m = unit_model(2);
  const GibbsPotential pot(ScalarPotential::log_cosh(3.0), PhysicalGrid(2));
  const std::size_t N = 20000;
  RunningStats split, em;
  RngStream r1(14, 1), r2(14, 2);
  SplittingIntegrator integ(m, pot, 0.01);
  for (std::size_t i = 0; i < N; ++i) {
    StateVector x({0.8, -0.2}, {0.0, 0.3});
    StateVector y = x;
    integ.reset(x);
    for (int s = 0; s < 100; ++s) integ.advance(x, r1);
    for (int s = 0; s < 1000; ++s) euler_maruyama_step(y, m, pot, 0.001, r2);
    split.add(x.u[0]);
    em.add(y.u[0]);
  }
  const double se = std::hypot(split.sem(), em.sem());
  EXPECT_NEAR(split.mean(), em.mean(), 4 * se + 2e-3);
}
