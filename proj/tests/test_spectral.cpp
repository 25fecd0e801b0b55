#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "hypolang/spectral.hpp"

using namespace hypolang;

namespace {
const double pi = std::numbers::pi;
}

TEST(Spectrum, DirichletEigenvalues) {
  const DiagonalOperator Q(BaseSpectrum::dirichlet(), 1.0);
  EXPECT_DOUBLE_EQ(Q.eigenvalue(1), 1.0 / (pi * pi));
  EXPECT_NEAR(Q.eigenvalue(1), 0.1013212, 1e-7);
  const DiagonalOperator Q2(BaseSpectrum::dirichlet(), 2.0);
  EXPECT_NEAR(Q2.eigenvalue(2), 1.0 / (16.0 * std::pow(pi, 4)), 1e-18);
  EXPECT_NEAR(Q2.eigenvalue(2), 6.416e-4, 1e-7);
}

TEST(Spectrum, ZeroExponentIsIdentity) {
  const DiagonalOperator I(BaseSpectrum::dirichlet(), 0.0);
  for (std::size_t k : {1u, 2u, 17u, 1000u}) EXPECT_EQ(I.eigenvalue(k), 1.0);
  const Vec x{0.3, -1.2, 7.0};
  EXPECT_EQ(I.apply(x), x);
}

TEST(Spectrum, IndexOutOfRange) {
  const DiagonalOperator Q(BaseSpectrum::dirichlet(5), 1.0);
  EXPECT_THROW(Q.eigenvalue(0), Error);
  EXPECT_THROW(Q.eigenvalue(6), Error);
  EXPECT_NO_THROW(Q.eigenvalue(5));
  EXPECT_THROW(Q.apply(Vec(6, 1.0)), Error);
}

TEST(Spectrum, Apply) {
  const DiagonalOperator Q(BaseSpectrum::dirichlet(), 1.0);
  const Vec y = Q.apply(Vec{1.0, 0.0});
  EXPECT_DOUBLE_EQ(y[0], 1.0 / (pi * pi));
  EXPECT_EQ(y[1], 0.0);
  const DiagonalOperator Qi(BaseSpectrum::dirichlet(), -1.0);
  const Vec z = Qi.apply(Vec{1.0, 1.0});
  EXPECT_NEAR(z[0], pi * pi, 1e-12);
  EXPECT_NEAR(z[1], 4.0 * pi * pi, 1e-12);
}

TEST(Spectrum, PowersCompose) {
  const auto base = BaseSpectrum::dirichlet();
  const Vec x{1.0, -2.0, 0.5, 3.0, -0.25, 9.0};
  for (double a : {-1.5, -0.25, 0.5, 1.0, 2.0})
    for (double b : {-0.75, 0.0, 0.3, 1.25}) {
      const Vec lhs = DiagonalOperator(base, a).apply(DiagonalOperator(base, b).apply(x));
      const Vec rhs = DiagonalOperator(base, a + b).apply(x);
      for (std::size_t k = 0; k < x.size(); ++k)
        EXPECT_NEAR(lhs[k], rhs[k], 1e-12 * std::fabs(rhs[k])) << a << " " << b << " " << k;
    }
}

TEST(Spectrum, Monotonicity) {
  const auto base = BaseSpectrum::dirichlet();
  for (double g : {0.25, 1.0, 3.0}) {
    const DiagonalOperator op(base, g);
    for (std::size_t k = 1; k < 200; ++k) EXPECT_LT(op.eigenvalue(k + 1), op.eigenvalue(k));
  }
  for (double g : {-0.25, -1.0}) {
    const DiagonalOperator op(base, g);
    for (std::size_t k = 1; k < 200; ++k) EXPECT_GT(op.eigenvalue(k + 1), op.eigenvalue(k));
  }
}

TEST(Spectrum, SummabilityDirichlet) {
  const auto base = BaseSpectrum::dirichlet();
  EXPECT_TRUE(DiagonalOperator(base, 1.0).is_summable().summable);
  EXPECT_TRUE(DiagonalOperator(base, 1.0).is_summable().rigorous);
  EXPECT_FALSE(DiagonalOperator(base, 0.5).is_summable().summable);
  EXPECT_FALSE(DiagonalOperator(base, 0.0).is_summable().summable);
  EXPECT_TRUE(DiagonalOperator(base, 0.5000001).is_summable().summable);
}

TEST(Spectrum, TraceOfQ) {
  // sum 1/(k^2 pi^2) = 1/6
  const TraceEstimate t = DiagonalOperator(BaseSpectrum::dirichlet(), 1.0).trace(1000000);
  EXPECT_LE(t.partial_sum, 1.0 / 6.0);
  EXPECT_GE(t.upper(), 1.0 / 6.0);
  EXPECT_NEAR(t.partial_sum, 1.0 / 6.0, 2e-7);
  EXPECT_TRUE(t.rigorous);
}

TEST(Spectrum, TraceOfQSquared) {
  // sum 1/(k^4 pi^4) = zeta(4)/pi^4 = 1/90
  const TraceEstimate t = DiagonalOperator(BaseSpectrum::dirichlet(), 2.0).trace(2000);
  EXPECT_NEAR(t.partial_sum, 1.0 / 90.0, 1e-12);
  EXPECT_LE(t.partial_sum, 1.0 / 90.0);
  EXPECT_GE(t.upper(), 1.0 / 90.0);
}

TEST(Spectrum, TraceRefusesNonSummable) {
  EXPECT_THROW(DiagonalOperator(BaseSpectrum::dirichlet(), 0.0).trace(10), Error);
  EXPECT_THROW(DiagonalOperator(BaseSpectrum::dirichlet(), 0.5).trace(10), Error);
}

TEST(Spectrum, TracePartialSumsMonotone) {
  const DiagonalOperator op(BaseSpectrum::dirichlet(), 0.8);
  double prev = 0.0;
  double bound = INFINITY;
  for (std::size_t n : {1u, 2u, 5u, 10u, 100u, 1000u, 10000u}) {
    const TraceEstimate t = op.trace(n);
    EXPECT_GT(t.partial_sum, prev);
    EXPECT_LE(t.partial_sum, bound);
    bound = std::min(bound, t.upper());
    prev = t.partial_sum;
  }
}

TEST(Spectrum, ExplicitListValidation) {
  EXPECT_THROW(BaseSpectrum::explicit_list({}), Error);
  EXPECT_THROW(BaseSpectrum::explicit_list({0.5, 0.5}), Error);
  EXPECT_THROW(BaseSpectrum::explicit_list({0.5, 0.6}), Error);
  EXPECT_THROW(BaseSpectrum::explicit_list({1.0, 0.5}), Error);
  EXPECT_THROW(BaseSpectrum::explicit_list({0.5, -0.1}), Error);
  EXPECT_NO_THROW(BaseSpectrum::explicit_list({0.5, 0.25}));
}

TEST(Spectrum, ExplicitListHeuristic) {
  Vec fast, slow;
  for (int k = 1; k <= 64; ++k) {
    fast.push_back(0.5 / (k * k));
    slow.push_back(0.5 / std::sqrt(static_cast<double>(k)));
  }
  const auto vf = DiagonalOperator(BaseSpectrum::explicit_list(fast), 1.0).is_summable();
  EXPECT_TRUE(vf.summable);
  EXPECT_FALSE(vf.rigorous);
  EXPECT_NEAR(vf.decay_exponent, 2.0, 1e-9);
  EXPECT_FALSE(DiagonalOperator(BaseSpectrum::explicit_list(slow), 1.0).is_summable().summable);
  EXPECT_TRUE(DiagonalOperator(BaseSpectrum::explicit_list(slow), 4.0).is_summable().summable);
  EXPECT_FALSE(
      DiagonalOperator(BaseSpectrum::explicit_list({0.5, 0.1, 0.01}), 1.0).is_summable().summable);
}
