#include <gtest/gtest.h>

#include <cmath>

#include "isoricci/model_profiles.hpp"
#include "oracles.hpp"

using namespace isoricci;

namespace {

// Derivatives of a model by finite differences, independent of the analytic ones.
ModelEval fd_eval(const ModelSpec& m, double a, double t, double ha, double ht) {
  auto va = [&](double x) { return evaluate(m, x, t).value; };
  auto vt = [&](double s) { return evaluate(m, a, s).value; };
  return {va(a), oracle::d1(va, a, ha), oracle::d2(va, a, ha), oracle::d1(vt, t, ht)};
}

std::vector<GridPoint> sweep(double a_lo, double a_hi, int na, double t_lo, double t_hi, int nt) {
  std::vector<GridPoint> g;
  for (int j = 0; j < nt; ++j)
    for (int i = 0; i < na; ++i)
      g.push_back({a_lo + (a_hi - a_lo) * i / (na - 1), t_lo + (t_hi - t_lo) * j / std::max(1, nt - 1)});
  return g;
}

}  // namespace

// ---- constant curvature ---------------------------------------------------------------

TEST(ConstantCurvature, EquatorOfUnitSphere) {
  EXPECT_NEAR(constant_curvature_profile(2 * pi, 1.0), 2 * pi, 1e-12);
}

TEST(ConstantCurvature, HyperbolicCover) {
  EXPECT_NEAR(constant_curvature_profile(1.0, -1.0), 3.683255, 1e-6);
  EXPECT_NEAR(constant_curvature_profile(1.0, -1.0), std::sqrt(4 * pi + 1), 1e-14);
}

TEST(ConstantCurvature, SmallAreaLeadingTerm) {
  for (double k : {-3.0, 0.0, 1.0, 7.0}) {
    const double a = 1e-10;
    EXPECT_NEAR(constant_curvature_profile(a, k) / std::sqrt(4 * pi * a), 1.0, 1e-9);
  }
}

TEST(ConstantCurvature, DomainErrors) {
  EXPECT_THROW(constant_curvature_profile(13.0, 1.0), DomainError);
  EXPECT_THROW(constant_curvature_profile(0.0, 1.0), DomainError);
  EXPECT_THROW(evaluate(constant_curvature_model(0), 13.0, 0.0), DomainError);
}

TEST(ConstantCurvature, ResidualVanishes) {
  for (int g : {0, 1, 2, 5}) {
    const double hi = g == 0 ? four_pi - 0.01 : 40.0;
    auto rep = model_residual(constant_curvature_model(g), sweep(0.01, hi, 50, 0.0, 3.0, 4));
    EXPECT_TRUE(rep.passed) << g;
    EXPECT_LE(rep.max_abs, 1e-10) << g;
  }
}

// ---- Rosenau -----------------------------------------------------------------------

TEST(Rosenau, ConformalFactorLimit) {
  for (double x : {-8.0, -1.0, 0.0, 0.3, 5.0}) {
    const double lim = 0.25 / std::pow(std::cosh(x / 2), 2);
    EXPECT_NEAR(rosenau_conformal_factor(x, 20.0), lim, 1e-14);
    EXPECT_NEAR(1.0 / (2 * (std::cosh(x) + 1)), lim, 1e-15);
  }
}

TEST(Rosenau, ConformalFactorEvenAndPositive) {
  for (double t : {-0.5, 0.0, 0.7, 3.0})
    for (double x : {0.1, 2.0, 29.0, 31.0, 200.0}) {
      EXPECT_DOUBLE_EQ(rosenau_conformal_factor(x, t), rosenau_conformal_factor(-x, t));
      EXPECT_GT(rosenau_conformal_factor(x, t), 0.0);
    }
}

TEST(Rosenau, ConformalFactorContinuousAcrossFarFieldBranch) {
  for (double t : {0.0, 1.0}) {
    const double lo = rosenau_conformal_factor(30.0 - 1e-12, t);
    const double hi = rosenau_conformal_factor(30.0 + 1e-12, t);
    EXPECT_NEAR(lo / hi, 1.0, 1e-10);
  }
}

TEST(Rosenau, LimitMetricHasUnitCurvature) {
  auto lnu = [](double x) { return std::log(rosenau_conformal_factor(x, 30.0)); };
  for (double x : {-3.0, -0.5, 0.0, 1.0, 4.0}) {
    const double K = -oracle::d2(lnu, x, 1e-3) / (2 * rosenau_conformal_factor(x, 30.0));
    EXPECT_NEAR(K, 1.0, 1e-7);
  }
}

// The conformal factor satisfies d/dt ln u = -2(K - 1) with K = -(ln u)_xx / (2u).
TEST(Rosenau, ConformalFactorSolvesNormalizedFlow) {
  for (double t : {-0.3, 0.0, 0.5, 1.5})
    for (double x : {-2.0, 0.0, 0.7, 3.0}) {
      auto lx = [&](double y) { return std::log(rosenau_conformal_factor(y, t)); };
      auto lt = [&](double s) { return std::log(rosenau_conformal_factor(x, s)); };
      const double K = -oracle::d2(lx, x, 1e-3) / (2 * rosenau_conformal_factor(x, t));
      EXPECT_NEAR(oracle::d1(lt, t, 1e-4), -2 * (K - 1), 1e-7) << x << " " << t;
    }
}

// Latitude integrals of the conformal factor on R x (R/4piZ) against the closed form.
TEST(Rosenau, ProfileMatchesLatitudeQuadrature) {
  for (double t : {0.0, 0.5, 1.0})
    for (double x0 : {-3.0, -1.0, 0.0, 0.4, 2.5}) {
      auto u = [&](double x) { return rosenau_conformal_factor(x, t); };
      const double area = four_pi * oracle::integrate(u, -60.0, x0, 2000);
      const double len = four_pi * std::sqrt(u(x0));
      EXPECT_NEAR(rosenau_profile(area / four_pi, t), len, 1e-9 * len) << t << " " << x0;
    }
}

TEST(Rosenau, ProfileSymmetric) {
  for (double t : {0.0, 0.3, 2.0})
    for (double f : {0.01, 0.2, 0.45})
      EXPECT_NEAR(rosenau_profile(f, t), rosenau_profile(1 - f, t), 1e-12);
}

TEST(Rosenau, ProfileLargeTimeLimit) {
  EXPECT_NEAR(rosenau_profile(0.5, 30.0), 2 * pi, 1e-12);
  double worst = 0.0;
  for (int i = 1; i < 200; ++i) {
    const double f = i / 200.0;
    worst = std::max(worst, std::abs(rosenau_profile(f, 5.0) - constant_curvature_profile(4 * pi * f, 1.0)));
  }
  EXPECT_LE(worst, 1e-3);
}

TEST(Rosenau, SmallAreaAsymptotic) {
  for (double t : {0.0, 0.5, 2.0})
    for (double a : {1e-5, 1e-4, 1e-3}) {
      const double phi = rosenau_profile(a / four_pi, t);
      EXPECT_NEAR(phi * phi / a / four_pi, 1.0, 0.01);
    }
}

TEST(Rosenau, ProfileDomain) {
  EXPECT_THROW(rosenau_profile(0.0, 0.0), DomainError);
  EXPECT_THROW(rosenau_profile(1.0, 0.0), DomainError);
  EXPECT_THROW(rosenau_model(-1.0), ParameterError);
}

TEST(Rosenau, AnalyticDerivativesMatchFiniteDifferences) {
  auto m = rosenau_model(0.2);
  for (double t : {0.0, 0.2, 0.9, 3.0})
    for (double a : {0.3, 2.0, 6.0, 11.0}) {
      auto e = evaluate(m, a, t);
      auto f = fd_eval(m, a, t, 1e-3, 1e-4);
      EXPECT_NEAR(e.d1, f.d1, 1e-8);
      EXPECT_NEAR(e.d2, f.d2, 1e-6);
      EXPECT_NEAR(e.dt, f.dt, 1e-7);
    }
}

TEST(Rosenau, ResidualVanishes) {
  auto rep = model_residual(rosenau_model(0.3), sweep(1e-3, four_pi - 1e-3, 100, 0.0, 4.0, 10));
  EXPECT_TRUE(rep.passed);
  EXPECT_LE(rep.max_abs, 1e-10);
}

// K0 from a least-squares fit of (4 pi a - v)/a^2 on small areas.
TEST(Rosenau, CurvatureBoundMatchesQuadraticFit) {
  for (double t : {-0.2, 0.0, 0.5, 2.0}) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (double a = 1e-3; a <= 2e-2; a += 1e-3, ++n) {
      const double y = (four_pi * a - rosenau_eval_abs(a, t).value) / (a * a);
      sx += a, sy += y, sxx += a * a, sxy += a * y;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double icpt = (sy - slope * sx) / n;
    EXPECT_NEAR(icpt, rosenau_sup_curvature(t), 1e-6) << t;
    EXPECT_NEAR(curvature_bound_of_model(rosenau_model(0.5), t + 0.5), rosenau_sup_curvature(t), 1e-15);
  }
  EXPECT_NEAR(rosenau_sup_curvature(40.0), 1.0, 1e-15);
}

// ---- genus one ---------------------------------------------------------------------

TEST(Genus1, SmallTimeLimit) {
  for (double a : {0.5, 2.0, 10.0}) EXPECT_NEAR(genus1_model(a, 1e-9, 1.0).value, a, 1e-7);
}

TEST(Genus1, BelowFlatProfile) {
  for (double C : {0.08, 0.5, 3.0})
    for (double t : {0.01, 1.0, 10.0})
      for (double a : {1e-3, 0.5, 5.0, 50.0}) EXPECT_LE(genus1_model(a, t, C).value, four_pi * a * (1 + 1e-15));
}

TEST(Genus1, ExactResidualAtUnitPoint) {
  auto e = genus1_model(1.0, 1.0, 1.0);
  const double r = e.dt - (e.value * e.d2 - e.d1 * e.d1 + four_pi * e.d1);
  EXPECT_LE(std::abs(r), 1e-12);
  // Same identity with Richardson-extrapolated finite differences only.
  auto va = [](double a) { return genus1_model(a, 1.0, 1.0).value; };
  auto vt = [](double t) { return genus1_model(1.0, t, 1.0).value; };
  auto rich = [](auto d, const oracle::Fn& f, double x, double h) { return (16 * d(f, x, h / 2) - d(f, x, h)) / 15; };
  const double V = va(1.0), V1 = rich(oracle::d1, va, 1.0, 0.02), V2 = rich(oracle::d2, va, 1.0, 0.02);
  const double Vt = rich(oracle::d1, vt, 1.0, 0.02);
  EXPECT_LE(std::abs(Vt - (V * V2 - V1 * V1 + four_pi * V1)), 1e-9);
}

TEST(Genus1, AnalyticDerivativesMatchFiniteDifferences) {
  auto m = genus1_spec(0.7, 0.05);
  for (double t : {0.05, 0.5, 2.0})
    for (double a : {0.05, 1.0, 7.0}) {
      auto e = evaluate(m, a, t);
      auto f = fd_eval(m, a, t, 1e-4, 1e-4);
      EXPECT_NEAR(e.d1, f.d1, 1e-8);
      EXPECT_NEAR(e.d2, f.d2, 1e-5 * std::max(1.0, std::abs(e.d2)));
      EXPECT_NEAR(e.dt, f.dt, 1e-8);
    }
}

TEST(Genus1, ResidualVanishesOnSweep) {
  auto rep = model_residual(genus1_spec(1.3), sweep(1e-3, 40.0, 200, 0.05, 2.0, 20));
  EXPECT_TRUE(rep.passed);
  EXPECT_LE(rep.max_abs, 1e-8);
}

TEST(Genus1, Errors) {
  EXPECT_THROW(genus1_model(1.0, 0.0, 1.0), DomainError);
  EXPECT_THROW(genus1_model(1.0, 1.0, 0.05), ParameterError);
  EXPECT_THROW(genus1_spec(1.0 / (4 * pi)), ParameterError);
  EXPECT_THROW(curvature_bound_of_model(genus1_spec(1.0), 0.0), DomainError);
}

TEST(Genus1, CurvatureBound) {
  EXPECT_NEAR(curvature_bound_of_model(genus1_spec(1.0), 1.0), 5.78319, 1e-5);
  EXPECT_NEAR(curvature_bound_of_model(genus1_spec(1.0), 2.0), (2 * pi - 0.5) / 2, 1e-14);
  // Against the a^2 coefficient of the model itself.
  const double t = 0.7, a = 1e-4;
  const double fitK = (four_pi * a - genus1_model(a, t, 1.0).value) / (a * a);
  EXPECT_NEAR(fitK, (2 * pi - 0.5) / t, 1e-2);
}

// ---- hyperbolic quadratic -------------------------------------------------------------

TEST(HyperbolicQuadratic, CoefficientOdeFromPolynomialCollection) {
  for (int g : {2, 3, 6})
    for (double B : {0.0, 0.3, 0.9 * (g - 1)}) {
      const oracle::Poly v({0.0, four_pi, B});
      const oracle::Poly rhs = oracle::squared_operator(v, g);
      EXPECT_NEAR(rhs.coef(0), 0.0, 1e-10);
      EXPECT_NEAR(rhs.coef(1), 0.0, 1e-10);
      for (std::size_t k = 3; k < rhs.c.size(); ++k) EXPECT_NEAR(rhs.coef(k), 0.0, 1e-12);
      // v_t = B' a^2 must equal the a^2 coefficient.
      EXPECT_NEAR(rhs.coef(2), -2 * B * (B + (1.0 - g)), 1e-10);
    }
}

TEST(HyperbolicQuadratic, ClosedFormSolvesCoefficientOde) {
  for (int g : {2, 4})
    for (double B0 : {0.01, 0.5, 0.95 * (g - 1)}) {
      auto B = [&](double t) { return quadratic_B(t, g, B0); };
      EXPECT_DOUBLE_EQ(B(0.0), B0);
      for (double t : {0.0, 0.4, 2.0}) {
        const double b = B(t);
        EXPECT_NEAR(oracle::d1(B, t + 1e-3, 1e-3) - (-2 * B(t + 1e-3) * (B(t + 1e-3) + 1.0 - g)), 0.0, 1e-9);
        EXPECT_GT(b, 0.0);
        EXPECT_LT(b, g - 1.0);
      }
    }
}

TEST(HyperbolicQuadratic, MonotoneApproachToFixedPoint) {
  const int g = 3;
  double prev = 0.0;
  for (int i = 0; i <= 50; ++i) {
    const double b = quadratic_B(0.2 * i, g, 0.1);
    EXPECT_GT(b, prev);
    prev = b;
  }
  EXPECT_NEAR(quadratic_B(30.0, g, 0.1), g - 1.0, 1e-10);
}

TEST(HyperbolicQuadratic, StationaryAtZero) {
  auto rep = model_residual(hyperbolic_quadratic_spec(2, 0.0), sweep(0.01, 30, 40, 0, 2, 3));
  EXPECT_LE(rep.max_abs, 1e-13);
  EXPECT_EQ(evaluate(hyperbolic_quadratic_spec(2, 0.0), 3.0, 5.0).value, four_pi * 3.0);
}

TEST(HyperbolicQuadratic, ResidualVanishes) {
  auto rep = model_residual(hyperbolic_quadratic_spec(3, 0.7), sweep(1e-3, 40, 100, 0, 5, 10));
  EXPECT_TRUE(rep.passed);
  EXPECT_LE(rep.max_abs, 1e-10);
}

TEST(HyperbolicQuadratic, Errors) {
  EXPECT_THROW(hyperbolic_quadratic_spec(2, 1.0), ParameterError);
  EXPECT_THROW(hyperbolic_quadratic_spec(1, 0.1), ParameterError);
  EXPECT_THROW(hyperbolic_quadratic_spec(2, -0.1), ParameterError);
  EXPECT_DOUBLE_EQ(curvature_bound_of_model(hyperbolic_quadratic_spec(3, 0.5), 0.0), -0.5);
}

// ---- hyperbolic stationary ------------------------------------------------------------

TEST(HyperbolicStationary, OriginValues) {
  for (int g : {2, 3})
    for (double C : {critical_C(g), 1.0, 4.0}) {
      auto e = hyperbolic_stationary(0.0, C, g);
      EXPECT_DOUBLE_EQ(e.value, 0.0);
      EXPECT_NEAR(e.d1, four_pi, 1e-13);
    }
}

TEST(HyperbolicStationary, LargeSlope) {
  const double x = 400.0;
  EXPECT_NEAR(hyperbolic_stationary(x, 1.0, 2).value / x, 2.0, 0.04);
  EXPECT_NEAR(hyperbolic_stationary(x, 1.0, 2).d1, 2.0, 1e-12);
}

TEST(HyperbolicStationary, FiniteDifferenceResidualAtReferencePoint) {
  const int g = 2;
  const double q = 1.0 - g, x = 0.7;
  auto v = [&](double y) { return hyperbolic_stationary(y, 1.0, g).value; };
  // Richardson-extrapolated fourth-order stencils.
  auto rd1 = [&](double h) { return (16 * oracle::d1(v, x, h / 2) - oracle::d1(v, x, h)) / 15; };
  auto rd2 = [&](double h) { return (16 * oracle::d2(v, x, h / 2) - oracle::d2(v, x, h)) / 15; };
  const double V = v(x), V1 = rd1(0.02), V2 = rd2(0.02);
  const double r = V * V2 - V1 * V1 + (four_pi - 2 * q * x) * V1 + 2 * q * V;
  EXPECT_LE(std::abs(r), 1e-10);
}

TEST(HyperbolicStationary, AnalyticDerivativesAndCDerivative) {
  for (double C : {0.3, 1.0, 2.5})
    for (double x : {0.1, 1.0, 6.0}) {
      auto e = hyperbolic_stationary(x, C, 2);
      auto vx = [&](double y) { return hyperbolic_stationary(y, C, 2).value; };
      auto vC = [&](double c) { return hyperbolic_stationary(x, c, 2).value; };
      EXPECT_NEAR(e.d1, oracle::d1(vx, x, 1e-3), 1e-9);
      EXPECT_NEAR(e.d2, oracle::d2(vx, x, 1e-3), 1e-6);
      EXPECT_NEAR(hyperbolic_stationary_dC(x, C, 2), oracle::d1(vC, C, 1e-4), 1e-8);
    }
}

TEST(HyperbolicStationary, RejectsSubcriticalC) {
  EXPECT_THROW(hyperbolic_stationary(1.0, 0.9 * critical_C(2), 2), ParameterError);
  EXPECT_THROW(hyperbolic_stationary(-1.0, 1.0, 2), DomainError);
}

// ---- critical constants ---------------------------------------------------------------

TEST(CriticalConstants, ReferenceValues) {
  EXPECT_NEAR(critical_C(2), 0.159155, 1e-6);
  EXPECT_NEAR(critical_constants(2, 1.0 / pi).b_crit, 0.5, 1e-14);
}

TEST(CriticalConstants, MonotoneAndDivergent) {
  const double cc = critical_C(3);
  double prev = std::numeric_limits<double>::infinity();
  for (int i = 1; i <= 100; ++i) {
    const double b = critical_constants(3, cc * (1 + 0.1 * i)).b_crit;
    EXPECT_GT(b, 0.0);
    EXPECT_LT(b, prev);
    prev = b;
  }
  EXPECT_GT(critical_constants(3, cc * (1 + 1e-9)).b_crit, 1e6);
  EXPECT_LT(critical_constants(3, 1e6).b_crit, 1e-5);
  EXPECT_THROW(critical_constants(3, cc), ParameterError);
  EXPECT_THROW(critical_constants(1, 1.0), ParameterError);
}

TEST(CriticalConstants, SufficiencyOfBcrit) {
  // b = 0.9 b_crit at C = 2 C_crit: f concave on [0, 50].
  const int g = 2;
  const double C = 2 * critical_C(g);
  const double b = 0.9 * critical_constants(g, C).b_crit;
  std::vector<double> x, f;
  for (int i = 0; i <= 5000; ++i) {
    x.push_back(0.01 * i);
    f.push_back(hyperbolic_f(x.back(), C, b, g));
  }
  EXPECT_TRUE(second_difference_check(x, f).passed);
}

// ---- hyperbolic general -------------------------------------------------------------------

TEST(HyperbolicGeneral, InitialValues) {
  const int g = 2;
  const double C0 = 3 * critical_C(g), b0 = 0.1;
  EXPECT_NEAR(general_b(0.0, g, b0), b0, 1e-15);
  EXPECT_NEAR(general_C(0.0, g, C0, b0), C0, 1e-15);
  EXPECT_NEAR(general_b(0.0, g, b0, BernoulliRate::Printed), b0, 1e-15);
  EXPECT_NEAR(general_C(0.0, g, C0, b0, BernoulliRate::Printed), C0, 1e-15);
}

TEST(HyperbolicGeneral, LargeTimeLimits) {
  const int g = 3;
  auto m = hyperbolic_general_spec(g, 2 * critical_C(g), 0.05);
  EXPECT_NEAR(general_b(30.0, g, 0.05), g - 1.0, 1e-10);
  EXPECT_NEAR(general_C(30.0, g, m.C0, 0.05), critical_C(g), 1e-10);
  for (double x : {0.5, 3.0, 10.0})
    EXPECT_NEAR(evaluate(m, x, 30.0).value, four_pi * x + (g - 1.0) * x * x, 1e-7 * x * x);
  EXPECT_NEAR(curvature_bound_of_model(m, 30.0), 1.0 - g, 1e-9);
}

TEST(HyperbolicGeneral, BernoulliResidual) {
  const int g = 2;
  for (auto rate : {BernoulliRate::Corrected, BernoulliRate::Printed}) {
    const double k = static_cast<int>(rate);
    auto b = [&](double t) { return general_b(t, g, 0.1, rate); };
    for (double t : {0.0, 0.5, 2.0}) {
      const double tt = std::max(t, 2e-3);  // keep the stencil inside t >= 0
      const double r = oracle::d1(b, tt, 1e-3) + k * (b(tt) * b(tt) + (1.0 - g) * b(tt));
      EXPECT_LE(std::abs(r), 1e-10) << k << " " << t;
    }
  }
}

TEST(HyperbolicGeneral, ClosedFormAgreesWithRk4) {
  for (int g : {2, 4})
    for (double b0 : {0.01, 0.2}) {
      double worst = 0.0;
      for (double t = 0.25; t <= 5.0; t += 0.25) {
        const double y = oracle::rk4([&](double, double b) { return general_b_rate(b, g); }, b0, t, 4000);
        worst = std::max(worst, std::abs(y - general_b(t, g, b0)));
      }
      EXPECT_LE(worst, 1e-8);
    }
}

TEST(HyperbolicGeneral, LogCRate) {
  const int g = 2;
  const double C0 = 2 * critical_C(g);
  for (auto rate : {BernoulliRate::Corrected, BernoulliRate::Printed}) {
    auto lc = [&](double t) { return std::log(general_C(t, g, C0, 0.1, rate) - critical_C(g)); };
    for (double t : {0.01, 0.5, 2.0, 4.0})
      EXPECT_NEAR(oracle::d1(lc, t, 1e-3), -2 * general_b(t, g, 0.1, rate), 1e-9);
  }
}

// C - C_crit decays like e^{2(1-g)t}; the excess form keeps its relative accuracy there.
TEST(HyperbolicGeneral, CriticalExcessWithoutCancellation) {
  const int g = 5;
  const double C0 = 1.2 * critical_C(g), b0 = 0.5 * critical_constants(g, C0).b_crit;
  EXPECT_DOUBLE_EQ(general_C_excess(0.0, g, C0, b0), C0 - critical_C(g));
  for (double t : {0.5, 2.0, 6.0}) {
    EXPECT_NEAR(general_C(t, g, C0, b0), general_C_excess(t, g, C0, b0) + critical_C(g), 1e-15);
    auto lc = [&](double s) { return std::log(general_C_excess(s, g, C0, b0)); };
    EXPECT_NEAR(oracle::d1(lc, t, 1e-4), -2 * general_b(t, g, b0), 1e-9) << t;
  }
}

TEST(HyperbolicGeneral, AnalyticDerivativesMatchFiniteDifferences) {
  auto m = hyperbolic_general_spec(2, 2 * critical_C(2), 0.1);
  for (double t : {0.1, 1.0, 3.0})
    for (double x : {0.2, 2.0, 15.0}) {
      auto e = evaluate(m, x, t);
      auto f = fd_eval(m, x, t, 1e-3, 1e-4);
      EXPECT_NEAR(e.d1, f.d1, 1e-8);
      EXPECT_NEAR(e.d2, f.d2, 1e-6);
      EXPECT_NEAR(e.dt, f.dt, 1e-7 * std::max(1.0, std::abs(e.dt)));
    }
}

// The residual decays like the distance of (b, C) to their limits, so strict
// negativity is only resolvable in double precision for moderate t; the
// non-strict check runs on the whole window.
TEST(HyperbolicGeneral, StrictSubsolutionOnSweep) {
  auto grid = sweep(1e-3, 50.0, 120, 0.0, 5.0, 11);
  auto early = sweep(1e-3, 50.0, 120, 0.0, 2.0, 5);
  for (int g : {2, 3})
    for (double cf : {1.1, 2.0, 8.0})
      for (double bf : {0.1, 0.5, 0.99}) {
        const double C0 = cf * critical_C(g);
        const double b0 = bf * std::min(critical_constants(g, C0).b_crit, g - 1.0);
        EXPECT_TRUE(model_residual(hyperbolic_general_spec(g, C0, b0), grid).passed);
        auto rep = model_residual(hyperbolic_general_spec(g, C0, b0), early);
        EXPECT_LT(rep.max_value(), 0.0) << g << " " << cf << " " << bf;
      }
}

// Kept to document that the faster coefficient rate does not give a sub-solution.
TEST(HyperbolicGeneral, PrintedRateViolatesInequality) {
  auto m = hyperbolic_general_spec(2, 2 * critical_C(2), 0.1, BernoulliRate::Printed);
  auto rep = model_residual(m, sweep(1e-3, 50.0, 120, 0.0, 5.0, 11));
  EXPECT_FALSE(rep.passed);
  EXPECT_GT(rep.max_value(), 1e-3);
}

TEST(HyperbolicGeneral, ParameterErrors) {
  const double cc = critical_C(2);
  EXPECT_THROW(hyperbolic_general_spec(2, cc, 0.1), ParameterError);
  EXPECT_THROW(hyperbolic_general_spec(2, 2 * cc, 0.0), ParameterError);
  EXPECT_THROW(hyperbolic_general_spec(2, 2 * cc, critical_constants(2, 2 * cc).b_crit), ParameterError);
  EXPECT_THROW(hyperbolic_general_spec(1, 2 * cc, 0.1), ParameterError);
  EXPECT_THROW(evaluate(hyperbolic_general_spec(2, 2 * cc, 0.1), 0.0, 1.0), DomainError);
}

TEST(HyperbolicGeneral, CurvatureExcessDecaysExponentially) {
  const int g = 2;
  auto m = hyperbolic_general_spec(g, 3 * critical_C(g), 0.2);
  for (double t = 0.0; t < 6.0; t += 1.0) {
    const double e0 = curvature_bound_of_model(m, t) - (1.0 - g);
    const double e1 = curvature_bound_of_model(m, t + 1) - (1.0 - g);
    EXPECT_GT(e0, 0.0);
    EXPECT_LE(e1 / e0, std::exp(-0.5));
  }
}

TEST(HyperbolicGeneral, CurvatureBoundMatchesExpansion) {
  auto m = hyperbolic_general_spec(2, 2 * critical_C(2), 0.1);
  for (double t : {0.0, 1.0}) {
    const double a = 1e-4;
    const double fit = (four_pi * a - evaluate(m, a, t).value) / (a * a);
    EXPECT_NEAR(fit, curvature_bound_of_model(m, t), 1e-3);
  }
}

// ---- residual bookkeeping -----------------------------------------------------------------

TEST(Residuals, PhiAndSquaredFormsAgree) {
  auto m = hyperbolic_general_spec(2, 2 * critical_C(2), 0.1);
  for (double x : {0.1, 1.0, 10.0}) {
    auto e = evaluate(m, x, 0.5);
    EXPECT_NEAR(squared_residual(e, x, 2), 2 * std::sqrt(e.value) * phi_residual(e, x, 2),
                1e-10 * std::abs(squared_residual(e, x, 2)));
  }
}

TEST(Residuals, ScalingMakesResidualStrictlyNegative) {
  // (1-eps)^2 v with eps = 0.1 is a strict sub-solution when v is an exact solution.
  for (const auto& m : {constant_curvature_model(0), genus1_spec(1.0, 0.1), hyperbolic_quadratic_spec(2, 0.4),
                        rosenau_model(0.0)}) {
    const double s = 0.81;
    const double hi = m.compact() ? four_pi - 0.05 : 30.0;
    for (double a = 0.05; a < hi; a += 0.5) {
      auto e = evaluate(m, a, 0.5);
      ModelEval w{s * e.value, s * e.d1, s * e.d2, s * e.dt};
      EXPECT_LT(squared_residual(w, a, m.genus), 0.0) << to_string(m.family) << " " << a;
    }
  }
}

TEST(Residuals, ChiZeroChangesDrift) {
  auto e = evaluate(constant_curvature_model(0), 1.0, 0.0);
  EXPECT_NEAR(squared_residual(e, 1.0, 0, 0) - squared_residual(e, 1.0, 0, 1), four_pi * e.d1, 1e-10);
}

// ---- harmonic mean -------------------------------------------------------------------

TEST(HarmonicMean, EqualInputsHalve) {
  ModelEval v{3.0, 0.0, 0.0, 0.0};
  EXPECT_DOUBLE_EQ(harmonic_mean_combine(v, 3.0, 0.0, 1).value, 1.5);
}

TEST(HarmonicMean, LargeConstantRecoversInput) {
  auto v = genus1_model(2.0, 1.0, 1.0);
  EXPECT_NEAR(harmonic_mean_combine(v, 1e14, 1.0, 1).value, v.value, 1e-11);
}

TEST(HarmonicMean, BelowBothAndDerivatives) {
  auto m = genus1_spec(1.0, 0.2);
  const double C = 5.0;
  for (double t : {0.0, 0.5})
    for (double a : {0.05, 1.0, 5.0}) {
      auto h = harmonic_mean_combine(evaluate(m, a, t), C, t, 1);
      EXPECT_LE(h.value, evaluate(m, a, t).value);
      EXPECT_LE(h.value, C);
      auto ha = [&](double x) { return harmonic_mean_combine(evaluate(m, x, t), C, t, 1).value; };
      auto ht = [&](double s) { return harmonic_mean_combine(evaluate(m, a, s), C, s, 1).value; };
      EXPECT_NEAR(h.d1, oracle::d1(ha, a, 1e-3), 1e-8);
      EXPECT_NEAR(h.d2, oracle::d2(ha, a, 1e-3), 1e-5);
      const double tt = t + 0.01;
      EXPECT_NEAR(harmonic_mean_combine(evaluate(m, a, tt), C, tt, 1).dt, oracle::d1(ht, tt, 1e-4), 1e-7);
    }
}

TEST(HarmonicMean, LogConcavityInequality) {
  auto m = hyperbolic_general_spec(2, 2 * critical_C(2), 0.1);
  for (double C : {1.0, 10.0, 100.0})
    for (double x : {0.1, 1.0, 5.0, 20.0}) {
      auto v = evaluate(m, x, 0.3);
      auto h = harmonic_mean_combine(v, C, 0.3, 2);
      const double lnh2 = h.d2 / h.value - (h.d1 / h.value) * (h.d1 / h.value);
      const double lnv2 = v.d2 / v.value - (v.d1 / v.value) * (v.d1 / v.value);
      EXPECT_GE(h.value * h.value * lnh2, h.value * h.value * lnv2 - 1e-12);
      EXPECT_LT(h.d2, 0.0);
    }
}

TEST(HarmonicMean, PreservesSubsolution) {
  struct Case {
    ModelSpec m;
    double C;
  };
  for (const auto& c : {Case{genus1_spec(1.0, 0.1), 20.0}, Case{hyperbolic_general_spec(2, 0.5, 0.1), 50.0},
                        Case{hyperbolic_quadratic_spec(3, 0.5), 30.0}}) {
    for (double t : {0.0, 0.5, 1.5})
      for (double a = 0.01; a < 40.0; a *= 1.5) {
        auto h = harmonic_mean_combine(evaluate(c.m, a, t), c.C, t, c.m.genus);
        EXPECT_LE(squared_residual(h, a, c.m.genus), 1e-9 * std::max(1.0, h.value)) << to_string(c.m.family);
      }
  }
}

// ---- porous media ----------------------------------------------------------------------

TEST(PorousMedia, ZeroOnEqualityModels) {
  auto g1 = sweep(0.01, 12.0, 40, 0.1, 1.0, 4);
  auto r = porous_media_residual(constant_curvature_model(0), sweep(0.05, four_pi - 0.05, 40, 0, 1, 2));
  EXPECT_LE(r.max_abs, 1e-10);
  r = porous_media_residual(genus1_spec(1.0), g1);
  EXPECT_LE(r.max_abs, 1e-8);
  EXPECT_TRUE(r.passed);
}

TEST(PorousMedia, SignFlipAndIdentity) {
  auto m = hyperbolic_general_spec(2, 3 * critical_C(2), 0.2);
  auto grid = sweep(1e-2, 30.0, 60, 0.0, 3.0, 6);
  auto phi = model_residual(m, grid);
  auto u = porous_media_residual(m, grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    EXPECT_LT(phi.residuals[i], 0.0);
    EXPECT_GT(u.residuals[i], 0.0);
  }
  EXPECT_TRUE(u.passed);
  EXPECT_LE(porous_identity_error(m, grid), 1e-10);
  EXPECT_LE(porous_identity_error(rosenau_model(0.0), sweep(0.1, 12.0, 30, 0, 2, 3)), 1e-10);
}

TEST(PorousMedia, RejectsNonpositive) {
  EXPECT_THROW(porous_residual(ModelEval{0.0, 1, 0, 0}, 1.0, 1), DomainError);
}

// ---- concavity ------------------------------------------------------------------------

TEST(Concavity, StraightLine) {
  auto s = sample_model(constant_curvature_model(1), uniform_area_grid(100, 10.0), 0.0);
  EXPECT_TRUE(concavity_check(s).passed);
  EXPECT_FALSE(concavity_check(s, 0.0, ConcavityMode::Strict).passed);
}

TEST(Concavity, RoundSphereQuadratic) {
  auto s = sample_model(constant_curvature_model(0), uniform_area_grid(200, four_pi), 0.0);
  auto r = concavity_check(s);
  for (double d : r.residuals) EXPECT_NEAR(d, -2.0, 1e-8);
  EXPECT_TRUE(concavity_check(s, 1.9, ConcavityMode::Strict).passed);
  EXPECT_FALSE(concavity_check(s, 2.1).passed);
}

TEST(Concavity, MalformedGrid) {
  ProfileSamples s;
  s.a = {0, 1};
  s.v = {0, 1};
  EXPECT_THROW(concavity_check(s), GridError);
}

TEST(Concavity, NonUniformGrid) {
  std::vector<double> x = {0.0, 0.1, 0.3, 0.7, 1.5}, y;
  for (double v : x) y.push_back(-v * v);
  for (double d : second_differences(x, y)) EXPECT_NEAR(d, -2.0, 1e-12);
}

TEST(ModelSpec, ParamJson) {
  EXPECT_EQ(genus1_spec(2.0, 0.5).param_json(), "{\"C\":2,\"t_start\":0.5}");
  EXPECT_EQ(rosenau_model(0.25).param_json(), "{\"t0\":0.25}");
}
