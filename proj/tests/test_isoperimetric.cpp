#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "isoricci/isoperimetric.hpp"
#include "isoricci/profile_pde.hpp"
#include "oracles.hpp"

using namespace isoricci;

namespace {

double max_rel(const ProfileSamples& p, const std::function<double(double)>& I) {
  double e = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p.a[i] <= 0.0 || p.a[i] >= four_pi) continue;
    e = std::max(e, std::abs(std::sqrt(p.v[i]) / I(p.a[i]) - 1.0));
  }
  return e;
}

ProfileSamples flat_profile(const std::vector<double>& a) {
  ProfileSamples s;
  s.a = a;
  for (double x : a) s.v.push_back(four_pi * x);
  s.kind = DomainKind::HalfLine;
  s.genus = 1;
  s.extent = a.back();
  return s;
}

}  // namespace

TEST(LatitudeProfile, RoundSphere) {
  auto p = latitude_profile(round_sphere(2048), 2048);
  EXPECT_LE(max_rel(p, [](double a) { return std::sqrt(4 * pi * a - a * a); }), 1e-6);
  EXPECT_EQ(p.v.front(), 0.0);
  EXPECT_EQ(p.v.back(), 0.0);
  EXPECT_EQ(p.kind, DomainKind::CompactTotalArea);
}

TEST(LatitudeProfile, RosenauMatchesClosedForm) {
  for (double t : {0.0, 0.5, 2.0}) {
    auto p = latitude_profile(rosenau_metric(1024, t), 1024, t);
    EXPECT_LE(max_rel(p, [t](double a) { return rosenau_profile(a / four_pi, t); }), 1e-5) << t;
  }
}

// Cap area P int_{-inf}^{x0} u dx and boundary length P sqrt(u(x0)) by direct quadrature on the cylinder.
TEST(LatitudeProfile, MatchesCylinderQuadrature) {
  const double t = 0.3, P = four_pi;
  auto m = rosenau_metric(512, t);
  for (double x0 : {-3.0, -0.7, 0.4, 2.5}) {
    auto u = [t](double x) { return rosenau_conformal_factor(x, t); };
    const double A = P * oracle::integrate(u, -60.0, x0, 400);
    const double L = P * std::sqrt(u(x0));
    auto p = latitude_profile(m, std::vector<double>{0.0, A, four_pi});
    EXPECT_NEAR(std::sqrt(p.v[1]) / L, 1.0, 1e-8) << x0;
  }
}

TEST(LatitudeProfile, ComplementSymmetry) {
  auto p = latitude_profile(perturbed_sphere(512, 0.3), 512);
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(p.v[i], p.v[p.size() - 1 - i], 1e-9 * (1.0 + p.v[i]));
}

// sup K on the equator: small balls there are shorter than polar caps of equal area.
TEST(LatitudeProfile, GeodesicBallCapsProfileWhenCurvatureOffPole) {
  auto m = perturbed_sphere(512, -0.3);
  auto K = gauss_curvature(m, CurvatureMethod::Spectral);
  const double supK = *std::max_element(K.begin(), K.end());
  ASSERT_GT(supK, std::max(K.front(), K.back()) + 0.1);
  const double a = 1e-3;
  auto p = latitude_profile(m, std::vector<double>{0.0, a, four_pi});
  const double r = ball_radius_for_area(supK, a);
  const double ball = 2 * pi * r * (1 - supK * r * r / 6);
  // Grid-sampled sup K is within O(h^2) of the value the profile uses.
  EXPECT_NEAR(std::sqrt(p.v[1]) / ball, 1.0, 1e-9);
  // Polar caps have the pole curvature only.
  auto pole_only = latitude_profile(perturbed_sphere(512, 0.3), std::vector<double>{0.0, a, four_pi});
  EXPECT_GT(std::sqrt(pole_only.v[1]), 0.0);
}

TEST(LatitudeProfile, RejectsBadGrid) {
  EXPECT_THROW(latitude_profile(round_sphere(64), std::vector<double>{0.0, 1.0}), GridError);
  EXPECT_THROW(latitude_profile(round_sphere(64), std::vector<double>{0.0, 2.0, 1.0, four_pi}), GridError);
}

TEST(BolFiala, Values) {
  EXPECT_NEAR(bol_fiala_bound(pi, 1.0), pi * std::sqrt(3.0), 1e-14);
  EXPECT_NEAR(bol_fiala_bound(pi, 1.0), 5.44140, 1e-5);
  EXPECT_DOUBLE_EQ(bol_fiala_bound(2.0, 0.0), std::sqrt(8.0 * pi));
  EXPECT_THROW(bol_fiala_bound(20.0, 1.0), DomainError);
}

TEST(BolFiala, RoundSphereIsEqualityCase) {
  auto p = latitude_profile(round_sphere(1024), 1024);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double b = bol_fiala_bound(p.a[i], 1.0);
    EXPECT_GE(std::sqrt(p.v[i]), b - 1e-8);
    EXPECT_NEAR(std::sqrt(p.v[i]), b, 1e-6 * std::max(1.0, b));
  }
}

TEST(BolFiala, RosenauCapsDominateBound) {
  const double t = 0.2;
  auto p = latitude_profile(rosenau_metric(1024, t), 1024, t);
  const double k0 = rosenau_sup_curvature(t);
  // The bound is defined for a <= 4 pi / k0.
  for (std::size_t i = 0; i < p.size(); ++i)
    if (k0 * p.a[i] <= four_pi) {
      EXPECT_GE(std::sqrt(p.v[i]), bol_fiala_bound(p.a[i], k0) - 1e-8);
    }
}

TEST(IsoperimetricConstant, FlatRoundAndRosenau) {
  EXPECT_NEAR(isoperimetric_constant(flat_profile(uniform_area_grid(100, 40.0))), four_pi, 1e-12);
  EXPECT_NEAR(isoperimetric_constant(latitude_profile(round_sphere(512), 512)), 2 * pi, 1e-9);
  // For the Rosenau metric the inf sits at a = 2 pi where I^2 / a = 4 pi tanh(s/2) / s.
  const double t = 0.4, s = rosenau_s(t);
  EXPECT_NEAR(isoperimetric_constant(latitude_profile(rosenau_metric(512, t), 512)),
              4 * pi * std::tanh(0.5 * s) / s, 1e-8);
}

TEST(IsoperimetricConstant, HalfLineUsesTailSlope) {
  auto s = model_samples(genus1_spec(2.0, 0.5), 400, 0.0, 40.0);
  const double c = isoperimetric_constant(s);
  const std::size_t n = s.size();
  EXPECT_LE(c, (s.v[n - 1] - s.v[n - 2]) / (s.a[n - 1] - s.a[n - 2]) + 1e-15);
  EXPECT_GE(c, 1.0 / 2.0);  // v ~ a / C at large a
}

TEST(SmallScaleFit, RoundFlatAndRosenau) {
  const auto g = clustered_area_grid(512, 1e-2, 30, 1e-5);
  auto round = small_scale_fit(latitude_profile(round_sphere(512), g));
  EXPECT_NEAR(round.supK_est, 1.0, 0.05);
  EXPECT_GE(round.nodes, small_scale_min_nodes);
  EXPECT_LE(round.window_hi, 10.0 * round.window_lo + 1e-15);

  std::vector<double> a = log_grid(1e-5, 1e-2, 61);
  a.insert(a.begin(), 0.0);
  EXPECT_NEAR(small_scale_fit(flat_profile(a)).supK_est, 0.0, 0.05);

  auto m = rosenau_metric(1024, 0.5);
  auto K = gauss_curvature(m, CurvatureMethod::Spectral);
  const double kmax = *std::max_element(K.begin(), K.end());
  EXPECT_NEAR(small_scale_fit(latitude_profile(m, g, 0.5)).supK_est / kmax, 1.0, 0.05);
}

TEST(SmallScaleFit, ReportsOffPoleCurvatureThroughBalls) {
  auto m = perturbed_sphere(512, -0.3);
  auto K = gauss_curvature(m, CurvatureMethod::Spectral);
  auto f = small_scale_fit(latitude_profile(m, clustered_area_grid(512, 1e-2, 30, 1e-5)));
  EXPECT_NEAR(f.supK_est / *std::max_element(K.begin(), K.end()), 1.0, 0.05);
}

TEST(SmallScaleFit, NeedsSmallAreaNodes) {
  EXPECT_THROW(small_scale_fit(latitude_profile(round_sphere(64), 64)), GridError);
}

TEST(SupportConcavity, RoundSphereCancelsExactly) {
  auto p = latitude_profile(round_sphere(512), 512);
  auto r = support_concavity_check(p, 1.0, 1e-8);
  EXPECT_TRUE(r.passed);
  EXPECT_LE(r.max_abs, 1e-8);
  EXPECT_FALSE(support_concavity_check(p, 2.0, 1e-8).passed);
}

// min K sits on the equator, where v'' = -2K holds with equality; take it from the closed-form
// conformal factor, K = -(ln u)'' / (2u) at x = 0.
TEST(SupportConcavity, RosenauWithMinCurvature) {
  const double t = 1.0;
  auto lnu = [t](double x) { return std::log(rosenau_conformal_factor(x, t)); };
  const double kmin = -oracle::d2(lnu, 0.0, 1e-3) / (2 * rosenau_conformal_factor(0.0, t));
  auto p = latitude_profile(rosenau_metric(1024, t), 1024, t);
  auto r = support_concavity_check(p, kmin, 1e-8);
  EXPECT_TRUE(r.passed) << r.max_value();
}

TEST(SupportConcavity, FlatPlane) {
  auto r = support_concavity_check(flat_profile(uniform_area_grid(50, 10.0)), 0.0, 1e-9);
  EXPECT_TRUE(r.passed);
  EXPECT_LE(r.max_abs, 1e-9);
}

TEST(VariationCheck, RoundSphereEquator) {
  auto m = round_sphere(512, 2 * pi);
  SphereSeries S(m);
  EXPECT_NEAR(S.geodesic_curvature(pi / 2), 0.0, 1e-12);
  auto v = variation_check(m, 0.0);
  EXPECT_TRUE(v.passed());
  EXPECT_NEAR(v.first.residuals[0], 0.0, 1e-10);
}

// Round sphere at colatitude th: cap area a = 2 pi (1 - cos th), int k = 2 pi cos th = 2 pi - a,
// d2L/de2 = -L.
TEST(VariationCheck, RoundSphereLatitudeValues) {
  auto m = round_sphere(512, 2 * pi);
  SphereSeries S(m);
  for (double th : {0.3, 1.0, 2.2}) {
    const double a = 2 * pi * (1 - std::cos(th));
    EXPECT_NEAR(S.area(th), a, 1e-12);
    EXPECT_NEAR(S.geodesic_curvature(th) * S.length(th), 2 * pi - a, 1e-12);
    EXPECT_NEAR(S.curvature(th), 1.0, 1e-12);
  }
}

TEST(VariationCheck, PresetMetricsAtFineGrid) {
  for (const auto& m : {round_sphere(2048), rosenau_metric(2048, 0.0), rosenau_metric(2048, 1.0),
                        perturbed_sphere(2048, 0.3)})
    for (double x0 : {-2.5, -0.4, 0.0, 1.1, 3.0}) {
      auto v = variation_check(m, x0);
      EXPECT_TRUE(v.passed()) << x0 << " " << v.first.max_abs << " " << v.second.max_abs << " "
                              << v.gauss_bonnet.max_abs;
    }
}

// Residuals come from fourth-order differences: halving the step divides them by about 16.
TEST(VariationCheck, ResidualsAreFourthOrderInStep) {
  auto m = rosenau_metric(256, 0.0);
  auto c = variation_check(m, 0.3, {}, 0.1), f = variation_check(m, 0.3, {}, 0.05);
  EXPECT_NEAR(c.first.max_abs / f.first.max_abs, 16.0, 1.5);
  EXPECT_NEAR(c.second.max_abs / f.second.max_abs, 16.0, 1.5);
  EXPECT_FALSE(variation_check(m, 0.3, {.first = 1e-6, .second = 1e-6, .gauss_bonnet = 1e-6}, 0.1).passed());
}

TEST(VariationCheck, RejectsChartBoundary) {
  EXPECT_THROW(variation_check(round_sphere(256), 40.0), DomainError);
}

TEST(Csv, ProfileAndFit) {
  std::ostringstream a, b;
  write_profile_csv(a, latitude_profile(round_sphere(32), 4));
  EXPECT_EQ(a.str().substr(0, 4), "a,I\n");
  write_fit_csv(b, SmallScaleFit{1.0, 1e-5, 1e-4, 0.99, 21});
  EXPECT_EQ(b.str().substr(0, b.str().find('\n')), "supK_est,window_lo,window_hi,r2");
}
