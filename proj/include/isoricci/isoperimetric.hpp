#pragma once

// Isoperimetric profiles of rotationally symmetric spheres from latitude circles,
// classical bounds, isoperimetric constants and the variation identities.

#include <algorithm>
#include <cmath>
#include <complex>
#include <ostream>
#include <string>
#include <vector>

#include "isoricci/core.hpp"
#include "isoricci/model_profiles.hpp"
#include "isoricci/surface_geometry.hpp"

namespace isoricci {

inline constexpr const char* profile_method = "latitude";

// Cosine-series representation of psi and e^psi, evaluable at any colatitude.
class SphereSeries {
 public:
  explicit SphereSeries(const RotSymSphereMetric& m) : P_(m.P) {
    m.validate();
    a_ = cosine_coefficients(m.psi);
    std::vector<double> e(m.n());
    for (std::size_t i = 0; i < m.n(); ++i) e[i] = std::exp(m.psi[i]);
    c_ = cosine_coefficients(e);
    total_ = raw_area(pi);
  }

  std::size_t modes() const { return a_.size(); }
  double total_area() const { return total_; }

  double psi(double th) const { return sum(a_, th, 0); }
  double dpsi(double th) const { return sum(a_, th, 1); }
  double d2psi(double th) const { return sum(a_, th, 2); }

  // Cap area from the pole theta = 0.
  double area(double th) const { return raw_area(th); }
  double length(double th) const { return 2.0 * pi * std::exp(0.5 * psi(th)) * std::sin(th); }

  // K = e^{-psi}(1 - (psi'' + cot(theta) psi')/2); the pole limit of cot psi' is psi''.
  double curvature(double th) const {
    const double p2 = d2psi(th);
    const double s = std::sin(th);
    const double lap = std::abs(s) < 1e-12 ? 2.0 * p2 : p2 + std::cos(th) / s * dpsi(th);
    return std::exp(-psi(th)) * (1.0 - 0.5 * lap);
  }

  // Geodesic curvature of the latitude circle with respect to the normal pointing
  // away from the pole theta = 0.
  double geodesic_curvature(double th) const {
    return std::exp(-0.5 * psi(th)) * (0.5 * dpsi(th) + std::cos(th) / std::sin(th));
  }

 private:
  static void rotate(double th, std::size_t n, std::vector<double>& c, std::vector<double>& s) {
    c.resize(n + 2);
    s.resize(n + 2);
    const std::complex<double> step = std::polar(1.0, th);
    std::complex<double> z = 1.0;
    for (std::size_t k = 0; k < n + 2; ++k) {
      // Re-seed periodically so rounding does not accumulate.
      if (k % 64 == 0) z = std::polar(1.0, double(k) * th);
      c[k] = z.real();
      s[k] = z.imag();
      z *= step;
    }
  }

  static double sum(const std::vector<double>& a, double th, int deriv) {
    std::vector<double> c, s;
    rotate(th, a.size(), c, s);
    double out = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      const double kk = double(k);
      if (deriv == 0) out += a[k] * c[k];
      else if (deriv == 1) out -= kk * a[k] * s[k];
      else out -= kk * kk * a[k] * c[k];
    }
    return out;
  }

  // 2 pi sum_k c_k int_0^theta cos(k t) sin t dt.
  double raw_area(double th) const {
    std::vector<double> c, s;
    rotate(th, c_.size(), c, s);
    double out = c_[0] * (1.0 - c[1]);
    if (c_.size() > 1) out += c_[1] * 0.5 * s[1] * s[1];
    for (std::size_t k = 2; k < c_.size(); ++k)
      out += c_[k] * 0.5 * ((1.0 - c[k + 1]) / double(k + 1) - (1.0 - c[k - 1]) / double(k - 1));
    return 2.0 * pi * out;
  }

  double P_;
  std::vector<double> a_, c_;
  double total_ = 0.0;
};

// Colatitude of the cap with area a, by safeguarded Newton on A(theta) = a.
inline double cap_colatitude(const SphereSeries& S, double a, double guess) {
  double lo = 0.0, hi = pi, th = std::clamp(guess, 1e-12, pi - 1e-12);
  for (int it = 0; it < 60; ++it) {
    const double f = S.area(th) - a;
    if (f > 0.0) hi = th;
    else lo = th;
    const double d = S.length(th) * std::exp(0.5 * S.psi(th));  // dA/dtheta = 2 pi e^psi sin theta
    double next = th - f / d;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - th) < 1e-15 * std::max(1.0, th)) return next;
    th = next;
  }
  return th;
}

// Radius of the geodesic ball with truncated area pi r^2 (1 - K r^2 / 12) = a.
inline double ball_radius_for_area(double K, double a) {
  double r = std::sqrt(a / pi);
  for (int it = 0; it < 50; ++it) {
    const double f = pi * r * r * (1.0 - K * r * r / 12.0) - a;
    const double d = 2.0 * pi * r - pi * K * r * r * r / 3.0;
    const double next = r - f / d;
    if (std::abs(next - r) < 1e-16 * r) return next;
    r = next;
  }
  return r;
}

// Profile squared (v = I^2) from latitude circles on the given area grid over [0, 4 pi].
// The metric is rescaled so the series quadrature gives area 4 pi exactly. When sup K
// is attained away from the poles, small geodesic balls there beat the polar caps and
// the truncated ball perimeter caps the profile for radii below the injectivity fraction.
inline ProfileSamples latitude_profile(const RotSymSphereMetric& m, const std::vector<double>& a_grid,
                                       double t = 0.0) {
  const SphereSeries S(m);
  const double total = S.total_area();
  if (!(total > 0.0)) throw DomainError("latitude_profile: nonpositive area");
  const double scale = four_pi / total;  // area factor; lengths scale by sqrt

  ProfileSamples out;
  out.a = a_grid;
  out.v.assign(a_grid.size(), 0.0);
  out.t = t;
  out.genus = 0;
  out.kind = DomainKind::CompactTotalArea;
  out.extent = four_pi;
  if (a_grid.empty() || a_grid.front() != 0.0 || std::abs(a_grid.back() - four_pi) > 1e-12)
    throw GridError("latitude_profile: area grid must span [0, 4 pi]");

  double guess = 0.0;
  for (std::size_t j = 0; j < a_grid.size(); ++j) {
    const double a = a_grid[j];
    if (j > 0 && !(a > a_grid[j - 1])) throw GridError("latitude_profile: area grid must increase");
    if (a <= 0.0 || a >= four_pi) continue;
    if (guess <= 0.0) guess = std::acos(1.0 - a / (2.0 * pi));
    const double th = cap_colatitude(S, a / scale, guess);
    const double L = S.length(th);
    out.v[j] = scale * L * L;
    guess = th;
  }

  // Curvature on the cell centres and at the poles.
  const auto K = gauss_curvature(m, CurvatureMethod::Spectral);
  const double supK = *std::max_element(K.begin(), K.end()) / scale;
  const double kpole = std::max(S.curvature(0.0), S.curvature(pi)) / scale;
  if (supK > kpole + 1e-8) {
    const double r_max = ball_radius_fraction * injectivity_scale(supK);
    for (std::size_t j = 0; j < a_grid.size(); ++j) {
      const double a = a_grid[j];
      if (a <= 0.0 || a >= four_pi) continue;
      for (double area : {a, four_pi - a}) {
        if (area > pi * r_max * r_max) continue;
        const double r = ball_radius_for_area(supK, area);
        if (r > r_max) continue;
        const double p = geodesic_ball_expansion(supK, r, r_max).perimeter;
        out.v[j] = std::min(out.v[j], p * p);
      }
    }
  }
  out.validate();
  return out;
}

inline ProfileSamples latitude_profile(const RotSymSphereMetric& m, std::size_t intervals, double t = 0.0) {
  return latitude_profile(m, uniform_area_grid(intervals, four_pi), t);
}

// Uniform grid plus a logarithmic cluster toward both ends for small-area fits.
inline std::vector<double> clustered_area_grid(std::size_t intervals, double a_small, std::size_t per_decade,
                                               double a_lo) {
  std::vector<double> a = uniform_area_grid(intervals, four_pi);
  const std::size_t decades = std::size_t(std::ceil(std::log10(a_small / a_lo)));
  const auto lg = log_grid(a_lo, a_small, decades * per_decade + 1);
  for (double x : lg) {
    a.push_back(x);
    a.push_back(four_pi - x);
  }
  std::sort(a.begin(), a.end());
  a.erase(std::unique(a.begin(), a.end(), [](double x, double y) { return std::abs(x - y) < 1e-14; }), a.end());
  return a;
}

inline double bol_fiala_bound(double a, double kappa0) {
  const double r = 4.0 * pi * a - kappa0 * a * a;
  if (r < -1e-12 * std::max(1.0, 4.0 * pi * a)) throw DomainError("bol_fiala_bound: 4 pi a - kappa0 a^2 < 0");
  return std::sqrt(std::max(0.0, r));
}

// Compact: inf I^2 / a over (0, extent / 2]. Half-line: inf over the grid and the
// limiting slope at the last node (I^2 / a decreases to lim I^2' for concave I^2).
inline double isoperimetric_constant(const ProfileSamples& s) {
  s.validate();
  double best = std::numeric_limits<double>::infinity();
  const bool compact = s.kind == DomainKind::CompactTotalArea;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double a = s.a[i];
    if (a <= 0.0) continue;
    if (compact && a > 0.5 * s.extent * (1.0 + 1e-14)) break;
    best = std::min(best, s.v[i] / a);
  }
  if (!compact && s.size() >= 2) {
    const std::size_t n = s.size();
    best = std::min(best, (s.v[n - 1] - s.v[n - 2]) / (s.a[n - 1] - s.a[n - 2]));
  }
  return best;
}

struct SmallScaleFit {
  double supK_est = 0.0;
  double window_lo = 0.0;
  double window_hi = 0.0;
  double r2 = 0.0;
  std::size_t nodes = 0;
};

inline constexpr std::size_t small_scale_min_nodes = 20;
inline constexpr double small_scale_cutoff = 0.01;

// Fits (sqrt(4 pi a) - I) / a^{3/2} = c0 + c1 a on the smallest decade of a holding at
// least 20 nodes; c0 estimates sup K / (4 sqrt(pi)).
inline SmallScaleFit small_scale_fit(const ProfileSamples& s) {
  std::vector<double> as;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s.a[i] > 0.0 && s.a[i] < small_scale_cutoff) as.push_back(s.a[i]);
  if (as.size() < small_scale_min_nodes)
    throw GridError("small_scale_fit: need at least 20 nodes with a < 0.01");
  double lo = std::pow(10.0, std::floor(std::log10(as.front())));
  for (;; lo *= 10.0) {
    const double hi = 10.0 * lo;
    std::size_t cnt = 0;
    for (double a : as) cnt += (a >= lo && a <= hi) ? 1 : 0;
    if (cnt >= small_scale_min_nodes) break;
    if (hi > small_scale_cutoff) throw GridError("small_scale_fit: no decade with 20 nodes below a = 0.01");
  }
  const double hi = 10.0 * lo;
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double a = s.a[i];
    if (a < lo || a > hi) continue;
    xs.push_back(a);
    ys.push_back((std::sqrt(4.0 * pi * a) - std::sqrt(s.v[i])) / std::pow(a, 1.5));
  }
  const double n = double(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i], sy += ys[i], sxx += xs[i] * xs[i], sxy += xs[i] * ys[i];
  }
  const double det = n * sxx - sx * sx;
  const double c1 = (n * sxy - sx * sy) / det;
  const double c0 = (sy - c1 * sx) / n;
  double ss_res = 0, ss_tot = 0;
  const double ybar = sy / n;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = c0 + c1 * xs[i];
    ss_res += (ys[i] - f) * (ys[i] - f);
    ss_tot += (ys[i] - ybar) * (ys[i] - ybar);
  }
  SmallScaleFit fit;
  fit.supK_est = 4.0 * std::sqrt(pi) * c0;
  fit.window_lo = xs.front();
  fit.window_hi = xs.back();
  fit.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  fit.nodes = xs.size();
  return fit;
}

// Second differences of I^2 + kappa0 a^2, sense LessEqual.
inline ResidualReport support_concavity_check(const ProfileSamples& s, double kappa0, double tolerance = 0.0) {
  s.validate();
  std::vector<double> y(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) y[i] = s.v[i] + kappa0 * s.a[i] * s.a[i];
  return second_difference_check(s.a, y, s.t, 0.0, ConcavityMode::Weak, tolerance);
}

struct VariationTolerances {
  double first = 1e-4;
  double second = 1e-3;
  double gauss_bonnet = 1e-6;
};

// Identities for the unit-speed normal family of latitude circles at cylinder coordinate x0:
//   dL/de = int k, dA/de = L, d^2A/de^2 = int k, d^2L/de^2 = -int K ds, int k = 2 pi - int_cap K,
// with de = e^{psi/2} d theta. Left sides by fourth-order differences in theta, right sides
// from the series and quadrature.
struct VariationReport {
  ResidualReport first, second, gauss_bonnet;
  bool passed() const { return first.passed && second.passed && gauss_bonnet.passed; }
};

inline VariationReport variation_check(const RotSymSphereMetric& m, double x0, VariationTolerances tol = {},
                                      double step = 2e-3) {
  const double th = 2.0 * std::atan(std::exp(m.kappa() * x0));
  if (!(th > 10.0 * step && th < pi - 10.0 * step)) throw DomainError("variation_check: latitude at chart boundary");
  const SphereSeries S(m);
  auto d1 = [&](auto f) {
    return (-f(th + 2 * step) + 8 * f(th + step) - 8 * f(th - step) + f(th - 2 * step)) / (12 * step);
  };
  auto d2 = [&](auto f) {
    return (-f(th + 2 * step) + 16 * f(th + step) - 30 * f(th) + 16 * f(th - step) - f(th - 2 * step)) /
           (12 * step * step);
  };
  auto A = [&](double x) { return S.area(x); };
  auto L = [&](double x) { return S.length(x); };
  const double e = std::exp(-0.5 * S.psi(th));  // d theta / d epsilon
  const double p1 = S.dpsi(th);
  // d^2 f / de^2 = e^{-psi} (f'' - psi' f' / 2)
  auto second_eps = [&](double f1, double f2) { return e * e * (f2 - 0.5 * p1 * f1); };

  const double Lth = L(th);
  const double int_k = S.geodesic_curvature(th) * Lth;
  const double int_Kds = S.curvature(th) * Lth;

  // int_cap K dmu = 2 pi int_0^th K e^psi sin: composite 5-point Gauss-Legendre.
  static const double gx[5] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                               0.9061798459386640};
  static const double gw[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889, 0.4786286704993665,
                               0.2369268850561891};
  const int panels = 64;
  double capK = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double a = th * p / panels, b = th * (p + 1) / panels;
    for (int q = 0; q < 5; ++q) {
      const double x = 0.5 * (a + b) + 0.5 * (b - a) * gx[q];
      capK += 0.5 * (b - a) * gw[q] * S.curvature(x) * std::exp(S.psi(x)) * std::sin(x);
    }
  }
  capK *= 2.0 * pi;

  const double A1 = d1(A), A2 = d2(A), L1 = d1(L), L2 = d2(L);
  const GridPoint p{x0, 0.0};
  VariationReport out;
  out.first = make_report({p, p}, {e * L1 - int_k, e * A1 - Lth}, tol.first, Sense::Equality,
                          {"dL/de - int k", "dA/de - L"});
  out.second = make_report({p, p}, {second_eps(A1, A2) - int_k, second_eps(L1, L2) + int_Kds}, tol.second,
                           Sense::Equality, {"d2A/de2 - int k", "d2L/de2 + int K ds"});
  out.gauss_bonnet = make_report({p}, {int_k - (2.0 * pi - capK)}, tol.gauss_bonnet, Sense::Equality,
                                 {"int k - (2 pi - int_cap K)"});
  return out;
}

inline void write_profile_csv(std::ostream& os, const ProfileSamples& s) {
  os << "a,I\n";
  for (std::size_t i = 0; i < s.size(); ++i) os << fmt17(s.a[i]) << ',' << fmt17(std::sqrt(s.v[i])) << '\n';
}

inline void write_fit_csv(std::ostream& os, const SmallScaleFit& f) {
  os << "supK_est,window_lo,window_hi,r2\n"
     << fmt17(f.supK_est) << ',' << fmt17(f.window_lo) << ',' << fmt17(f.window_hi) << ',' << fmt17(f.r2) << '\n';
}

}  // namespace isoricci
