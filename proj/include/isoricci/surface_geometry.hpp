#pragma once

// Metric families used by the flow and profile harnesses.
//
// Sphere: rotationally symmetric metrics g = e^psi g_round, stored as psi on a
// cell-centred colatitude grid theta_i = (i + 1/2) pi / n. The same metric on
// the cylinder chart R x (R / P Z) is u (dx^2 + dy^2) with
//   x = (1/kappa) ln tan(theta/2),  u = kappa^2 e^psi sin^2 theta,  kappa = 2 pi / P,
// so sech(kappa x) = sin theta. Working in theta keeps the poles (x = +-inf)
// on the grid with bounded coefficients.
//
// Torus: g = e^{2w} g_flat on an n x n periodic grid with periods (L1, L2).

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <mutex>
#include <ostream>
#include <string>
#include <vector>

#include "isoricci/core.hpp"
#include "isoricci/model_profiles.hpp"

namespace isoricci {

enum class CurvatureMethod { FiniteVolume, FiniteDifference4, Spectral };

inline const char* to_string(CurvatureMethod m) {
  switch (m) {
    case CurvatureMethod::FiniteVolume: return "finite-volume";
    case CurvatureMethod::FiniteDifference4: return "fd4";
    case CurvatureMethod::Spectral: return "spectral";
  }
  return "?";
}

// u ~ coef * exp(-rate |x|) beyond the last grid point on either side.
struct TailModel {
  double coef_minus = 0.0;
  double coef_plus = 0.0;
  double rate = 0.0;
};

// ---- sphere ------------------------------------------------------------------------

struct RotSymSphereMetric {
  std::vector<double> psi;  // ln(u / u_round) per cell
  double P = four_pi;       // circumferential period of the cylinder chart

  std::size_t n() const { return psi.size(); }
  double h() const { return pi / double(psi.size()); }
  double kappa() const { return 2.0 * pi / P; }
  double theta(std::size_t i) const { return (double(i) + 0.5) * h(); }
  double x(std::size_t i) const { return std::log(std::tan(0.5 * theta(i))) / kappa(); }
  double u(std::size_t i) const {
    const double s = std::sin(theta(i));
    return kappa() * kappa() * std::exp(psi[i]) * s * s;
  }

  std::vector<double> x_grid() const {
    std::vector<double> out(n());
    for (std::size_t i = 0; i < n(); ++i) out[i] = x(i);
    return out;
  }
  std::vector<double> u_values() const {
    std::vector<double> out(n());
    for (std::size_t i = 0; i < n(); ++i) out[i] = u(i);
    return out;
  }

  // Near the poles sin theta ~ 2 e^{-kappa |x|}.
  TailModel decay_model() const {
    const double k2 = kappa() * kappa();
    return {4.0 * k2 * std::exp(psi.front()), 4.0 * k2 * std::exp(psi.back()), 2.0 * kappa()};
  }

  void validate() const {
    if (psi.size() < 8) throw GridError("RotSymSphereMetric: need at least 8 cells");
    if (!(P > 0.0)) throw ParameterError("RotSymSphereMetric: period must be positive");
    for (double p : psi)
      if (!std::isfinite(p)) throw DomainError("RotSymSphereMetric: non-finite conformal factor");
  }
};

// Exact cell integrals of sin theta.
inline std::vector<double> sphere_cell_weights(std::size_t n) {
  std::vector<double> w(n);
  const double h = pi / double(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = std::cos(double(i) * h) - std::cos(double(i + 1) * h);
  return w;
}

inline double total_area(const RotSymSphereMetric& m) {
  const auto w = sphere_cell_weights(m.n());
  double a = 0.0;
  for (std::size_t i = 0; i < m.n(); ++i) a += w[i] * std::exp(m.psi[i]);
  return 2.0 * pi * a;
}

inline RotSymSphereMetric normalize_area(RotSymSphereMetric m) {
  const double a = total_area(m);
  if (!(a > 0.0) || !std::isfinite(a)) throw DomainError("normalize_area: nonpositive area");
  const double shift = std::log(four_pi / a);
  for (auto& p : m.psi) p += shift;
  return m;
}

inline RotSymSphereMetric round_sphere(std::size_t n, double P = four_pi) {
  RotSymSphereMetric m;
  m.psi.assign(n, 0.0);
  m.P = P;
  m.validate();
  return m;
}

// ln(u_rosenau / u_round) at colatitude theta, for the chart with P = 4 pi.
inline double rosenau_psi(double theta, double t) {
  const double s = rosenau_s(t);
  const double st = std::sin(theta), ct = std::cos(theta);
  const double sig = st * st / (1.0 + ct * ct);  // sech x
  return std::log(std::sinh(s) / s) + std::log((1.0 + sig) / (1.0 + std::cosh(s) * sig));
}

inline RotSymSphereMetric rosenau_metric(std::size_t n, double t) {
  RotSymSphereMetric m;
  m.P = four_pi;
  m.psi.resize(n);
  for (std::size_t i = 0; i < n; ++i) m.psi[i] = rosenau_psi(m.theta(i), t);
  m.validate();
  return m;
}

// Round sphere with psi = amp cos(mode theta), then normalized to area 4 pi.
inline RotSymSphereMetric perturbed_sphere(std::size_t n, double amp, int mode = 2, double P = four_pi) {
  RotSymSphereMetric m;
  m.P = P;
  m.psi.resize(n);
  for (std::size_t i = 0; i < n; ++i) m.psi[i] = amp * std::cos(mode * m.theta(i));
  m.validate();
  return normalize_area(m);
}

// Builds psi from cylinder-chart samples u(x_i) at the cell centres of an n-cell grid.
inline RotSymSphereMetric sphere_from_cylinder(std::size_t n, double P, const std::function<double(double)>& u) {
  RotSymSphereMetric m;
  m.P = P;
  m.psi.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = u(m.x(i));
    if (!(v > 0.0)) throw DomainError("sphere_from_cylinder: nonpositive conformal factor");
    const double s = std::sin(m.theta(i));
    m.psi[i] = std::log(v / (m.kappa() * m.kappa() * s * s));
  }
  m.validate();
  return m;
}

// Round-sphere Laplacian of psi, conservative form with zero flux through the poles.
inline std::vector<double> sphere_laplacian_fv(const std::vector<double>& psi) {
  const std::size_t n = psi.size();
  const double h = pi / double(n);
  const auto w = sphere_cell_weights(n);
  std::vector<double> out(n), flux(n + 1, 0.0);
  for (std::size_t i = 1; i < n; ++i) flux[i] = std::sin(double(i) * h) * (psi[i] - psi[i - 1]) / h;
  for (std::size_t i = 0; i < n; ++i) out[i] = (flux[i + 1] - flux[i]) / w[i];
  return out;
}

namespace detail {

// psi extended evenly through both poles (psi is a smooth function of cos theta).
inline double even_ext(const std::vector<double>& p, long i) {
  const long n = static_cast<long>(p.size());
  if (i < 0) return p[static_cast<std::size_t>(-i - 1)];
  if (i >= n) return p[static_cast<std::size_t>(2 * n - 1 - i)];
  return p[static_cast<std::size_t>(i)];
}

}  // namespace detail

struct ThetaDerivatives {
  std::vector<double> d1, d2;
};

inline ThetaDerivatives theta_derivatives_fd4(const std::vector<double>& psi) {
  const long n = static_cast<long>(psi.size());
  const double h = pi / double(n);
  ThetaDerivatives d{std::vector<double>(n), std::vector<double>(n)};
  for (long i = 0; i < n; ++i) {
    const double m2 = detail::even_ext(psi, i - 2), m1 = detail::even_ext(psi, i - 1);
    const double p1 = detail::even_ext(psi, i + 1), p2 = detail::even_ext(psi, i + 2);
    d.d1[i] = (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * h);
    d.d2[i] = (-p2 + 16.0 * p1 - 30.0 * psi[i] + 16.0 * m1 - m2) / (12.0 * h * h);
  }
  return d;
}

namespace detail {

// FFTW planning is not thread safe; execution is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

inline std::vector<double> r2r(std::vector<double> in, fftw_r2r_kind kind) {
  const int n = static_cast<int>(in.size());
  std::vector<double> out(in.size());
  fftw_plan p;
  {
    std::lock_guard lock(fftw_planner_mutex());
    p = fftw_plan_r2r_1d(n, in.data(), out.data(), kind, FFTW_ESTIMATE);
  }
  fftw_execute(p);
  std::lock_guard lock(fftw_planner_mutex());
  fftw_destroy_plan(p);
  return out;
}

}  // namespace detail

// Cosine series psi = sum_k a_k cos(k theta) from cell-centred samples (DCT-II).
inline std::vector<double> cosine_coefficients(const std::vector<double>& psi) {
  const double n = double(psi.size());
  auto a = detail::r2r(psi, FFTW_REDFT10);
  a[0] /= 2.0 * n;
  for (std::size_t k = 1; k < a.size(); ++k) a[k] /= n;
  return a;
}

// Derivatives of the cosine series at the cell centres (DCT-III and DST-III).
inline ThetaDerivatives theta_derivatives_spectral(const std::vector<double>& psi) {
  const std::size_t n = psi.size();
  const auto a = cosine_coefficients(psi);
  std::vector<double> c2(n, 0.0), s1(n, 0.0);
  for (std::size_t k = 1; k < n; ++k) {
    const double kk = double(k);
    c2[k] = -0.5 * kk * kk * a[k];  // coefficient of cos(k theta)
    s1[k - 1] = -0.5 * kk * a[k];   // coefficient of sin(k theta)
  }
  return {detail::r2r(s1, FFTW_RODFT01), detail::r2r(c2, FFTW_REDFT01)};
}

inline std::vector<double> sphere_laplacian(const std::vector<double>& psi, CurvatureMethod m) {
  if (m == CurvatureMethod::FiniteVolume) return sphere_laplacian_fv(psi);
  const auto d = m == CurvatureMethod::Spectral ? theta_derivatives_spectral(psi) : theta_derivatives_fd4(psi);
  const double h = pi / double(psi.size());
  std::vector<double> out(psi.size());
  for (std::size_t i = 0; i < psi.size(); ++i) {
    const double th = (double(i) + 0.5) * h;
    out[i] = d.d2[i] + d.d1[i] / std::tan(th);
  }
  return out;
}

// K = e^{-psi} (1 - Delta_round psi / 2).
inline std::vector<double> gauss_curvature(const RotSymSphereMetric& m,
                                           CurvatureMethod method = CurvatureMethod::FiniteVolume) {
  const auto lap = sphere_laplacian(m.psi, method);
  std::vector<double> K(m.n());
  for (std::size_t i = 0; i < m.n(); ++i) K[i] = std::exp(-m.psi[i]) * (1.0 - 0.5 * lap[i]);
  return K;
}

// Area element per cell.
inline std::vector<double> area_weights(const RotSymSphereMetric& m) {
  auto w = sphere_cell_weights(m.n());
  for (std::size_t i = 0; i < m.n(); ++i) w[i] *= 2.0 * pi * std::exp(m.psi[i]);
  return w;
}

inline double integrate_field(const RotSymSphereMetric& m, const std::vector<double>& f) {
  const auto w = area_weights(m);
  double s = 0.0;
  for (std::size_t i = 0; i < m.n(); ++i) s += w[i] * f[i];
  return s;
}

inline ResidualReport gauss_bonnet_check(const RotSymSphereMetric& m, double tolerance = 1e-8,
                                         CurvatureMethod method = CurvatureMethod::FiniteVolume) {
  const double integral = integrate_field(m, gauss_curvature(m, method));
  return make_report({{0.0, 0.0}}, {integral - 4.0 * pi}, tolerance, Sense::Equality, {"int K - 2 pi chi"});
}

// ---- raw cylinder-chart samples -------------------------------------------------------

// K = -(ln u)_xx / (2u) on a uniform x grid, fourth order inside and
// second-order one-sided at the two end nodes on each side.
inline std::vector<double> cylinder_curvature(const std::vector<double>& x, const std::vector<double>& u) {
  const std::size_t n = x.size();
  if (n < 6 || u.size() != n) throw GridError("cylinder_curvature: need >= 6 matching samples");
  const double h = (x.back() - x.front()) / double(n - 1);
  std::vector<double> L(n), K(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(u[i] > 0.0)) throw DomainError("cylinder_curvature: nonpositive conformal factor");
    L[i] = std::log(u[i]);
  }
  const double ih2 = 1.0 / (h * h);
  for (std::size_t i = 0; i < n; ++i) {
    double d2;
    if (i >= 2 && i + 2 < n)
      d2 = (-L[i + 2] + 16 * L[i + 1] - 30 * L[i] + 16 * L[i - 1] - L[i - 2]) * ih2 / 12.0;
    else if (i < 2)
      d2 = (2 * L[i] - 5 * L[i + 1] + 4 * L[i + 2] - L[i + 3]) * ih2;
    else
      d2 = (2 * L[i] - 5 * L[i - 1] + 4 * L[i - 2] - L[i - 3]) * ih2;
    K[i] = -d2 / (2.0 * u[i]);
  }
  return K;
}

// Trapezoid on a uniform x grid plus exponential tails fitted to the last two samples.
inline double cylinder_area(const std::vector<double>& x, const std::vector<double>& u, double P) {
  const std::size_t n = x.size();
  if (n < 3 || u.size() != n) throw GridError("cylinder_area: need >= 3 matching samples");
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (!(u[i] > 0.0)) throw DomainError("cylinder_area: nonpositive conformal factor");
    s += 0.5 * (u[i] + u[i + 1]) * (x[i + 1] - x[i]);
  }
  auto tail = [](double u_edge, double u_in, double dx) {
    const double rate = std::log(u_in / u_edge) / dx;
    return rate > 0.0 ? u_edge / rate : 0.0;
  };
  s += tail(u[0], u[1], x[1] - x[0]) + tail(u[n - 1], u[n - 2], x[n - 1] - x[n - 2]);
  return P * s;
}

// ---- torus -------------------------------------------------------------------------------

struct ConformalTorusMetric {
  std::size_t n = 0;
  double L1 = 0.0, L2 = 0.0;
  std::vector<double> w;  // row-major, w[i * n + j] at (x_i, y_j)

  double h1() const { return L1 / double(n); }
  double h2() const { return L2 / double(n); }
  double cell_area() const { return h1() * h2(); }
  double background_area() const { return L1 * L2; }
  double& at(std::size_t i, std::size_t j) { return w[i * n + j]; }
  double at(std::size_t i, std::size_t j) const { return w[i * n + j]; }

  void validate() const {
    if (n < 4 || w.size() != n * n) throw GridError("ConformalTorusMetric: malformed grid");
    if (!(L1 > 0.0) || !(L2 > 0.0)) throw ParameterError("ConformalTorusMetric: periods must be positive");
    for (double x : w)
      if (!std::isfinite(x)) throw DomainError("ConformalTorusMetric: non-finite conformal factor");
  }
};

inline double total_area(const ConformalTorusMetric& m) {
  double s = 0.0;
  for (double x : m.w) s += std::exp(2.0 * x);
  return s * m.cell_area();
}

inline ConformalTorusMetric normalize_area(ConformalTorusMetric m) {
  const double a = total_area(m);
  if (!(a > 0.0) || !std::isfinite(a)) throw DomainError("normalize_area: nonpositive area");
  const double shift = 0.5 * std::log(four_pi / a);
  for (auto& x : m.w) x += shift;
  return m;
}

// Square flat torus of area 4 pi.
inline ConformalTorusMetric flat_torus(std::size_t n) {
  ConformalTorusMetric m;
  m.n = n;
  m.L1 = m.L2 = std::sqrt(four_pi);
  m.w.assign(n * n, 0.0);
  m.validate();
  return m;
}

// w = amp sin(2 pi x / L) sin(2 pi y / L), normalized to area 4 pi.
inline ConformalTorusMetric sinusoidal_torus(std::size_t n, double amp) {
  auto m = flat_torus(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      m.at(i, j) = amp * std::sin(2.0 * pi * i / double(n)) * std::sin(2.0 * pi * j / double(n));
  return normalize_area(m);
}

// Spectral Laplacian on an n x n periodic grid; FFTW plans are created once.
class TorusSpectralLaplacian {
 public:
  TorusSpectralLaplacian(std::size_t n, double L1, double L2) : n_(n), nc_(n / 2 + 1) {
    std::lock_guard lock(detail::fftw_planner_mutex());
    real_ = fftw_alloc_real(n * n);
    spec_ = fftw_alloc_complex(n * nc_);
    fwd_ = fftw_plan_dft_r2c_2d(int(n), int(n), real_, spec_, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_c2r_2d(int(n), int(n), spec_, real_, FFTW_ESTIMATE);
    sym_.resize(n * nc_);
    for (std::size_t i = 0; i < n; ++i) {
      const double ki = 2.0 * pi / L1 * (i <= n / 2 ? double(i) : double(i) - double(n));
      for (std::size_t j = 0; j < nc_; ++j) {
        const double kj = 2.0 * pi / L2 * double(j);
        sym_[i * nc_ + j] = -(ki * ki + kj * kj) / double(n * n);
      }
    }
  }
  ~TorusSpectralLaplacian() {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
    fftw_free(real_);
    fftw_free(spec_);
  }
  TorusSpectralLaplacian(const TorusSpectralLaplacian&) = delete;
  TorusSpectralLaplacian& operator=(const TorusSpectralLaplacian&) = delete;

  void apply(const std::vector<double>& in, std::vector<double>& out) {
    std::copy(in.begin(), in.end(), real_);
    fftw_execute(fwd_);
    for (std::size_t k = 0; k < n_ * nc_; ++k) {
      spec_[k][0] *= sym_[k];
      spec_[k][1] *= sym_[k];
    }
    fftw_execute(bwd_);
    out.assign(real_, real_ + n_ * n_);
  }

 private:
  std::size_t n_, nc_;
  double* real_ = nullptr;
  fftw_complex* spec_ = nullptr;
  fftw_plan fwd_{}, bwd_{};
  std::vector<double> sym_;
};

inline std::vector<double> torus_laplacian_fd4(const ConformalTorusMetric& m, const std::vector<double>& f) {
  const long n = static_cast<long>(m.n);
  auto idx = [n](long i, long j) { return static_cast<std::size_t>(((i + n) % n) * n + (j + n) % n); };
  const double a = 1.0 / (12.0 * m.h1() * m.h1()), b = 1.0 / (12.0 * m.h2() * m.h2());
  std::vector<double> out(f.size());
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j) {
      const double c = f[idx(i, j)];
      const double dxx = -f[idx(i + 2, j)] + 16 * f[idx(i + 1, j)] - 30 * c + 16 * f[idx(i - 1, j)] - f[idx(i - 2, j)];
      const double dyy = -f[idx(i, j + 2)] + 16 * f[idx(i, j + 1)] - 30 * c + 16 * f[idx(i, j - 1)] - f[idx(i, j - 2)];
      out[idx(i, j)] = a * dxx + b * dyy;
    }
  return out;
}

inline std::vector<double> torus_laplacian(const ConformalTorusMetric& m, CurvatureMethod method) {
  if (method == CurvatureMethod::Spectral) {
    TorusSpectralLaplacian lap(m.n, m.L1, m.L2);
    std::vector<double> out;
    lap.apply(m.w, out);
    return out;
  }
  return torus_laplacian_fd4(m, m.w);
}

// K = -e^{-2w} Delta_flat w.
inline std::vector<double> gauss_curvature(const ConformalTorusMetric& m,
                                           CurvatureMethod method = CurvatureMethod::Spectral) {
  auto lap = torus_laplacian(m, method);
  for (std::size_t k = 0; k < lap.size(); ++k) lap[k] = -std::exp(-2.0 * m.w[k]) * lap[k];
  return lap;
}

inline double integrate_field(const ConformalTorusMetric& m, const std::vector<double>& f) {
  double s = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) s += std::exp(2.0 * m.w[k]) * f[k];
  return s * m.cell_area();
}

inline ResidualReport gauss_bonnet_check(const ConformalTorusMetric& m, double tolerance = 1e-8,
                                         CurvatureMethod method = CurvatureMethod::Spectral) {
  const double integral = integrate_field(m, gauss_curvature(m, method));
  return make_report({{0.0, 0.0}}, {integral}, tolerance, Sense::Equality, {"int K - 2 pi chi"});
}

// ---- geodesic balls ------------------------------------------------------------------------

struct BallExpansion {
  double area = 0.0;
  double perimeter = 0.0;
};

// Truncated small-ball expansions at a point of curvature K.
inline BallExpansion geodesic_ball_expansion(double K, double r, double r_max) {
  if (!(r > 0.0)) throw DomainError("geodesic_ball_expansion: need r > 0");
  if (r > r_max) throw DomainError("geodesic_ball_expansion: radius beyond the injectivity scale");
  const double r2 = r * r;
  return {pi * r2 * (1.0 - K * r2 / 12.0), 2.0 * pi * r * (1.0 - K * r2 / 6.0)};
}

// Heuristic injectivity scale: pi / sqrt(sup K) for positive curvature,
// half the shortest period on the torus.
inline double injectivity_scale(double supK, double period = std::numeric_limits<double>::infinity()) {
  double s = 0.5 * period;
  if (supK > 0.0) s = std::min(s, pi / std::sqrt(supK));
  return s;
}

inline constexpr double ball_radius_fraction = 0.1;

inline BallExpansion geodesic_ball_expansion(const RotSymSphereMetric& m, std::size_t cell, double r) {
  const auto K = gauss_curvature(m);
  const double supK = *std::max_element(K.begin(), K.end());
  return geodesic_ball_expansion(K.at(cell), r, ball_radius_fraction * injectivity_scale(supK));
}

inline BallExpansion geodesic_ball_expansion(const ConformalTorusMetric& m, std::size_t i, std::size_t j,
                                             double r) {
  const auto K = gauss_curvature(m);
  const double supK = *std::max_element(K.begin(), K.end());
  double emin = std::numeric_limits<double>::infinity();
  for (double x : m.w) emin = std::min(emin, std::exp(x));
  // Shortest closed geodesic is at least the flat period times min e^w.
  const double period = std::min(m.L1, m.L2) * emin;
  return geodesic_ball_expansion(K.at(i * m.n + j), r, ball_radius_fraction * injectivity_scale(supK, period));
}

// ---- snapshots --------------------------------------------------------------------------

inline void write_csv(std::ostream& os, const RotSymSphereMetric& m) {
  os << "x,u\n";
  for (std::size_t i = 0; i < m.n(); ++i) os << fmt17(m.x(i)) << ',' << fmt17(m.u(i)) << '\n';
}

inline void write_csv(std::ostream& os, const ConformalTorusMetric& m) {
  os << "i,j,w\n";
  for (std::size_t i = 0; i < m.n; ++i)
    for (std::size_t j = 0; j < m.n; ++j) os << i << ',' << j << ',' << fmt17(m.at(i, j)) << '\n';
}

}  // namespace isoricci
