#pragma once

// Closed-form comparison functions for the squared isoperimetric profile
// v = phi^2 under normalized Ricci flow, with analytic derivatives.
//
// All families are written against the squared-profile operator
//   L[v] = v v'' - (v')^2 + (4 pi chi0 - 2(1-g) a) v' + 2(1-g) v
// and a comparison function must satisfy v_t <= L[v].

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "isoricci/core.hpp"

namespace isoricci {

enum class ModelFamily { ConstantCurvature, Rosenau, Genus1, HyperbolicQuadratic, HyperbolicGeneral };

inline const char* to_string(ModelFamily f) {
  switch (f) {
    case ModelFamily::ConstantCurvature: return "ConstantCurvature";
    case ModelFamily::Rosenau: return "Rosenau";
    case ModelFamily::Genus1: return "Genus1";
    case ModelFamily::HyperbolicQuadratic: return "HyperbolicQuadratic";
    case ModelFamily::HyperbolicGeneral: return "HyperbolicGeneral";
  }
  return "?";
}

// Rate k of the coefficient equation b' = -k (b^2 + (1-g) b) in the general
// hyperbolic family. Rate 2 is the one that balances the x^2 terms of the
// residual; rate 4 is kept for comparison and does not give a sub-solution.
enum class BernoulliRate { Corrected = 2, Printed = 4 };

struct ModelEval {
  double value = 0.0;  // v
  double d1 = 0.0;     // dv/da
  double d2 = 0.0;     // d2v/da2
  double dt = 0.0;     // dv/dt
};

struct ModelSpec {
  ModelFamily family = ModelFamily::ConstantCurvature;
  int genus = 0;
  double t0 = 0.0;       // Rosenau time shift
  double C = 0.0;        // Genus1 constant
  double t_start = 0.0;  // Genus1 internal time at model time 0
  double B0 = 0.0;       // HyperbolicQuadratic initial coefficient
  double C0 = 0.0;       // HyperbolicGeneral initial stationary constant
  double b0 = 0.0;       // HyperbolicGeneral initial quadratic coefficient
  BernoulliRate rate = BernoulliRate::Corrected;

  double kappa() const { return 1.0 - genus; }
  bool compact() const { return genus == 0; }
  // Total area for compact families, +inf otherwise.
  double area_extent() const { return compact() ? four_pi : std::numeric_limits<double>::infinity(); }
  std::string param_json() const;
};

// ---- elementary helpers ---------------------------------------------------

namespace detail {

// z coth z - 1, accurate for small z.
inline double zcoth_m1(double z) {
  const double z2 = z * z;
  if (std::abs(z) < 0.1)
    return z2 * (1.0 / 3.0 + z2 * (-1.0 / 45.0 + z2 * (2.0 / 945.0 + z2 * (-1.0 / 4725.0))));
  return z / std::tanh(z) - 1.0;
}

inline void require(bool ok, const char* msg) {
  if (!ok) throw ParameterError(msg);
}

}  // namespace detail

inline double constant_curvature_profile(double a, double kappa) {
  if (!(a > 0.0)) throw DomainError("constant_curvature_profile: need a > 0");
  const double r = four_pi * a - kappa * a * a;
  if (r < 0.0) throw DomainError("constant_curvature_profile: negative radicand");
  return std::sqrt(r);
}

// ---- Rosenau ----------------------------------------------------------------

inline double rosenau_s(double t) { return std::exp(-2.0 * t); }

// Conformal factor of the Rosenau solution on the cylinder R x (R / 4 pi Z).
inline double rosenau_conformal_factor(double x, double t) {
  const double s = rosenau_s(t);
  // cosh x may overflow for |x| > 700; use the exponential form there.
  const double ax = std::abs(x);
  if (ax > 30.0) {
    const double eh = std::exp(-ax);
    return std::sinh(s) / s * eh / (1.0 + eh * (2.0 * std::cosh(s) + eh));
  }
  return std::sinh(s) / (2.0 * s * (std::cosh(x) + std::cosh(s)));
}

// Squared profile in absolute area a in (0, 4 pi) at Rosenau time t.
inline ModelEval rosenau_eval_abs(double a, double t) {
  if (!(a > 0.0 && a < four_pi)) throw DomainError("rosenau: area outside (0, 4pi)");
  const double s = rosenau_s(t);
  const double al = a / four_pi;
  const double be = 1.0 - 2.0 * al;
  const double shs = std::sinh(s);
  ModelEval e;
  e.value = 16.0 * pi * pi * std::sinh(al * s) * std::sinh((1.0 - al) * s) / (s * shs);
  e.d1 = four_pi * std::sinh(be * s) / shs;
  e.d2 = -2.0 * s * std::cosh(be * s) / shs;
  e.dt = -2.0 * e.value *
         (detail::zcoth_m1(al * s) + detail::zcoth_m1((1.0 - al) * s) - detail::zcoth_m1(s));
  return e;
}

// Isoperimetric profile of the Rosenau metric at area fraction a_frac.
inline double rosenau_profile(double a_frac, double t) {
  if (!(a_frac > 0.0 && a_frac < 1.0)) throw DomainError("rosenau_profile: a_frac outside (0,1)");
  return std::sqrt(rosenau_eval_abs(a_frac * four_pi, t).value);
}

// Pole curvature = sup K = small-area coefficient of the Rosenau profile.
inline double rosenau_sup_curvature(double t) {
  const double s = rosenau_s(t);
  return 1.0 + detail::zcoth_m1(s);
}

// ---- genus 1 ----------------------------------------------------------------

inline ModelEval genus1_model(double a, double t, double C) {
  if (!(t > 0.0)) throw DomainError("genus1_model: need t > 0");
  if (!(a > 0.0)) throw DomainError("genus1_model: need a > 0");
  if (!(C > 1.0 / four_pi)) throw ParameterError("genus1_model: need C > 1/(4pi)");
  const double D = four_pi - 1.0 / C;
  const double E = std::exp(-C * a / t);
  const double om = -std::expm1(-C * a / t);  // 1 - E
  ModelEval e;
  e.value = a / C + (t / C) * D * om;
  e.d1 = 1.0 / C + D * E;
  e.d2 = -(C / t) * D * E;
  e.dt = (D / C) * om - D * E * a / t;
  return e;
}

// ---- hyperbolic families ----------------------------------------------------

struct CriticalConstants {
  double C_crit = 0.0;
  double b_crit = 0.0;
};

inline double critical_C(int genus) {
  detail::require(genus >= 2, "critical constants need genus >= 2");
  return (genus - 1.0) / (2.0 * pi);
}

inline CriticalConstants critical_constants(int genus, double C) {
  const double cc = critical_C(genus);
  if (!(C > cc)) throw ParameterError("critical_constants: need C > C_crit");
  const double q = 1.0 - genus;
  return {cc, q * q / (four_pi * C + 2.0 * q)};
}

// Solution of B' = -2B(B + (1-g)), B(0) = B0.
inline double quadratic_B(double t, int genus, double B0) {
  if (B0 == 0.0) return 0.0;
  const double gm = genus - 1.0;
  return gm / (1.0 + (gm / B0 - 1.0) * std::exp(-2.0 * gm * t));
}

inline ModelEval hyperbolic_quadratic_model(double a, double t, int genus, double B0) {
  detail::require(genus >= 2, "hyperbolic_quadratic_model: need genus >= 2");
  detail::require(B0 >= 0.0 && B0 < genus - 1.0, "hyperbolic_quadratic_model: need 0 <= B0 < g-1");
  if (!(a > 0.0)) throw DomainError("hyperbolic_quadratic_model: need a > 0");
  const double q = 1.0 - genus;
  const double B = quadratic_B(t, genus, B0);
  ModelEval e;
  e.value = four_pi * a + B * a * a;
  e.d1 = four_pi + 2.0 * B * a;
  e.d2 = 2.0 * B;
  e.dt = -2.0 * B * (B + q) * a * a;
  return e;
}

inline ModelEval hyperbolic_stationary(double x, double C, int genus) {
  detail::require(genus >= 2, "hyperbolic_stationary: need genus >= 2");
  if (!(C >= critical_C(genus)) || !(C > 0.0)) throw ParameterError("hyperbolic_stationary: need C >= C_crit");
  if (!(x >= 0.0)) throw DomainError("hyperbolic_stationary: need x >= 0");
  const double q = 1.0 - genus;
  const double D = four_pi + 2.0 * q / C;
  const double E = std::exp(-C * x);
  ModelEval e;
  e.value = (D / C) * (-std::expm1(-C * x)) - 2.0 * q * x / C;
  e.d1 = D * E - 2.0 * q / C;
  e.d2 = -C * D * E;
  e.dt = 0.0;
  return e;
}

// d v_C / d C at fixed x.
inline double hyperbolic_stationary_dC(double x, double C, int genus) {
  const double q = 1.0 - genus;
  const double D = four_pi + 2.0 * q / C;
  const double E = std::exp(-C * x);
  return (-four_pi / (C * C) - 4.0 * q / (C * C * C)) * (-std::expm1(-C * x)) + (D / C) * x * E +
         2.0 * q * x / (C * C);
}

// f = sqrt(v_C + b x^2); concave whenever 0 <= b <= b_crit(C).
inline double hyperbolic_f(double x, double C, double b, int genus) {
  return std::sqrt(hyperbolic_stationary(x, C, genus).value + b * x * x);
}

// b' = -k (b^2 + (1-g) b), b(0) = b0.
inline double general_b(double t, int genus, double b0, BernoulliRate rate = BernoulliRate::Corrected) {
  const double q = 1.0 - genus;
  const double k = static_cast<double>(static_cast<int>(rate));
  return 1.0 / ((1.0 / b0 + 1.0 / q) * std::exp(k * q * t) - 1.0 / q);
}

inline double general_b_rate(double b, int genus, BernoulliRate rate = BernoulliRate::Corrected) {
  const double k = static_cast<double>(static_cast<int>(rate));
  return -k * (b * b + (1.0 - genus) * b);
}

// C(t) - C_crit, computed without cancellation; C(0) = C0 and d/dt ln(C - C_crit) = -2 b(t).
inline double general_C_excess(double t, int genus, double C0, double b0,
                               BernoulliRate rate = BernoulliRate::Corrected) {
  const double q = 1.0 - genus;
  const double k = static_cast<double>(static_cast<int>(rate));
  const double b = general_b(t, genus, b0, rate);
  return (C0 - critical_C(genus)) * std::pow(b / b0, 2.0 / k) * std::exp(2.0 * q * t);
}

inline double general_C(double t, int genus, double C0, double b0, BernoulliRate rate = BernoulliRate::Corrected) {
  return general_C_excess(t, genus, C0, b0, rate) + critical_C(genus);
}

inline void check_general_params(int genus, double C0, double b0) {
  detail::require(genus >= 2, "hyperbolic_general_model: need genus >= 2");
  const auto cc = critical_constants(genus, C0);
  detail::require(b0 > 0.0 && b0 < std::min(cc.b_crit, genus - 1.0),
                  "hyperbolic_general_model: need 0 < b0 < min(b_crit(C0), g-1)");
}

inline ModelEval hyperbolic_general_model(double x, double t, int genus, double C0, double b0,
                                          BernoulliRate rate = BernoulliRate::Corrected) {
  check_general_params(genus, C0, b0);
  if (!(x > 0.0)) throw DomainError("hyperbolic_general_model: need x > 0");
  if (!(t >= 0.0)) throw DomainError("hyperbolic_general_model: need t >= 0");
  const double b = general_b(t, genus, b0, rate);
  const double C = general_C(t, genus, C0, b0, rate);
  const double Cd = -2.0 * b * general_C_excess(t, genus, C0, b0, rate);
  const ModelEval st = hyperbolic_stationary(x, C, genus);
  ModelEval e;
  e.value = st.value + b * x * x;
  e.d1 = st.d1 + 2.0 * b * x;
  e.d2 = st.d2 + 2.0 * b;
  e.dt = Cd * hyperbolic_stationary_dC(x, C, genus) + general_b_rate(b, genus, rate) * x * x;
  return e;
}

// ---- ModelSpec factories ------------------------------------------------------

inline ModelSpec constant_curvature_model(int genus) {
  detail::require(genus >= 0, "constant curvature: need genus >= 0");
  ModelSpec m;
  m.family = ModelFamily::ConstantCurvature;
  m.genus = genus;
  return m;
}

inline ModelSpec rosenau_model(double t0) {
  detail::require(t0 >= 0.0 && std::isfinite(t0), "rosenau model: need t0 >= 0");
  ModelSpec m;
  m.family = ModelFamily::Rosenau;
  m.genus = 0;
  m.t0 = t0;
  return m;
}

inline ModelSpec genus1_spec(double C, double t_start = 0.0) {
  detail::require(C > 1.0 / four_pi, "genus1 model: need C > 1/(4pi)");
  detail::require(t_start >= 0.0, "genus1 model: need t_start >= 0");
  ModelSpec m;
  m.family = ModelFamily::Genus1;
  m.genus = 1;
  m.C = C;
  m.t_start = t_start;
  return m;
}

inline ModelSpec hyperbolic_quadratic_spec(int genus, double B0) {
  detail::require(genus >= 2, "hyperbolic quadratic: need genus >= 2");
  detail::require(B0 >= 0.0 && B0 < genus - 1.0, "hyperbolic quadratic: need 0 <= B0 < g-1");
  ModelSpec m;
  m.family = ModelFamily::HyperbolicQuadratic;
  m.genus = genus;
  m.B0 = B0;
  return m;
}

inline ModelSpec hyperbolic_general_spec(int genus, double C0, double b0,
                                         BernoulliRate rate = BernoulliRate::Corrected) {
  check_general_params(genus, C0, b0);
  ModelSpec m;
  m.family = ModelFamily::HyperbolicGeneral;
  m.genus = genus;
  m.C0 = C0;
  m.b0 = b0;
  m.rate = rate;
  return m;
}

inline std::string ModelSpec::param_json() const {
  auto num = fmt17;
  switch (family) {
    case ModelFamily::ConstantCurvature: return "{\"kappa\":" + num(kappa()) + "}";
    case ModelFamily::Rosenau: return "{\"t0\":" + num(t0) + "}";
    case ModelFamily::Genus1: return "{\"C\":" + num(C) + ",\"t_start\":" + num(t_start) + "}";
    case ModelFamily::HyperbolicQuadratic: return "{\"B0\":" + num(B0) + "}";
    case ModelFamily::HyperbolicGeneral:
      return "{\"C0\":" + num(C0) + ",\"b0\":" + num(b0) +
             ",\"rate\":" + std::to_string(static_cast<int>(rate)) + "}";
  }
  return "{}";
}

// ---- evaluation -------------------------------------------------------------

inline ModelEval evaluate(const ModelSpec& m, double a, double t) {
  switch (m.family) {
    case ModelFamily::ConstantCurvature: {
      const double k = m.kappa();
      if (!(a > 0.0)) throw DomainError("constant curvature: need a > 0");
      if (k > 0.0 && !(a < four_pi / k)) throw DomainError("constant curvature: area beyond total area");
      return {four_pi * a - k * a * a, four_pi - 2.0 * k * a, -2.0 * k, 0.0};
    }
    case ModelFamily::Rosenau: return rosenau_eval_abs(a, t - m.t0);
    case ModelFamily::Genus1: return genus1_model(a, t + m.t_start, m.C);
    case ModelFamily::HyperbolicQuadratic: return hyperbolic_quadratic_model(a, t, m.genus, m.B0);
    case ModelFamily::HyperbolicGeneral: return hyperbolic_general_model(a, t, m.genus, m.C0, m.b0, m.rate);
  }
  throw ParameterError("evaluate: unknown family");
}

inline double model_profile(const ModelSpec& m, double a, double t) {
  return std::sqrt(std::max(evaluate(m, a, t).value, 0.0));
}

// K0(t) in v = 4 pi a - K0 a^2 + O(a^3): an upper bound for sup K.
inline double curvature_bound_of_model(const ModelSpec& m, double t) {
  switch (m.family) {
    case ModelFamily::ConstantCurvature: return m.kappa();
    case ModelFamily::Rosenau: return rosenau_sup_curvature(t - m.t0);
    case ModelFamily::Genus1: {
      const double tt = t + m.t_start;
      if (!(tt > 0.0)) throw DomainError("curvature_bound_of_model: genus-1 bound undefined at t = 0");
      return (2.0 * pi * m.C - 0.5) / tt;
    }
    case ModelFamily::HyperbolicQuadratic: return -quadratic_B(t, m.genus, m.B0);
    case ModelFamily::HyperbolicGeneral:
      return 2.0 * pi * general_C(t, m.genus, m.C0, m.b0, m.rate) + m.kappa() -
             general_b(t, m.genus, m.b0, m.rate);
  }
  throw ParameterError("curvature_bound_of_model: unknown family");
}

// ---- residuals ----------------------------------------------------------------

// v_t - L[v] in squared form.
inline double squared_residual(const ModelEval& e, double a, int genus, int chi0 = 1) {
  const double q = 1.0 - genus;
  return e.dt - (e.value * e.d2 - e.d1 * e.d1 + (four_pi * chi0 - 2.0 * q * a) * e.d1 + 2.0 * q * e.value);
}

// phi_t - [phi'' phi^2 - phi'^2 phi + phi' (4 pi chi0 - 2(1-g) a) + (1-g) phi]
inline double phi_residual(const ModelEval& e, double a, int genus, int chi0 = 1) {
  if (!(e.value > 0.0)) throw DomainError("phi_residual: need v > 0");
  const double q = 1.0 - genus;
  const double p = std::sqrt(e.value);
  const double p1 = e.d1 / (2.0 * p);
  const double p2 = e.d2 / (2.0 * p) - e.d1 * e.d1 / (4.0 * p * e.value);
  const double pt = e.dt / (2.0 * p);
  return pt - (p2 * p * p - p1 * p1 * p + p1 * (four_pi * chi0 - 2.0 * q * a) + q * p);
}

inline ResidualReport model_residual(const ModelSpec& m, const std::vector<GridPoint>& grid, int chi0 = 1,
                                     double tolerance = 1e-8) {
  std::vector<double> r(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto e = evaluate(m, grid[i].a, grid[i].t);
    r[i] = phi_residual(e, grid[i].a, m.genus, chi0) / std::max(1.0, std::abs(e.value));
  }
  return make_report(grid, std::move(r), tolerance, Sense::LessEqual);
}

// Residual of u = 1/v in u_t >= (ln u)'' + (4 pi chi0 - 2(1-g) a) u' - 2(1-g) u.
inline double porous_residual(const ModelEval& e, double a, int genus, int chi0 = 1) {
  if (!(e.value > 0.0)) throw DomainError("porous_media_residual: need phi > 0");
  const double q = 1.0 - genus;
  const double v = e.value;
  const double u = 1.0 / v;
  const double u1 = -e.d1 / (v * v);
  const double ut = -e.dt / (v * v);
  const double lnu2 = -(e.d2 / v - e.d1 * e.d1 / (v * v));
  return ut - (lnu2 + (four_pi * chi0 - 2.0 * q * a) * u1 - 2.0 * q * u);
}

inline ResidualReport porous_media_residual(const ModelSpec& m, const std::vector<GridPoint>& grid,
                                            int chi0 = 1, double tolerance = 1e-8) {
  std::vector<double> r(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i)
    r[i] = porous_residual(evaluate(m, grid[i].a, grid[i].t), grid[i].a, m.genus, chi0);
  return make_report(grid, std::move(r), tolerance, Sense::GreaterEqual);
}

// Max relative error of u_res = (-2/phi^3) phi_res over the grid.
inline double porous_identity_error(const ModelSpec& m, const std::vector<GridPoint>& grid, int chi0 = 1) {
  double worst = 0.0;
  for (const auto& p : grid) {
    const auto e = evaluate(m, p.a, p.t);
    const double phi = std::sqrt(e.value);
    const double lhs = porous_residual(e, p.a, m.genus, chi0);
    const double rhs = -2.0 / (phi * phi * phi) * phi_residual(e, p.a, m.genus, chi0);
    // Scale by the size of the individual terms so exact zeros compare sensibly.
    const double scale = std::abs(e.dt) / (e.value * e.value) + std::abs(e.d2) / e.value +
                         e.d1 * e.d1 / (e.value * e.value) + std::abs(lhs) + 1e-300;
    worst = std::max(worst, std::abs(lhs - rhs) / std::max(std::abs(rhs), scale));
  }
  return worst;
}

// Harmonic mean of v with the a-independent solution u_C = C e^{2(1-g)t}.
inline ModelEval harmonic_mean_combine(const ModelEval& v, double C, double t, int genus) {
  if (!(v.value > 0.0) || !(C > 0.0)) throw DomainError("harmonic_mean_combine: need positive inputs");
  const double u = C * std::exp(2.0 * (1.0 - genus) * t);
  const double ut = 2.0 * (1.0 - genus) * u;
  const double s = v.value + u;
  ModelEval h;
  h.value = v.value * u / s;
  h.d1 = u * u * v.d1 / (s * s);
  h.d2 = u * u * (v.d2 * s - 2.0 * v.d1 * v.d1) / (s * s * s);
  h.dt = (u * u * v.dt + v.value * v.value * ut) / (s * s);
  return h;
}

// ---- concavity -------------------------------------------------------------------

enum class ConcavityMode { Weak, Strict };

// Second differences on a possibly non-uniform grid; one value per interior node.
inline std::vector<double> second_differences(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> d(x.size() >= 3 ? x.size() - 2 : 0);
  for (std::size_t i = 1; i + 1 < x.size(); ++i) {
    const double hm = x[i] - x[i - 1];
    const double hp = x[i + 1] - x[i];
    d[i - 1] = 2.0 * ((y[i + 1] - y[i]) / hp - (y[i] - y[i - 1]) / hm) / (hp + hm);
  }
  return d;
}

// Default allowance for cancellation in a second difference.
inline double roundoff_allowance(const std::vector<double>& x, const std::vector<double>& y) {
  double ymax = 0.0, hmin = std::numeric_limits<double>::infinity();
  for (double v : y) ymax = std::max(ymax, std::abs(v));
  for (std::size_t i = 1; i < x.size(); ++i) hmin = std::min(hmin, x[i] - x[i - 1]);
  return 64.0 * std::numeric_limits<double>::epsilon() * ymax / (hmin * hmin);
}

// D2_i <= -eps at every interior node of (x, y). Residual reported per node is
// D2_i + eps. Strict mode requires strict inequality beyond the roundoff allowance.
inline ResidualReport second_difference_check(const std::vector<double>& x, const std::vector<double>& y,
                                              double t = 0.0, double eps = 0.0,
                                              ConcavityMode mode = ConcavityMode::Weak,
                                              double roundoff_tol = -1.0) {
  if (x.size() != y.size() || x.size() < 3) throw GridError("second_difference_check: malformed grid");
  for (std::size_t i = 1; i < x.size(); ++i)
    if (!(x[i] > x[i - 1])) throw GridError("second_difference_check: grid not strictly increasing");
  auto d = second_differences(x, y);
  std::vector<GridPoint> g;
  g.reserve(d.size());
  for (std::size_t i = 1; i + 1 < x.size(); ++i) {
    g.push_back({x[i], t});
    d[i - 1] += eps;
  }
  const double tol = roundoff_tol >= 0.0 ? roundoff_tol : roundoff_allowance(x, y);
  auto rep = make_report(std::move(g), std::move(d), tol, Sense::LessEqual);
  if (mode == ConcavityMode::Strict) rep.passed = !rep.residuals.empty() && rep.max_value() < -tol;
  return rep;
}

inline ResidualReport concavity_check(const ProfileSamples& s, double eps = 0.0,
                                      ConcavityMode mode = ConcavityMode::Weak, double roundoff_tol = -1.0) {
  s.validate();
  return second_difference_check(s.a, s.v, s.t, eps, mode, roundoff_tol);
}

// Samples a model on an area grid at time t.
inline ProfileSamples sample_model(const ModelSpec& m, const std::vector<double>& a, double t) {
  ProfileSamples s;
  s.a = a;
  s.v.resize(a.size());
  s.t = t;
  s.genus = m.genus;
  s.kind = m.compact() ? DomainKind::CompactTotalArea : DomainKind::HalfLine;
  s.extent = m.compact() ? four_pi : a.back();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool end = (a[i] <= 0.0) || (m.compact() && a[i] >= four_pi);
    s.v[i] = end ? 0.0 : evaluate(m, a[i], t).value;
  }
  return s;
}

}  // namespace isoricci
