#pragma once

// Normalized Ricci flow d/dt g = -2 (K - (1-g)) g for the two metric families,
// integrated in log form: psi_t = -2 (K - 1) on the sphere, w_t = -K on the torus.

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <type_traits>
#include <vector>

#include "isoricci/core.hpp"
#include "isoricci/surface_geometry.hpp"

namespace isoricci {

struct FlowDiagnostics {
  double area = 0.0;
  double supK = 0.0;
  double infK = 0.0;
  double l1K = 0.0;             // int |K - (1-g)| dmu
  double curvature_integral = 0.0;
  double normalization_drift = 0.0;  // cumulative |ln(4 pi / area)| removed so far
};

template <class Metric>
struct FlowState {
  Metric metric;
  double t = 0.0;
  FlowDiagnostics diag;
};

template <class Metric>
struct FlowTrace {
  std::vector<FlowState<Metric>> states;
  double dt_min = 0.0;
  std::size_t steps = 0;
  double max_step_drift = 0.0;
  std::string scheme;

  const FlowState<Metric>& back() const { return states.back(); }
};

using SphereFlowTrace = FlowTrace<RotSymSphereMetric>;
using TorusFlowTrace = FlowTrace<ConformalTorusMetric>;

struct FlowOptions {
  double store_every = 0.0;  // 0: initial and final states only
  double cfl = 0.0;          // 0: family default
  double blowup = 60.0;      // abort once |log conformal factor| exceeds this
  std::size_t max_steps = 2'000'000'000;
};

inline constexpr double sphere_flow_cfl = 0.35;
inline constexpr double initial_area_slack = 1e-4;
inline constexpr double torus_flow_cfl = 0.05;

inline int genus_of(const RotSymSphereMetric&) { return 0; }
inline int genus_of(const ConformalTorusMetric&) { return 1; }

template <class Metric>
FlowDiagnostics flow_diagnostics(const Metric& m, double drift = 0.0) {
  const auto K = gauss_curvature(m);
  const double kbar = 1.0 - genus_of(m);
  std::vector<double> dev(K.size());
  for (std::size_t i = 0; i < K.size(); ++i) dev[i] = std::abs(K[i] - kbar);
  FlowDiagnostics d;
  d.area = total_area(m);
  d.supK = *std::max_element(K.begin(), K.end());
  d.infK = *std::min_element(K.begin(), K.end());
  d.l1K = integrate_field(m, dev);
  d.curvature_integral = integrate_field(m, K);
  d.normalization_drift = drift;
  return d;
}

namespace detail {

// Heun RK2 on the log conformal factor with exact landing on store times.
template <class Metric, class Rhs, class Step, class Renorm>
FlowTrace<Metric> run_flow(Metric m, double t_end, const FlowOptions& opt, Rhs rhs, Step dt_of, Renorm renorm,
                           std::vector<double>& y, const char* scheme) {
  if (!(t_end >= 0.0)) throw ParameterError("nrf_evolve: need t_end >= 0");
  // Quadrature-level area defects of sampled initial data are removed here and logged as drift.
  const double a0 = total_area(m);
  if (std::abs(a0 / four_pi - 1.0) > initial_area_slack)
    throw DomainError("nrf_evolve: initial metric not normalized to 4 pi");
  double drift = std::abs(renorm(y));
  auto& field0 = [&]() -> std::vector<double>& {
    if constexpr (std::is_same_v<Metric, RotSymSphereMetric>) return m.psi;
    else return m.w;
  }();
  field0 = y;

  FlowTrace<Metric> tr;
  tr.scheme = scheme;
  tr.dt_min = std::numeric_limits<double>::infinity();
  tr.states.push_back({m, 0.0, flow_diagnostics(m, drift)});

  const std::size_t n = y.size();
  std::vector<double> k1(n), k2(n), ys(n);
  double t = 0.0;
  std::size_t stored = 1;
  // Store times are multiples of store_every; one within 1e-9 of t_end snaps to it.
  auto store_time = [&](std::size_t k) {
    if (!(opt.store_every > 0.0)) return t_end;
    const double ts = double(k) * opt.store_every;
    return ts >= t_end - 1e-9 * opt.store_every ? t_end : ts;
  };
  double next_store = store_time(stored);
  while (t < t_end) {
    if (tr.steps >= opt.max_steps) throw NumericalAbort("nrf_evolve: step budget exhausted");
    double dt = dt_of(y);
    const double target = next_store;
    bool lands = false;
    if (t + dt >= target - 1e-14 * target) {
      dt = target - t;
      lands = true;
    }
    rhs(y, k1);
    for (std::size_t i = 0; i < n; ++i) ys[i] = y[i] + dt * k1[i];
    rhs(ys, k2);
    double ymax = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      y[i] += 0.5 * dt * (k1[i] + k2[i]);
      // NaN compares false and is caught below.
      ymax = std::max(ymax, std::abs(y[i]));
    }
    if (!(ymax <= opt.blowup)) throw NumericalAbort("nrf_evolve: conformal factor blew up");
    const double d = std::abs(renorm(y));
    drift += d;
    tr.max_step_drift = std::max(tr.max_step_drift, d);
    tr.dt_min = std::min(tr.dt_min, dt);
    ++tr.steps;
    t = lands ? target : t + dt;
    if (lands) {
      field0 = y;
      tr.states.push_back({m, t, flow_diagnostics(m, drift)});
      next_store = store_time(++stored);
    }
  }
  return tr;
}

}  // namespace detail

inline SphereFlowTrace nrf_evolve(const RotSymSphereMetric& init, double t_end, const FlowOptions& opt = {}) {
  init.validate();
  const std::size_t n = init.n();
  const double h = init.h();
  const auto w = sphere_cell_weights(n);
  // Face coefficients sin(theta_{i-1/2}) / h divided by the cell weight.
  std::vector<double> lo(n), hi(n);
  for (std::size_t i = 0; i < n; ++i) {
    lo[i] = std::sin(double(i) * h) / (h * w[i]);
    hi[i] = std::sin(double(i + 1) * h) / (h * w[i]);
  }
  lo[0] = 0.0;
  hi[n - 1] = 0.0;
  const double logw_total = std::log(2.0 * pi);
  auto rhs = [&](const std::vector<double>& p, std::vector<double>& out) {
    for (std::size_t i = 0; i < n; ++i) {
      const double left = i > 0 ? p[i - 1] : p[i];
      const double right = i + 1 < n ? p[i + 1] : p[i];
      const double lap = hi[i] * (right - p[i]) - lo[i] * (p[i] - left);
      out[i] = std::exp(-p[i]) * (lap - 2.0) + 2.0;
    }
  };
  const double cfl = opt.cfl > 0.0 ? opt.cfl : sphere_flow_cfl;
  auto dt_of = [&](const std::vector<double>& p) {
    return cfl * h * h * std::exp(*std::min_element(p.begin(), p.end()));
  };
  auto renorm = [&](std::vector<double>& p) {
    double a = 0.0;
    for (std::size_t i = 0; i < n; ++i) a += w[i] * std::exp(p[i]);
    const double shift = std::log(four_pi) - logw_total - std::log(a);
    for (auto& x : p) x += shift;
    return shift;
  };
  std::vector<double> y = init.psi;
  return detail::run_flow(init, t_end, opt, rhs, dt_of, renorm, y, "sphere: finite-volume Laplacian, Heun RK2");
}

inline TorusFlowTrace nrf_evolve(const ConformalTorusMetric& init, double t_end, const FlowOptions& opt = {}) {
  init.validate();
  const std::size_t N = init.n * init.n;
  TorusSpectralLaplacian lap(init.n, init.L1, init.L2);
  std::vector<double> tmp(N);
  auto rhs = [&](const std::vector<double>& w, std::vector<double>& out) {
    lap.apply(w, tmp);
    for (std::size_t k = 0; k < N; ++k) out[k] = std::exp(-2.0 * w[k]) * tmp[k];
  };
  const double cfl = opt.cfl > 0.0 ? opt.cfl : torus_flow_cfl;
  const double hmin = std::min(init.h1(), init.h2());
  auto dt_of = [&](const std::vector<double>& w) {
    return cfl * hmin * hmin * std::exp(2.0 * *std::min_element(w.begin(), w.end()));
  };
  const double cell = init.cell_area();
  auto renorm = [&](std::vector<double>& w) {
    double a = 0.0;
    for (double x : w) a += std::exp(2.0 * x);
    const double shift = 0.5 * std::log(four_pi / (a * cell));
    for (auto& x : w) x += shift;
    return shift;
  };
  std::vector<double> y = init.w;
  return detail::run_flow(init, t_end, opt, rhs, dt_of, renorm, y, "torus: FFTW spectral Laplacian, Heun RK2");
}

// Exact Rosenau snapshots at the given times, in the flow-trace layout.
inline SphereFlowTrace rosenau_trace(std::size_t n, const std::vector<double>& times) {
  SphereFlowTrace tr;
  tr.scheme = "exact Rosenau solution";
  for (double t : times) {
    auto m = rosenau_metric(n, t);
    tr.states.push_back({m, t, flow_diagnostics(m)});
  }
  return tr;
}

// Reaction term in d/dt K = Delta K + R(K).
enum class ReactionForm {
  Standard,     // 2 K (K - (1-g))
  SingleSign,   // K (K - (1-g))
  FlippedSign,  // K (K - (g-1))
};

inline const char* to_string(ReactionForm f) {
  switch (f) {
    case ReactionForm::Standard: return "2K(K-(1-g))";
    case ReactionForm::SingleSign: return "K(K-(1-g))";
    case ReactionForm::FlippedSign: return "K(K-(g-1))";
  }
  return "?";
}

inline double reaction(ReactionForm f, double K, int genus) {
  const double q = 1.0 - genus;
  switch (f) {
    case ReactionForm::Standard: return 2.0 * K * (K - q);
    case ReactionForm::SingleSign: return K * (K - q);
    case ReactionForm::FlippedSign: return K * (K + q);
  }
  return 0.0;
}

inline std::vector<double> laplace_beltrami(const RotSymSphereMetric& m, const std::vector<double>& f) {
  auto out = sphere_laplacian_fv(f);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= std::exp(-m.psi[i]);
  return out;
}

inline std::vector<double> laplace_beltrami(const ConformalTorusMetric& m, const std::vector<double>& f) {
  TorusSpectralLaplacian lap(m.n, m.L1, m.L2);
  std::vector<double> out;
  lap.apply(f, out);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] *= std::exp(-2.0 * m.w[k]);
  return out;
}

// Leading spatial error scale of the curvature route: h^2 for the finite-volume
// sphere, none for the spectral torus.
inline double spatial_error_scale(const RotSymSphereMetric& m) { return m.h() * m.h(); }
inline double spatial_error_scale(const ConformalTorusMetric&) { return 0.0; }

inline constexpr double curvature_evolution_tol_scale = 10.0;

// Central time differences of K at interior stored times against Delta K + R(K).
// Tolerance: scale * (dt^2 / 6 * max|K_ttt| + h^2 * max(1, sup K^2)), with K_ttt
// from third differences of the stored states (needs 4 states; otherwise
// max(1, sup K^2) stands in for it).
template <class Metric>
ResidualReport curvature_evolution_check(const FlowTrace<Metric>& tr, ReactionForm form = ReactionForm::Standard,
                                         double tol_scale = curvature_evolution_tol_scale) {
  const auto& st = tr.states;
  if (st.size() < 3) throw ParameterError("curvature_evolution_check: need at least 3 stored states");
  const int g = genus_of(st.front().metric);
  std::vector<std::vector<double>> K(st.size());
  for (std::size_t k = 0; k < st.size(); ++k) {
    if (k > 0 && !(st[k].t > st[k - 1].t))
      throw ParameterError("curvature_evolution_check: stored times must increase");
    K[k] = gauss_curvature(st[k].metric);
  }
  std::vector<GridPoint> pts;
  std::vector<double> res;
  double dt_max = 0.0, ksq = 1.0;
  for (std::size_t k = 1; k + 1 < st.size(); ++k) {
    const double span = st[k + 1].t - st[k - 1].t;
    dt_max = std::max(dt_max, 0.5 * span);
    const auto lap = laplace_beltrami(st[k].metric, K[k]);
    for (std::size_t i = 0; i < K[k].size(); ++i) {
      const double kt = (K[k + 1][i] - K[k - 1][i]) / span;
      res.push_back(kt - lap[i] - reaction(form, K[k][i], g));
      pts.push_back({double(i), st[k].t});
      ksq = std::max(ksq, K[k][i] * K[k][i]);
    }
  }
  double kttt = ksq;
  if (st.size() >= 4) {
    kttt = 0.0;
    for (std::size_t k = 0; k + 3 < st.size(); ++k) {
      const double d = (st[k + 3].t - st[k].t) / 3.0;
      for (std::size_t i = 0; i < K[k].size(); ++i)
        kttt = std::max(kttt, std::abs(K[k + 3][i] - 3.0 * K[k + 2][i] + 3.0 * K[k + 1][i] - K[k][i]) / (d * d * d));
    }
  }
  const double tol =
      tol_scale * (dt_max * dt_max / 6.0 * kttt + spatial_error_scale(st.front().metric) * ksq);
  return make_report(std::move(pts), std::move(res), tol, Sense::Equality);
}

// int |K - (1-g)| dmu <= 8 pi K0_excess, given sup K <= K0_excess + (1-g).
template <class Metric>
ResidualReport l1_curvature_check(const FlowState<Metric>& s, double K0_excess, double tolerance = 1e-10) {
  const double kbar = 1.0 - genus_of(s.metric);
  return make_report({{0.0, s.t}, {1.0, s.t}},
                     {s.diag.l1K - 8.0 * pi * K0_excess, s.diag.supK - (K0_excess + kbar)}, tolerance,
                     Sense::LessEqual, {"l1 - 8 pi K0", "supK - (K0 + 1 - g)"});
}

template <class Metric>
void write_trace_csv(std::ostream& os, const FlowTrace<Metric>& tr) {
  os << "t,area,supK,infK,l1K\n";
  for (const auto& s : tr.states)
    os << fmt17(s.t) << ',' << fmt17(s.diag.area) << ',' << fmt17(s.diag.supK) << ',' << fmt17(s.diag.infK) << ','
       << fmt17(s.diag.l1K) << '\n';
}

}  // namespace isoricci
