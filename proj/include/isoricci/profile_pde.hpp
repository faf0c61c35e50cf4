#pragma once

// Explicit solver for the squared-profile evolution
//   v_t = v v'' - (v')^2 + (4 pi chi0 - 2(1-g) a) v' + 2(1-g) v
// on a fixed uniform area grid, and the comparison harness built on it.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "isoricci/core.hpp"
#include "isoricci/model_profiles.hpp"

namespace isoricci {

struct EvolutionTrace {
  std::vector<ProfileSamples> snapshots;
  double dt_used = 0.0;  // smallest accepted step
  long steps = 0;
  std::string scheme;

  const ProfileSamples& back() const { return snapshots.back(); }
};

// Closure at a_max on HalfLine grids.
//   Linear:    zero second difference, exact for profiles linear at large area
//   Quadratic: zero third difference, exact for the constant-curvature profiles
enum class HalfLineClosure { Linear, Quadratic };

struct EvolveOptions {
  double cfl = 0.2;           // dt = cfl h^2 / max v
  double cfl_transport = 0.5; // dt <= cfl_transport h / max |drift - 2 v'|
  double store_every = 0.0;   // 0 stores only the initial and final states
  double blowup_factor = 1e6; // abort when max |v| exceeds this times the initial max
  long max_steps = 200000000;
  HalfLineClosure closure = HalfLineClosure::Quadratic;
};

// I'' I^2 + (I')^2 I + kappa0 I at interior nodes, with I = sqrt(v).
// Evaluated through the identity (I/2)(v'' + 2 kappa0), which avoids
// differencing the square-root singularity of I at a = 0.
inline ResidualReport spatial_residual(const ProfileSamples& s, double kappa0, double tolerance = -1.0) {
  s.validate();
  if (s.size() < 5) throw GridError("spatial_residual: need at least 5 nodes");
  const auto d2 = second_differences(s.a, s.v);
  std::vector<GridPoint> g;
  std::vector<double> r;
  for (std::size_t i = 1; i + 1 < s.size(); ++i) {
    g.push_back({s.a[i], s.t});
    r.push_back(0.5 * std::sqrt(s.v[i]) * (d2[i - 1] + 2.0 * kappa0));
  }
  if (tolerance < 0.0) {
    const double h = s.spacing();
    tolerance = 10.0 * h * h;
  }
  return make_report(std::move(g), std::move(r), tolerance, Sense::LessEqual);
}

namespace detail {

// drift[i] = 4 pi chi0 - 2(1-g) a_i is precomputed by the caller.
inline void profile_rhs(const double* __restrict v, const double* __restrict drift, std::size_t n, double h,
                        double q, double* __restrict out) {
  const double ih = 0.5 / h, ih2 = 1.0 / (h * h), q2 = 2.0 * q;
  out[0] = 0.0;
  out[n - 1] = 0.0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double d1 = (v[i + 1] - v[i - 1]) * ih;
    const double d2 = (v[i + 1] - 2.0 * v[i] + v[i - 1]) * ih2;
    out[i] = v[i] * d2 - d1 * d1 + drift[i] * d1 + q2 * v[i];
  }
}

inline void apply_profile_bc(std::vector<double>& v, DomainKind kind, HalfLineClosure c) {
  v.front() = 0.0;
  const std::size_t n = v.size();
  if (kind == DomainKind::CompactTotalArea)
    v.back() = 0.0;
  else if (c == HalfLineClosure::Linear || n < 4)
    v[n - 1] = 2.0 * v[n - 2] - v[n - 3];
  else
    v[n - 1] = 3.0 * v[n - 2] - 3.0 * v[n - 3] + v[n - 4];
}

}  // namespace detail

// Heun (RK2) time stepping with dt = cfl h^2 / max v recomputed every step.
inline EvolutionTrace evolve_profile(const ProfileSamples& init, int genus, int chi0, double t_end,
                                     const EvolveOptions& opt = {}) {
  init.validate();
  if (!init.is_uniform()) throw GridError("evolve_profile: area grid must be uniform");
  if (!(t_end >= init.t)) throw ParameterError("evolve_profile: t_end before initial time");
  if (std::abs(init.a.front()) > 1e-14) throw GridError("evolve_profile: grid must start at a = 0");

  EvolutionTrace tr;
  tr.scheme = "heun-rk2,central-fd,cfl=" + std::to_string(opt.cfl) +
              (init.kind == DomainKind::CompactTotalArea ? ",bc=dirichlet-dirichlet"
               : opt.closure == HalfLineClosure::Linear ? ",bc=dirichlet-extrap-linear"
                                                         : ",bc=dirichlet-extrap-quadratic");
  ProfileSamples cur = init;
  cur.genus = genus;
  detail::apply_profile_bc(cur.v, cur.kind, opt.closure);
  tr.snapshots.push_back(cur);

  const double h = cur.spacing();
  const std::size_t n = cur.size();
  double vmax0 = 0.0;
  for (double x : cur.v) vmax0 = std::max(vmax0, std::abs(x));
  const double limit = opt.blowup_factor * std::max(1.0, vmax0);

  const double q = 1.0 - genus;
  std::vector<double> k1(n), k2(n), tmp(n), drift(n);
  double dmax = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    drift[i] = four_pi * chi0 - 2.0 * q * cur.a[i];
    dmax = std::max(dmax, std::abs(drift[i]));
  }
  double next_store = opt.store_every > 0.0 ? init.t + opt.store_every : t_end;
  tr.dt_used = std::numeric_limits<double>::infinity();
  double t = init.t;
  double* v = cur.v.data();
  double vmax = 0.0, smax = 0.0;
  auto scan = [&] {
    // Branch-free so that the reductions vectorize.
    double m1 = 0.0, m2 = 0.0, nan = 0.0;
    for (std::size_t i = 1; i + 1 < n; ++i) {
      m1 = v[i] > m1 ? v[i] : m1;
      const double d = std::abs(v[i + 1] - v[i - 1]);
      m2 = d > m2 ? d : m2;
      nan += v[i] - v[i];  // NaN or inf anywhere poisons this
    }
    vmax = m1 + nan, smax = m2;
  };
  scan();
  while (t < t_end) {
    // Diffusive limit, plus a transport limit for where v is small against
    // the drift (linearized speed |drift - 2 v'|).
    double dt = opt.cfl * h * h / std::max(vmax, 1e-300);
    const double speed = dmax + smax / h;
    if (speed > 0.0) dt = std::min(dt, opt.cfl_transport * h / speed);
    const double target = std::min(next_store, t_end);
    bool hit = false;
    if (t + dt >= target) {
      dt = target - t;
      hit = true;
    }
    detail::profile_rhs(v, drift.data(), n, h, q, k1.data());
    for (std::size_t i = 0; i < n; ++i) tmp[i] = v[i] + dt * k1[i];
    detail::apply_profile_bc(tmp, cur.kind, opt.closure);
    detail::profile_rhs(tmp.data(), drift.data(), n, h, q, k2.data());
    for (std::size_t i = 0; i < n; ++i) v[i] += 0.5 * dt * (k1[i] + k2[i]);
    detail::apply_profile_bc(cur.v, cur.kind, opt.closure);
    t = hit ? target : t + dt;
    if (dt > 0.0) tr.dt_used = std::min(tr.dt_used, dt);
    ++tr.steps;

    scan();
    const double vend = std::abs(v[n - 1]);
    if (!(vmax <= limit) || !(smax <= 2.0 * limit) || !(vend <= limit))
      throw NumericalAbort("evolve_profile: blow-up detected at t = " + std::to_string(t) +
                           " (step too large for the diffusivity)");
    if (tr.steps > opt.max_steps) throw NumericalAbort("evolve_profile: step budget exhausted");

    if (hit) {
      cur.t = t;
      tr.snapshots.push_back(cur);
      if (opt.store_every > 0.0) next_store = std::min(t_end, next_store + opt.store_every);
      if (t >= t_end) break;
    }
  }
  if (tr.snapshots.back().t < t_end) {  // t_end == init.t
    cur.t = t_end;
    tr.snapshots.push_back(cur);
  }
  if (!std::isfinite(tr.dt_used)) tr.dt_used = 0.0;
  return tr;
}

// Per-time minimum of sqrt(v_trace) - phi_model.
struct GapSeries {
  std::vector<double> t;
  std::vector<double> min_gap;
  std::vector<double> a_at_min;
  double eps_grid = 0.0;
  bool passed = false;

  bool pass_at(std::size_t i) const { return min_gap[i] >= -eps_grid; }
};

namespace detail {

// Interior nodes on which gaps are measured.
inline bool in_window(const ProfileSamples& s, std::size_t i, double window) {
  if (i == 0 || s.a[i] <= 0.0) return false;
  if (s.kind == DomainKind::CompactTotalArea && i + 1 == s.size()) return false;
  return s.a[i] <= window;
}

inline double default_window(const ProfileSamples& s) {
  return s.kind == DomainKind::HalfLine ? s.extent / 10.0 : s.extent;
}

inline GapSeries finish_gaps(GapSeries g) {
  g.passed = !g.min_gap.empty();
  for (std::size_t i = 0; i < g.min_gap.size(); ++i) g.passed = g.passed && g.pass_at(i);
  return g;
}

}  // namespace detail

// Comparison verdict: every per-time minimum >= -eps_grid (default 10 h).
inline GapSeries comparison_gap(const ModelSpec& model, const EvolutionTrace& trace, double eps_grid = -1.0,
                                double window = -1.0) {
  if (trace.snapshots.empty()) throw ParameterError("comparison_gap: empty trace");
  const auto& s0 = trace.snapshots.front();
  if (model.compact() != (s0.kind == DomainKind::CompactTotalArea))
    throw DomainError("comparison_gap: model and trace domains differ");
  if (model.compact() && std::abs(s0.extent - four_pi) > 1e-9)
    throw DomainError("comparison_gap: compact model needs total area 4 pi");
  GapSeries g;
  g.eps_grid = eps_grid >= 0.0 ? eps_grid : 10.0 * s0.spacing();
  const double w = window > 0.0 ? window : detail::default_window(s0);
  for (const auto& s : trace.snapshots) {
    double best = std::numeric_limits<double>::infinity(), at = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (!detail::in_window(s, i, w)) continue;
      const double gap = std::sqrt(std::max(s.v[i], 0.0)) - model_profile(model, s.a[i], s.t);
      if (gap < best) best = gap, at = s.a[i];
    }
    g.t.push_back(s.t);
    g.min_gap.push_back(best);
    g.a_at_min.push_back(at);
  }
  return detail::finish_gaps(std::move(g));
}

// Same verdict between two evolutions on the same grid: sqrt(v_upper) - sqrt(v_lower).
inline GapSeries trace_gap(const EvolutionTrace& lower, const EvolutionTrace& upper, double eps_grid = -1.0,
                           double window = -1.0) {
  if (lower.snapshots.size() != upper.snapshots.size()) throw DomainError("trace_gap: snapshot counts differ");
  GapSeries g;
  const auto& s0 = lower.snapshots.front();
  g.eps_grid = eps_grid >= 0.0 ? eps_grid : 10.0 * s0.spacing();
  const double w = window > 0.0 ? window : detail::default_window(s0);
  for (std::size_t k = 0; k < lower.snapshots.size(); ++k) {
    const auto& lo = lower.snapshots[k];
    const auto& up = upper.snapshots[k];
    if (lo.a != up.a || std::abs(lo.t - up.t) > 1e-12) throw DomainError("trace_gap: grids or times differ");
    double best = std::numeric_limits<double>::infinity(), at = 0.0;
    for (std::size_t i = 0; i < lo.size(); ++i) {
      if (!detail::in_window(lo, i, w)) continue;
      const double gap = std::sqrt(std::max(up.v[i], 0.0)) - std::sqrt(std::max(lo.v[i], 0.0));
      if (gap < best) best = gap, at = lo.a[i];
    }
    g.t.push_back(lo.t);
    g.min_gap.push_back(best);
    g.a_at_min.push_back(at);
  }
  return detail::finish_gaps(std::move(g));
}

// Uniform-grid samples of a model, with the domain convention of the family.
// HalfLine families use a_max as extent.
inline ProfileSamples model_samples(const ModelSpec& m, std::size_t intervals, double t, double a_max = 40.0) {
  const double ext = m.compact() ? four_pi : a_max;
  auto s = sample_model(m, uniform_area_grid(intervals, ext), t);
  s.extent = ext;
  return s;
}

inline ProfileSamples scaled(ProfileSamples s, double factor) {
  for (auto& x : s.v) x *= factor;
  return s;
}

}  // namespace isoricci
