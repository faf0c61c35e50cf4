#pragma once

// Model certificates for flow initial data, and the per-time bound series they imply:
// sup K <= K0(t), int |K - (1-g)| dmu <= 8 pi (K0(t) - (1-g)), and (sphere) an
// isoperimetric-constant floor from the model profile.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "isoricci/core.hpp"
#include "isoricci/isoperimetric.hpp"
#include "isoricci/model_profiles.hpp"
#include "isoricci/profile_pde.hpp"
#include "isoricci/ricci_flow.hpp"

namespace isoricci {

// Smallest shift t0 on the grid {0, step, 2 step, ...} for which the shifted Rosenau
// profile lies strictly below the latitude profile of m at every interior area node.
inline ModelSpec certify_rosenau_shift(const RotSymSphereMetric& m, std::size_t intervals, double step = 0.05,
                                       double shift_max = 5.0) {
  if (!(step > 0.0) || !(shift_max >= 0.0)) throw ParameterError("certify_rosenau_shift: need step > 0");
  const auto prof = latitude_profile(m, intervals);
  for (int k = 0; k * step <= shift_max + 1e-12; ++k) {
    const auto model = rosenau_model(k * step);
    bool below = true;
    for (std::size_t i = 1; i + 1 < prof.size() && below; ++i)
      below = model_profile(model, prof.a[i], 0.0) < std::sqrt(prof.v[i]);
    if (below) return model;
  }
  throw DomainError("certify_rosenau_shift: no shift up to shift_max certifies the metric");
}

// Genus-1 constant from the universal cover: I^2 >= 4 pi (min e^{2w} / max e^{2w}) a,
// so a / C lies below the profile once C exceeds max e^{2w} / (4 pi min e^{2w}).
inline constexpr double torus_certificate_margin = 1.01;

inline ModelSpec certify_genus1_constant(const ConformalTorusMetric& m) {
  m.validate();
  const auto [lo, hi] = std::minmax_element(m.w.begin(), m.w.end());
  return genus1_spec(torus_certificate_margin * std::exp(2.0 * (*hi - *lo)) / four_pi);
}

struct BoundRow {
  double t = 0.0;
  double supK = 0.0;
  double K0 = 0.0;  // model curvature bound, +inf where undefined
  double l1K = 0.0;
  double l1_bound = 0.0;
  double iso = 0.0;        // sphere only
  double iso_floor = 0.0;  // sphere only
};

namespace detail {

inline double model_bound_or_inf(const ModelSpec& model, double t) {
  try {
    return curvature_bound_of_model(model, t);
  } catch (const DomainError&) {
    return std::numeric_limits<double>::infinity();
  }
}

}  // namespace detail

inline std::vector<BoundRow> sphere_bound_rows(const SphereFlowTrace& tr, const ModelSpec& model,
                                               std::size_t profile_intervals) {
  std::vector<BoundRow> rows;
  for (const auto& s : tr.states) {
    BoundRow r;
    r.t = s.t;
    r.supK = s.diag.supK;
    r.K0 = detail::model_bound_or_inf(model, s.t);
    r.l1K = s.diag.l1K;
    r.l1_bound = 8.0 * pi * (r.K0 - 1.0);
    r.iso = isoperimetric_constant(latitude_profile(s.metric, profile_intervals, s.t));
    r.iso_floor = isoperimetric_constant(model_samples(model, profile_intervals, s.t));
    rows.push_back(r);
  }
  return rows;
}

inline std::vector<BoundRow> torus_bound_rows(const TorusFlowTrace& tr, const ModelSpec& model) {
  std::vector<BoundRow> rows;
  for (const auto& s : tr.states) {
    BoundRow r;
    r.t = s.t;
    r.supK = s.diag.supK;
    r.K0 = detail::model_bound_or_inf(model, s.t);
    r.l1K = s.diag.l1K;
    r.l1_bound = 8.0 * pi * r.K0;
    r.iso = r.iso_floor = std::numeric_limits<double>::quiet_NaN();
    rows.push_back(r);
  }
  return rows;
}

}  // namespace isoricci
