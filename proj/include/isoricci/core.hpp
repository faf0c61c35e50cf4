#pragma once

// Shared value types for the isoperimetric-profile / Ricci-flow toolkit.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace isoricci {

inline constexpr double pi = std::numbers::pi;
inline constexpr double four_pi = 4.0 * std::numbers::pi;

// Error hierarchy. Callers that only care about "bad input" catch
// std::invalid_argument / std::domain_error; numerical aborts are runtime errors.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};
struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct GridError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct NumericalAbort : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Sense { Equality, LessEqual, GreaterEqual };

inline const char* to_string(Sense s) {
  switch (s) {
    case Sense::Equality: return "Equality";
    case Sense::LessEqual: return "LessEqual";
    case Sense::GreaterEqual: return "GreaterEqual";
  }
  return "?";
}

struct GridPoint {
  double a = 0.0;
  double t = 0.0;
};

// Per-point residuals of an identity or inequality.
//   Equality:     passed iff max |r| <= tolerance
//   LessEqual:    passed iff max r   <= tolerance
//   GreaterEqual: passed iff min r   >= -tolerance
struct ResidualReport {
  std::vector<GridPoint> grid;
  std::vector<double> residuals;
  std::vector<std::string> labels;  // optional, one per residual
  double max_abs = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  Sense sense = Sense::Equality;

  double max_value() const {
    return residuals.empty() ? 0.0 : *std::max_element(residuals.begin(), residuals.end());
  }
  double min_value() const {
    return residuals.empty() ? 0.0 : *std::min_element(residuals.begin(), residuals.end());
  }

  // Recomputes max_abs and passed from residuals/tolerance/sense.
  void finalize() {
    max_abs = 0.0;
    bool finite = true;
    for (double r : residuals) {
      if (!std::isfinite(r)) finite = false;
      max_abs = std::max(max_abs, std::abs(r));
    }
    switch (sense) {
      case Sense::Equality: passed = max_abs <= tolerance; break;
      case Sense::LessEqual: passed = max_value() <= tolerance; break;
      case Sense::GreaterEqual: passed = min_value() >= -tolerance; break;
    }
    passed = passed && finite;
  }
};

inline ResidualReport make_report(std::vector<GridPoint> grid, std::vector<double> residuals,
                                  double tolerance, Sense sense,
                                  std::vector<std::string> labels = {}) {
  ResidualReport r;
  r.grid = std::move(grid);
  r.residuals = std::move(residuals);
  r.labels = std::move(labels);
  r.tolerance = tolerance;
  r.sense = sense;
  r.finalize();
  return r;
}

// Merges several reports of the same sense into one (concatenated points, min tolerance).
inline ResidualReport merge_reports(std::span<const ResidualReport> parts) {
  ResidualReport out;
  if (parts.empty()) return out;
  out.sense = parts.front().sense;
  out.tolerance = parts.front().tolerance;
  for (const auto& p : parts) {
    if (p.sense != out.sense) throw ParameterError("merge_reports: mixed senses");
    out.grid.insert(out.grid.end(), p.grid.begin(), p.grid.end());
    out.residuals.insert(out.residuals.end(), p.residuals.begin(), p.residuals.end());
    out.labels.insert(out.labels.end(), p.labels.begin(), p.labels.end());
    out.tolerance = std::min(out.tolerance, p.tolerance);
  }
  out.finalize();
  return out;
}

enum class DomainKind { CompactTotalArea, HalfLine };

// Squared isoperimetric profile v = I^2 sampled on a strictly increasing area grid.
struct ProfileSamples {
  std::vector<double> a;
  std::vector<double> v;
  double t = 0.0;
  int genus = 0;
  DomainKind kind = DomainKind::CompactTotalArea;
  // Total area for CompactTotalArea, a_max for HalfLine.
  double extent = four_pi;

  std::size_t size() const { return a.size(); }

  std::vector<double> profile() const {
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::sqrt(std::max(v[i], 0.0));
    return out;
  }

  // Throws GridError when the grid is malformed. Only shape/sign invariants are
  // enforced here; the small-area check is separate (check_small_area).
  void validate() const {
    if (a.size() != v.size()) throw GridError("ProfileSamples: a and v differ in length");
    if (a.size() < 3) throw GridError("ProfileSamples: need at least 3 nodes");
    for (std::size_t i = 1; i < a.size(); ++i)
      if (!(a[i] > a[i - 1])) throw GridError("ProfileSamples: area grid not strictly increasing");
    for (double x : v)
      if (!(x >= 0.0) || !std::isfinite(x)) throw GridError("ProfileSamples: v must be finite and >= 0");
  }

  // v at the first interior node should be within rel_tol of 4 pi a.
  bool check_small_area(double rel_tol = 0.1) const {
    std::size_t i = (a.front() == 0.0) ? 1 : 0;
    if (i >= a.size() || a[i] <= 0.0) return false;
    return std::abs(v[i] / (four_pi * a[i]) - 1.0) <= rel_tol;
  }

  bool is_uniform(double rel_tol = 1e-9) const {
    if (a.size() < 2) return false;
    const double h = (a.back() - a.front()) / double(a.size() - 1);
    for (std::size_t i = 1; i < a.size(); ++i)
      if (std::abs((a[i] - a[i - 1]) - h) > rel_tol * std::max(1.0, std::abs(h))) return false;
    return true;
  }

  double spacing() const { return (a.back() - a.front()) / double(a.size() - 1); }
};

// Uniform area grid 0 = a_0 < ... < a_{n} = extent (n intervals, n+1 nodes).
inline std::vector<double> uniform_area_grid(std::size_t intervals, double extent) {
  if (intervals < 2) throw GridError("uniform_area_grid: need at least 2 intervals");
  std::vector<double> a(intervals + 1);
  const double h = extent / double(intervals);
  for (std::size_t i = 0; i <= intervals; ++i) a[i] = h * double(i);
  a.back() = extent;
  return a;
}

// Logarithmically spaced grid of n points on [lo, hi].
inline std::vector<double> log_grid(double lo, double hi, std::size_t n) {
  if (!(lo > 0.0) || !(hi > lo) || n < 2) throw GridError("log_grid: need 0 < lo < hi and n >= 2");
  std::vector<double> out(n);
  const double r = std::log(hi / lo) / double(n - 1);
  for (std::size_t i = 0; i < n; ++i) out[i] = lo * std::exp(r * double(i));
  out.back() = hi;
  return out;
}

// Round-trip decimal form used in every emitted file.
inline std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace isoricci
