#pragma once

// Experiment registry for the command-line runner: flat `key = value` configs,
// CSV artifacts with manifest sidecars, and exit codes
//   0 pass, 2 check failure, 3 config error, 4 numerical abort.

#include <atomic>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "isoricci/certification.hpp"
#include "isoricci/core.hpp"
#include "isoricci/isoperimetric.hpp"
#include "isoricci/model_profiles.hpp"
#include "isoricci/profile_pde.hpp"
#include "isoricci/ricci_flow.hpp"
#include "isoricci/surface_geometry.hpp"

namespace isoricci {

struct ConfigError : ParameterError {
  using ParameterError::ParameterError;
};

inline constexpr int exit_pass = 0;
inline constexpr int exit_check_failed = 2;
inline constexpr int exit_config_error = 3;
inline constexpr int exit_numerical_abort = 4;

// ---- config -------------------------------------------------------------------

using RawConfig = std::vector<std::pair<std::string, std::string>>;

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

inline bool parse_real(const std::string& s, double& out) {
  if (s.empty()) return false;
  errno = 0;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return errno == 0 && end == s.c_str() + s.size() && std::isfinite(out);
}

inline bool parse_integer(const std::string& s, long& out) {
  if (s.empty()) return false;
  errno = 0;
  char* end = nullptr;
  out = std::strtol(s.c_str(), &end, 10);
  return errno == 0 && end == s.c_str() + s.size();
}

}  // namespace detail

// One `key = value` per line; `#` starts a comment; duplicate keys are an error.
inline RawConfig parse_config(std::istream& in) {
  RawConfig out;
  std::string line;
  for (int no = 1; std::getline(in, line); ++no) {
    if (const auto c = line.find('#'); c != std::string::npos) line.erase(c);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(no) + ": expected key = value");
    auto key = detail::trim(line.substr(0, eq));
    auto value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(no) + ": empty key");
    for (const auto& [k, v] : out)
      if (k == key) throw ConfigError("config line " + std::to_string(no) + ": duplicate key '" + key + "'");
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

enum class ParamType { Real, Integer, Text };

struct ParamSpec {
  std::string key;
  ParamType type = ParamType::Real;
  std::string fallback;
  std::string help;
  std::vector<std::string> choices;  // Text only; empty accepts anything
  bool tolerance = false;            // multiplied by the tolerance scale

  ParamSpec(std::string k, ParamType ty, std::string def, std::string h, std::vector<std::string> ch = {},
            bool tol = false)
      : key(std::move(k)), type(ty), fallback(std::move(def)), help(std::move(h)), choices(std::move(ch)),
        tolerance(tol) {}
};

// Resolved, typed parameters. Tolerances are stored already scaled.
class Params {
 public:
  double real(const std::string& k) const { return reals_.at(k); }
  long integer(const std::string& k) const { return integers_.at(k); }
  const std::string& text(const std::string& k) const { return texts_.at(k); }
  std::size_t count(const std::string& k) const { return integers_.at(k) < 0 ? 0 : std::size_t(integers_.at(k)); }
  double tol_scale = 1.0;

  // key=value lines in key order; tolerances show the configured and effective values.
  std::vector<std::string> echo() const { return echo_; }

  static Params resolve(const std::vector<ParamSpec>& schema, const RawConfig& raw, double tol_scale) {
    Params p;
    p.tol_scale = tol_scale;
    std::map<std::string, std::string> given(raw.begin(), raw.end());
    for (const auto& [k, v] : given) {
      bool known = false;
      for (const auto& s : schema) known = known || s.key == k;
      if (!known) throw ConfigError("unknown config key '" + k + "'");
    }
    std::map<std::string, std::string> lines;
    for (const auto& s : schema) {
      const auto it = given.find(s.key);
      const std::string v = it == given.end() ? s.fallback : it->second;
      const auto bad = [&] { return ConfigError("config key '" + s.key + "': invalid value '" + v + "'"); };
      switch (s.type) {
        case ParamType::Real: {
          double x;
          if (!detail::parse_real(v, x)) throw bad();
          if (s.tolerance) {
            if (x < 0.0) throw bad();
            p.reals_[s.key] = x * tol_scale;
            lines[s.key] = fmt17(x) + " (effective " + fmt17(x * tol_scale) + ")";
          } else {
            p.reals_[s.key] = x;
            lines[s.key] = fmt17(x);
          }
          break;
        }
        case ParamType::Integer: {
          long x;
          if (!detail::parse_integer(v, x)) throw bad();
          p.integers_[s.key] = x;
          lines[s.key] = std::to_string(x);
          break;
        }
        case ParamType::Text:
          if (!s.choices.empty() && std::find(s.choices.begin(), s.choices.end(), v) == s.choices.end()) throw bad();
          p.texts_[s.key] = v;
          lines[s.key] = v;
          break;
      }
    }
    for (const auto& [k, v] : lines) p.echo_.push_back(k + "=" + v);
    return p;
  }

 private:
  std::map<std::string, double> reals_;
  std::map<std::string, long> integers_;
  std::map<std::string, std::string> texts_;
  std::vector<std::string> echo_;
};

// ISO_RICCI_TOL_SCALE, default 1; must be a positive real.
inline double tolerance_scale_from_env() {
  const char* s = std::getenv("ISO_RICCI_TOL_SCALE");
  if (s == nullptr || *s == '\0') return 1.0;
  double x;
  if (!detail::parse_real(detail::trim(s), x) || !(x > 0.0))
    throw ConfigError(std::string("ISO_RICCI_TOL_SCALE: invalid value '") + s + "'");
  return x;
}

// ---- artifacts --------------------------------------------------------------------

struct Check {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  std::string detail;
};

struct Column {
  std::string name;
  std::string meaning;
};

class RunContext {
 public:
  RunContext(std::filesystem::path out, unsigned jobs, std::ostream& log) : out_(std::move(out)), jobs_(jobs), log_(log) {}

  unsigned jobs() const { return jobs_; }
  const std::filesystem::path& out() const { return out_; }

  // Writes <name> with a header row, and <name>.manifest describing each column.
  void csv(const std::string& name, const std::string& verifies, const std::vector<Column>& cols,
           const std::vector<std::vector<std::string>>& rows) {
    std::ofstream f(out_ / name);
    for (std::size_t i = 0; i < cols.size(); ++i) f << (i ? "," : "") << cols[i].name;
    f << '\n';
    for (const auto& r : rows) {
      if (r.size() != cols.size()) throw ParameterError("csv: row width differs from header");
      for (std::size_t i = 0; i < r.size(); ++i) f << (i ? "," : "") << r[i];
      f << '\n';
    }
    if (!f) throw std::runtime_error("cannot write " + (out_ / name).string());
    std::ofstream m(out_ / (name + ".manifest"));
    m << "file=" << name << "\nverifies=" << verifies << '\n';
    for (const auto& c : cols) m << "column." << c.name << '=' << c.meaning << '\n';
    artifacts_.push_back(name);
  }

  // Same, for writers that produce their own CSV text.
  void csv_text(const std::string& name, const std::string& verifies, const std::vector<Column>& cols,
                const std::string& body) {
    std::ofstream(out_ / name) << body;
    std::ofstream m(out_ / (name + ".manifest"));
    m << "file=" << name << "\nverifies=" << verifies << '\n';
    for (const auto& c : cols) m << "column." << c.name << '=' << c.meaning << '\n';
    artifacts_.push_back(name);
  }

  void note(const std::string& key, const std::string& value) { notes_.emplace_back(key, value); }

  void check(Check c) {
    log_ << (c.passed ? "PASS " : "FAIL ") << c.name << " value=" << fmt17(c.value) << " tol=" << fmt17(c.tolerance);
    if (!c.detail.empty()) log_ << " (" << c.detail << ')';
    log_ << '\n';
    checks_.push_back(std::move(c));
  }

  const std::vector<Check>& checks() const { return checks_; }
  const std::vector<std::string>& artifacts() const { return artifacts_; }
  const std::vector<std::pair<std::string, std::string>>& notes() const { return notes_; }

 private:
  std::filesystem::path out_;
  unsigned jobs_;
  std::ostream& log_;
  std::vector<Check> checks_;
  std::vector<std::string> artifacts_;
  std::vector<std::pair<std::string, std::string>> notes_;
};

// Runs f(0..count-1) on up to `jobs` threads; exceptions are rethrown in index order.
template <class F>
void parallel_for(std::size_t count, unsigned jobs, F&& f) {
  if (jobs <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(count);
  auto worker = [&] {
    for (std::size_t i; (i = next++) < count;) {
      try {
        f(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t k = 0; k < std::min<std::size_t>(jobs, count); ++k) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// ---- shared pieces ----------------------------------------------------------------

namespace detail {

inline std::string f17(double x) { return fmt17(x); }

inline Check bound_check(const std::string& name, double worst, double tol, const std::string& what) {
  return {name, worst, tol, worst <= tol, what};
}

inline const std::vector<Column> bound_columns = {
    {"t", "flow time"},
    {"supK", "max Gauss curvature of the stored state"},
    {"K0_model", "curvature bound K0(t) of the certified model; sup K <= K0"},
    {"l1K", "int |K - (1-g)| dmu"},
    {"l1_bound", "8 pi (K0(t) - (1-g)); l1K <= l1_bound"},
};

inline std::vector<std::vector<std::string>> bound_table(const std::vector<BoundRow>& rows, bool with_iso) {
  std::vector<std::vector<std::string>> out;
  for (const auto& r : rows) {
    std::vector<std::string> line{f17(r.t), f17(r.supK), f17(r.K0), f17(r.l1K), f17(r.l1_bound)};
    if (with_iso) line.insert(line.end(), {f17(r.iso), f17(r.iso_floor)});
    out.push_back(std::move(line));
  }
  return out;
}

// Worst violations over rows with t >= t_min: sup K - K0, l1K - l1_bound, iso_floor - iso.
struct BoundViolations {
  double curvature = -std::numeric_limits<double>::infinity();
  double l1 = -std::numeric_limits<double>::infinity();
  double iso = -std::numeric_limits<double>::infinity();
};

inline BoundViolations violations(const std::vector<BoundRow>& rows, double t_min) {
  BoundViolations v;
  for (const auto& r : rows) {
    if (r.t < t_min) continue;
    if (std::isfinite(r.K0)) {
      v.curvature = std::max(v.curvature, r.supK - r.K0);
      v.l1 = std::max(v.l1, r.l1K - r.l1_bound);
    }
    if (std::isfinite(r.iso)) v.iso = std::max(v.iso, r.iso_floor - r.iso);
  }
  return v;
}

inline void emit_bounds(RunContext& ctx, const std::vector<BoundRow>& rows, bool sphere, double t_min,
                        double bound_tol) {
  auto cols = bound_columns;
  if (sphere) {
    cols.push_back({"iso_constant", "inf I^2 / a of the latitude profile (profile_method=latitude)"});
    cols.push_back({"iso_floor", "inf phi^2 / a of the certified model; iso_constant >= iso_floor"});
  }
  ctx.csv("bounds.csv", "curvature and isoperimetric bounds from the certified model along the flow", cols,
          bound_table(rows, sphere));
  const auto v = violations(rows, t_min);
  ctx.check(bound_check("curvature_bound", v.curvature, bound_tol, "max over t >= t_min of sup K - K0"));
  ctx.check(bound_check("l1_bound", v.l1, bound_tol, "max over t >= t_min of l1K - 8 pi (K0 - (1-g))"));
  if (sphere) ctx.check(bound_check("iso_floor", v.iso, bound_tol, "max over t of iso_floor - iso_constant"));
}

inline RotSymSphereMetric sphere_preset(const Params& p, std::size_t n) {
  const auto& preset = p.text("preset");
  if (preset == "rosenau") return rosenau_metric(n, p.real("t0"));
  if (preset == "round") return round_sphere(n);
  return perturbed_sphere(n, p.real("amp"), int(p.integer("mode")));
}

inline ConformalTorusMetric torus_preset(const Params& p, std::size_t n) {
  if (p.text("preset") == "flat") return flat_torus(n);
  return sinusoidal_torus(n, p.real("amp"));
}

inline void require_config(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

inline double rosenau_tracking_rel(const SphereFlowTrace& tr, double t0, std::vector<std::vector<std::string>>& rows) {
  double worst = 0.0;
  for (const auto& s : tr.states) {
    double e = 0.0;
    for (std::size_t i = 0; i < s.metric.n(); ++i) {
      const double ex = rosenau_conformal_factor(s.metric.x(i), s.t + t0);
      e = std::max(e, std::abs(s.metric.u(i) - ex) / ex);
    }
    rows.push_back({f17(s.t), f17(e)});
    worst = std::max(worst, e);
  }
  return worst;
}

inline FlowOptions flow_options(const Params& p) {
  FlowOptions o;
  o.store_every = p.real("store_every");
  o.cfl = p.real("cfl");
  return o;
}

}  // namespace detail

// ---- registry -------------------------------------------------------------------------

struct Experiment {
  std::string name;
  std::string summary;
  std::vector<ParamSpec> params;
  bool latitude_profile = false;
  // Throws ConfigError for parameter combinations the schema cannot express.
  std::function<void(const Params&)> validate;
  std::function<void(const Params&, RunContext&)> run;
};

namespace detail {

using PT = ParamType;

inline ModelSpec compare_model(const Params& p) {
  const auto& m = p.text("model");
  const int g = int(p.integer("genus"));
  if (m == "constant_curvature") return constant_curvature_model(g);
  if (m == "rosenau") return rosenau_model(p.real("t0"));
  if (m == "genus1") return genus1_spec(p.real("C"), p.real("t_start"));
  if (m == "hyperbolic_quadratic") return hyperbolic_quadratic_spec(g, p.real("B0"));
  const double C0 = p.real("C0_ratio") * critical_C(g);
  return hyperbolic_general_spec(g, C0, p.real("b0_ratio") * critical_constants(g, C0).b_crit);
}

inline std::vector<std::pair<std::string, ModelSpec>> verify_models_list(const Params& p) {
  const int hg = int(p.integer("hg_genus"));
  const double C0 = p.real("hg_C0_ratio") * critical_C(hg);
  return {
      {"constant_curvature", constant_curvature_model(int(p.integer("cc_genus")))},
      {"rosenau", rosenau_model(p.real("rosenau_t0"))},
      {"genus1", genus1_spec(p.real("g1_C"), p.real("g1_t_start"))},
      {"hyperbolic_quadratic", hyperbolic_quadratic_spec(int(p.integer("hq_genus")), p.real("hq_B0"))},
      {"hyperbolic_general",
       hyperbolic_general_spec(hg, C0, p.real("hg_b0_ratio") * critical_constants(hg, C0).b_crit)},
  };
}

inline void run_verify_models(const Params& p, RunContext& ctx) {
  const std::size_t na = p.count("n_a"), nt = p.count("n_t");
  const double tlo = p.real("t_lo"), thi = p.real("t_hi"), amax = p.real("a_max"), tol = p.real("residual_tol");
  const auto models = verify_models_list(p);
  struct Out {
    ResidualReport residual;
    double concavity = -std::numeric_limits<double>::infinity();
    bool concave = true;
  };
  std::vector<Out> res(models.size());
  parallel_for(models.size(), ctx.jobs(), [&](std::size_t k) {
    const auto& m = models[k].second;
    const double ext = m.compact() ? (m.kappa() > 0.0 ? four_pi / m.kappa() : four_pi) : amax;
    std::vector<GridPoint> grid;
    for (std::size_t j = 0; j < nt; ++j) {
      const double t = nt > 1 ? tlo + (thi - tlo) * double(j) / double(nt - 1) : tlo;
      for (std::size_t i = 0; i < na; ++i) grid.push_back({ext * (double(i) + 0.5) / double(na), t});
    }
    res[k].residual = model_residual(m, grid, 1, tol);
    // Concavity of phi = sqrt(v) on the closed area grid at every sweep time.
    for (std::size_t j = 0; j < nt; ++j) {
      const double t = nt > 1 ? tlo + (thi - tlo) * double(j) / double(nt - 1) : tlo;
      const auto s = sample_model(m, uniform_area_grid(na, ext), t);
      const auto rep = second_difference_check(s.a, s.profile(), t);
      res[k].concavity = std::max(res[k].concavity, rep.max_value());
      res[k].concave = res[k].concave && rep.passed;
    }
  });
  std::vector<std::vector<std::string>> summary;
  for (std::size_t k = 0; k < models.size(); ++k) {
    const auto& [name, m] = models[k];
    std::vector<std::vector<std::string>> rows;
    const auto& r = res[k].residual;
    for (std::size_t i = 0; i < r.grid.size(); ++i) rows.push_back({f17(r.grid[i].a), f17(r.grid[i].t), f17(r.residuals[i])});
    ctx.csv("residuals_" + name + ".csv", "model profile solves the profile equation (residual <= 0, equality models ~ 0)",
            {{"a", "area (x for hyperbolic_general)"}, {"t", "model time"},
             {"residual", "phi-form residual / max(1, v); <= residual_tol"}},
            rows);
    summary.push_back({name, m.param_json(), f17(r.max_value()), f17(r.max_abs), f17(res[k].concavity)});
    ctx.check({"residual." + name, r.max_value(), tol, r.passed, "max phi-form residual"});
    ctx.check({"concavity." + name, res[k].concavity, 0.0, res[k].concave, "max second difference of phi"});
  }
  ctx.csv("summary.csv", "model residual and concavity sweep per family",
          {{"family", "model family"}, {"params", "model parameters (JSON)"},
           {"max_residual", "largest signed residual"}, {"max_abs_residual", "largest |residual|"},
           {"max_second_difference", "largest second difference of phi over the sweep"}},
          summary);
}

inline void run_profile_pde(const Params& p, RunContext& ctx) {
  const std::size_t n = p.count("n");
  const double t_end = p.real("t_end"), eps = p.real("eps"), amax = p.real("a_max");
  const EvolveOptions o{.store_every = p.real("store_every")};
  struct Stationary {
    std::string name;
    ModelSpec m;
    double drift = 0.0;
  };
  std::vector<Stationary> st = {{"round_sphere", constant_curvature_model(0)},
                                {"flat_plane", constant_curvature_model(1)},
                                {"hyperbolic_cover", constant_curvature_model(2)}};
  GapSeries gap;
  double track = 0.0;
  parallel_for(st.size() + 2, ctx.jobs(), [&](std::size_t k) {
    if (k < st.size()) {
      const auto init = model_samples(st[k].m, n, 0.0, amax);
      const auto tr = evolve_profile(init, st[k].m.genus, 1, t_end);
      double num = 0.0, den = 0.0;
      for (std::size_t i = 0; i < init.size(); ++i) {
        num = std::max(num, std::abs(tr.back().v[i] - init.v[i]));
        den = std::max(den, std::abs(init.v[i]));
      }
      st[k].drift = num / den;
    } else if (k == st.size()) {
      const auto m = rosenau_model(0.0);
      const auto init = scaled(model_samples(m, n, 0.0), 1.0 / ((1.0 - eps) * (1.0 - eps)));
      gap = comparison_gap(m, evolve_profile(init, 0, 1, t_end, o), p.real("gap_factor") * init.spacing());
    } else {
      const auto m = rosenau_model(0.0);
      const auto tr = evolve_profile(model_samples(m, n, 0.0), 0, 1, t_end);
      double num = 0.0, den = 0.0;
      for (std::size_t i = 1; i + 1 < tr.back().size(); ++i) {
        const double ref = evaluate(m, tr.back().a[i], t_end).value;
        num = std::max(num, std::abs(tr.back().v[i] - ref));
        den = std::max(den, ref);
      }
      track = num / den;
    }
  });
  std::vector<std::vector<std::string>> rows;
  double worst = 0.0;
  for (const auto& s : st) {
    rows.push_back({s.name, f17(s.drift)});
    worst = std::max(worst, s.drift);
  }
  ctx.csv("stationarity.csv", "constant-curvature profiles are stationary under the discrete profile evolution",
          {{"case", "constant-curvature profile"}, {"max_rel_drift", "max |v(t_end) - v(0)| / max v(0)"}}, rows);
  ctx.check({"stationarity", worst, p.real("stationary_tol"), worst <= p.real("stationary_tol"), "max relative drift"});

  rows.clear();
  double gmin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < gap.t.size(); ++i) {
    rows.push_back({f17(gap.t[i]), f17(gap.min_gap[i]), f17(gap.a_at_min[i])});
    gmin = std::min(gmin, gap.min_gap[i]);
  }
  ctx.csv("comparison_gap.csv", "comparison principle: evolution started above the Rosenau model stays above",
          {{"t", "time"}, {"min_gap", "min over a of sqrt(v) - phi_model; >= -gap_factor h"},
           {"a_at_min", "area attaining the minimum"}},
          rows);
  ctx.check({"comparison", gmin == 0.0 ? 0.0 : -gmin, gap.eps_grid, gap.passed, "negated min gap"});

  ctx.csv("tracking.csv", "discrete profile evolution tracks the Rosenau profile",
          {{"n", "area intervals"}, {"t", "time"}, {"rel_err", "max |v - v_rosenau| / max v_rosenau"}},
          {{std::to_string(n), f17(t_end), f17(track)}});
  ctx.check({"rosenau_tracking", track, p.real("tracking_tol"), track <= p.real("tracking_tol"), "relative sup error of v"});
}

inline void run_flow_sphere(const Params& p, RunContext& ctx) {
  const std::size_t n = p.count("n");
  const auto init = sphere_preset(p, n);
  const auto model = certify_rosenau_shift(init, n, p.real("shift_step"), p.real("shift_max"));
  ctx.note("certified_model", std::string(to_string(model.family)) + " " + model.param_json());
  const auto tr = nrf_evolve(init, p.real("t_end"), flow_options(p));
  ctx.note("scheme", tr.scheme);
  std::ostringstream trace;
  write_trace_csv(trace, tr);
  ctx.csv_text("trace.csv", "normalized Ricci flow diagnostics",
               {{"t", "flow time"}, {"area", "total area"}, {"supK", "max K"}, {"infK", "min K"},
                {"l1K", "int |K - 1| dmu"}},
               trace.str());
  if (p.text("preset") == "rosenau") {
    std::vector<std::vector<std::string>> rows;
    const double e = rosenau_tracking_rel(tr, p.real("t0"), rows);
    ctx.csv("tracking.csv", "flow reproduces the exact Rosenau solution",
            {{"t", "flow time"}, {"rel_err", "max |u - u_rosenau| / u_rosenau over the grid"}}, rows);
    ctx.check({"rosenau_tracking", e, p.real("tracking_tol"), e <= p.real("tracking_tol"), "relative sup error of u"});
  }
  emit_bounds(ctx, sphere_bound_rows(tr, model, n), true, 0.0, p.real("bound_tol"));
}

inline void run_flow_torus(const Params& p, RunContext& ctx) {
  const std::size_t n = p.count("n");
  const auto init = torus_preset(p, n);
  const auto model = certify_genus1_constant(init);
  ctx.note("certified_model", std::string(to_string(model.family)) + " " + model.param_json());
  TorusFlowTrace tr, evo;
  parallel_for(2, ctx.jobs(), [&](std::size_t k) {
    if (k == 0)
      tr = nrf_evolve(init, p.real("t_end"), flow_options(p));
    else
      evo = nrf_evolve(sinusoidal_torus(n, p.real("evo_amp")), p.real("evo_t_end"), {.store_every = p.real("evo_store")});
  });
  ctx.note("scheme", tr.scheme);
  std::ostringstream trace;
  write_trace_csv(trace, tr);
  ctx.csv_text("trace.csv", "normalized Ricci flow diagnostics",
               {{"t", "flow time"}, {"area", "total area"}, {"supK", "max K"}, {"infK", "min K"},
                {"l1K", "int |K| dmu"}},
               trace.str());
  emit_bounds(ctx, torus_bound_rows(tr, model), false, p.real("t_min"), p.real("bound_tol"));

  const std::string chosen = p.text("reaction");
  std::vector<std::vector<std::string>> rows;
  for (auto f : {ReactionForm::Standard, ReactionForm::SingleSign, ReactionForm::FlippedSign}) {
    const auto r = curvature_evolution_check(evo, f, p.real("evo_tol_scale"));
    rows.push_back({to_string(f), f17(r.max_abs), f17(r.tolerance), r.passed ? "1" : "0"});
    const bool selected = (chosen == "standard" && f == ReactionForm::Standard) ||
                          (chosen == "single" && f == ReactionForm::SingleSign) ||
                          (chosen == "flipped" && f == ReactionForm::FlippedSign);
    if (selected) ctx.check({"curvature_evolution", r.max_abs, r.tolerance, r.passed, to_string(f)});
  }
  ctx.csv("reaction.csv", "curvature evolution dK/dt = Delta K + reaction, for each reaction form",
          {{"form", "reaction term"}, {"max_abs", "max |dK/dt - Delta K - reaction|"},
           {"tolerance", "time-sampling and spatial error allowance"}, {"passed", "1 if max_abs <= tolerance"}},
          rows);
}

inline void run_compare(const Params& p, RunContext& ctx) {
  const auto model = compare_model(p);
  ctx.note("model", std::string(to_string(model.family)) + " " + model.param_json());
  const std::size_t n = p.count("n");
  auto init = model_samples(model, n, 0.0, p.real("a_max"));
  if (p.text("init") == "scaled") {
    const double e = p.real("eps");
    init = scaled(init, 1.0 / ((1.0 - e) * (1.0 - e)));
  }
  const auto tr = evolve_profile(init, model.genus, 1, p.real("t_end"), {.store_every = p.real("store_every")});
  ctx.note("scheme", tr.scheme);
  const auto g = comparison_gap(model, tr, p.real("gap_factor") * init.spacing());
  std::vector<std::vector<std::string>> rows;
  double gmin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < g.t.size(); ++i) {
    rows.push_back({f17(g.t[i]), f17(g.min_gap[i]), f17(g.a_at_min[i])});
    gmin = std::min(gmin, g.min_gap[i]);
  }
  ctx.csv("gap.csv", "comparison principle: profile evolution stays above the model",
          {{"t", "time"}, {"min_gap", "min over the window of sqrt(v) - phi_model; >= -gap_factor h"},
           {"a_at_min", "area attaining the minimum"}},
          rows);
  ctx.check({"comparison", gmin == 0.0 ? 0.0 : -gmin, g.eps_grid, g.passed, "negated min gap"});
}

inline void run_bounds_report(const Params& p, RunContext& ctx) {
  const bool sphere = p.text("surface") == "sphere";
  std::size_t n = p.count("n");
  if (n == 0) n = sphere ? 512 : 32;
  if (sphere) {
    const auto init = sphere_preset(p, n);
    const auto model = certify_rosenau_shift(init, n, p.real("shift_step"), p.real("shift_max"));
    ctx.note("certified_model", std::string(to_string(model.family)) + " " + model.param_json());
    const auto tr = nrf_evolve(init, p.real("t_end"), flow_options(p));
    ctx.note("scheme", tr.scheme);
    emit_bounds(ctx, sphere_bound_rows(tr, model, n), true, p.real("t_min"), p.real("bound_tol"));
  } else {
    const auto init = torus_preset(p, n);
    const auto model = certify_genus1_constant(init);
    ctx.note("certified_model", std::string(to_string(model.family)) + " " + model.param_json());
    const auto tr = nrf_evolve(init, p.real("t_end"), flow_options(p));
    ctx.note("scheme", tr.scheme);
    emit_bounds(ctx, torus_bound_rows(tr, model), false, p.real("t_min"), p.real("bound_tol"));
  }
}

inline const std::vector<std::string> sphere_presets = {"rosenau", "round", "perturbed"};
inline const std::vector<std::string> torus_presets = {"sinusoidal", "flat"};

}  // namespace detail

inline const std::vector<Experiment>& experiments() {
  using detail::PT;
  static const std::vector<Experiment> reg = {
      {"verify-models",
       "residual and concavity sweeps of every model family",
       {{"n_a", PT::Integer, "200", "area samples per time"},
        {"n_t", PT::Integer, "20", "time samples"},
        {"t_lo", PT::Real, "0.1", "first sweep time"},
        {"t_hi", PT::Real, "5", "last sweep time"},
        {"a_max", PT::Real, "40", "area range of half-line families"},
        {"residual_tol", PT::Real, "1e-8", "residual tolerance", {}, true},
        {"cc_genus", PT::Integer, "0", "constant-curvature genus"},
        {"rosenau_t0", PT::Real, "0", "Rosenau time shift"},
        {"g1_C", PT::Real, "1", "genus-1 constant C"},
        {"g1_t_start", PT::Real, "0", "genus-1 start time"},
        {"hq_genus", PT::Integer, "2", "quadratic hyperbolic model genus"},
        {"hq_B0", PT::Real, "0.5", "quadratic hyperbolic model B0"},
        {"hg_genus", PT::Integer, "2", "general hyperbolic model genus"},
        {"hg_C0_ratio", PT::Real, "2", "C0 / C_crit"},
        {"hg_b0_ratio", PT::Real, "0.5", "b0 / b_crit(C0)"}},
       false,
       [](const Params& p) {
         detail::require_config(p.integer("n_a") >= 2 && p.integer("n_t") >= 1, "n_a >= 2 and n_t >= 1 required");
         detail::require_config(p.real("t_lo") > 0.0 && p.real("t_hi") >= p.real("t_lo"), "need 0 < t_lo <= t_hi");
         detail::require_config(p.real("a_max") > 0.0, "a_max must be positive");
         try {
           detail::verify_models_list(p);
         } catch (const std::invalid_argument& e) {
           throw ConfigError(e.what());
         }
       },
       detail::run_verify_models},
      {"profile-pde",
       "stationarity, comparison and Rosenau tracking of the profile evolution",
       {{"n", PT::Integer, "256", "area intervals"},
        {"t_end", PT::Real, "0.5", "final time"},
        {"store_every", PT::Real, "0.1", "snapshot spacing for the comparison run"},
        {"eps", PT::Real, "0.05", "comparison start above the model by 1/(1-eps)"},
        {"a_max", PT::Real, "40", "area range of half-line cases"},
        {"gap_factor", PT::Real, "10", "allowed negative gap in units of h", {}, true},
        {"stationary_tol", PT::Real, "1e-9", "stationarity tolerance", {}, true},
        {"tracking_tol", PT::Real, "1e-3", "Rosenau tracking tolerance", {}, true}},
       false,
       [](const Params& p) {
         detail::require_config(p.integer("n") >= 8, "n >= 8 required");
         detail::require_config(p.real("t_end") >= 0.0 && p.real("store_every") >= 0.0, "times must be >= 0");
         detail::require_config(p.real("eps") >= 0.0 && p.real("eps") < 1.0, "need 0 <= eps < 1");
       },
       detail::run_profile_pde},
      {"flow-sphere",
       "normalized Ricci flow on the sphere: Rosenau exactness and model bounds",
       {{"preset", PT::Text, "rosenau", "initial metric", detail::sphere_presets},
        {"n", PT::Integer, "1024", "colatitude cells"},
        {"t0", PT::Real, "0", "Rosenau time of the initial data"},
        {"amp", PT::Real, "0.3", "perturbation amplitude"},
        {"mode", PT::Integer, "2", "perturbation mode"},
        {"t_end", PT::Real, "0.5", "final time"},
        {"store_every", PT::Real, "0.05", "snapshot spacing"},
        {"cfl", PT::Real, "0", "time-step factor (0 keeps the stable default)"},
        {"shift_step", PT::Real, "0.05", "Rosenau shift grid for certification"},
        {"shift_max", PT::Real, "5", "largest certification shift"},
        {"tracking_tol", PT::Real, "1e-4", "Rosenau tracking tolerance", {}, true},
        {"bound_tol", PT::Real, "1e-8", "bound violation allowance", {}, true}},
       true,
       [](const Params& p) {
         detail::require_config(p.integer("n") >= 8, "n >= 8 required");
         detail::require_config(p.real("t_end") >= 0.0 && p.real("store_every") >= 0.0, "times must be >= 0");
         detail::require_config(p.real("shift_step") > 0.0, "shift_step must be positive");
       },
       detail::run_flow_sphere},
      {"flow-torus",
       "normalized Ricci flow on the torus: curvature bound, L1 decay, reaction term",
       {{"preset", PT::Text, "sinusoidal", "initial metric", detail::torus_presets},
        {"n", PT::Integer, "32", "grid points per side"},
        {"amp", PT::Real, "0.1", "sinusoidal amplitude"},
        {"t_end", PT::Real, "2", "final time"},
        {"store_every", PT::Real, "0.1", "snapshot spacing"},
        {"cfl", PT::Real, "0", "time-step factor (0 keeps the stable default)"},
        {"t_min", PT::Real, "0.1", "first time at which bounds are checked"},
        {"bound_tol", PT::Real, "0", "bound violation allowance", {}, true},
        {"reaction", PT::Text, "standard", "reaction form that must pass", {"standard", "single", "flipped"}},
        {"evo_amp", PT::Real, "0.01", "amplitude of the curvature-evolution run"},
        {"evo_t_end", PT::Real, "0.01", "length of the curvature-evolution run"},
        {"evo_store", PT::Real, "0.002", "snapshot spacing of the curvature-evolution run"},
        {"evo_tol_scale", PT::Real, "10", "curvature-evolution tolerance factor", {}, true}},
       false,
       [](const Params& p) {
         detail::require_config(p.integer("n") >= 8, "n >= 8 required");
         detail::require_config(p.real("t_end") >= 0.0 && p.real("store_every") >= 0.0, "times must be >= 0");
         detail::require_config(p.real("evo_store") > 0.0 && p.real("evo_t_end") >= 2.0 * p.real("evo_store"),
                                "curvature-evolution run needs at least three snapshots");
       },
       detail::run_flow_torus},
      {"compare",
       "comparison of a model with the profile evolution started at or above it",
       {{"model", PT::Text, "rosenau", "model family",
         {"constant_curvature", "rosenau", "genus1", "hyperbolic_quadratic", "hyperbolic_general"}},
        {"genus", PT::Integer, "2", "genus of constant-curvature and hyperbolic models"},
        {"t0", PT::Real, "0", "Rosenau time shift"},
        {"C", PT::Real, "1", "genus-1 constant"},
        {"t_start", PT::Real, "0.1", "genus-1 start time"},
        {"B0", PT::Real, "0.5", "quadratic hyperbolic B0"},
        {"C0_ratio", PT::Real, "2", "general hyperbolic C0 / C_crit"},
        {"b0_ratio", PT::Real, "0.5", "general hyperbolic b0 / b_crit(C0)"},
        {"init", PT::Text, "scaled", "initial profile", {"same", "scaled"}},
        {"eps", PT::Real, "0.05", "scaled start: model / (1-eps)"},
        {"n", PT::Integer, "400", "area intervals"},
        {"a_max", PT::Real, "40", "area range of half-line models"},
        {"t_end", PT::Real, "2", "final time"},
        {"store_every", PT::Real, "0.1", "snapshot spacing"},
        {"gap_factor", PT::Real, "10", "allowed negative gap in units of h", {}, true}},
       false,
       [](const Params& p) {
         detail::require_config(p.integer("n") >= 8, "n >= 8 required");
         detail::require_config(p.real("eps") >= 0.0 && p.real("eps") < 1.0, "need 0 <= eps < 1");
         detail::require_config(p.real("t_end") >= 0.0 && p.real("store_every") >= 0.0, "times must be >= 0");
         try {
           detail::compare_model(p);
         } catch (const std::invalid_argument& e) {
           throw ConfigError(e.what());
         }
       },
       detail::run_compare},
      {"bounds-report",
       "time series of curvature and isoperimetric-constant bounds along a flow",
       {{"surface", PT::Text, "sphere", "surface type", {"sphere", "torus"}},
        {"preset", PT::Text, "perturbed", "initial metric"},
        {"n", PT::Integer, "0", "grid size (0 picks 512 for the sphere, 32 for the torus)"},
        {"t0", PT::Real, "0", "Rosenau time of the initial data"},
        {"amp", PT::Real, "0.3", "perturbation amplitude"},
        {"mode", PT::Integer, "2", "sphere perturbation mode"},
        {"t_end", PT::Real, "2", "final time"},
        {"store_every", PT::Real, "0.1", "snapshot spacing"},
        {"cfl", PT::Real, "0", "time-step factor (0 keeps the stable default)"},
        {"t_min", PT::Real, "0.1", "first time at which bounds are checked"},
        {"shift_step", PT::Real, "0.05", "Rosenau shift grid for certification"},
        {"shift_max", PT::Real, "5", "largest certification shift"},
        {"bound_tol", PT::Real, "1e-8", "bound violation allowance", {}, true}},
       true,
       [](const Params& p) {
         const auto& presets = p.text("surface") == "sphere" ? detail::sphere_presets : detail::torus_presets;
         detail::require_config(std::find(presets.begin(), presets.end(), p.text("preset")) != presets.end(),
                                "preset '" + p.text("preset") + "' does not fit surface '" + p.text("surface") + "'");
         detail::require_config(p.integer("n") == 0 || p.integer("n") >= 8, "n must be 0 or >= 8");
         detail::require_config(p.real("t_end") >= 0.0 && p.real("store_every") >= 0.0, "times must be >= 0");
         detail::require_config(p.real("shift_step") > 0.0, "shift_step must be positive");
       },
       detail::run_bounds_report},
  };
  return reg;
}

inline const Experiment* find_experiment(const std::string& name) {
  for (const auto& e : experiments())
    if (e.name == name) return &e;
  return nullptr;
}

struct RunRequest {
  std::string experiment;
  std::string config_path;  // empty: all defaults
  std::string out_dir;      // empty: config output_dir, else ./isoricci-out/<experiment>
  unsigned jobs = 1;
};

// Full run: config errors are reported before any computation. Returns the exit code.
inline int run_experiment(const RunRequest& req, std::ostream& log, std::ostream& err) {
  const Experiment* ex = find_experiment(req.experiment);
  if (ex == nullptr) {
    err << "error: unknown experiment '" << req.experiment << "'\n";
    return exit_config_error;
  }
  Params params;
  std::filesystem::path out;
  try {
    RawConfig raw;
    if (!req.config_path.empty()) {
      std::ifstream f(req.config_path);
      if (!f) throw ConfigError("cannot read config file '" + req.config_path + "'");
      raw = parse_config(f);
    }
    std::string out_dir = req.out_dir;
    RawConfig rest;
    for (auto& [k, v] : raw) {
      if (k == "experiment") {
        if (v != ex->name) throw ConfigError("config names experiment '" + v + "', not '" + ex->name + "'");
      } else if (k == "output_dir") {
        if (out_dir.empty()) out_dir = v;
      } else {
        rest.emplace_back(k, v);
      }
    }
    params = Params::resolve(ex->params, rest, tolerance_scale_from_env());
    if (ex->validate) ex->validate(params);
    if (req.jobs == 0) throw ConfigError("--jobs must be at least 1");
    out = out_dir.empty() ? std::filesystem::path("isoricci-out") / ex->name : std::filesystem::path(out_dir);
    std::filesystem::create_directories(out);
  } catch (const std::exception& e) {
    err << "config error: " << e.what() << '\n';
    return exit_config_error;
  }

  RunContext ctx(out, req.jobs, log);
  int code = exit_pass;
  std::string failure;
  try {
    ex->run(params, ctx);
    for (const auto& c : ctx.checks())
      if (!c.passed) code = exit_check_failed;
  } catch (const NumericalAbort& e) {
    failure = e.what();
    code = exit_numerical_abort;
  } catch (const std::invalid_argument& e) {
    failure = e.what();
    code = exit_config_error;
  } catch (const std::exception& e) {
    failure = e.what();
    code = exit_config_error;
  }
  if (!failure.empty()) err << "error: " << failure << '\n';

  std::ofstream m(out / "manifest.txt");
  m << "experiment=" << ex->name << "\ntol_scale=" << fmt17(params.tol_scale) << '\n';
  if (ex->latitude_profile) m << "profile_method=" << profile_method << '\n';
  for (const auto& line : params.echo()) m << "param." << line << '\n';
  for (const auto& [k, v] : ctx.notes()) m << k << '=' << v << '\n';
  for (const auto& a : ctx.artifacts()) m << "artifact=" << a << '\n';
  for (const auto& c : ctx.checks())
    m << "check." << c.name << '=' << (c.passed ? "PASS" : "FAIL") << " value=" << fmt17(c.value)
      << " tol=" << fmt17(c.tolerance) << '\n';
  if (!failure.empty()) m << "error=" << failure << '\n';
  m << "exit_code=" << code << '\n';
  return code;
}

}  // namespace isoricci
