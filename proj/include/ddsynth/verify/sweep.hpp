#pragma once

// Delay sweeps: LMI feasibility on a grid, boundaries refined by bisection.

#include <future>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "ddsynth/lmi/builders.hpp"
#include "ddsynth/sdp.hpp"
#include "ddsynth/verify/spectral.hpp"

namespace ddsynth {

enum class Condition { analysis, simple, slack };

inline const char* to_string(Condition c) {
  switch (c) {
    case Condition::analysis: return "analysis";
    case Condition::simple: return "simple";
    case Condition::slack: return "slack";
  }
  return "?";
}

inline Condition parse_condition(const std::string& s) {
  if (s == "analysis") return Condition::analysis;
  if (s == "simple") return Condition::simple;
  if (s == "slack") return Condition::slack;
  throw InputError("unknown condition '" + s + "' (expected analysis, simple or slack)");
}

struct SweepOptions {
  Condition condition = Condition::simple;
  std::optional<SupplyRate> supply;  // used by Condition::analysis
  TuningParams tuning;
  double refine_tol = 1e-4;
  bool refine = true;
  bool with_abscissa = false;
  int spectral_n = 20;
  unsigned threads = 1;
  SolverOptions solver;
};

struct SweepPoint {
  double r = 0.0;
  bool feasible = false;
  double margin = 0.0;
  std::optional<double> abscissa;
  std::string warning;
};

struct Interval {
  double lo = 0.0, hi = 0.0;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  std::vector<Interval> intervals;
  std::vector<std::string> warnings;
  long long ndv = 0;
};

/// Problem for the plant at delay r under the selected condition.
inline LMIProblem sweep_problem(const DDSystem& tmpl, double r, const SweepOptions& opt) {
  DDSystem s = tmpl;
  s.r = r;
  switch (opt.condition) {
    case Condition::analysis:
      if (opt.supply) return analysis_constraints(s, *opt.supply);
      return simple_stability_constraints(s);
    case Condition::simple: return simple_stability_constraints(s);
    case Condition::slack: return slack_stability_constraints(s, opt.tuning);
  }
  return simple_stability_constraints(s);
}

/// Feasibility at one delay; solver and basis failures count as infeasible.
inline SweepPoint evaluate_point(const DDSystem& tmpl, double r, const SweepOptions& opt) {
  SweepPoint pt;
  pt.r = r;
  try {
    const LMIProblem p = sweep_problem(tmpl, r, opt);
    const Certificate c = solve_feasibility(p, opt.solver);
    pt.feasible = c.status == CertStatus::feasible;
    pt.margin = c.t_star;
    if (c.status == CertStatus::numerical_failure) pt.warning = "r=" + std::to_string(r) + ": " + c.message;
  } catch (const Error& e) {
    pt.feasible = false;
    pt.warning = "r=" + std::to_string(r) + ": " + e.what();
  }
  if (opt.with_abscissa) {
    DDSystem s = tmpl;
    s.r = r;
    pt.abscissa = spectral_abscissa(s, opt.spectral_n).abscissa;
  }
  return pt;
}

/// Boundary between a feasible and an infeasible delay (either order).
inline double bisect_boundary(const DDSystem& tmpl, double feasible_r, double infeasible_r, const SweepOptions& opt) {
  SweepOptions o = opt;
  o.with_abscissa = false;
  double a = feasible_r, b = infeasible_r;
  while (std::abs(b - a) > opt.refine_tol) {
    const double c = 0.5 * (a + b);
    if (evaluate_point(tmpl, c, o).feasible) a = c;
    else b = c;
  }
  return 0.5 * (a + b);
}

inline SweepResult sweep_stability(const DDSystem& tmpl, double r_min, double r_max, double step,
                                   const SweepOptions& opt = {}) {
  if (!(step > 0.0)) throw InputError("sweep: step must be positive");
  if (r_min > r_max) throw InputError("sweep: r_min must not exceed r_max");
  if (!(r_min > 0.0)) throw InputError("sweep: delays must be positive");
  std::vector<double> grid;
  const long long count = static_cast<long long>(std::floor((r_max - r_min) / step + 1e-9));
  for (long long k = 0; k <= count; ++k) grid.push_back(r_min + static_cast<double>(k) * step);
  if (grid.back() < r_max - 1e-12 * r_max) grid.push_back(r_max);

  SweepResult res;
  res.points.resize(grid.size());
  const unsigned threads = std::max(1u, opt.threads);
  if (threads == 1) {
    for (std::size_t i = 0; i < grid.size(); ++i) res.points[i] = evaluate_point(tmpl, grid[i], opt);
  } else {
    // Strided partition; every point is computed independently so the result
    // does not depend on the thread count.
    std::vector<std::future<void>> jobs;
    for (unsigned t = 0; t < threads; ++t) {
      jobs.push_back(std::async(std::launch::async, [&, t] {
        for (std::size_t i = t; i < grid.size(); i += threads) res.points[i] = evaluate_point(tmpl, grid[i], opt);
      }));
    }
    for (auto& j : jobs) j.get();
  }
  for (const auto& p : res.points)
    if (!p.warning.empty()) res.warnings.push_back(p.warning);
  res.ndv = count_decision_variables(sweep_problem(tmpl, grid.front(), opt));

  std::optional<double> open;
  for (std::size_t i = 0; i < res.points.size(); ++i) {
    const bool f = res.points[i].feasible;
    const bool prev = i > 0 && res.points[i - 1].feasible;
    if (f && !prev) {
      open = (i == 0 || !opt.refine) ? grid[i] : bisect_boundary(tmpl, grid[i], grid[i - 1], opt);
    }
    if (!f && prev) {
      const double hi = opt.refine ? bisect_boundary(tmpl, grid[i - 1], grid[i], opt) : grid[i - 1];
      res.intervals.push_back({*open, hi});
      open.reset();
    }
  }
  if (open) res.intervals.push_back({*open, grid.back()});
  return res;
}

/// Columns r, feasible, margin, abscissa (empty when not computed).
inline std::string sweep_csv(const SweepResult& res) {
  std::string out = "r,feasible,margin,abscissa\n";
  char buf[160];
  for (const auto& p : res.points) {
    std::snprintf(buf, sizeof buf, "%.6f,%d,%.6e,", p.r, p.feasible ? 1 : 0, p.margin);
    out += buf;
    if (p.abscissa) {
      std::snprintf(buf, sizeof buf, "%.10g", *p.abscissa);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

}  // namespace ddsynth
