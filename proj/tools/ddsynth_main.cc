// ddsynth command-line front end.
//
//   ddsynth analyze|synthesize|robust|sweep|verify --config FILE [--out FILE] ...
//
// Exit codes: 0 ran to an answer (feasible or infeasible), 2 input error,
// 3 numerical failure.

#include <chrono>
#include <cmath>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ddsynth/ddsynth.hpp"

namespace {

using namespace ddsynth;

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

struct RunConfig {
  std::string command;
  std::string config;
  std::string out;
  std::string csv;
  std::string trajectory;
  std::optional<double> r_min, r_max, step;
  double refine = 1e-4;
  std::optional<double> eta1, eta2;
  std::vector<double> eps;
  int spectral_n = 20;
  double horizon = 60.0;
  double dt = 0.01;
  double probe_horizon = 100.0;
  bool auto_scale = false;
  bool tune_grid = false;
  bool abscissa_column = false;
  bool no_probes = false;
  std::string condition = "analysis";
  bool trace = false;
  unsigned threads = 1;
};

struct Context {
  RunConfig cfg;
  ProblemFile prob;
  std::string input_hash;
  SolverOptions solver;
  std::chrono::steady_clock::time_point start;
  std::vector<std::string> notes;
};

Json tolerances(const SolverOptions& s) {
  Json j;
  j["gap_tol"] = s.gap_tol;
  j["feas_threshold"] = s.feas_threshold;
  j["strict_margin"] = s.strict_margin;
  j["max_iter"] = s.max_iter;
  return j;
}

Json header(const Context& ctx) {
  Json j;
  j["command"] = ctx.cfg.command;
  j["tool"] = "ddsynth";
  j["version"] = kVersion;
  j["input"] = ctx.cfg.config;
  j["input_hash"] = "fnv1a64:" + ctx.input_hash;
  j["tolerances"] = tolerances(ctx.solver);
  return j;
}

void emit(Context& ctx, Json report) {
  report["elapsed_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - ctx.start).count();
  if (!ctx.notes.empty()) report["notes"] = ctx.notes;
  const std::string text = report.dump(2) + "\n";
  if (ctx.cfg.out.empty()) std::cout << text;
  else write_file(ctx.cfg.out, text);
}

Json roots_json(const SpectralReport& rep, std::size_t count) {
  Json out = Json::array();
  for (std::size_t i = 0; i < std::min(count, rep.roots.size()); ++i) {
    out.push_back(Json::array({rep.roots[i].real(), rep.roots[i].imag()}));
  }
  return out;
}

/// Step that divides the delay, no larger than the requested one.
double grid_step(double r, double requested) {
  const double k = std::max(3.0, std::ceil(r / requested - 1e-9));
  return r / k;
}

/// Spectral, free-response and probe-gain checks of a closed loop.
Json verification(const Context& ctx, const ClosedLoop& cl, std::optional<double> gamma_bound) {
  Json j;
  const SpectralReport rep = spectral_abscissa(cl, ctx.cfg.spectral_n);
  j["spectral_n"] = rep.N;
  j["abscissa"] = rep.abscissa;
  j["rightmost_roots"] = roots_json(rep, 6);
  j["stable"] = rep.abscissa < 0.0;
  const double h = grid_step(cl.base.r, ctx.cfg.dt);
  const Index n = cl.base.n, q = cl.base.q;
  const SignalFn ones = [n](double) { return Vec(Vec::Ones(n)); };
  const SignalFn quiet = [q](double) { return Vec(Vec::Zero(q)); };
  Json sim;
  sim["horizon"] = ctx.cfg.horizon;
  sim["step"] = h;
  try {
    const Trajectory tr = simulate(cl, ones, quiet, ctx.cfg.horizon, h, 10);
    const double ratio = tr.x.back().norm() / tr.x.front().norm();
    sim["contraction"] = ratio;
    sim["contracts_1e-3"] = ratio <= 1e-3;
    if (rep.abscissa < 0.0 && ratio > 0.0) sim["decay_rate"] = decay_rate(tr, 0.5 * ctx.cfg.horizon, ctx.cfg.horizon);
    if (!ctx.cfg.trajectory.empty()) write_file(ctx.cfg.trajectory, trajectory_csv(tr));
  } catch (const SimulationOverflow& e) {
    sim["overflow"] = e.what();
  }
  j["free_response"] = sim;
  if (!ctx.cfg.no_probes && rep.abscissa < 0.0 && cl.base.m > 0 && cl.base.q > 0) {
    const double g = empirical_l2_gain(cl, default_probes(q), ctx.cfg.probe_horizon, h, rep.abscissa);
    Json pj;
    pj["horizon"] = ctx.cfg.probe_horizon;
    pj["probes"] = 12;
    pj["gain_lower_bound"] = g;
    if (gamma_bound) pj["within_gamma"] = g <= *gamma_bound + 1e-3;
    j["empirical_l2_gain"] = pj;
  }
  return j;
}

TuningParams tuning_for(const Context& ctx) {
  TuningParams t = ctx.prob.tuning;
  if (ctx.cfg.eta1) t.eta1 = *ctx.cfg.eta1;
  if (ctx.cfg.eta2) t.eta2 = *ctx.cfg.eta2;
  if (!ctx.cfg.eps.empty()) {
    if (static_cast<Index>(ctx.cfg.eps.size()) != ctx.prob.sys.rho()) throw InputError("--eps needs rho values");
    t.eps = Eigen::Map<const Vec>(ctx.cfg.eps.data(), static_cast<Index>(ctx.cfg.eps.size()));
  }
  return t;
}

Certificate solve(const LMIProblem& p, const SolverOptions& so) {
  return p.objective() ? minimize_linear(p, so) : solve_feasibility(p, so);
}

int status_exit(const Certificate& c) { return c.status == CertStatus::numerical_failure ? kExitNumerical : kExitOk; }

Json cert_json(const Certificate& c) {
  Json j;
  j["status"] = to_string(c.status);
  j["feasible"] = c.feasible();
  j["margin"] = c.margin;
  j["scaled_margin"] = c.t_star;
  j["iterations"] = c.iterations;
  if (!c.message.empty()) j["solver_message"] = c.message;
  return j;
}

void merge(Json& into, const Json& from) {
  for (auto it = from.begin(); it != from.end(); ++it) into[it.key()] = it.value();
}

int cmd_analyze(Context& ctx) {
  const auto& pf = ctx.prob;
  DDSystem sys = pf.sys;
  if (pf.K) sys = closed_loop_system(close_loop(pf.sys, *pf.K));
  const Condition cond = parse_condition(ctx.cfg.condition);
  LMIProblem p;
  std::string built;
  if (pf.uncertainty) {
    p = robust_analysis_constraints(sys, cond == Condition::analysis ? pf.supply : std::nullopt, *pf.uncertainty);
    built = "robust_analysis";
  } else if (cond == Condition::slack) {
    p = slack_stability_constraints(sys, tuning_for(ctx));
    built = "slack_stability";
  } else if (cond == Condition::analysis && pf.supply) {
    p = analysis_constraints(sys, *pf.supply);
    built = "analysis";
  } else {
    p = simple_stability_constraints(sys);
    built = "simple_stability";
  }
  const Certificate c = solve(p, ctx.solver);
  Json rep = header(ctx);
  rep["condition"] = built;
  rep["closed_loop"] = pf.K.has_value();
  rep["ndv"] = count_decision_variables(p);
  merge(rep, cert_json(c));
  if (c.feasible() && c.objective_value && pf.supply && pf.supply->gamma_is_variable()) rep["gamma"] = *c.objective_value;
  emit(ctx, rep);
  return status_exit(c);
}

/// Synthesis solve at the given tuning; the grid search keeps the best gamma.
std::pair<LMIProblem, Certificate> thm1_solve(const Context& ctx, const SupplyRate& supply, TuningParams& tuning) {
  if (!ctx.cfg.tune_grid) {
    LMIProblem p = thm1_constraints(ctx.prob.sys, supply, tuning);
    Certificate c = solve(p, ctx.solver);
    return {std::move(p), std::move(c)};
  }
  const double grid[] = {-1.0, 0.0, 0.5, 1.0, 2.0};
  std::optional<std::pair<LMIProblem, Certificate>> best;
  TuningParams best_t = tuning;
  for (double e1 : grid) {
    for (double e2 : grid) {
      TuningParams t = tuning;
      t.eta1 = e1, t.eta2 = e2;
      LMIProblem p = thm1_constraints(ctx.prob.sys, supply, t);
      Certificate c = solve(p, ctx.solver);
      if (!c.feasible()) continue;
      const double obj = c.objective_value.value_or(-c.t_star);
      if (!best || obj < best->second.objective_value.value_or(-best->second.t_star)) {
        best.emplace(std::move(p), std::move(c));
        best_t = t;
      }
    }
  }
  tuning = best_t;
  if (best) return std::move(*best);
  LMIProblem p = thm1_constraints(ctx.prob.sys, supply, tuning);
  Certificate c = solve(p, ctx.solver);
  return {std::move(p), std::move(c)};
}

Json synthesis_json(const SynthesisResult& s) {
  Json j;
  j["K"] = to_json(s.K);
  j["gain_residual"] = s.residual;
  j["x_condition"] = s.x_cond;
  return j;
}

int cmd_synthesize(Context& ctx) {
  const auto& pf = ctx.prob;
  if (pf.sys.p == 0) throw InputError("synthesize: the plant has no control input (p = 0)");
  const SupplyRate supply = pf.supply ? *pf.supply : l2_supply_variable(pf.sys.m, pf.sys.q);
  TuningParams tuning = tuning_for(ctx);
  auto [p, c] = thm1_solve(ctx, supply, tuning);
  Json rep = header(ctx);
  rep["supply"] = to_json(supply);
  rep["tuning"] = to_json(tuning);
  rep["ndv"] = count_decision_variables(p);
  merge(rep, cert_json(c));
  if (!c.feasible()) {
    emit(ctx, rep);
    return status_exit(c);
  }
  const SynthesisResult s = extract_synthesis(c, p);
  const std::optional<double> gamma = s.gamma ? s.gamma : supply.gamma;
  if (supply.kind == SupplyKind::l2gain && gamma) rep["gamma"] = *gamma;
  merge(rep, synthesis_json(s));
  rep["verification"] = verification(ctx, close_loop(pf.sys, s.K), supply.kind == SupplyKind::l2gain ? gamma : std::nullopt);
  rep["abscissa"] = rep["verification"]["abscissa"];
  emit(ctx, rep);
  return kExitOk;
}

int cmd_robust(Context& ctx) {
  const auto& pf = ctx.prob;
  if (!pf.uncertainty) throw InputError("robust: the configuration has no 'uncertainty' section");
  if (pf.sys.p == 0) throw InputError("robust: the plant has no control input (p = 0)");
  const SupplyRate supply = pf.supply ? *pf.supply : l2_supply_variable(pf.sys.m, pf.sys.q);
  const TuningParams tuning = tuning_for(ctx);
  const LMIProblem p = thm2_constraints(pf.sys, supply, *pf.uncertainty, tuning);
  const Certificate c = solve(p, ctx.solver);
  Json rep = header(ctx);
  rep["supply"] = to_json(supply);
  rep["tuning"] = to_json(tuning);
  rep["ndv"] = count_decision_variables(p);
  merge(rep, cert_json(c));
  if (!c.feasible()) {
    emit(ctx, rep);
    return status_exit(c);
  }
  const SynthesisResult s = extract_synthesis(c, p);
  const std::optional<double> gamma = s.gamma ? s.gamma : supply.gamma;
  if (supply.kind == SupplyKind::l2gain && gamma) rep["gamma"] = *gamma;
  merge(rep, synthesis_json(s));
  if (s.kappa1) rep["kappa1"] = *s.kappa1;
  if (s.kappa2) rep["kappa2"] = *s.kappa2;
  rep["verification"] = verification(ctx, close_loop(pf.sys, s.K), supply.kind == SupplyKind::l2gain ? gamma : std::nullopt);
  rep["nominal_abscissa"] = rep["verification"]["abscissa"];
  emit(ctx, rep);
  return kExitOk;
}

int cmd_sweep(Context& ctx) {
  const auto& pf = ctx.prob;
  const Json sw = pf.raw.contains("sweep") ? pf.raw["sweep"] : Json::object();
  auto pick = [&](const std::optional<double>& flag, const char* key, double fallback) {
    if (flag) return *flag;
    if (sw.contains(key)) return number(sw[key], std::string("sweep.") + key);
    return fallback;
  };
  const double r_min = pick(ctx.cfg.r_min, "r_min", 0.01);
  const double r_max = pick(ctx.cfg.r_max, "r_max", 2.5);
  const double step = pick(ctx.cfg.step, "step", 1e-3);
  SweepOptions opt;
  opt.condition = parse_condition(ctx.cfg.condition);
  opt.supply = pf.supply;
  opt.tuning = tuning_for(ctx);
  opt.refine = ctx.cfg.refine > 0.0;
  opt.refine_tol = ctx.cfg.refine > 0.0 ? ctx.cfg.refine : 1e-4;
  opt.with_abscissa = ctx.cfg.abscissa_column;
  opt.spectral_n = ctx.cfg.spectral_n;
  opt.threads = ctx.cfg.threads;
  opt.solver = ctx.solver;
  DDSystem tmpl = pf.sys;
  if (pf.K) tmpl = closed_loop_system(close_loop(pf.sys, *pf.K));
  const SweepResult res = sweep_stability(tmpl, r_min, r_max, step, opt);
  Json rep = header(ctx);
  rep["condition"] = to_string(opt.condition);
  rep["r_min"] = r_min, rep["r_max"] = r_max, rep["step"] = step;
  rep["refine_tol"] = opt.refine ? Json(opt.refine_tol) : Json(nullptr);
  rep["points"] = res.points.size();
  rep["ndv"] = res.ndv;
  Json iv = Json::array();
  for (const auto& i : res.intervals) iv.push_back(Json::array({i.lo, i.hi}));
  rep["intervals"] = iv;
  if (!res.warnings.empty()) rep["warnings"] = res.warnings;
  std::string csv_path = ctx.cfg.csv;
  if (csv_path.empty() && !ctx.cfg.out.empty()) {
    csv_path = ctx.cfg.out;
    const auto dot = csv_path.rfind('.');
    if (dot != std::string::npos && csv_path.find('/', dot) == std::string::npos) csv_path.resize(dot);
    csv_path += ".csv";
  }
  if (!csv_path.empty()) {
    write_file(csv_path, sweep_csv(res));
    rep["csv"] = csv_path;
  }
  emit(ctx, rep);
  return kExitOk;
}

int cmd_verify(Context& ctx) {
  const auto& pf = ctx.prob;
  const ClosedLoop cl = pf.K ? close_loop(pf.sys, *pf.K) : open_loop(pf.sys);
  Json rep = header(ctx);
  rep["closed_loop"] = pf.K.has_value();
  if (pf.K) rep["K"] = to_json(*pf.K);
  std::optional<double> gamma;
  if (pf.supply && pf.supply->kind == SupplyKind::l2gain) gamma = pf.supply->gamma;
  const Json v = verification(ctx, cl, gamma);
  merge(rep, v);
  emit(ctx, rep);
  return kExitOk;
}

void apply_auto_scale(Context& ctx) {
  // Equalize the Gram diagonal; the scaled problem describes the same plant.
  const Vec s = equalizing_scale(ctx.prob.sys.basis, ctx.prob.sys.r);
  const ScaledProblem sp = apply_kernel_scale(ctx.prob.sys, ctx.prob.uncertainty, ctx.prob.tuning, s);
  ctx.prob.sys = sp.sys;
  ctx.prob.uncertainty = sp.unc;
  ctx.prob.tuning = sp.tuning;
  Json sj = Json::array();
  for (Index i = 0; i < s.size(); ++i) sj.push_back(s(i));
  ctx.notes.push_back("kernel rescaled by " + sj.dump());
}

int run(Context& ctx) {
  const std::string text = read_file(ctx.cfg.config);
  ctx.input_hash = hex64(fnv1a64(text));
  ctx.prob = parse_problem(parse_json(text, ctx.cfg.config));
  if (ctx.cfg.auto_scale) apply_auto_scale(ctx);
  if (ctx.cfg.trace) ctx.solver.trace = &std::cerr;
  const std::string& c = ctx.cfg.command;
  if (c == "analyze") return cmd_analyze(ctx);
  if (c == "synthesize") return cmd_synthesize(ctx);
  if (c == "robust") return cmd_robust(ctx);
  if (c == "sweep") return cmd_sweep(ctx);
  if (c == "verify") return cmd_verify(ctx);
  throw InputError("unknown command '" + c + "'");
}

}  // namespace

int main(int argc, char** argv) {
  Context ctx;
  ctx.start = std::chrono::steady_clock::now();
  RunConfig& cfg = ctx.cfg;
  CLI::App app{"LMI analysis and synthesis for distributed-delay systems"};
  app.set_version_flag("--version", std::string(kVersion));
  app.add_option("command", cfg.command, "analyze | synthesize | robust | sweep | verify")
      ->required()
      ->check(CLI::IsMember({"analyze", "synthesize", "robust", "sweep", "verify"}));
  app.add_option("--config", cfg.config, "problem JSON")->required();
  app.add_option("--out", cfg.out, "report JSON path (stdout when omitted)");
  app.add_option("--csv", cfg.csv, "sweep CSV path (defaults next to --out)");
  app.add_option("--trajectory", cfg.trajectory, "free-response trajectory CSV path");
  app.add_option("--r-min", cfg.r_min, "sweep lower delay");
  app.add_option("--r-max", cfg.r_max, "sweep upper delay");
  app.add_option("--step", cfg.step, "sweep grid step")->check(CLI::PositiveNumber);
  app.add_option("--refine", cfg.refine, "bisection tolerance for interval ends (0 disables)")->check(CLI::NonNegativeNumber);
  app.add_option("--eta1", cfg.eta1, "tuning eta1");
  app.add_option("--eta2", cfg.eta2, "tuning eta2");
  app.add_option("--eps", cfg.eps, "tuning eps_1..eps_rho")->expected(1, -1);
  app.add_flag("--tune-grid", cfg.tune_grid, "grid search over eta1, eta2 in {-1, 0, 0.5, 1, 2}");
  app.add_option("--spectral-n", cfg.spectral_n, "pseudospectral discretization index")->check(CLI::Range(4, 400));
  app.add_option("--horizon", cfg.horizon, "free-response horizon")->check(CLI::PositiveNumber);
  app.add_option("--dt", cfg.dt, "simulation step upper bound")->check(CLI::PositiveNumber);
  app.add_option("--probe-horizon", cfg.probe_horizon, "horizon of each gain probe")->check(CLI::PositiveNumber);
  app.add_flag("--no-probes", cfg.no_probes, "skip the empirical gain probes");
  app.add_flag("--abscissa", cfg.abscissa_column, "add the spectral abscissa column to the sweep CSV");
  app.add_flag("--auto-scale", cfg.auto_scale, "rescale the kernel to equalize the Gram diagonal");
  app.add_option("--condition", cfg.condition, "analysis | simple | slack")
      ->check(CLI::IsMember({"analysis", "simple", "slack"}));
  app.add_option("--threads", cfg.threads, "sweep worker threads")->check(CLI::Range(1u, 64u));
  app.add_flag("--trace", cfg.trace, "solver iteration log (JSON lines) on stderr");
  app.add_option("--gap-tol", ctx.solver.gap_tol, "solver duality-gap tolerance")->check(CLI::PositiveNumber);
  app.add_option("--max-iter", ctx.solver.max_iter, "solver iteration cap")->check(CLI::PositiveNumber);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }
  try {
    return run(ctx);
  } catch (const NumericalFailure& e) {
    std::cerr << "ddsynth: numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const Error& e) {
    std::cerr << "ddsynth: " << e.what() << "\n";
    return kExitInput;
  } catch (const Json::exception& e) {
    std::cerr << "ddsynth: invalid configuration: " << e.what() << "\n";
    return kExitInput;
  }
}
