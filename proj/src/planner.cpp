#include "dbrrt/planner.hpp"

#include <cmath>

namespace dbrrt {

std::string to_string(SearchVariant v) { return v == SearchVariant::Forward ? "forward" : "connect"; }

SearchVariant parse_variant(const std::string &s) {
  if (s == "forward")
    return SearchVariant::Forward;
  if (s == "connect")
    return SearchVariant::Connect;
  throw UsageError("variant must be 'forward' or 'connect', got '" + s + "'");
}

void PlannerConfig::validate() const {
  if (!(delta_0 > 0))
    throw UsageError("delta_0 must be positive");
  if (!(delta_rate > 0 && delta_rate < 1))
    throw UsageError("delta_rate must lie in (0, 1)");
  if (!(primitive_rate > 1))
    throw UsageError("primitive_rate must exceed 1");
  if (num_primitives_0 == 0 || inner_iterations == 0)
    throw UsageError("num_primitives_0 and inner_iterations must be positive");
  if (!(inner_growth >= 1) || !(global_timeout > 0) || !(inner_time_budget > 0))
    throw UsageError("inner_growth >= 1 and positive time budgets are required");
  if (!(goal_bias >= 0 && goal_bias <= 1))
    throw UsageError("goal_bias must lie in [0, 1]");
}

PlannerConfig default_planner_config(const SystemConfig &cfg) {
  PlannerConfig c;
  c.delta_0 = cfg.planner.delta_0;
  c.num_primitives_0 = cfg.planner.num_primitives_0;
  c.goal_bias = cfg.planner.goal_bias;
  c.inner_iterations = cfg.planner.inner_iterations;
  c.weights = cfg.weights;
  return c;
}

Trajectory warm_start_from(const DynamicalSystem &sys, const DbSolution &sol) {
  Trajectory t = sol.trajectory();
  if (t.controls.empty()) {
    const auto steps = static_cast<std::size_t>(std::ceil(1.0 / sys.dt() - 1e-9));
    t.states.assign(steps + 1, t.states.front());
    t.controls.assign(steps, sys.nominal_control());
  }
  return t;
}

SolutionValidation validate_solution(const ProblemInstance &problem, const Trajectory &traj,
                                     const FeasibilityTolerances &tol) {
  SolutionValidation v;
  if (traj.states.empty() || traj.states.size() != traj.controls.size() + 1) {
    v.reason = "trajectory must have one more state than controls";
    return v;
  }
  v.report = check_feasible(problem.system(), problem.env, problem.start, problem.goal, traj);
  v.ok = v.report.passes(tol);
  if (!v.ok)
    v.reason = v.report.failures(tol);
  return v;
}

PlannerReport idb_rrt(const ProblemInstance &problem, std::shared_ptr<const PrimitiveLibrary> library,
                      const PlannerConfig &config, const Optimizer &optimizer) {
  using Clock = std::chrono::steady_clock;
  config.validate();
  if (!library || library->empty())
    throw UsageError("planner needs a non-empty primitive library");
  const auto t0 = Clock::now();
  const auto deadline = t0 + std::chrono::duration_cast<Clock::duration>(
                                 std::chrono::duration<double>(config.global_timeout));
  const auto &sys = problem.system_ptr();
  const PrimitiveSelector selector(library, config.selection_seed);
  std::mt19937_64 rng(config.seed);

  PlannerReport report;
  double delta = config.delta_0;
  std::size_t count = std::min(config.num_primitives_0, selector.library_size());

  for (int i = 0; i < config.max_outer_iterations && Clock::now() < deadline; ++i) {
    IterationLog log;
    log.iteration = i;
    log.delta = delta;
    log.num_primitives = count;

    const PrimitiveLibrary lib = selector.choose(count);
    SearchParams sp;
    sp.goal_bias = config.goal_bias;
    sp.max_iterations = static_cast<std::size_t>(static_cast<double>(config.inner_iterations) *
                                                 std::pow(config.inner_growth, i));
    sp.time_budget = config.inner_time_budget * std::pow(config.inner_growth, i);
    sp.deadline = deadline;
    sp.sample_lower = problem.sample_lower;
    sp.sample_upper = problem.sample_upper;
    sp.inflation = config.inflation;
    const SearchResult sr =
        config.variant == SearchVariant::Forward
            ? db_rrt(sys, problem.start, problem.goal, problem.env, lib, delta, sp, rng)
            : db_rrt_connect(sys, problem.start, problem.goal, problem.env, lib, lib.reversed(), delta,
                             sp, rng);
    log.search_solved = sr.solved();
    log.search_seconds = sr.stats.seconds;
    log.search_stats = sr.stats;
    log.search_solution = sr.solution;

    if (!sr.solved()) {
      report.log.push_back(log);
      delta *= config.delta_rate;
      count = selector.increased_count(count, config.primitive_rate);
      continue;
    }

    const Trajectory warm = warm_start_from(*sys, *sr.solution);
    OcpProblem ocp;
    ocp.system = sys;
    ocp.horizon = static_cast<int>(warm.controls.size());
    ocp.x_start = problem.start;
    ocp.x_goal = problem.goal;
    ocp.env = problem.env;
    ocp.weights = config.weights;
    SolverOptions opts = config.solver;
    opts.deadline = deadline;
    const auto opt_start = Clock::now();
    const OptResult opt = optimizer(ocp, warm.states, warm.controls, opts);
    log.optimized = true;
    // a feasible iterate is good enough even if the stationarity test has not fired yet
    log.opt_converged = !opt.diverged && (opt.converged || opt.feasible);
    log.opt_iterations = opt.iterations;
    log.opt_seconds = std::chrono::duration<double>(Clock::now() - opt_start).count();

    if (log.opt_converged) {
      const Trajectory traj = opt.trajectory();
      const SolutionValidation v = validate_solution(problem, traj, config.solver.tolerances);
      if (v.ok) {
        report.log.push_back(log);
        report.outcome = PlannerOutcome::Solved;
        report.solution = traj;
        report.db_solution = sr.solution;
        report.validation = v.report;
        report.cost = static_cast<double>(traj.controls.size()) * sys->dt();
        report.time_to_solution = std::chrono::duration<double>(Clock::now() - t0).count();
        return report;
      }
      log.opt_failure = "validator: " + v.reason;
    } else {
      log.opt_failure = opt.diverged ? "diverged" : opt.report.failures(opts.tolerances);
      if (log.opt_failure.empty())
        log.opt_failure = "not converged";
    }
    report.log.push_back(log);
    delta *= config.delta_rate;
  }
  report.time_to_solution = std::chrono::duration<double>(Clock::now() - t0).count();
  return report;
}

} // namespace dbrrt
