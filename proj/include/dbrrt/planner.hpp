#pragma once

#include "dbrrt/problem.hpp"
#include "dbrrt/search.hpp"
#include "dbrrt/trajopt.hpp"

#include <functional>

namespace dbrrt {

enum class SearchVariant { Forward, Connect };

std::string to_string(SearchVariant v);
/// "forward" or "connect"; anything else throws UsageError.
SearchVariant parse_variant(const std::string &s);

struct PlannerConfig {
  double delta_0 = 0.3;
  double delta_rate = 0.9;       ///< d_r
  std::size_t num_primitives_0 = 200;
  double primitive_rate = 1.5;   ///< m_r
  /// Search iterations of the first Db-RRT call, multiplied by inner_growth each outer
  /// iteration. Iteration budgets keep runs deterministic; the time budgets are caps.
  std::size_t inner_iterations = 4000;
  double inner_growth = 1.5;
  double inner_time_budget = 10.0;
  double global_timeout = 60.0;
  int max_outer_iterations = 50;
  SearchVariant variant = SearchVariant::Forward;
  double goal_bias = 0.1;
  std::uint64_t seed = 0;
  double inflation = 0.0;
  OcpWeights weights;
  SolverOptions solver;
  /// Seed of the shuffle that picks primitive subsets from the library.
  std::uint64_t selection_seed = 0;

  void validate() const;
};

/// Planner settings for a problem from its system file defaults.
PlannerConfig default_planner_config(const SystemConfig &cfg);

struct IterationLog {
  int iteration = 0;
  double delta = 0.0;
  std::size_t num_primitives = 0;
  bool search_solved = false;
  double search_seconds = 0.0;
  SearchStats search_stats;
  /// Search output of this iteration, if the search succeeded.
  std::optional<DbSolution> search_solution;
  bool optimized = false;
  bool opt_converged = false;
  int opt_iterations = 0;
  double opt_seconds = 0.0;
  std::string opt_failure;
};

enum class PlannerOutcome { Solved, Timeout };

struct PlannerReport {
  PlannerOutcome outcome = PlannerOutcome::Timeout;
  Trajectory solution;
  /// Search output that the final optimization started from.
  std::optional<DbSolution> db_solution;
  double time_to_solution = 0.0; ///< seconds, planner start to validator pass
  double cost = 0.0;             ///< controls * dt
  std::vector<IterationLog> log;
  ConstraintReport validation;

  bool solved() const { return outcome == PlannerOutcome::Solved; }
  int outer_iterations() const { return static_cast<int>(log.size()); }
};

using Optimizer = std::function<OptResult(const OcpProblem &, const StateSequence &,
                                          const ControlSequence &, const SolverOptions &)>;

/// The outer loop: search with the current delta and primitive subset, optimize the
/// result, shrink delta on optimization failure, shrink delta and grow the subset on
/// search failure. `library` is the full precomputed set M_L.
PlannerReport idb_rrt(const ProblemInstance &problem, std::shared_ptr<const PrimitiveLibrary> library,
                      const PlannerConfig &config, const Optimizer &optimizer = solve_fddp);

/// A short search output padded so the optimizer has a horizon: a lone state becomes
/// ceil(1 s / dt) steps of the nominal control.
Trajectory warm_start_from(const DynamicalSystem &sys, const DbSolution &sol);

struct SolutionValidation {
  bool ok = false;
  ConstraintReport report;
  std::string reason;
};

/// check_feasible with the planner tolerances.
SolutionValidation validate_solution(const ProblemInstance &problem, const Trajectory &traj,
                                     const FeasibilityTolerances &tol = {});

} // namespace dbrrt
