#pragma once

#include "dbrrt/collision.hpp"
#include "dbrrt/dynamics.hpp"

#include <chrono>
#include <functional>
#include <limits>
#include <optional>
#include <string>

namespace dbrrt {

/// Penalty weights of the optimal control problem. Inequalities use a squared max
/// activation: w * max(0, violation)^2.
struct OcpWeights {
  double goal = 200.0;
  double collision = 100.0;
  double bounds = 100.0;
  double control_reg = 1e-2;
  double accel_reg = 1e-3;
  /// Penalised clearance: states closer than this to an obstacle pay a penalty.
  double collision_margin = 0.03;
  /// State bound penalties start this far inside the bound.
  double bounds_margin = 0.01;
};

/// Fixed-horizon problem: min sum_k c(x_k, u_k) + c_K(x_K) s.t. x_{k+1} = step(x_k, u_k),
/// x_0 = x_start. The goal, collision avoidance and bounds enter as penalties.
struct OcpProblem {
  SystemPtr system;
  int horizon = 0;
  State x_start;
  State x_goal;
  Environment env;
  OcpWeights weights;

  void validate() const;
};

/// Value, gradient and Gauss-Newton Hessian of a stage cost.
struct CostTerms {
  double value = 0.0;
  Eigen::VectorXd lx, lu;
  Matrix lxx, luu, lux;
};

CostTerms running_cost(const OcpProblem &prob, const State &x, const Control &u, int k);
CostTerms terminal_cost(const OcpProblem &prob, const State &x);

double running_cost_value(const OcpProblem &prob, const State &x, const Control &u);
double terminal_cost_value(const OcpProblem &prob, const State &x);

/// Finite-difference gradient of a scalar cost, for tests and diagnostics.
Eigen::VectorXd cost_gradient_fd(const std::function<double(const Eigen::VectorXd &)> &f,
                                 const Eigen::VectorXd &z, double h = 1e-6);

/// Feasibility tolerances used when judging a trajectory.
struct FeasibilityTolerances {
  double dynamics = 1e-5;      ///< weighted per-step defect
  double goal = 1e-3;          ///< weighted distance of the last state to the goal
  double start = 1e-9;         ///< weighted distance of the first state to the start
  double penetration = 0.0;    ///< required: min signed distance > -penetration
  double state_bounds = 1e-6;
  double control_bounds = 0.0;
};

/// Independent re-check of a trajectory against dynamics, bounds, collisions and
/// boundary conditions.
struct ConstraintReport {
  double max_defect = 0.0;
  std::vector<double> defects;
  double start_distance = 0.0;
  double goal_distance = 0.0;
  double min_signed_distance = std::numeric_limits<double>::infinity();
  double max_state_bound_violation = 0.0;
  double max_control_bound_violation = 0.0;
  bool all_states_free = true;

  bool passes(const FeasibilityTolerances &tol) const;
  /// Human-readable list of the tolerances that fail.
  std::string failures(const FeasibilityTolerances &tol) const;
};

ConstraintReport check_feasible(const DynamicalSystem &sys, const Environment &env,
                                const State &x_start, const State &x_goal, const Trajectory &traj);

struct SolverOptions {
  int max_iterations = 200;
  /// Converged when gaps are closed and sum_k |Q_u,k|^2 falls below this.
  double stop_tolerance = 1e-9;
  /// Also converged when the expected decrease of a full step is below this.
  double expected_improvement_tolerance = 1e-10;
  double reg_init = 1e-9;
  double reg_min = 1e-9;
  double reg_max = 1e9;
  double reg_factor = 10.0;
  double accept_step = 0.1;
  double accept_ascent = 2.0;
  double step_increase_reg = 0.01;
  double step_decrease_reg = 0.5;
  int line_search_steps = 10;
  std::optional<std::chrono::steady_clock::time_point> deadline;
  FeasibilityTolerances tolerances;
};

struct OptResult {
  StateSequence states;
  ControlSequence controls;
  bool converged = false;
  bool diverged = false;
  bool feasible = false; ///< constraint report passes the tolerances
  int iterations = 0;
  double cost = 0.0;
  double max_defect = 0.0;
  ConstraintReport report;
  std::vector<double> cost_history;   ///< cost after each accepted iteration
  std::vector<double> defect_history; ///< max gap after each accepted iteration
  std::vector<bool> gaps_closed_history;

  Trajectory trajectory() const { return {states, controls}; }
};

/// Feasibility-driven DDP. Accepts an infeasible warm start (init_states need not
/// satisfy the dynamics); gaps are contracted by the forward pass. Controls are kept
/// inside their box by clamping, with clamped directions removed from the Newton step.
OptResult solve_fddp(const OcpProblem &prob, const StateSequence &init_states,
                     const ControlSequence &init_controls, const SolverOptions &options = {});

} // namespace dbrrt
