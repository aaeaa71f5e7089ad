#pragma once

#include "dbrrt/dynamics.hpp"
#include "dbrrt/geometry.hpp"

#include <span>

namespace dbrrt {

/// Workspace bounds plus a list of obstacles. Robot bodies must stay strictly inside
/// the workspace; leaving it counts as a collision with its walls.
struct Environment {
  int dim = 2;
  Eigen::Vector3d workspace_min = Eigen::Vector3d::Zero();
  Eigen::Vector3d workspace_max = Eigen::Vector3d::Zero();
  std::vector<Obstacle> obstacles;
  bool has_walls = true;

  void validate() const;

  /// Obstacle-free, wall-free environment (used for primitive generation).
  static Environment open(int dim = 2);
};

/// Signed distance and its gradient with respect to the full state.
struct SignedDistance {
  double distance = 0.0;
  Eigen::VectorXd gradient;
};

/// True iff every body, inflated by `inflation`, is disjoint from every obstacle and
/// inside the workspace.
bool is_state_free(const Environment &env, const DynamicalSystem &sys, const State &x,
                   double inflation = 0.0);

/// Minimum over (body, obstacle or wall) pairs of the separation distance; negative
/// when penetrating. Only the value.
double signed_distance_value(const Environment &env, const DynamicalSystem &sys, const State &x);

/// Value and central-difference gradient (step h on each state component). At points
/// where the nearest pair switches the gradient is a one-sided mix; callers treat it as
/// a subgradient.
SignedDistance signed_distance(const Environment &env, const DynamicalSystem &sys, const State &x,
                               double h = 1e-6);

/// Per-state discretised check of a whole motion.
bool is_motion_free(const Environment &env, const DynamicalSystem &sys,
                    std::span<const State> states, double inflation = 0.0);

} // namespace dbrrt
