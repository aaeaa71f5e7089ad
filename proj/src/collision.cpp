#include "dbrrt/collision.hpp"

#include <algorithm>
#include <limits>

namespace dbrrt {

void Environment::validate() const {
  if (dim != 2 && dim != 3)
    throw ConfigError("environment dimension must be 2 or 3");
  if (has_walls)
    for (int i = 0; i < dim; ++i)
      if (!(workspace_min[i] < workspace_max[i]))
        throw ConfigError("workspace_min must be below workspace_max on every axis");
  for (const auto &o : obstacles) {
    if (o.kind == ShapeKind::Sphere && !(o.radius > 0))
      throw ConfigError("obstacle '" + o.name + "' has a non-positive radius");
    if (o.kind == ShapeKind::Box && !(o.half_extents.head(dim).array() > 0).all())
      throw ConfigError("obstacle '" + o.name + "' has non-positive half extents");
  }
}

Environment Environment::open(int dim) {
  Environment env;
  env.dim = dim;
  env.has_walls = false;
  return env;
}

namespace {

std::vector<Eigen::Vector3d> &scratch_bodies() {
  thread_local std::vector<Eigen::Vector3d> bodies;
  return bodies;
}

double wall_distance(const Environment &env, const Eigen::Vector3d &c, double r) {
  double d = std::numeric_limits<double>::infinity();
  for (int i = 0; i < env.dim; ++i)
    d = std::min({d, c[i] - env.workspace_min[i], env.workspace_max[i] - c[i]});
  return d - r;
}

} // namespace

bool is_state_free(const Environment &env, const DynamicalSystem &sys, const State &x,
                   double inflation) {
  auto &bodies = scratch_bodies();
  sys.body_positions(x, bodies);
  const auto &radii = sys.geometry().radii;
  for (std::size_t b = 0; b < bodies.size(); ++b) {
    const double r = radii[b] + inflation;
    if (env.has_walls && wall_distance(env, bodies[b], r) <= 0.0)
      return false;
    for (const auto &obs : env.obstacles)
      if (ball_obstacle_distance(bodies[b], r, obs, env.dim) <= 0.0)
        return false;
  }
  return true;
}

double signed_distance_value(const Environment &env, const DynamicalSystem &sys, const State &x) {
  auto &bodies = scratch_bodies();
  sys.body_positions(x, bodies);
  const auto &radii = sys.geometry().radii;
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b < bodies.size(); ++b) {
    if (env.has_walls)
      d = std::min(d, wall_distance(env, bodies[b], radii[b]));
    for (const auto &obs : env.obstacles)
      d = std::min(d, ball_obstacle_distance(bodies[b], radii[b], obs, env.dim));
  }
  return d;
}

SignedDistance signed_distance(const Environment &env, const DynamicalSystem &sys, const State &x,
                               double h) {
  SignedDistance out;
  out.distance = signed_distance_value(env, sys, x);
  out.gradient = Eigen::VectorXd::Zero(x.size());
  if (!std::isfinite(out.distance))
    return out;
  State xp = x, xm = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    xp[i] += h;
    xm[i] -= h;
    out.gradient[i] =
        (signed_distance_value(env, sys, xp) - signed_distance_value(env, sys, xm)) / (2 * h);
    xp[i] = x[i];
    xm[i] = x[i];
  }
  return out;
}

bool is_motion_free(const Environment &env, const DynamicalSystem &sys,
                    std::span<const State> states, double inflation) {
  return std::all_of(states.begin(), states.end(), [&](const State &x) {
    return is_state_free(env, sys, x, inflation);
  });
}

} // namespace dbrrt
