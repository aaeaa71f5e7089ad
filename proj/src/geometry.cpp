#include "dbrrt/geometry.hpp"

#include "dbrrt/common.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dbrrt {

Obstacle Obstacle::box(const Eigen::Vector3d &center, const Eigen::Vector3d &half_extents,
                       std::string name) {
  Obstacle o;
  o.kind = ShapeKind::Box;
  o.center = center;
  o.half_extents = half_extents;
  o.name = std::move(name);
  return o;
}

Obstacle Obstacle::sphere(const Eigen::Vector3d &center, double radius, std::string name) {
  Obstacle o;
  o.kind = ShapeKind::Sphere;
  o.center = center;
  o.radius = radius;
  o.name = std::move(name);
  return o;
}

void RobotGeometry::validate() const {
  if (radii.empty())
    throw ConfigError("robot geometry needs at least one body");
  for (double r : radii)
    if (!(r > 0.0))
      throw ConfigError("robot body radii must be positive");
}

double point_box_distance(const Eigen::Vector3d &p, const Eigen::Vector3d &center,
                          const Eigen::Vector3d &half_extents, int dim) {
  // q: offset of p from the box surface along each axis (negative inside)
  double outside_sq = 0.0;
  double max_inside = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < dim; ++i) {
    const double q = std::abs(p[i] - center[i]) - half_extents[i];
    if (q > 0)
      outside_sq += q * q;
    max_inside = std::max(max_inside, q);
  }
  if (outside_sq > 0)
    return std::sqrt(outside_sq);
  return max_inside;
}

double ball_obstacle_distance(const Eigen::Vector3d &center, double radius, const Obstacle &obs,
                              int dim) {
  if (obs.kind == ShapeKind::Sphere)
    return (center.head(dim) - obs.center.head(dim)).norm() - obs.radius - radius;
  return point_box_distance(center, obs.center, obs.half_extents, dim) - radius;
}

} // namespace dbrrt
