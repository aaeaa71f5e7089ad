#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

namespace dbrrt {

/// Analytic obstacle shapes. Boxes are axis aligned.
enum class ShapeKind { Box, Sphere };

struct Obstacle {
  ShapeKind kind = ShapeKind::Box;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d half_extents = Eigen::Vector3d::Zero(); // Box only
  double radius = 0.0;                                   // Sphere only
  std::string name;

  static Obstacle box(const Eigen::Vector3d &center, const Eigen::Vector3d &half_extents,
                      std::string name = {});
  static Obstacle sphere(const Eigen::Vector3d &center, double radius, std::string name = {});
};

/// Collision footprint of a robot: discs (2-D) or spheres (3-D) whose centers are
/// computed from the state by the owning system.
struct RobotGeometry {
  std::vector<double> radii;

  std::size_t num_bodies() const { return radii.size(); }
  void validate() const;
};

/// Signed distance between a ball (center, radius) and an obstacle, using the first
/// `dim` coordinates. Negative when penetrating.
double ball_obstacle_distance(const Eigen::Vector3d &center, double radius, const Obstacle &obs,
                              int dim);

/// Signed distance from a point to an axis-aligned box (negative inside).
double point_box_distance(const Eigen::Vector3d &p, const Eigen::Vector3d &center,
                          const Eigen::Vector3d &half_extents, int dim);

} // namespace dbrrt
