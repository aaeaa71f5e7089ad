#pragma once

#include "dbrrt/common.hpp"
#include "dbrrt/geometry.hpp"

#include <memory>
#include <random>
#include <string>
#include <vector>

namespace YAML {
class Node;
}

namespace dbrrt {

/// State/control spaces, time step and the weighted metric of one system.
struct SystemSpec {
  std::string name;
  int nx = 0;
  int nu = 0;
  double dt = 0.0;
  State state_lower;
  State state_upper;
  Control control_lower;
  Control control_upper;
  Eigen::VectorXd distance_weights;
  std::vector<bool> angle_mask;
  std::vector<bool> translation_mask;

  /// Throws ConfigError when any invariant is broken.
  void validate() const;
  int translation_dim() const;
  bool is_angle(int i) const { return angle_mask[static_cast<std::size_t>(i)]; }
  bool is_translation(int i) const { return translation_mask[static_cast<std::size_t>(i)]; }
};

/// Weighted Euclidean distance with wrapped differences on angle components.
double distance(const SystemSpec &spec, const State &a, const State &b);

/// Componentwise difference a - b (wrapped on angles).
State state_diff(const SystemSpec &spec, const State &a, const State &b);

/// Wraps angle components into [-pi, pi).
void normalize(const SystemSpec &spec, Eigen::Ref<State> x);
State normalized(const SystemSpec &spec, const State &x);

/// Componentwise bounds check; angle components are not checked.
bool is_within_bounds(const SystemSpec &spec, const State &x, double tol = 0.0);
bool is_control_within_bounds(const SystemSpec &spec, const Control &u, double tol = 0.0);

/// Uniform sample inside [lower, upper]. Angles use the box when it is narrower than
/// the circle and [-pi, pi) otherwise. Throws ConfigError if a non-angle component of
/// the box is unbounded.
State sample_uniform_state(const SystemSpec &spec, const State &lower, const State &upper,
                           std::mt19937_64 &rng);
State sample_uniform_state(const SystemSpec &spec, std::mt19937_64 &rng);

/// Adds `offset` to the translation-masked components, in mask order.
State translate_state(const SystemSpec &spec, const State &x, const Eigen::VectorXd &offset);

/// The translation-masked components of x.
Eigen::VectorXd translation_part(const SystemSpec &spec, const State &x);

/// Continuous-time dynamics x_dot = f(x, u), discretised with explicit Euler.
///
/// Systems are immutable after construction, so one instance can be shared across
/// threads. Jacobians of f are analytic for every built-in system; the finite
/// difference path is kept for systems without them and for verification.
class DynamicalSystem {
public:
  DynamicalSystem(SystemSpec spec, RobotGeometry geometry);
  virtual ~DynamicalSystem() = default;

  DynamicalSystem(const DynamicalSystem &) = delete;
  DynamicalSystem &operator=(const DynamicalSystem &) = delete;

  const SystemSpec &spec() const { return spec_; }
  const RobotGeometry &geometry() const { return geometry_; }
  const std::string &name() const { return spec_.name; }
  int nx() const { return spec_.nx; }
  int nu() const { return spec_.nu; }
  double dt() const { return spec_.dt; }

  virtual void vector_field(const State &x, const Control &u, Eigen::Ref<State> f) const = 0;

  /// Fx = df/dx, Fu = df/du. The default implementation uses central differences.
  virtual void vector_field_jacobians(const State &x, const Control &u, Eigen::Ref<Matrix> Fx,
                                      Eigen::Ref<Matrix> Fu) const;
  virtual bool has_analytic_jacobians() const { return false; }

  /// World positions of the collision bodies (z = 0 for planar systems).
  virtual void body_positions(const State &x, std::vector<Eigen::Vector3d> &out) const = 0;

  /// Rows of f that are accelerations (time derivatives of velocity components).
  virtual std::vector<int> acceleration_rows() const = 0;

  /// A control that is a sensible default (hover thrust, zero torque, ...).
  virtual Control nominal_control() const;

  /// x + f(x, u) dt with angles wrapped. Throws UsageError on dimension mismatch
  /// or non-finite input.
  State step(const State &x, const Control &u) const;
  void step_into(const State &x, const Control &u, Eigen::Ref<State> out) const;

  /// Jacobians of step with respect to x and u.
  void step_jacobians(const State &x, const Control &u, Eigen::Ref<Matrix> Jx,
                      Eigen::Ref<Matrix> Ju) const;

  /// Central finite differences of step, used as the reference for step_jacobians.
  void step_jacobians_fd(const State &x, const Control &u, Eigen::Ref<Matrix> Jx,
                         Eigen::Ref<Matrix> Ju, double h = 1e-6) const;

  void check_dimensions(const State &x, const Control &u) const;

private:
  SystemSpec spec_;
  RobotGeometry geometry_;
};

using SystemPtr = std::shared_ptr<const DynamicalSystem>;

/// Names of the built-in systems.
std::vector<std::string> available_systems();

/// Builds a system from a parameter node (the `system` section of a system file).
SystemPtr make_system(const YAML::Node &node);

/// Builds a system with its built-in default parameters.
SystemPtr make_default_system(const std::string &name);

} // namespace dbrrt
