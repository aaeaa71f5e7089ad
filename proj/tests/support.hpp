#pragma once

#include "dbrrt/dynamics.hpp"

#include <limits>
#include <memory>

namespace dbrrt::testing {

/// p_dot = v, v_dot = u. Linear, so step is exactly x + [v, u] dt.
class DoubleIntegrator final : public DynamicalSystem {
public:
  explicit DoubleIntegrator(double dt = 0.1, double u_max = 1e3)
      : DynamicalSystem(make_spec(dt, u_max), RobotGeometry{{0.1}}) {}

  void vector_field(const State &x, const Control &u, Eigen::Ref<State> f) const override {
    f[0] = x[1];
    f[1] = u[0];
  }
  void vector_field_jacobians(const State &, const Control &, Eigen::Ref<Matrix> Fx,
                              Eigen::Ref<Matrix> Fu) const override {
    Fx.setZero();
    Fu.setZero();
    Fx(0, 1) = 1.0;
    Fu(1, 0) = 1.0;
  }
  bool has_analytic_jacobians() const override { return true; }
  void body_positions(const State &x, std::vector<Eigen::Vector3d> &out) const override {
    out.assign(1, Eigen::Vector3d(x[0], 0.0, 0.0));
  }
  std::vector<int> acceleration_rows() const override { return {1}; }

private:
  static SystemSpec make_spec(double dt, double u_max) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    SystemSpec s;
    s.name = "double_integrator";
    s.nx = 2;
    s.nu = 1;
    s.dt = dt;
    s.state_lower = Eigen::Vector2d(-inf, -inf);
    s.state_upper = Eigen::Vector2d(inf, inf);
    s.control_lower = Eigen::VectorXd::Constant(1, -u_max);
    s.control_upper = Eigen::VectorXd::Constant(1, u_max);
    s.distance_weights = Eigen::Vector2d(1.0, 0.2);
    s.angle_mask = {false, false};
    s.translation_mask = {true, false};
    return s;
  }
};

inline Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v)
    out[i++] = x;
  return out;
}

} // namespace dbrrt::testing
