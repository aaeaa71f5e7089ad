#pragma once

#include "dbrrt/dynamics.hpp"

namespace dbrrt {

// Built-in systems. Physical parameters default to commonly used benchmark values
// and can be overridden from a system file.

/// First-order unicycle: state (x, y, theta), control (v, omega).
class Unicycle1 final : public DynamicalSystem {
public:
  struct Params {
    double dt = 0.1;
    double min_vel = -0.5, max_vel = 0.5;
    double max_angular_vel = 0.5;
    double radius = 0.2;
    std::vector<double> distance_weights; // empty: built-in default
  };
  Unicycle1();
  explicit Unicycle1(const Params &p);

  void vector_field(const State &x, const Control &u, Eigen::Ref<State> f) const override;
  void vector_field_jacobians(const State &x, const Control &u, Eigen::Ref<Matrix> Fx,
                              Eigen::Ref<Matrix> Fu) const override;
  bool has_analytic_jacobians() const override { return true; }
  void body_positions(const State &x, std::vector<Eigen::Vector3d> &out) const override;
  std::vector<int> acceleration_rows() const override { return {}; }
};

/// Second-order unicycle: state (x, y, theta, v, omega), control (a, alpha).
class Unicycle2 final : public DynamicalSystem {
public:
  struct Params {
    double dt = 0.1;
    double max_vel = 0.5, max_angular_vel = 0.5;
    double max_acc = 0.25, max_angular_acc = 0.25;
    double radius = 0.2;
    std::vector<double> distance_weights; // empty: built-in default
  };
  Unicycle2();
  explicit Unicycle2(const Params &p);

  void vector_field(const State &x, const Control &u, Eigen::Ref<State> f) const override;
  void vector_field_jacobians(const State &x, const Control &u, Eigen::Ref<Matrix> Fx,
                              Eigen::Ref<Matrix> Fu) const override;
  bool has_analytic_jacobians() const override { return true; }
  void body_positions(const State &x, std::vector<Eigen::Vector3d> &out) const override;
  std::vector<int> acceleration_rows() const override { return {3, 4}; }
};

/// Kinematic car towing one trailer: state (x, y, theta_car, theta_trailer),
/// control (v, steering angle). (x, y) is the car's rear axle, which is also the hitch.
class CarWithTrailer final : public DynamicalSystem {
public:
  struct Params {
    double dt = 0.1;
    double wheelbase = 0.25;
    double hitch_length = 0.5;
    double min_vel = -0.1, max_vel = 0.5;
    double max_steering = std::numbers::pi / 3.0;
    double body_radius = 0.15;
    std::vector<double> car_offsets{0.0, 0.2};
    std::vector<double> trailer_offsets{0.5};
    std::vector<double> distance_weights;
  };
  CarWithTrailer();
  explicit CarWithTrailer(const Params &p);

  void vector_field(const State &x, const Control &u, Eigen::Ref<State> f) const override;
  void vector_field_jacobians(const State &x, const Control &u, Eigen::Ref<Matrix> Fx,
                              Eigen::Ref<Matrix> Fu) const override;
  bool has_analytic_jacobians() const override { return true; }
  void body_positions(const State &x, std::vector<Eigen::Vector3d> &out) const override;
  std::vector<int> acceleration_rows() const override { return {}; }

private:
  Params p_;
};

/// Two-link underactuated pendulum with an elbow motor. State (q1, q2, dq1, dq2);
/// q = 0 hangs straight down from the fixed base at the origin.
class Acrobot final : public DynamicalSystem {
public:
  struct Params {
    double dt = 0.01;
    double m1 = 1.0, m2 = 1.0;
    double l1 = 1.0, l2 = 1.0;
    double lc1 = 0.5, lc2 = 0.5;
    /// moments of inertia about the joints (uniform rods: m l^2 / 3)
    double I1 = 1.0 / 3.0, I2 = 1.0 / 3.0;
    double g = 9.81;
    double max_torque = 10.0;
    double max_angular_vel = 8.0;
    double link_radius = 0.08;
    int discs_per_link = 4;
    std::vector<double> distance_weights;
  };
  Acrobot();
  explicit Acrobot(const Params &p);

  void vector_field(const State &x, const Control &u, Eigen::Ref<State> f) const override;
  void vector_field_jacobians(const State &x, const Control &u, Eigen::Ref<Matrix> Fx,
                              Eigen::Ref<Matrix> Fu) const override;
  bool has_analytic_jacobians() const override { return true; }
  void body_positions(const State &x, std::vector<Eigen::Vector3d> &out) const override;
  std::vector<int> acceleration_rows() const override { return {2, 3}; }

  const Params &params() const { return p_; }

private:
  Params p_;
};

/// Planar quadrotor with two rotors: state (x, y, theta, vx, vy, omega), control
/// (u1, u2) in units of hover thrust per rotor, so (1, 1) hovers and the upper
/// bound is the thrust-to-weight ratio.
class PlanarRotor final : public DynamicalSystem {
public:
  struct Params {
    double dt = 0.01;
    double mass = 2.5;
    double inertia = 1.2;
    double arm_length = 0.3;
    double g = 9.81;
    double thrust_to_weight = 1.3;
    double max_vel = 4.0;
    double max_angular_vel = 8.0;
    double body_radius = 0.12;
    std::vector<double> body_offsets{-0.18, 0.18};
    std::vector<double> distance_weights;
  };
  PlanarRotor();
  explicit PlanarRotor(const Params &p);

  void vector_field(const State &x, const Control &u, Eigen::Ref<State> f) const override;
  void vector_field_jacobians(const State &x, const Control &u, Eigen::Ref<Matrix> Fx,
                              Eigen::Ref<Matrix> Fu) const override;
  bool has_analytic_jacobians() const override { return true; }
  void body_positions(const State &x, std::vector<Eigen::Vector3d> &out) const override;
  std::vector<int> acceleration_rows() const override { return {3, 4, 5}; }
  Control nominal_control() const override;

  const Params &params() const { return p_; }

private:
  Params p_;
};

} // namespace dbrrt
