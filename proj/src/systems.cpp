#include "dbrrt/systems.hpp"

#include <Eigen/LU>
#include <yaml-cpp/yaml.h>

#include <limits>

namespace dbrrt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPi = std::numbers::pi;

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v)
    out[i++] = x;
  return out;
}

Eigen::VectorXd weights_or(const std::vector<double> &given, Eigen::VectorXd fallback) {
  if (given.empty())
    return fallback;
  if (static_cast<Eigen::Index>(given.size()) != fallback.size())
    throw ConfigError("distance_weights has length " + std::to_string(given.size()) +
                      ", expected " + std::to_string(fallback.size()));
  return Eigen::Map<const Eigen::VectorXd>(given.data(), fallback.size());
}

SystemSpec unicycle1_spec(const Unicycle1::Params &p) {
  SystemSpec s;
  s.name = "unicycle1";
  s.nx = 3;
  s.nu = 2;
  s.dt = p.dt;
  s.state_lower = vec({-kInf, -kInf, -kPi});
  s.state_upper = vec({kInf, kInf, kPi});
  s.control_lower = vec({p.min_vel, -p.max_angular_vel});
  s.control_upper = vec({p.max_vel, p.max_angular_vel});
  s.distance_weights = weights_or(p.distance_weights, vec({1.0, 1.0, 0.5}));
  s.angle_mask = {false, false, true};
  s.translation_mask = {true, true, false};
  return s;
}

SystemSpec unicycle2_spec(const Unicycle2::Params &p) {
  SystemSpec s;
  s.name = "unicycle2";
  s.nx = 5;
  s.nu = 2;
  s.dt = p.dt;
  s.state_lower = vec({-kInf, -kInf, -kPi, -p.max_vel, -p.max_angular_vel});
  s.state_upper = vec({kInf, kInf, kPi, p.max_vel, p.max_angular_vel});
  s.control_lower = vec({-p.max_acc, -p.max_angular_acc});
  s.control_upper = vec({p.max_acc, p.max_angular_acc});
  s.distance_weights = weights_or(p.distance_weights, vec({1.0, 1.0, 0.5, 0.2, 0.2}));
  s.angle_mask = {false, false, true, false, false};
  s.translation_mask = {true, true, false, false, false};
  return s;
}

SystemSpec car_trailer_spec(const CarWithTrailer::Params &p) {
  SystemSpec s;
  s.name = "car_with_trailer";
  s.nx = 4;
  s.nu = 2;
  s.dt = p.dt;
  s.state_lower = vec({-kInf, -kInf, -kPi, -kPi});
  s.state_upper = vec({kInf, kInf, kPi, kPi});
  s.control_lower = vec({p.min_vel, -p.max_steering});
  s.control_upper = vec({p.max_vel, p.max_steering});
  s.distance_weights = weights_or(p.distance_weights, vec({1.0, 1.0, 0.5, 0.5}));
  s.angle_mask = {false, false, true, true};
  s.translation_mask = {true, true, false, false};
  return s;
}

SystemSpec acrobot_spec(const Acrobot::Params &p) {
  SystemSpec s;
  s.name = "acrobot";
  s.nx = 4;
  s.nu = 1;
  s.dt = p.dt;
  s.state_lower = vec({-kPi, -kPi, -p.max_angular_vel, -p.max_angular_vel});
  s.state_upper = vec({kPi, kPi, p.max_angular_vel, p.max_angular_vel});
  s.control_lower = vec({-p.max_torque});
  s.control_upper = vec({p.max_torque});
  s.distance_weights = weights_or(p.distance_weights, vec({0.5, 0.5, 0.2, 0.2}));
  s.angle_mask = {true, true, false, false};
  s.translation_mask = {false, false, false, false};
  return s;
}

SystemSpec planar_rotor_spec(const PlanarRotor::Params &p) {
  SystemSpec s;
  s.name = "planar_rotor";
  s.nx = 6;
  s.nu = 2;
  s.dt = p.dt;
  s.state_lower = vec({-kInf, -kInf, -kPi, -p.max_vel, -p.max_vel, -p.max_angular_vel});
  s.state_upper = vec({kInf, kInf, kPi, p.max_vel, p.max_vel, p.max_angular_vel});
  s.control_lower = vec({0.0, 0.0});
  s.control_upper = vec({p.thrust_to_weight, p.thrust_to_weight});
  s.distance_weights = weights_or(p.distance_weights, vec({1.0, 1.0, 0.5, 0.2, 0.2, 0.2}));
  s.angle_mask = {false, false, true, false, false, false};
  s.translation_mask = {true, true, false, false, false, false};
  return s;
}

RobotGeometry discs(std::size_t n, double radius) {
  RobotGeometry g;
  g.radii.assign(n, radius);
  return g;
}

} // namespace

// ---------------------------------------------------------------------------

Unicycle1::Unicycle1(const Params &p) : DynamicalSystem(unicycle1_spec(p), discs(1, p.radius)) {}

void Unicycle1::vector_field(const State &x, const Control &u, Eigen::Ref<State> f) const {
  f[0] = u[0] * std::cos(x[2]);
  f[1] = u[0] * std::sin(x[2]);
  f[2] = u[1];
}

void Unicycle1::vector_field_jacobians(const State &x, const Control &u, Eigen::Ref<Matrix> Fx,
                                       Eigen::Ref<Matrix> Fu) const {
  const double c = std::cos(x[2]), s = std::sin(x[2]);
  Fx.setZero();
  Fu.setZero();
  Fx(0, 2) = -u[0] * s;
  Fx(1, 2) = u[0] * c;
  Fu(0, 0) = c;
  Fu(1, 0) = s;
  Fu(2, 1) = 1.0;
}

void Unicycle1::body_positions(const State &x, std::vector<Eigen::Vector3d> &out) const {
  out.assign(1, Eigen::Vector3d(x[0], x[1], 0.0));
}

// ---------------------------------------------------------------------------

Unicycle2::Unicycle2(const Params &p) : DynamicalSystem(unicycle2_spec(p), discs(1, p.radius)) {}

void Unicycle2::vector_field(const State &x, const Control &u, Eigen::Ref<State> f) const {
  f[0] = x[3] * std::cos(x[2]);
  f[1] = x[3] * std::sin(x[2]);
  f[2] = x[4];
  f[3] = u[0];
  f[4] = u[1];
}

void Unicycle2::vector_field_jacobians(const State &x, const Control &, Eigen::Ref<Matrix> Fx,
                                       Eigen::Ref<Matrix> Fu) const {
  const double c = std::cos(x[2]), s = std::sin(x[2]);
  Fx.setZero();
  Fu.setZero();
  Fx(0, 2) = -x[3] * s;
  Fx(0, 3) = c;
  Fx(1, 2) = x[3] * c;
  Fx(1, 3) = s;
  Fx(2, 4) = 1.0;
  Fu(3, 0) = 1.0;
  Fu(4, 1) = 1.0;
}

void Unicycle2::body_positions(const State &x, std::vector<Eigen::Vector3d> &out) const {
  out.assign(1, Eigen::Vector3d(x[0], x[1], 0.0));
}

// ---------------------------------------------------------------------------

CarWithTrailer::CarWithTrailer(const Params &p)
    : DynamicalSystem(car_trailer_spec(p),
                      discs(p.car_offsets.size() + p.trailer_offsets.size(), p.body_radius)),
      p_(p) {
  if (!(p.wheelbase > 0) || !(p.hitch_length > 0))
    throw ConfigError("car_with_trailer: wheelbase and hitch_length must be positive");
  if (p.car_offsets.empty())
    throw ConfigError("car_with_trailer: at least one car body disc is required");
}

void CarWithTrailer::vector_field(const State &x, const Control &u, Eigen::Ref<State> f) const {
  f[0] = u[0] * std::cos(x[2]);
  f[1] = u[0] * std::sin(x[2]);
  f[2] = u[0] / p_.wheelbase * std::tan(u[1]);
  f[3] = u[0] / p_.hitch_length * std::sin(x[2] - x[3]);
}

void CarWithTrailer::vector_field_jacobians(const State &x, const Control &u,
                                            Eigen::Ref<Matrix> Fx, Eigen::Ref<Matrix> Fu) const {
  const double c = std::cos(x[2]), s = std::sin(x[2]);
  const double rel = x[2] - x[3];
  const double cphi = std::cos(u[1]);
  Fx.setZero();
  Fu.setZero();
  Fx(0, 2) = -u[0] * s;
  Fx(1, 2) = u[0] * c;
  Fx(3, 2) = u[0] / p_.hitch_length * std::cos(rel);
  Fx(3, 3) = -Fx(3, 2);
  Fu(0, 0) = c;
  Fu(1, 0) = s;
  Fu(2, 0) = std::tan(u[1]) / p_.wheelbase;
  Fu(2, 1) = u[0] / (p_.wheelbase * cphi * cphi);
  Fu(3, 0) = std::sin(rel) / p_.hitch_length;
}

void CarWithTrailer::body_positions(const State &x, std::vector<Eigen::Vector3d> &out) const {
  out.clear();
  const double c0 = std::cos(x[2]), s0 = std::sin(x[2]);
  for (double o : p_.car_offsets)
    out.emplace_back(x[0] + o * c0, x[1] + o * s0, 0.0);
  const double c1 = std::cos(x[3]), s1 = std::sin(x[3]);
  for (double o : p_.trailer_offsets)
    out.emplace_back(x[0] - o * c1, x[1] - o * s1, 0.0);
}

// ---------------------------------------------------------------------------

Acrobot::Acrobot(const Params &p)
    : DynamicalSystem(acrobot_spec(p), discs(2 * static_cast<std::size_t>(p.discs_per_link),
                                             p.link_radius)),
      p_(p) {
  if (p.discs_per_link < 1)
    throw ConfigError("acrobot: discs_per_link must be at least 1");
  // det M(q2) is smallest at cos q2 = +-1
  const double a = p.m2 * p.l1 * p.lc2;
  if (!(p.I2 > 0) || !(p.I1 * p.I2 + p.m2 * p.l1 * p.l1 * p.I2 - a * a > 0))
    throw ConfigError("acrobot: inertias give a singular mass matrix");
}

void Acrobot::vector_field(const State &x, const Control &u, Eigen::Ref<State> f) const {
  const double q1 = x[0], q2 = x[1], d1 = x[2], d2 = x[3];
  const double s1 = std::sin(q1), s2 = std::sin(q2), c2 = std::cos(q2);
  const double s12 = std::sin(q1 + q2);
  const double a = p_.m2 * p_.l1 * p_.lc2;

  const double M11 = p_.I1 + p_.I2 + p_.m2 * p_.l1 * p_.l1 + 2 * a * c2;
  const double M12 = p_.I2 + a * c2;
  const double M22 = p_.I2;

  const double h1 = -2 * a * s2 * d1 * d2 - a * s2 * d2 * d2;
  const double h2 = a * s2 * d1 * d1;
  const double g1 = (p_.m1 * p_.lc1 + p_.m2 * p_.l1) * p_.g * s1 + p_.m2 * p_.g * p_.lc2 * s12;
  const double g2 = p_.m2 * p_.g * p_.lc2 * s12;

  const double b1 = -h1 - g1;
  const double b2 = u[0] - h2 - g2;
  const double det = M11 * M22 - M12 * M12;

  f[0] = d1;
  f[1] = d2;
  f[2] = (M22 * b1 - M12 * b2) / det;
  f[3] = (-M12 * b1 + M11 * b2) / det;
}

void Acrobot::vector_field_jacobians(const State &x, const Control &u, Eigen::Ref<Matrix> Fx,
                                     Eigen::Ref<Matrix> Fu) const {
  const double q1 = x[0], q2 = x[1], d1 = x[2], d2 = x[3];
  const double s1 = std::sin(q1), c1 = std::cos(q1);
  const double s2 = std::sin(q2), c2 = std::cos(q2);
  const double s12 = std::sin(q1 + q2), c12 = std::cos(q1 + q2);
  const double a = p_.m2 * p_.l1 * p_.lc2;
  const double k1 = (p_.m1 * p_.lc1 + p_.m2 * p_.l1) * p_.g;
  const double k2 = p_.m2 * p_.g * p_.lc2;

  Eigen::Matrix2d M;
  M(0, 0) = p_.I1 + p_.I2 + p_.m2 * p_.l1 * p_.l1 + 2 * a * c2;
  M(0, 1) = M(1, 0) = p_.I2 + a * c2;
  M(1, 1) = p_.I2;
  const Eigen::Matrix2d Minv = M.inverse();

  Eigen::Vector2d b;
  b[0] = 2 * a * s2 * d1 * d2 + a * s2 * d2 * d2 - k1 * s1 - k2 * s12;
  b[1] = u[0] - a * s2 * d1 * d1 - k2 * s12;
  const Eigen::Vector2d qdd = Minv * b;

  // d(qdd)/dz = M^-1 (db/dz - dM/dz qdd)
  Eigen::Matrix<double, 2, 4> db;
  db(0, 0) = -k1 * c1 - k2 * c12;
  db(1, 0) = -k2 * c12;
  db(0, 1) = 2 * a * c2 * d1 * d2 + a * c2 * d2 * d2 - k2 * c12;
  db(1, 1) = -a * c2 * d1 * d1 - k2 * c12;
  db(0, 2) = 2 * a * s2 * d2;
  db(1, 2) = -2 * a * s2 * d1;
  db(0, 3) = 2 * a * s2 * d1 + 2 * a * s2 * d2;
  db(1, 3) = 0.0;

  Eigen::Matrix2d dM_dq2;
  dM_dq2 << -2 * a * s2, -a * s2, -a * s2, 0.0;
  db.col(1) -= dM_dq2 * qdd;

  Fx.setZero();
  Fx(0, 2) = 1.0;
  Fx(1, 3) = 1.0;
  Fx.bottomRows(2) = Minv * db;

  Fu.setZero();
  Fu.bottomRows(2) = Minv.col(1);
}

void Acrobot::body_positions(const State &x, std::vector<Eigen::Vector3d> &out) const {
  out.clear();
  const Eigen::Vector3d dir1(std::sin(x[0]), -std::cos(x[0]), 0.0);
  const Eigen::Vector3d dir2(std::sin(x[0] + x[1]), -std::cos(x[0] + x[1]), 0.0);
  const int n = p_.discs_per_link;
  for (int k = 1; k <= n; ++k)
    out.push_back(dir1 * (p_.l1 * k / n));
  const Eigen::Vector3d elbow = dir1 * p_.l1;
  for (int k = 1; k <= n; ++k)
    out.push_back(elbow + dir2 * (p_.l2 * k / n));
}

// ---------------------------------------------------------------------------

PlanarRotor::PlanarRotor(const Params &p)
    : DynamicalSystem(planar_rotor_spec(p), discs(p.body_offsets.size(), p.body_radius)), p_(p) {
  if (!(p.mass > 0) || !(p.inertia > 0))
    throw ConfigError("planar_rotor: mass and inertia must be positive");
  if (p.body_offsets.empty())
    throw ConfigError("planar_rotor: at least one body disc is required");
}

Control PlanarRotor::nominal_control() const { return Control::Ones(2); }

void PlanarRotor::vector_field(const State &x, const Control &u, Eigen::Ref<State> f) const {
  const double per_rotor = p_.mass * p_.g / 2.0;
  const double thrust = per_rotor * (u[0] + u[1]);
  const double torque = per_rotor * (u[0] - u[1]) * p_.arm_length;
  f[0] = x[3];
  f[1] = x[4];
  f[2] = x[5];
  f[3] = -thrust * std::sin(x[2]) / p_.mass;
  f[4] = thrust * std::cos(x[2]) / p_.mass - p_.g;
  f[5] = torque / p_.inertia;
}

void PlanarRotor::vector_field_jacobians(const State &x, const Control &u, Eigen::Ref<Matrix> Fx,
                                         Eigen::Ref<Matrix> Fu) const {
  const double per_rotor = p_.mass * p_.g / 2.0;
  const double thrust = per_rotor * (u[0] + u[1]);
  const double s = std::sin(x[2]), c = std::cos(x[2]);
  Fx.setZero();
  Fu.setZero();
  Fx(0, 3) = 1.0;
  Fx(1, 4) = 1.0;
  Fx(2, 5) = 1.0;
  Fx(3, 2) = -thrust * c / p_.mass;
  Fx(4, 2) = -thrust * s / p_.mass;
  Fu(3, 0) = Fu(3, 1) = -per_rotor * s / p_.mass;
  Fu(4, 0) = Fu(4, 1) = per_rotor * c / p_.mass;
  Fu(5, 0) = per_rotor * p_.arm_length / p_.inertia;
  Fu(5, 1) = -Fu(5, 0);
}

void PlanarRotor::body_positions(const State &x, std::vector<Eigen::Vector3d> &out) const {
  out.clear();
  const double c = std::cos(x[2]), s = std::sin(x[2]);
  for (double o : p_.body_offsets)
    out.emplace_back(x[0] + o * c, x[1] + o * s, 0.0);
}

// ---------------------------------------------------------------------------

namespace {

template <typename T> void read(const YAML::Node &params, const char *key, T &value) {
  if (params && params[key])
    value = params[key].as<T>();
}

} // namespace

std::vector<std::string> available_systems() {
  return {"unicycle1", "unicycle2", "car_with_trailer", "acrobot", "planar_rotor"};
}

SystemPtr make_system(const YAML::Node &node) {
  if (!node || !node["name"])
    throw ConfigError("system section needs a 'name'");
  const auto name = node["name"].as<std::string>();
  const YAML::Node params = node["parameters"];
  std::vector<double> weights;
  if (node["distance_weights"])
    weights = node["distance_weights"].as<std::vector<double>>();

  try {
    if (name == "unicycle1") {
      Unicycle1::Params p;
      read(params, "dt", p.dt);
      read(params, "min_vel", p.min_vel);
      read(params, "max_vel", p.max_vel);
      read(params, "max_angular_vel", p.max_angular_vel);
      read(params, "radius", p.radius);
      p.distance_weights = weights;
      return std::make_shared<Unicycle1>(p);
    }
    if (name == "unicycle2") {
      Unicycle2::Params p;
      read(params, "dt", p.dt);
      read(params, "max_vel", p.max_vel);
      read(params, "max_angular_vel", p.max_angular_vel);
      read(params, "max_acc", p.max_acc);
      read(params, "max_angular_acc", p.max_angular_acc);
      read(params, "radius", p.radius);
      p.distance_weights = weights;
      return std::make_shared<Unicycle2>(p);
    }
    if (name == "car_with_trailer") {
      CarWithTrailer::Params p;
      read(params, "dt", p.dt);
      read(params, "wheelbase", p.wheelbase);
      read(params, "hitch_length", p.hitch_length);
      read(params, "min_vel", p.min_vel);
      read(params, "max_vel", p.max_vel);
      read(params, "max_steering", p.max_steering);
      read(params, "body_radius", p.body_radius);
      read(params, "car_offsets", p.car_offsets);
      read(params, "trailer_offsets", p.trailer_offsets);
      p.distance_weights = weights;
      return std::make_shared<CarWithTrailer>(p);
    }
    if (name == "acrobot") {
      Acrobot::Params p;
      read(params, "dt", p.dt);
      read(params, "m1", p.m1);
      read(params, "m2", p.m2);
      read(params, "l1", p.l1);
      read(params, "l2", p.l2);
      read(params, "lc1", p.lc1);
      read(params, "lc2", p.lc2);
      read(params, "I1", p.I1);
      read(params, "I2", p.I2);
      read(params, "g", p.g);
      read(params, "max_torque", p.max_torque);
      read(params, "max_angular_vel", p.max_angular_vel);
      read(params, "link_radius", p.link_radius);
      read(params, "discs_per_link", p.discs_per_link);
      p.distance_weights = weights;
      return std::make_shared<Acrobot>(p);
    }
    if (name == "planar_rotor") {
      PlanarRotor::Params p;
      read(params, "dt", p.dt);
      read(params, "mass", p.mass);
      read(params, "inertia", p.inertia);
      read(params, "arm_length", p.arm_length);
      read(params, "g", p.g);
      read(params, "thrust_to_weight", p.thrust_to_weight);
      read(params, "max_vel", p.max_vel);
      read(params, "max_angular_vel", p.max_angular_vel);
      read(params, "body_radius", p.body_radius);
      read(params, "body_offsets", p.body_offsets);
      p.distance_weights = weights;
      return std::make_shared<PlanarRotor>(p);
    }
  } catch (const YAML::Exception &e) {
    throw ConfigError("system '" + name + "': " + e.what());
  }
  throw ConfigError("unknown system '" + name + "'");
}

SystemPtr make_default_system(const std::string &name) {
  YAML::Node node;
  node["name"] = name;
  return make_system(node);
}

} // namespace dbrrt

namespace dbrrt {

Unicycle1::Unicycle1() : Unicycle1(Params{}) {}
Unicycle2::Unicycle2() : Unicycle2(Params{}) {}
CarWithTrailer::CarWithTrailer() : CarWithTrailer(Params{}) {}
Acrobot::Acrobot() : Acrobot(Params{}) {}
PlanarRotor::PlanarRotor() : PlanarRotor(Params{}) {}

} // namespace dbrrt
