#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace dbrrt {

using State = Eigen::VectorXd;
using Control = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

using StateSequence = std::vector<State>;
using ControlSequence = std::vector<Control>;

/// Bad arguments from a caller: dimension mismatch, non-finite input.
class UsageError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Inconsistent or incomplete configuration (system, problem or planner files).
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file; the message carries file and line information.
class ParseError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Wraps an angle to [-pi, pi).
inline double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  if (a >= -std::numbers::pi && a < std::numbers::pi)
    return a;
  double r = std::fmod(a + std::numbers::pi, two_pi);
  if (r < 0)
    r += two_pi;
  r -= std::numbers::pi;
  // fmod can land exactly on +pi after the shift back due to rounding
  if (r >= std::numbers::pi)
    r -= two_pi;
  return r;
}

/// Shortest signed angular difference a - b, in [-pi, pi).
inline double angle_diff(double a, double b) { return wrap_angle(a - b); }

/// |angle_diff(a, b)|, computed so that it is exactly symmetric in a and b.
inline double angle_dist(double a, double b) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const double d = std::fmod(std::abs(a - b), two_pi);
  return std::min(d, two_pi - d);
}

inline bool all_finite(const Eigen::VectorXd &v) { return v.allFinite(); }

/// A state/control trajectory. `states.size() == controls.size() + 1` unless empty.
struct Trajectory {
  StateSequence states;
  ControlSequence controls;

  std::size_t num_steps() const { return controls.size(); }
  bool empty() const { return states.empty(); }
};

} // namespace dbrrt
