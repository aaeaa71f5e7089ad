#include "dbrrt/dynamics.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

namespace dbrrt {

void SystemSpec::validate() const {
  auto fail = [this](const std::string &what) {
    throw ConfigError("system '" + name + "': " + what);
  };
  if (nx <= 0 || nu <= 0)
    fail("state and control dimensions must be positive");
  if (!(dt > 0.0) || !std::isfinite(dt))
    fail("dt must be positive");
  if (state_lower.size() != nx || state_upper.size() != nx)
    fail("state bounds must have length nx");
  if (control_lower.size() != nu || control_upper.size() != nu)
    fail("control bounds must have length nu");
  if (distance_weights.size() != nx)
    fail("distance_weights must have length nx");
  if (angle_mask.size() != static_cast<std::size_t>(nx) ||
      translation_mask.size() != static_cast<std::size_t>(nx))
    fail("angle_mask and translation_mask must have length nx");
  if ((state_lower.array() > state_upper.array()).any())
    fail("state_lower must not exceed state_upper");
  if ((control_lower.array() > control_upper.array()).any())
    fail("control_lower must not exceed control_upper");
  if (!control_lower.allFinite() || !control_upper.allFinite())
    fail("control bounds must be finite");
  if ((distance_weights.array() < 0.0).any() || !(distance_weights.maxCoeff() > 0.0))
    fail("distance_weights must be nonnegative with at least one positive entry");
  for (int i = 0; i < nx; ++i)
    if (is_angle(i) && is_translation(i))
      fail("a component cannot be both an angle and a translation");
}

int SystemSpec::translation_dim() const {
  return static_cast<int>(std::count(translation_mask.begin(), translation_mask.end(), true));
}

static void require_same_dim(const SystemSpec &spec, const State &a) {
  if (a.size() != spec.nx)
    throw UsageError("state of dimension " + std::to_string(a.size()) + " given to system '" +
                     spec.name + "' with nx = " + std::to_string(spec.nx));
}

double distance(const SystemSpec &spec, const State &a, const State &b) {
  require_same_dim(spec, a);
  require_same_dim(spec, b);
  double acc = 0.0;
  for (int i = 0; i < spec.nx; ++i) {
    const double d = spec.is_angle(i) ? angle_dist(a[i], b[i]) : a[i] - b[i];
    acc += spec.distance_weights[i] * d * d;
  }
  return std::sqrt(acc);
}

State state_diff(const SystemSpec &spec, const State &a, const State &b) {
  State d = a - b;
  for (int i = 0; i < spec.nx; ++i)
    if (spec.is_angle(i))
      d[i] = angle_diff(a[i], b[i]);
  return d;
}

void normalize(const SystemSpec &spec, Eigen::Ref<State> x) {
  for (int i = 0; i < spec.nx; ++i)
    if (spec.is_angle(i))
      x[i] = wrap_angle(x[i]);
}

State normalized(const SystemSpec &spec, const State &x) {
  State out = x;
  normalize(spec, out);
  return out;
}

bool is_within_bounds(const SystemSpec &spec, const State &x, double tol) {
  for (int i = 0; i < spec.nx; ++i) {
    if (spec.is_angle(i))
      continue;
    if (x[i] < spec.state_lower[i] - tol || x[i] > spec.state_upper[i] + tol)
      return false;
  }
  return true;
}

bool is_control_within_bounds(const SystemSpec &spec, const Control &u, double tol) {
  return ((u.array() >= spec.control_lower.array() - tol) &&
          (u.array() <= spec.control_upper.array() + tol))
      .all();
}

State sample_uniform_state(const SystemSpec &spec, const State &lower, const State &upper,
                           std::mt19937_64 &rng) {
  State x(spec.nx);
  for (int i = 0; i < spec.nx; ++i) {
    if (spec.is_angle(i)) {
      // a box narrower than the circle restricts the angle; otherwise the whole circle
      const bool narrow = std::isfinite(lower[i]) && std::isfinite(upper[i]) &&
                          upper[i] - lower[i] < 2.0 * std::numbers::pi;
      if (narrow && lower[i] == upper[i]) {
        x[i] = wrap_angle(lower[i]);
      } else {
        std::uniform_real_distribution<double> dist(narrow ? lower[i] : -std::numbers::pi,
                                                    narrow ? upper[i] : std::numbers::pi);
        x[i] = wrap_angle(dist(rng));
      }
      continue;
    }
    if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]))
      throw ConfigError("system '" + spec.name + "': component " + std::to_string(i) +
                        " is unbounded; a sampling box is required");
    if (lower[i] == upper[i]) {
      x[i] = lower[i];
    } else {
      std::uniform_real_distribution<double> dist(lower[i], upper[i]);
      x[i] = dist(rng);
    }
  }
  return x;
}

State sample_uniform_state(const SystemSpec &spec, std::mt19937_64 &rng) {
  return sample_uniform_state(spec, spec.state_lower, spec.state_upper, rng);
}

State translate_state(const SystemSpec &spec, const State &x, const Eigen::VectorXd &offset) {
  if (offset.size() != spec.translation_dim())
    throw UsageError("translation offset has wrong length");
  State out = x;
  int j = 0;
  for (int i = 0; i < spec.nx; ++i)
    if (spec.is_translation(i))
      out[i] += offset[j++];
  return out;
}

Eigen::VectorXd translation_part(const SystemSpec &spec, const State &x) {
  Eigen::VectorXd out(spec.translation_dim());
  int j = 0;
  for (int i = 0; i < spec.nx; ++i)
    if (spec.is_translation(i))
      out[j++] = x[i];
  return out;
}

DynamicalSystem::DynamicalSystem(SystemSpec spec, RobotGeometry geometry)
    : spec_(std::move(spec)), geometry_(std::move(geometry)) {
  spec_.validate();
  geometry_.validate();
}

Control DynamicalSystem::nominal_control() const { return Control::Zero(spec_.nu); }

void DynamicalSystem::check_dimensions(const State &x, const Control &u) const {
  if (x.size() != spec_.nx || u.size() != spec_.nu) {
    std::ostringstream os;
    os << "system '" << spec_.name << "' expects (nx, nu) = (" << spec_.nx << ", " << spec_.nu
       << "), got (" << x.size() << ", " << u.size() << ")";
    throw UsageError(os.str());
  }
  if (!x.allFinite() || !u.allFinite())
    throw UsageError("system '" + spec_.name + "': non-finite state or control");
}

void DynamicalSystem::vector_field_jacobians(const State &x, const Control &u,
                                             Eigen::Ref<Matrix> Fx, Eigen::Ref<Matrix> Fu) const {
  constexpr double h = 1e-6;
  State fp(spec_.nx), fm(spec_.nx);
  State xp = x, xm = x;
  for (int j = 0; j < spec_.nx; ++j) {
    xp[j] += h;
    xm[j] -= h;
    vector_field(xp, u, fp);
    vector_field(xm, u, fm);
    Fx.col(j) = (fp - fm) / (2 * h);
    xp[j] = x[j];
    xm[j] = x[j];
  }
  Control up = u, um = u;
  for (int j = 0; j < spec_.nu; ++j) {
    up[j] += h;
    um[j] -= h;
    vector_field(x, up, fp);
    vector_field(x, um, fm);
    Fu.col(j) = (fp - fm) / (2 * h);
    up[j] = u[j];
    um[j] = u[j];
  }
}

State DynamicalSystem::step(const State &x, const Control &u) const {
  State out(spec_.nx);
  step_into(x, u, out);
  return out;
}

void DynamicalSystem::step_into(const State &x, const Control &u, Eigen::Ref<State> out) const {
  check_dimensions(x, u);
  State f(spec_.nx);
  vector_field(x, u, f);
  out = x + f * spec_.dt;
  normalize(spec_, out);
}

void DynamicalSystem::step_jacobians(const State &x, const Control &u, Eigen::Ref<Matrix> Jx,
                                     Eigen::Ref<Matrix> Ju) const {
  check_dimensions(x, u);
  vector_field_jacobians(x, u, Jx, Ju);
  Jx *= spec_.dt;
  Jx.diagonal().array() += 1.0;
  Ju *= spec_.dt;
}

void DynamicalSystem::step_jacobians_fd(const State &x, const Control &u, Eigen::Ref<Matrix> Jx,
                                        Eigen::Ref<Matrix> Ju, double h) const {
  check_dimensions(x, u);
  State xp = x, xm = x;
  for (int j = 0; j < spec_.nx; ++j) {
    xp[j] += h;
    xm[j] -= h;
    Jx.col(j) = state_diff(spec_, step(xp, u), step(xm, u)) / (2 * h);
    xp[j] = x[j];
    xm[j] = x[j];
  }
  Control up = u, um = u;
  for (int j = 0; j < spec_.nu; ++j) {
    up[j] += h;
    um[j] -= h;
    Ju.col(j) = state_diff(spec_, step(x, up), step(x, um)) / (2 * h);
    up[j] = u[j];
    um[j] = u[j];
  }
}

} // namespace dbrrt
