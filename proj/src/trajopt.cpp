#include "dbrrt/trajopt.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <sstream>

namespace dbrrt {

void OcpProblem::validate() const {
  if (!system)
    throw UsageError("OCP without a system");
  if (horizon < 1)
    throw UsageError("OCP horizon must be at least 1");
  const auto &spec = system->spec();
  if (x_start.size() != spec.nx || x_goal.size() != spec.nx)
    throw UsageError("OCP start/goal dimension mismatch");
  const OcpWeights &w = weights;
  if (w.goal < 0 || w.collision < 0 || w.bounds < 0 || w.control_reg < 0 || w.accel_reg < 0)
    throw UsageError("OCP weights must be nonnegative");
}

namespace {

/// Accumulates the penalty terms shared by running and terminal costs. `t` may be
/// null when only the value is needed.
void add_state_penalties(const OcpProblem &prob, const State &x, double &value, CostTerms *t) {
  const auto &sys = *prob.system;
  const auto &spec = sys.spec();
  const OcpWeights &w = prob.weights;

  if (w.collision > 0) {
    const double sd = signed_distance_value(prob.env, sys, x);
    const double r = w.collision_margin - sd;
    if (r > 0) {
      value += w.collision * r * r;
      if (t) {
        const SignedDistance full = signed_distance(prob.env, sys, x);
        t->lx.noalias() -= 2 * w.collision * r * full.gradient;
        t->lxx.noalias() += 2 * w.collision * full.gradient * full.gradient.transpose();
      }
    }
  }

  if (w.bounds > 0) {
    for (int i = 0; i < spec.nx; ++i) {
      if (spec.is_angle(i))
        continue;
      double r = 0.0;
      if (std::isfinite(spec.state_upper[i]) && x[i] > spec.state_upper[i] - w.bounds_margin)
        r = x[i] - (spec.state_upper[i] - w.bounds_margin);
      else if (std::isfinite(spec.state_lower[i]) && x[i] < spec.state_lower[i] + w.bounds_margin)
        r = x[i] - (spec.state_lower[i] + w.bounds_margin);
      if (r != 0.0) {
        value += w.bounds * r * r;
        if (t) {
          t->lx[i] += 2 * w.bounds * r;
          t->lxx(i, i) += 2 * w.bounds;
        }
      }
    }
  }
}

void init_terms(CostTerms &t, int nx, int nu) {
  t.value = 0.0;
  t.lx = Eigen::VectorXd::Zero(nx);
  t.lu = Eigen::VectorXd::Zero(nu);
  t.lxx = Matrix::Zero(nx, nx);
  t.luu = Matrix::Zero(nu, nu);
  t.lux = Matrix::Zero(nu, nx);
}

double running_value_impl(const OcpProblem &prob, const State &x, const Control &u,
                          CostTerms *t) {
  const auto &sys = *prob.system;
  const auto &spec = sys.spec();
  const OcpWeights &w = prob.weights;
  double value = 0.0;

  if (w.control_reg > 0) {
    value += w.control_reg * u.squaredNorm();
    if (t) {
      t->lu.noalias() += 2 * w.control_reg * u;
      t->luu.diagonal().array() += 2 * w.control_reg;
    }
  }

  const auto rows = sys.acceleration_rows();
  if (w.accel_reg > 0 && !rows.empty()) {
    State f(spec.nx);
    sys.vector_field(x, u, f);
    Matrix Fx, Fu;
    if (t) {
      Fx.resize(spec.nx, spec.nx);
      Fu.resize(spec.nx, spec.nu);
      sys.vector_field_jacobians(x, u, Fx, Fu);
    }
    for (int r : rows) {
      value += w.accel_reg * f[r] * f[r];
      if (t) {
        t->lx.noalias() += 2 * w.accel_reg * f[r] * Fx.row(r).transpose();
        t->lu.noalias() += 2 * w.accel_reg * f[r] * Fu.row(r).transpose();
        t->lxx.noalias() += 2 * w.accel_reg * Fx.row(r).transpose() * Fx.row(r);
        t->luu.noalias() += 2 * w.accel_reg * Fu.row(r).transpose() * Fu.row(r);
        t->lux.noalias() += 2 * w.accel_reg * Fu.row(r).transpose() * Fx.row(r);
      }
    }
  }

  if (w.bounds > 0) {
    for (int i = 0; i < spec.nu; ++i) {
      double r = 0.0;
      if (u[i] > spec.control_upper[i])
        r = u[i] - spec.control_upper[i];
      else if (u[i] < spec.control_lower[i])
        r = u[i] - spec.control_lower[i];
      if (r != 0.0) {
        value += w.bounds * r * r;
        if (t) {
          t->lu[i] += 2 * w.bounds * r;
          t->luu(i, i) += 2 * w.bounds;
        }
      }
    }
  }

  add_state_penalties(prob, x, value, t);
  return value;
}

double terminal_value_impl(const OcpProblem &prob, const State &x, CostTerms *t) {
  const auto &spec = prob.system->spec();
  const OcpWeights &w = prob.weights;
  double value = 0.0;
  if (w.goal > 0) {
    const State d = state_diff(spec, x, prob.x_goal);
    value += w.goal * (spec.distance_weights.array() * d.array().square()).sum();
    if (t) {
      t->lx.array() += 2 * w.goal * spec.distance_weights.array() * d.array();
      t->lxx.diagonal().array() += 2 * w.goal * spec.distance_weights.array();
    }
  }
  add_state_penalties(prob, x, value, t);
  return value;
}

} // namespace

CostTerms running_cost(const OcpProblem &prob, const State &x, const Control &u, int k) {
  if (k < 0 || k >= prob.horizon)
    throw UsageError("running cost index outside the horizon");
  CostTerms t;
  init_terms(t, prob.system->nx(), prob.system->nu());
  t.value = running_value_impl(prob, x, u, &t);
  return t;
}

CostTerms terminal_cost(const OcpProblem &prob, const State &x) {
  CostTerms t;
  init_terms(t, prob.system->nx(), prob.system->nu());
  t.value = terminal_value_impl(prob, x, &t);
  return t;
}

double running_cost_value(const OcpProblem &prob, const State &x, const Control &u) {
  return running_value_impl(prob, x, u, nullptr);
}

double terminal_cost_value(const OcpProblem &prob, const State &x) {
  return terminal_value_impl(prob, x, nullptr);
}

Eigen::VectorXd cost_gradient_fd(const std::function<double(const Eigen::VectorXd &)> &f,
                                 const Eigen::VectorXd &z, double h) {
  Eigen::VectorXd g(z.size());
  Eigen::VectorXd zp = z, zm = z;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    zp[i] += h;
    zm[i] -= h;
    g[i] = (f(zp) - f(zm)) / (2 * h);
    zp[i] = z[i];
    zm[i] = z[i];
  }
  return g;
}

// ---------------------------------------------------------------------------

bool ConstraintReport::passes(const FeasibilityTolerances &tol) const {
  return failures(tol).empty();
}

std::string ConstraintReport::failures(const FeasibilityTolerances &tol) const {
  std::ostringstream os;
  auto add = [&os](const std::string &s) {
    if (os.tellp() > 0)
      os << "; ";
    os << s;
  };
  if (!(max_defect <= tol.dynamics))
    add("dynamics defect " + std::to_string(max_defect));
  if (!(start_distance <= tol.start))
    add("start distance " + std::to_string(start_distance));
  if (!(goal_distance <= tol.goal))
    add("goal distance " + std::to_string(goal_distance));
  if (!(min_signed_distance > -tol.penetration))
    add("penetration " + std::to_string(min_signed_distance));
  if (!(max_state_bound_violation <= tol.state_bounds))
    add("state bounds " + std::to_string(max_state_bound_violation));
  if (!(max_control_bound_violation <= tol.control_bounds))
    add("control bounds " + std::to_string(max_control_bound_violation));
  return os.str();
}

ConstraintReport check_feasible(const DynamicalSystem &sys, const Environment &env,
                                const State &x_start, const State &x_goal,
                                const Trajectory &traj) {
  const auto &spec = sys.spec();
  if (traj.states.empty() || traj.states.size() != traj.controls.size() + 1)
    throw UsageError("trajectory must have one more state than controls");
  ConstraintReport rep;
  rep.defects.reserve(traj.controls.size());
  for (std::size_t k = 0; k < traj.controls.size(); ++k) {
    const double d = distance(spec, traj.states[k + 1], sys.step(traj.states[k], traj.controls[k]));
    rep.defects.push_back(d);
    rep.max_defect = std::max(rep.max_defect, d);
  }
  rep.start_distance = distance(spec, traj.states.front(), x_start);
  rep.goal_distance = distance(spec, traj.states.back(), x_goal);
  for (const auto &x : traj.states) {
    rep.min_signed_distance = std::min(rep.min_signed_distance, signed_distance_value(env, sys, x));
    rep.all_states_free = rep.all_states_free && is_state_free(env, sys, x);
    for (int i = 0; i < spec.nx; ++i) {
      if (spec.is_angle(i))
        continue;
      const double v = std::max(x[i] - spec.state_upper[i], spec.state_lower[i] - x[i]);
      rep.max_state_bound_violation = std::max(rep.max_state_bound_violation, v);
    }
  }
  for (const auto &u : traj.controls) {
    const double v = std::max((u - spec.control_upper).maxCoeff(),
                              (spec.control_lower - u).maxCoeff());
    rep.max_control_bound_violation = std::max(rep.max_control_bound_violation, v);
  }
  return rep;
}

// ---------------------------------------------------------------------------

namespace {

class Fddp {
public:
  Fddp(const OcpProblem &prob, const SolverOptions &opt)
      : prob_(prob), sys_(*prob.system), spec_(sys_.spec()), opt_(opt), K_(prob.horizon),
        nx_(spec_.nx), nu_(spec_.nu) {
    const auto Ks = static_cast<std::size_t>(K_);
    fs_.assign(Ks + 1, State::Zero(nx_));
    Fx_.assign(Ks, Matrix::Zero(nx_, nx_));
    Fu_.assign(Ks, Matrix::Zero(nx_, nu_));
    L_.resize(Ks + 1);
    Vx_.assign(Ks + 1, Eigen::VectorXd::Zero(nx_));
    Vxx_.assign(Ks + 1, Matrix::Zero(nx_, nx_));
    Qu_.assign(Ks, Eigen::VectorXd::Zero(nu_));
    Quu_.assign(Ks, Matrix::Zero(nu_, nu_));
    k_.assign(Ks, Eigen::VectorXd::Zero(nu_));
    Kfb_.assign(Ks, Matrix::Zero(nu_, nx_));
    dx_.assign(Ks + 1, State::Zero(nx_));
  }

  OptResult solve(const StateSequence &init_states, const ControlSequence &init_controls);

private:
  Control clamp(const Control &u) const {
    return u.cwiseMax(spec_.control_lower).cwiseMin(spec_.control_upper);
  }

  State integrate(const State &x, const State &v) const {
    State out = x + v;
    normalize(spec_, out);
    return out;
  }

  double total_cost(const StateSequence &xs, const ControlSequence &us) const {
    double c = 0.0;
    for (int t = 0; t < K_; ++t)
      c += running_cost_value(prob_, xs[t], us[t]);
    return c + terminal_cost_value(prob_, xs[K_]);
  }

  void calc_diff();
  bool backward_pass();
  void compute_gains(int t, const Eigen::VectorXd &Qu, const Matrix &Quu, const Matrix &Qux);
  double forward_pass(double alpha);
  void update_expected_improvement();
  double max_gap() const {
    double m = 0.0;
    for (const auto &f : fs_)
      m = std::max(m, std::sqrt((spec_.distance_weights.array() * f.array().square()).sum()));
    return m;
  }

  const OcpProblem &prob_;
  const DynamicalSystem &sys_;
  const SystemSpec &spec_;
  const SolverOptions &opt_;
  const int K_, nx_, nu_;

  StateSequence xs_, xs_try_;
  ControlSequence us_, us_try_;
  StateSequence fs_;
  std::vector<Matrix> Fx_, Fu_;
  std::vector<CostTerms> L_;
  std::vector<Eigen::VectorXd> Vx_;
  std::vector<Matrix> Vxx_;
  std::vector<Eigen::VectorXd> Qu_;
  std::vector<Matrix> Quu_;
  std::vector<Eigen::VectorXd> k_;
  std::vector<Matrix> Kfb_;
  StateSequence dx_;

  bool feasible_ = false;
  bool was_feasible_ = false;
  double xreg_ = 0.0, ureg_ = 0.0;
  double cost_ = 0.0, cost_try_ = 0.0;
  double stop_ = 0.0;
  double dg_ = 0.0, dq_ = 0.0;
};

void Fddp::calc_diff() {
  cost_ = 0.0;
  for (int t = 0; t < K_; ++t) {
    L_[t] = running_cost(prob_, xs_[t], us_[t], t);
    cost_ += L_[t].value;
    sys_.step_jacobians(xs_[t], us_[t], Fx_[t], Fu_[t]);
  }
  L_[K_] = terminal_cost(prob_, xs_[K_]);
  cost_ += L_[K_].value;

  if (!feasible_) {
    fs_[0] = state_diff(spec_, prob_.x_start, xs_[0]);
    for (int t = 0; t < K_; ++t)
      fs_[t + 1] = state_diff(spec_, sys_.step(xs_[t], us_[t]), xs_[t + 1]);
  } else if (!was_feasible_) {
    for (auto &f : fs_)
      f.setZero();
  }
}

void Fddp::compute_gains(int t, const Eigen::VectorXd &Qu, const Matrix &Quu, const Matrix &Qux) {
  // Directions that would push a control already at its bound further out are frozen.
  std::vector<bool> clamped(static_cast<std::size_t>(nu_), false);
  Eigen::VectorXd kk = Eigen::VectorXd::Zero(nu_);
  Matrix KK = Matrix::Zero(nu_, nx_);
  constexpr double eps = 1e-10;
  for (int pass = 0; pass <= nu_; ++pass) {
    std::vector<int> free;
    for (int i = 0; i < nu_; ++i)
      if (!clamped[static_cast<std::size_t>(i)])
        free.push_back(i);
    kk.setZero();
    KK.setZero();
    if (!free.empty()) {
      const auto nf = static_cast<Eigen::Index>(free.size());
      Matrix Qff(nf, nf);
      Eigen::VectorXd qf(nf);
      Matrix Qfx(nf, nx_);
      for (Eigen::Index a = 0; a < nf; ++a) {
        qf[a] = Qu[free[a]];
        Qfx.row(a) = Qux.row(free[a]);
        for (Eigen::Index b = 0; b < nf; ++b)
          Qff(a, b) = Quu(free[a], free[b]);
      }
      Eigen::LLT<Matrix> llt(Qff);
      if (llt.info() != Eigen::Success)
        throw std::runtime_error("non positive-definite Quu");
      const Eigen::VectorXd kf = llt.solve(qf);
      const Matrix Kf = llt.solve(Qfx);
      for (Eigen::Index a = 0; a < nf; ++a) {
        kk[free[a]] = kf[a];
        KK.row(free[a]) = Kf.row(a);
      }
    }
    // the step is u - k: at the lower bound a positive k leaves the box
    bool changed = false;
    for (int i = 0; i < nu_; ++i) {
      if (clamped[static_cast<std::size_t>(i)])
        continue;
      const double u = us_[t][i];
      if ((u <= spec_.control_lower[i] + eps && kk[i] > 0) ||
          (u >= spec_.control_upper[i] - eps && kk[i] < 0)) {
        clamped[static_cast<std::size_t>(i)] = true;
        changed = true;
      }
    }
    if (!changed)
      break;
  }
  k_[t] = kk;
  Kfb_[t] = KK;
  for (int i = 0; i < nu_; ++i)
    if (!clamped[static_cast<std::size_t>(i)])
      stop_ += Qu[i] * Qu[i];
}

bool Fddp::backward_pass() {
  stop_ = 0.0;
  Vxx_[K_] = L_[K_].lxx;
  Vxx_[K_].diagonal().array() += xreg_;
  Vx_[K_] = L_[K_].lx;
  if (!feasible_)
    Vx_[K_].noalias() += Vxx_[K_] * fs_[K_];

  Eigen::VectorXd Qx(nx_);
  Matrix Qxx(nx_, nx_), Qux(nu_, nx_), FxTV(nx_, nx_), FuTV(nu_, nx_);
  for (int t = K_ - 1; t >= 0; --t) {
    const Matrix &Vxx_n = Vxx_[t + 1];
    const Eigen::VectorXd &Vx_n = Vx_[t + 1];
    FxTV.noalias() = Fx_[t].transpose() * Vxx_n;
    FuTV.noalias() = Fu_[t].transpose() * Vxx_n;

    Qx = L_[t].lx;
    Qx.noalias() += Fx_[t].transpose() * Vx_n;
    Qu_[t] = L_[t].lu;
    Qu_[t].noalias() += Fu_[t].transpose() * Vx_n;
    Qxx = L_[t].lxx;
    Qxx.noalias() += FxTV * Fx_[t];
    Qux = L_[t].lux;
    Qux.noalias() += FuTV * Fx_[t];
    Quu_[t] = L_[t].luu;
    Quu_[t].noalias() += FuTV * Fu_[t];
    Quu_[t].diagonal().array() += ureg_;

    try {
      compute_gains(t, Qu_[t], Quu_[t], Qux);
    } catch (const std::runtime_error &) {
      return false;
    }
    const Eigen::VectorXd &k = k_[t];
    const Matrix &Kf = Kfb_[t];

    // V = Q evaluated along u = -k - K dx
    Vx_[t] = Qx;
    Vx_[t].noalias() -= Kf.transpose() * Qu_[t];
    Vx_[t].noalias() -= Qux.transpose() * k;
    Vx_[t].noalias() += Kf.transpose() * (Quu_[t] * k);
    Vxx_[t] = Qxx;
    Vxx_[t].noalias() -= Qux.transpose() * Kf;
    Vxx_[t].noalias() -= Kf.transpose() * Qux;
    Vxx_[t].noalias() += Kf.transpose() * Quu_[t] * Kf;
    Vxx_[t] = 0.5 * (Vxx_[t] + Vxx_[t].transpose()).eval();
    Vxx_[t].diagonal().array() += xreg_;
    if (!feasible_)
      Vx_[t].noalias() += Vxx_[t] * fs_[t];

    if (!Vx_[t].allFinite() || !Vxx_[t].allFinite())
      return false;
  }
  return true;
}

void Fddp::update_expected_improvement() {
  dg_ = 0.0;
  dq_ = 0.0;
  if (!feasible_) {
    dg_ -= Vx_[K_].dot(fs_[K_]);
    dq_ += fs_[K_].dot(Vxx_[K_] * fs_[K_]);
  }
  for (int t = 0; t < K_; ++t) {
    dg_ += Qu_[t].dot(k_[t]);
    dq_ -= k_[t].dot(Quu_[t] * k_[t]);
    if (!feasible_) {
      dg_ -= Vx_[t].dot(fs_[t]);
      dq_ += fs_[t].dot(Vxx_[t] * fs_[t]);
    }
  }
}

double Fddp::forward_pass(double alpha) {
  const bool full = feasible_ || alpha == 1.0;
  cost_try_ = 0.0;
  xs_try_[0] = full ? prob_.x_start : integrate(prob_.x_start, fs_[0] * (alpha - 1.0));
  for (int t = 0; t < K_; ++t) {
    dx_[t] = state_diff(spec_, xs_try_[t], xs_[t]);
    us_try_[t] = clamp(us_[t] - alpha * k_[t] - Kfb_[t] * dx_[t]);
    cost_try_ += running_cost_value(prob_, xs_try_[t], us_try_[t]);
    State next = sys_.step(xs_try_[t], us_try_[t]);
    xs_try_[t + 1] = full ? next : integrate(next, fs_[t + 1] * (alpha - 1.0));
    if (!std::isfinite(cost_try_) || !xs_try_[t + 1].allFinite())
      return std::numeric_limits<double>::infinity();
  }
  dx_[K_] = state_diff(spec_, xs_try_[K_], xs_[K_]);
  cost_try_ += terminal_cost_value(prob_, xs_try_[K_]);
  if (!std::isfinite(cost_try_))
    return std::numeric_limits<double>::infinity();
  return cost_try_;
}

OptResult Fddp::solve(const StateSequence &init_states, const ControlSequence &init_controls) {
  if (init_states.size() != static_cast<std::size_t>(K_ + 1) ||
      init_controls.size() != static_cast<std::size_t>(K_))
    throw UsageError("warm start must have horizon+1 states and horizon controls");
  xs_.clear();
  us_.clear();
  for (const auto &x : init_states) {
    if (x.size() != nx_ || !x.allFinite())
      throw UsageError("warm-start state has wrong size or is not finite");
    xs_.push_back(normalized(spec_, x));
  }
  for (const auto &u : init_controls) {
    if (u.size() != nu_ || !u.allFinite())
      throw UsageError("warm-start control has wrong size or is not finite");
    us_.push_back(clamp(u));
  }
  xs_try_ = xs_;
  us_try_ = us_;

  OptResult res;
  xreg_ = ureg_ = std::max(opt_.reg_init, opt_.reg_min);
  feasible_ = false;
  was_feasible_ = false;
  bool recalc = true;
  bool optimal = false;

  for (int iter = 0; iter < opt_.max_iterations; ++iter) {
    if (opt_.deadline && std::chrono::steady_clock::now() > *opt_.deadline)
      break;
    res.iterations = iter + 1;
    if (recalc) {
      calc_diff();
      if (!std::isfinite(cost_)) {
        res.diverged = true;
        break;
      }
    }
    bool backward_ok = backward_pass();
    while (!backward_ok) {
      xreg_ = std::min(xreg_ * opt_.reg_factor, opt_.reg_max);
      ureg_ = xreg_;
      if (xreg_ >= opt_.reg_max)
        break;
      backward_ok = backward_pass();
    }
    if (!backward_ok) {
      res.diverged = true;
      break;
    }

    update_expected_improvement();
    if (feasible_ && (stop_ < opt_.stop_tolerance || dg_ < opt_.expected_improvement_tolerance)) {
      optimal = true;
      break;
    }

    recalc = false;
    double alpha = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < opt_.line_search_steps; ++ls, alpha *= 0.5) {
      const double cost_try = forward_pass(alpha);
      if (!std::isfinite(cost_try))
        continue;
      const double dV = cost_ - cost_try;
      double dv = 0.0;
      if (!feasible_)
        for (int t = 0; t <= K_; ++t)
          dv -= fs_[t].dot(Vxx_[t] * dx_[t]);
      const double d0 = dg_ + dv;
      const double d1 = dq_ - 2 * dv;
      const double expected = alpha * (d0 + 0.5 * alpha * d1);
      const bool ok = expected >= 0 ? (d0 < 1e-12 || dV > opt_.accept_step * expected)
                                    : (dV > opt_.accept_ascent * expected);
      if (ok) {
        was_feasible_ = feasible_;
        feasible_ = feasible_ || alpha == 1.0;
        std::swap(xs_, xs_try_);
        std::swap(us_, us_try_);
        cost_ = cost_try;
        accepted = true;
        recalc = true;
        break;
      }
    }
    if (!accepted)
      alpha = std::ldexp(1.0, -(opt_.line_search_steps - 1));

    if (accepted) {
      res.cost_history.push_back(cost_);
      // gaps after the step shrink by (1 - alpha) and vanish once the step is full
      const double gap = feasible_ ? 0.0 : (1.0 - alpha) * max_gap();
      res.defect_history.push_back(gap);
      res.gaps_closed_history.push_back(feasible_);
    }

    if (alpha > opt_.step_decrease_reg) {
      xreg_ = std::max(xreg_ / opt_.reg_factor, opt_.reg_min);
      ureg_ = xreg_;
    }
    if (alpha <= opt_.step_increase_reg) {
      xreg_ = std::min(xreg_ * opt_.reg_factor, opt_.reg_max);
      ureg_ = xreg_;
      if (xreg_ >= opt_.reg_max) {
        res.diverged = true;
        break;
      }
    }
  }

  res.states = xs_;
  res.controls = us_;
  res.cost = total_cost(xs_, us_);
  res.report = check_feasible(sys_, prob_.env, prob_.x_start, prob_.x_goal, res.trajectory());
  res.max_defect = res.report.max_defect;
  res.feasible = res.report.passes(opt_.tolerances);
  res.converged = optimal && feasible_ && res.feasible;
  if (!std::isfinite(res.cost))
    res.diverged = true;
  return res;
}

} // namespace

OptResult solve_fddp(const OcpProblem &prob, const StateSequence &init_states,
                     const ControlSequence &init_controls, const SolverOptions &options) {
  prob.validate();
  Fddp solver(prob, options);
  return solver.solve(init_states, init_controls);
}

} // namespace dbrrt
