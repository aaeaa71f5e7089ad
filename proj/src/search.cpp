#include "dbrrt/search.hpp"

#include <algorithm>
#include <numeric>

namespace dbrrt {

SearchTree::SearchTree(const SystemSpec &spec, State root, TreeDirection direction)
    : direction_(direction), index_(StateEmbedding::full(spec)) {
  TreeNode r;
  r.state = std::move(root);
  add(std::move(r));
}

std::size_t SearchTree::add(TreeNode node) {
  index_.insert(node.state);
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

std::vector<std::size_t> SearchTree::path_to(std::size_t leaf) const {
  std::vector<std::size_t> path;
  for (int i = static_cast<int>(leaf); i >= 0; i = nodes_[static_cast<std::size_t>(i)].parent)
    path.push_back(static_cast<std::size_t>(i));
  std::reverse(path.begin(), path.end());
  return path;
}

// ---------------------------------------------------------------------------

namespace {

bool primitive_free(const Environment &env, const DynamicalSystem &sys, const MotionPrimitive &m,
                    double inflation) {
  return is_motion_free(env, sys, m.states, inflation);
}

} // namespace

std::optional<Expansion> expand_db_focused(const State &x_o, const State &x_t,
                                           const Environment &env, const PrimitiveLibrary &lib,
                                           double delta, std::mt19937_64 &, double inflation) {
  const auto &spec = lib.system().spec();
  const auto ids = lib.nearest_r_indices(x_o, delta);
  std::vector<std::pair<double, std::size_t>> ranked;
  ranked.reserve(ids.size());
  for (std::size_t i : ids) {
    const State end = translate_state(spec, lib.primitive(i).end(), lib.adapt_offset(i, x_o));
    ranked.emplace_back(distance(spec, end, x_t), i);
  }
  std::sort(ranked.begin(), ranked.end());
  for (const auto &[d, i] : ranked) {
    MotionPrimitive m = lib.adapt(i, x_o);
    if (primitive_free(env, lib.system(), m, inflation)) {
      State x_new = m.end();
      return Expansion{std::move(x_new), std::move(m), i};
    }
  }
  return std::nullopt;
}

std::optional<Expansion> expand_db_randomized(const State &x_o, const State &,
                                              const Environment &env, const PrimitiveLibrary &lib,
                                              double delta, std::mt19937_64 &rng,
                                              double inflation) {
  auto ids = lib.nearest_r_indices(x_o, delta);
  std::shuffle(ids.begin(), ids.end(), rng);
  for (std::size_t i : ids) {
    MotionPrimitive m = lib.adapt(i, x_o);
    if (primitive_free(env, lib.system(), m, inflation)) {
      State x_new = m.end();
      return Expansion{std::move(x_new), std::move(m), i};
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------

namespace {

using Clock = std::chrono::steady_clock;

struct Context {
  const DynamicalSystem &sys;
  const Environment &env;
  const SearchParams &params;
  double delta;
  double goal_tol;
  Clock::time_point started;
  Clock::time_point deadline;
};

Context make_context(const SystemPtr &sys, const State &x_s, const State &x_g,
                     const Environment &env, double delta, const SearchParams &params) {
  if (!sys)
    throw UsageError("search without a system");
  const auto &spec = sys->spec();
  if (!(delta > 0))
    throw UsageError("delta must be positive");
  if (x_s.size() != spec.nx || x_g.size() != spec.nx || !x_s.allFinite() || !x_g.allFinite())
    throw UsageError("start and goal must be finite states of the system");
  if (params.sample_lower.size() != spec.nx || params.sample_upper.size() != spec.nx)
    throw UsageError("search needs a sampling box of length nx");
  if (!(params.goal_bias >= 0 && params.goal_bias <= 1))
    throw UsageError("goal_bias must lie in [0, 1]");
  const double tol = params.goal_tolerance.value_or(delta);
  if (!(tol > 0) || tol > delta)
    throw UsageError("goal_tolerance must lie in (0, delta]");
  const auto now = Clock::now();
  auto deadline = now + std::chrono::duration_cast<Clock::duration>(
                            std::chrono::duration<double>(params.time_budget));
  if (params.deadline)
    deadline = std::min(deadline, *params.deadline);
  return {*sys, env, params, delta, tol, now, deadline};
}

State sample_free(const Context &ctx, std::mt19937_64 &rng, SearchStats &stats) {
  const auto &spec = ctx.sys.spec();
  State x;
  for (int attempt = 0; attempt < std::max(1, ctx.params.sample_retries); ++attempt) {
    x = sample_uniform_state(spec, ctx.params.sample_lower, ctx.params.sample_upper, rng);
    if (is_state_free(ctx.env, ctx.sys, x, ctx.params.inflation))
      return x;
    ++stats.sample_rejections;
  }
  return x;
}

// Concatenates forward-ordered primitives, dropping the last state of all but the final one.
Trajectory concatenate(const std::vector<MotionPrimitive> &prims, const State &lone) {
  Trajectory t;
  if (prims.empty()) {
    t.states.push_back(lone);
    return t;
  }
  for (std::size_t j = 0; j < prims.size(); ++j) {
    const auto &m = prims[j];
    const std::size_t n = j + 1 == prims.size() ? m.states.size() : m.states.size() - 1;
    t.states.insert(t.states.end(), m.states.begin(), m.states.begin() + static_cast<std::ptrdiff_t>(n));
    t.controls.insert(t.controls.end(), m.controls.begin(), m.controls.end());
  }
  return t;
}

std::vector<MotionPrimitive> forward_primitives(const SearchTree &tree, std::size_t leaf) {
  std::vector<MotionPrimitive> out;
  const auto path = tree.path_to(leaf);
  for (std::size_t j = 1; j < path.size(); ++j)
    out.push_back(*tree.node(path[j]).incoming);
  return out;
}

// Walking from `node` up to the root of a backward tree, each reversed edge replayed
// in its original direction.
std::vector<MotionPrimitive> backward_primitives(const SearchTree &tree, std::size_t node) {
  std::vector<MotionPrimitive> out;
  for (int i = static_cast<int>(node); tree.node(static_cast<std::size_t>(i)).parent >= 0;
       i = tree.node(static_cast<std::size_t>(i)).parent)
    out.push_back(reverse(*tree.node(static_cast<std::size_t>(i)).incoming));
  return out;
}

DbSolution make_solution(const DynamicalSystem &sys, Trajectory traj, double delta) {
  DbSolution s;
  s.defects = step_defects(sys, traj);
  s.states = std::move(traj.states);
  s.controls = std::move(traj.controls);
  s.delta = delta;
  return s;
}

// One Algorithm-2 step on `tree`. Returns the new node id if a node was added.
std::optional<std::size_t> extend(const Context &ctx, SearchTree &tree, const PrimitiveLibrary &lib,
                                  const State &goal, std::mt19937_64 &rng, SearchStats &stats) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const bool to_goal = unit(rng) < ctx.params.goal_bias;
  const State target = to_goal ? goal : sample_free(ctx, rng, stats);
  const auto near = tree.nearest(target);
  const State &x_o = tree.node(near->id).state;
  ++stats.expansions;
  auto exp = to_goal ? expand_db_focused(x_o, target, ctx.env, lib, ctx.delta, rng, ctx.params.inflation)
                     : expand_db_randomized(x_o, target, ctx.env, lib, ctx.delta, rng,
                                            ctx.params.inflation);
  if (!exp) {
    ++stats.failed_expansions;
    return std::nullopt;
  }
  if (tree.nearest(exp->x_new)->distance <= ctx.delta) {
    ++stats.rejected_too_close;
    return std::nullopt;
  }
  TreeNode node;
  node.state = exp->x_new;
  node.parent = static_cast<int>(near->id);
  node.edge_defect = distance(ctx.sys.spec(), exp->primitive.start(), x_o);
  node.primitive_id = exp->primitive_id;
  node.incoming = std::move(exp->primitive);
  ++stats.nodes_added;
  return tree.add(std::move(node));
}

double elapsed(const Context &ctx) {
  return std::chrono::duration<double>(Clock::now() - ctx.started).count();
}

} // namespace

Trajectory traceback(const SearchTree &tree, std::size_t leaf) {
  return concatenate(forward_primitives(tree, leaf), tree.node(0).state);
}

std::vector<double> step_defects(const DynamicalSystem &sys, const Trajectory &traj) {
  std::vector<double> d;
  d.reserve(traj.controls.size());
  for (std::size_t k = 0; k < traj.controls.size(); ++k)
    d.push_back(distance(sys.spec(), traj.states[k + 1], sys.step(traj.states[k], traj.controls[k])));
  return d;
}

SearchResult db_rrt(const SystemPtr &sys, const State &x_s, const State &x_g,
                    const Environment &env, const PrimitiveLibrary &lib, double delta,
                    const SearchParams &params, std::mt19937_64 &rng) {
  const Context ctx = make_context(sys, x_s, x_g, env, delta, params);
  SearchResult res;
  SearchTree tree(sys->spec(), x_s, TreeDirection::Forward);
  if (distance(sys->spec(), x_s, x_g) < ctx.goal_tol) {
    res.solution = make_solution(*sys, traceback(tree, 0), delta);
  } else {
    while (res.stats.iterations < params.max_iterations && Clock::now() < ctx.deadline) {
      ++res.stats.iterations;
      const auto id = extend(ctx, tree, lib, x_g, rng, res.stats);
      if (params.observer)
        params.observer(tree);
      if (id && distance(sys->spec(), tree.node(*id).state, x_g) < ctx.goal_tol) {
        res.solution = make_solution(*sys, traceback(tree, *id), delta);
        break;
      }
    }
  }
  res.stats.forward_nodes = tree.size();
  res.stats.seconds = elapsed(ctx);
  return res;
}

SearchResult db_rrt_connect(const SystemPtr &sys, const State &x_s, const State &x_g,
                            const Environment &env, const PrimitiveLibrary &lib_fwd,
                            const PrimitiveLibrary &lib_bwd, double delta,
                            const SearchParams &params, std::mt19937_64 &rng) {
  const Context ctx = make_context(sys, x_s, x_g, env, delta, params);
  if (!lib_bwd.is_reversed() || lib_fwd.is_reversed())
    throw UsageError("connect needs a forward library and its reversed counterpart");
  SearchResult res;
  SearchTree fwd(sys->spec(), x_s, TreeDirection::Forward);
  SearchTree bwd(sys->spec(), x_g, TreeDirection::Backward);

  auto join = [&](std::size_t f, std::size_t b) {
    auto prims = forward_primitives(fwd, f);
    for (auto &m : backward_primitives(bwd, b))
      prims.push_back(std::move(m));
    res.solution = make_solution(*sys, concatenate(prims, x_s), delta);
  };

  if (distance(sys->spec(), x_s, x_g) <= delta) {
    join(0, 0);
  } else {
    while (res.stats.iterations < params.max_iterations && Clock::now() < ctx.deadline) {
      const bool forward_turn = res.stats.iterations % 2 == 0;
      ++res.stats.iterations;
      SearchTree &tree = forward_turn ? fwd : bwd;
      SearchTree &other = forward_turn ? bwd : fwd;
      const auto id = extend(ctx, tree, forward_turn ? lib_fwd : lib_bwd, other.node(0).state, rng,
                             res.stats);
      if (params.observer)
        params.observer(tree);
      if (!id)
        continue;
      const auto near = other.nearest(tree.node(*id).state);
      if (near->distance <= delta) {
        if (forward_turn)
          join(*id, near->id);
        else
          join(near->id, *id);
        break;
      }
    }
  }
  res.stats.forward_nodes = fwd.size();
  res.stats.backward_nodes = bwd.size();
  res.stats.seconds = elapsed(ctx);
  return res;
}

DbValidation validate_db_solution(const DynamicalSystem &sys, const Environment &env,
                                  const State &x_s, const State &x_g, const Trajectory &traj,
                                  double delta) {
  DbValidation v;
  const auto &spec = sys.spec();
  auto fail = [&](std::string why) {
    if (v.reason.empty())
      v.reason = std::move(why);
  };
  if (traj.states.empty() || traj.states.size() != traj.controls.size() + 1) {
    v.reason = "trajectory must have one more state than controls";
    return v;
  }
  for (const auto &x : traj.states)
    if (x.size() != spec.nx || !x.allFinite()) {
      v.reason = "malformed state";
      return v;
    }
  for (const auto &u : traj.controls)
    if (u.size() != spec.nu || !u.allFinite()) {
      v.reason = "malformed control";
      return v;
    }

  // recomputed from scratch rather than reusing the search bookkeeping
  for (std::size_t k = 0; k < traj.controls.size(); ++k) {
    State next = traj.states[k] + spec.dt * [&] {
      State f(spec.nx);
      sys.vector_field(traj.states[k], traj.controls[k], f);
      return f;
    }();
    normalize(spec, next);
    v.max_defect = std::max(v.max_defect, distance(spec, traj.states[k + 1], next));
  }
  v.start_distance = distance(spec, traj.states.front(), x_s);
  v.goal_distance = distance(spec, traj.states.back(), x_g);
  for (const auto &x : traj.states)
    if (!is_state_free(env, sys, x))
      ++v.colliding_states;
  for (const auto &u : traj.controls)
    if (!is_control_within_bounds(spec, u))
      ++v.control_violations;

  if (v.max_defect > delta)
    fail("step defect " + std::to_string(v.max_defect) + " exceeds delta");
  if (v.start_distance > delta)
    fail("start distance exceeds delta");
  if (v.goal_distance > delta)
    fail("goal distance exceeds delta");
  if (v.colliding_states > 0)
    fail(std::to_string(v.colliding_states) + " states in collision");
  if (v.control_violations > 0)
    fail(std::to_string(v.control_violations) + " controls out of bounds");
  v.ok = v.reason.empty();
  return v;
}

} // namespace dbrrt
