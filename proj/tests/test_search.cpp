#define BOOST_TEST_MODULE search
#include <boost/test/unit_test.hpp>

#include "dbrrt/search.hpp"
#include "dbrrt/systems.hpp"
#include "support.hpp"

using namespace dbrrt;
using dbrrt::testing::vec;

namespace {

struct Fixture {
  SystemPtr sys = make_default_system("unicycle1");
  std::shared_ptr<const PrimitiveLibrary> full;

  Fixture() {
    full = std::make_shared<const PrimitiveLibrary>(
        sys, generate_primitives_serial(sys, default_generation_config(*sys), 400, 3, 4000));
  }
  const SystemSpec &spec() const { return sys->spec(); }
};

const Fixture &fixture() {
  static const Fixture f;
  return f;
}

Environment desk(bool obstacles) {
  Environment env;
  env.dim = 2;
  env.workspace_min = Eigen::Vector3d(0, 0, 0);
  env.workspace_max = Eigen::Vector3d(8, 8, 0);
  if (obstacles) {
    env.obstacles.push_back(Obstacle::box({4, 2, 0}, {0.4, 1.5, 0}, "low"));
    env.obstacles.push_back(Obstacle::box({4, 6.5, 0}, {0.4, 1.5, 0}, "high"));
    env.obstacles.push_back(Obstacle::sphere({2, 5.5, 0}, 0.6, "disc"));
  }
  return env;
}

SearchParams params_for(const Environment &env, std::size_t iterations = 20000) {
  SearchParams p;
  p.max_iterations = iterations;
  p.sample_lower = vec({env.workspace_min.x(), env.workspace_min.y(), -M_PI});
  p.sample_upper = vec({env.workspace_max.x(), env.workspace_max.y(), M_PI});
  return p;
}

MotionPrimitive constant_motion(const DynamicalSystem &sys, const State &x0, const Control &u, int n) {
  MotionPrimitive m;
  m.states.push_back(x0);
  for (int k = 0; k < n; ++k) {
    m.controls.push_back(u);
    m.states.push_back(sys.step(m.states.back(), u));
  }
  return m;
}

} // namespace

BOOST_AUTO_TEST_CASE(focused_expansion_is_the_argmin_of_a_linear_scan) {
  const auto &f = fixture();
  const auto &spec = f.spec();
  const Environment env = desk(true);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> pos(0.5, 7.5), ang(-M_PI, M_PI), rad(0.1, 0.6);
  int non_empty = 0;
  for (int q = 0; q < 50; ++q) {
    const State x_o = vec({pos(rng), pos(rng), ang(rng)});
    const State x_t = vec({pos(rng), pos(rng), ang(rng)});
    const double delta = rad(rng);

    std::optional<std::pair<double, std::size_t>> best;
    for (std::size_t i = 0; i < f.full->size(); ++i) {
      const auto &m = f.full->primitive(i);
      const Eigen::Vector2d shift(x_o[0] - m.start()[0], x_o[1] - m.start()[1]);
      const MotionPrimitive moved = translated(spec, m, shift);
      if (distance(spec, moved.start(), x_o) > delta)
        continue;
      if (!is_motion_free(env, *f.sys, moved.states))
        continue;
      const std::pair<double, std::size_t> key{distance(spec, moved.end(), x_t), i};
      if (!best || key < *best)
        best = key;
    }
    const auto got = expand_db_focused(x_o, x_t, env, *f.full, delta, rng);
    BOOST_TEST(got.has_value() == best.has_value());
    if (got && best) {
      ++non_empty;
      BOOST_TEST(got->primitive_id == best->second);
      BOOST_TEST(distance(spec, got->x_new, x_t) == best->first, boost::test_tools::tolerance(1e-12));
      BOOST_TEST(got->x_new == got->primitive.end());
    }
  }
  BOOST_TEST(non_empty > 10);
}

BOOST_AUTO_TEST_CASE(focused_prefers_the_closer_end_state) {
  const SystemPtr sys = make_default_system("unicycle1");
  const State o = vec({0, 0, 0});
  // ends at (0.5, 0, 0) and stays at the origin
  const MotionPrimitive go = constant_motion(*sys, o, vec({0.5, 0}), 10);
  const MotionPrimitive stay = constant_motion(*sys, o, vec({0, 0}), 10);
  const PrimitiveLibrary lib(sys, {stay, go});
  const State x_o = vec({2, 2, 0}), x_t = vec({2.9, 2, 0});
  BOOST_TEST(distance(sys->spec(), translated(sys->spec(), go, Eigen::Vector2d(2, 2)).end(), x_t) ==
                 0.4,
             boost::test_tools::tolerance(1e-12));
  std::mt19937_64 rng(1);
  const auto got = expand_db_focused(x_o, x_t, desk(false), lib, 0.1, rng);
  BOOST_REQUIRE(got.has_value());
  BOOST_TEST(got->primitive_id == 1u);

  BOOST_TEST(!expand_db_focused(vec({2, 2, 2}), x_t, desk(false), lib, 0.1, rng).has_value());
}

BOOST_AUTO_TEST_CASE(randomized_expansion_is_uniform_over_free_candidates) {
  const SystemPtr sys = make_default_system("unicycle1");
  const State o = vec({0, 0, 0});
  const PrimitiveLibrary lib(sys, {constant_motion(*sys, o, vec({0.5, 0}), 10),
                                   constant_motion(*sys, o, vec({0, 0.5}), 10)});
  std::mt19937_64 rng(17);
  int first = 0;
  const int trials = 1000;
  for (int t = 0; t < trials; ++t) {
    const auto got = expand_db_randomized(vec({2, 2, 0}), vec({0, 0, 0}), desk(false), lib, 0.1, rng);
    BOOST_REQUIRE(got.has_value());
    first += got->primitive_id == 0 ? 1 : 0;
  }
  const double freq = static_cast<double>(first) / trials;
  BOOST_TEST(std::abs(freq - 0.5) <= 0.05);

  // only the turning motion is free next to a wall in front
  Environment env = desk(false);
  env.obstacles.push_back(Obstacle::box({2.6, 2, 0}, {0.1, 1, 0}, "wall"));
  for (int t = 0; t < 50; ++t) {
    const auto got = expand_db_randomized(vec({2, 2, 0}), vec({0, 0, 0}), env, lib, 0.1, rng);
    BOOST_REQUIRE(got.has_value());
    BOOST_TEST(got->primitive_id == 1u);
  }
  env.obstacles.push_back(Obstacle::sphere({2, 2, 0}, 0.5, "on top"));
  BOOST_TEST(!expand_db_randomized(vec({2, 2, 0}), vec({0, 0, 0}), env, lib, 0.1, rng).has_value());
}

BOOST_AUTO_TEST_CASE(traceback_counts_states_and_controls) {
  const SystemPtr sys = make_default_system("unicycle1");
  const auto &spec = sys->spec();
  const State root = vec({1, 1, 0});
  const MotionPrimitive a = constant_motion(*sys, root, vec({0.4, 0.2}), 5);
  State b0 = a.end();
  b0[0] += 0.1;
  const MotionPrimitive b = constant_motion(*sys, b0, vec({0.3, -0.1}), 7);

  SearchTree tree(spec, root, TreeDirection::Forward);
  TreeNode n1;
  n1.state = a.end();
  n1.parent = 0;
  n1.incoming = a;
  n1.edge_defect = 0.0;
  tree.add(n1);
  TreeNode n2;
  n2.state = b.end();
  n2.parent = 1;
  n2.incoming = b;
  n2.edge_defect = distance(spec, b.start(), a.end());
  tree.add(n2);

  const Trajectory root_only = traceback(tree, 0);
  BOOST_TEST(root_only.states.size() == 1u);
  BOOST_TEST(root_only.controls.empty());

  const Trajectory t = traceback(tree, 2);
  // each junction drops the end state of the earlier primitive: 5 + 7 controls, one more state
  BOOST_TEST(t.controls.size() == 12u);
  BOOST_TEST(t.states.size() == 13u);
  BOOST_TEST(t.states.front() == root);
  BOOST_TEST(t.states.back() == b.end());

  const auto d = step_defects(*sys, t);
  BOOST_REQUIRE(d.size() == 12u);
  for (std::size_t k = 0; k < d.size(); ++k) {
    const double expected = k == 4 ? n2.edge_defect : 0.0;
    BOOST_TEST(d[k] == expected, boost::test_tools::tolerance(1e-12));
  }
  BOOST_TEST(n2.edge_defect == 0.1, boost::test_tools::tolerance(1e-12));
}

BOOST_AUTO_TEST_CASE(start_within_delta_of_goal_is_trivial) {
  const auto &f = fixture();
  const Environment env = desk(false);
  std::mt19937_64 rng(0);
  const auto res = db_rrt(f.sys, vec({4, 4, 0}), vec({4.1, 4, 0}), env, *f.full, 0.3, params_for(env), rng);
  BOOST_REQUIRE(res.solved());
  BOOST_TEST(res.solution->states.size() == 1u);
  BOOST_TEST(res.solution->controls.empty());
  BOOST_TEST(res.stats.expansions == 0u);

  const auto con = db_rrt_connect(f.sys, vec({4, 4, 0}), vec({4.1, 4, 0}), env, *f.full,
                                  f.full->reversed(), 0.3, params_for(env), rng);
  BOOST_REQUIRE(con.solved());
  BOOST_TEST(con.solution->controls.empty());
}

BOOST_AUTO_TEST_CASE(bad_arguments_are_rejected) {
  const auto &f = fixture();
  const Environment env = desk(false);
  std::mt19937_64 rng(0);
  auto p = params_for(env);
  p.goal_tolerance = 0.5;
  BOOST_CHECK_THROW(db_rrt(f.sys, vec({1, 1, 0}), vec({7, 7, 0}), env, *f.full, 0.3, p, rng), UsageError);
  BOOST_CHECK_THROW(db_rrt(f.sys, vec({1, 1, 0}), vec({7, 7, 0}), env, *f.full, 0.0, params_for(env), rng),
                    UsageError);
  BOOST_CHECK_THROW(db_rrt_connect(f.sys, vec({1, 1, 0}), vec({7, 7, 0}), env, *f.full, *f.full, 0.3,
                                   params_for(env), rng),
                    UsageError);
}

BOOST_AUTO_TEST_CASE(tree_invariants_hold_during_growth) {
  const auto &f = fixture();
  const auto &spec = f.spec();
  const Environment env = desk(true);
  const double delta = 0.3;
  auto p = params_for(env, 600);
  // unreachable goal inside an obstacle keeps the tree growing for the whole budget
  const State goal = vec({4, 2, 0});
  std::size_t checked = 0;
  std::vector<double> box_area;
  std::size_t iteration = 0;
  p.observer = [&](const SearchTree &tree) {
    ++iteration;
    while (checked + 1 < tree.size()) {
      ++checked;
      const TreeNode &n = tree.node(checked);
      BOOST_TEST(n.parent >= 0);
      BOOST_TEST(static_cast<std::size_t>(n.parent) < checked);
      BOOST_REQUIRE(n.incoming.has_value());
      BOOST_TEST(n.incoming->end() == n.state);
      BOOST_TEST(distance(spec, n.incoming->start(), tree.node(static_cast<std::size_t>(n.parent)).state) <=
                 delta + 1e-12);
      BOOST_TEST(is_motion_free(env, *f.sys, n.incoming->states));
      for (std::size_t j = 0; j < checked; ++j)
        BOOST_TEST(distance(spec, tree.node(j).state, n.state) > delta);
    }
    if (iteration % 100 == 0) {
      Eigen::Vector2d lo = tree.node(0).state.head<2>(), hi = lo;
      for (const auto &n : tree.nodes()) {
        lo = lo.cwiseMin(n.state.head<2>());
        hi = hi.cwiseMax(n.state.head<2>());
      }
      box_area.push_back((hi - lo).prod());
    }
  };
  std::mt19937_64 rng(8);
  const auto res = db_rrt(f.sys, vec({1, 1, 0}), goal, env, *f.full, delta, p, rng);
  BOOST_TEST(!res.solved());
  BOOST_TEST(res.stats.iterations == 600u);
  BOOST_TEST(res.stats.expansions == 600u);
  BOOST_TEST(res.stats.forward_nodes == checked + 1);
  BOOST_TEST(res.stats.nodes_added == checked);
  BOOST_REQUIRE(box_area.size() == 6u);
  for (std::size_t i = 1; i < box_area.size(); ++i)
    BOOST_TEST(box_area[i] >= box_area[i - 1]);
  BOOST_TEST(box_area.back() > box_area.front());
}

BOOST_AUTO_TEST_CASE(solutions_are_delta_bounded) {
  const auto &f = fixture();
  const Environment env = desk(true);
  const double delta = 0.3;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    const auto res = db_rrt(f.sys, vec({1, 1, 0}), vec({7, 7, M_PI / 2}), env, *f.full, delta,
                            params_for(env), rng);
    BOOST_TEST_CONTEXT("seed " << seed) {
      BOOST_REQUIRE(res.solved());
      const auto &s = *res.solution;
      const auto v = validate_db_solution(*f.sys, env, vec({1, 1, 0}), vec({7, 7, M_PI / 2}),
                                          s.trajectory(), delta);
      BOOST_TEST(v.ok, v.reason);
      BOOST_TEST(v.start_distance <= delta);
      BOOST_TEST(v.goal_distance < delta);
      BOOST_TEST(s.defects.size() == s.controls.size());
      BOOST_TEST(*std::max_element(s.defects.begin(), s.defects.end()) <= delta);
    }
  }
}

BOOST_AUTO_TEST_CASE(validator_catches_violations) {
  const auto &f = fixture();
  const Environment env = desk(true);
  const MotionPrimitive m = constant_motion(*f.sys, vec({1, 1, 0}), vec({0.5, 0}), 10);
  const Trajectory ok{m.states, m.controls};
  BOOST_TEST(validate_db_solution(*f.sys, env, m.start(), m.end(), ok, 0.1).ok);

  Trajectory jump = ok;
  jump.states[5][1] += 0.2;
  auto v = validate_db_solution(*f.sys, env, m.start(), m.end(), jump, 0.1);
  BOOST_TEST(!v.ok);
  BOOST_TEST(v.max_defect == 0.2, boost::test_tools::tolerance(1e-9));

  Trajectory fast = ok;
  fast.controls[2][0] = 0.8;
  v = validate_db_solution(*f.sys, env, m.start(), m.end(), fast, 1.0);
  BOOST_TEST(v.control_violations == 1u);
  BOOST_TEST(!v.ok);

  v = validate_db_solution(*f.sys, env, m.start(), vec({5, 5, 0}), ok, 0.1);
  BOOST_TEST(!v.ok);
  BOOST_TEST(v.reason.find("goal") != std::string::npos);

  Environment blocked = env;
  blocked.obstacles.push_back(Obstacle::sphere({1.3, 1, 0}, 0.1));
  v = validate_db_solution(*f.sys, blocked, m.start(), m.end(), ok, 0.1);
  BOOST_TEST(v.colliding_states > 0u);
}

BOOST_AUTO_TEST_CASE(same_seed_same_solution) {
  const auto &f = fixture();
  const Environment env = desk(true);
  for (bool connect : {false, true}) {
    std::optional<DbSolution> first;
    for (int rep = 0; rep < 2; ++rep) {
      std::mt19937_64 rng(42);
      const auto res = connect ? db_rrt_connect(f.sys, vec({1, 1, 0}), vec({7, 7, 0}), env, *f.full,
                                                f.full->reversed(), 0.3, params_for(env), rng)
                               : db_rrt(f.sys, vec({1, 1, 0}), vec({7, 7, 0}), env, *f.full, 0.3,
                                        params_for(env), rng);
      BOOST_REQUIRE(res.solved());
      if (!first) {
        first = res.solution;
        continue;
      }
      BOOST_REQUIRE(first->states.size() == res.solution->states.size());
      for (std::size_t k = 0; k < first->states.size(); ++k)
        BOOST_TEST(first->states[k] == res.solution->states[k]);
      for (std::size_t k = 0; k < first->controls.size(); ++k)
        BOOST_TEST(first->controls[k] == res.solution->controls[k]);
    }
  }
}

BOOST_AUTO_TEST_CASE(connect_joins_within_delta) {
  const auto &f = fixture();
  const Environment env = desk(true);
  const double delta = 0.3;
  const State xs = vec({1, 1, 0}), xg = vec({7, 7, -M_PI / 2});
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    const auto res = db_rrt_connect(f.sys, xs, xg, env, *f.full, f.full->reversed(), delta,
                                    params_for(env), rng);
    BOOST_TEST_CONTEXT("seed " << seed) {
      BOOST_REQUIRE(res.solved());
      const auto v = validate_db_solution(*f.sys, env, xs, xg, res.solution->trajectory(), delta);
      BOOST_TEST(v.ok, v.reason);
      // the backward branch ends exactly on the goal
      BOOST_TEST(distance(f.spec(), res.solution->states.back(), xg) <= delta);
      BOOST_TEST(res.stats.forward_nodes + res.stats.backward_nodes == res.stats.nodes_added + 2);
    }
  }
}
