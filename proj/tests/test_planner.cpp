#define BOOST_TEST_MODULE planner
#include <boost/test/unit_test.hpp>

#include "dbrrt/planner.hpp"
#include "support.hpp"

using namespace dbrrt;
using dbrrt::testing::vec;

namespace {

const char *kNarrow = R"(name: narrow
system: unicycle1
environment:
  dim: 2
  min: [0, 0]
  max: [8, 8]
  obstacles:
    - {name: wall_low, type: box, center: [4.0, 1.75], half_extents: [0.2, 1.75]}
    - {name: wall_high, type: box, center: [4.0, 6.25], half_extents: [0.2, 1.75]}
start: [1.0, 1.5, 0.0]
goal: [7.0, 6.5, 0.0]
)";

const char *kTrivial = R"(name: trivial
system: unicycle1
environment: {dim: 2, min: [0, 0], max: [8, 8], obstacles: []}
start: [4.0, 4.0, 0.0]
goal: [4.1, 4.0, 0.0]
)";

std::shared_ptr<const PrimitiveLibrary> library_for(const ProblemInstance &p) {
  static std::shared_ptr<const PrimitiveLibrary> lib;
  if (!lib)
    lib = std::make_shared<const PrimitiveLibrary>(
        p.system_ptr(),
        generate_primitives_serial(p.system_ptr(), p.config.generation, 1000, 2, 20000));
  return lib;
}

PlannerConfig config_for(const ProblemInstance &p, std::uint64_t seed) {
  PlannerConfig c = default_planner_config(p.config);
  c.seed = seed;
  c.selection_seed = seed;
  return c;
}

} // namespace

BOOST_AUTO_TEST_CASE(trivial_problem_solves_in_first_iteration) {
  const ProblemInstance p = parse_problem(kTrivial, "trivial");
  const auto rep = idb_rrt(p, library_for(p), config_for(p, 0));
  BOOST_REQUIRE(rep.solved());
  BOOST_TEST(rep.outer_iterations() == 1);
  BOOST_REQUIRE(rep.db_solution.has_value());
  BOOST_TEST(rep.db_solution->controls.empty());
  BOOST_TEST(rep.solution.controls.size() == 10u);
  BOOST_TEST(validate_solution(p, rep.solution).ok);
}

BOOST_AUTO_TEST_CASE(optimizer_failure_shrinks_delta_only) {
  const ProblemInstance p = parse_problem(kNarrow, "narrow");
  int calls = 0;
  const Optimizer fail_once = [&](const OcpProblem &ocp, const StateSequence &xs,
                                  const ControlSequence &us, const SolverOptions &o) {
    if (calls++ == 0) {
      OptResult r;
      r.states = xs;
      r.controls = us;
      return r;
    }
    return solve_fddp(ocp, xs, us, o);
  };
  const PlannerConfig c = config_for(p, 4);
  const auto rep = idb_rrt(p, library_for(p), c, fail_once);
  BOOST_REQUIRE(rep.log.size() >= 2u);
  BOOST_TEST(rep.log[0].search_solved);
  BOOST_TEST(rep.log[0].optimized);
  BOOST_TEST(!rep.log[0].opt_converged);
  BOOST_TEST(rep.log[1].delta == c.delta_0 * c.delta_rate);
  BOOST_TEST(rep.log[1].num_primitives == rep.log[0].num_primitives);
}

BOOST_AUTO_TEST_CASE(search_failure_shrinks_delta_and_grows_primitives) {
  const ProblemInstance p = parse_problem(kNarrow, "narrow");
  PlannerConfig c = config_for(p, 1);
  c.inner_iterations = 5;
  c.max_outer_iterations = 4;
  const auto rep = idb_rrt(p, library_for(p), c);
  BOOST_TEST(!rep.solved());
  BOOST_REQUIRE(rep.log.size() == 4u);
  double delta = c.delta_0;
  double count = static_cast<double>(c.num_primitives_0);
  for (const auto &l : rep.log) {
    BOOST_TEST(!l.search_solved);
    BOOST_TEST(!l.optimized);
    BOOST_TEST(l.delta == delta);
    BOOST_TEST(l.num_primitives == static_cast<std::size_t>(std::ceil(count - 1e-9)));
    delta *= c.delta_rate;
    count = std::ceil(count * c.primitive_rate - 1e-9);
  }
}

BOOST_AUTO_TEST_CASE(schedules_are_monotone) {
  const ProblemInstance p = parse_problem(kNarrow, "narrow");
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    PlannerConfig c = config_for(p, seed);
    c.inner_iterations = 300;
    const auto rep = idb_rrt(p, library_for(p), c);
    for (std::size_t i = 1; i < rep.log.size(); ++i) {
      BOOST_TEST(rep.log[i].delta < rep.log[i - 1].delta);
      BOOST_TEST(rep.log[i].num_primitives >= rep.log[i - 1].num_primitives);
    }
  }
}

BOOST_AUTO_TEST_CASE(solved_runs_pass_the_validator) {
  const ProblemInstance p = parse_problem(kNarrow, "narrow");
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto rep = idb_rrt(p, library_for(p), config_for(p, seed));
    BOOST_TEST_CONTEXT("seed " << seed) {
      BOOST_REQUIRE(rep.solved());
      const auto v = validate_solution(p, rep.solution);
      BOOST_TEST(v.ok, v.reason);
      BOOST_TEST(v.report.max_defect <= 1e-5);
      BOOST_TEST(v.report.goal_distance <= 1e-3);
      BOOST_TEST(rep.cost == static_cast<double>(rep.solution.controls.size()) * p.system().dt());
      BOOST_TEST(rep.time_to_solution > 0.0);

      // the search output it started from is not dynamically feasible
      const auto raw = validate_solution(p, rep.db_solution->trajectory());
      if (!rep.db_solution->controls.empty() &&
          *std::max_element(rep.db_solution->defects.begin(), rep.db_solution->defects.end()) > 1e-5) {
        BOOST_TEST(!raw.ok);
        BOOST_TEST(raw.reason.find("defect") != std::string::npos);
      }

      Trajectory cut = rep.solution;
      cut.states.resize(cut.states.size() / 2);
      cut.controls.resize(cut.states.size() - 1);
      const auto truncated = validate_solution(p, cut);
      BOOST_TEST(!truncated.ok);
      BOOST_TEST(truncated.reason.find("goal") != std::string::npos);
    }
  }
}

BOOST_AUTO_TEST_CASE(same_seed_same_solution) {
  const ProblemInstance p = parse_problem(kNarrow, "narrow");
  const auto a = idb_rrt(p, library_for(p), config_for(p, 9));
  const auto b = idb_rrt(p, library_for(p), config_for(p, 9));
  BOOST_REQUIRE(a.solved());
  BOOST_REQUIRE(b.solved());
  BOOST_TEST(a.outer_iterations() == b.outer_iterations());
  BOOST_REQUIRE(a.solution.states.size() == b.solution.states.size());
  for (std::size_t k = 0; k < a.solution.states.size(); ++k)
    BOOST_TEST(a.solution.states[k] == b.solution.states[k]);
  for (std::size_t k = 0; k < a.solution.controls.size(); ++k)
    BOOST_TEST(a.solution.controls[k] == b.solution.controls[k]);
}

BOOST_AUTO_TEST_CASE(connect_variant_solves) {
  const ProblemInstance p = parse_problem(kNarrow, "narrow");
  PlannerConfig c = config_for(p, 2);
  c.variant = SearchVariant::Connect;
  const auto rep = idb_rrt(p, library_for(p), c);
  BOOST_REQUIRE(rep.solved());
  BOOST_TEST(validate_solution(p, rep.solution).ok);
}

BOOST_AUTO_TEST_CASE(global_timeout_gives_a_timeout_report) {
  const ProblemInstance p = parse_problem(kNarrow, "narrow");
  PlannerConfig c = config_for(p, 0);
  c.global_timeout = 1e-4;
  c.inner_iterations = 1000000;
  const auto rep = idb_rrt(p, library_for(p), c);
  BOOST_TEST(!rep.solved());
  BOOST_TEST(rep.solution.states.empty());
  BOOST_TEST(rep.time_to_solution < 1.0);
}

BOOST_AUTO_TEST_CASE(config_is_checked) {
  const ProblemInstance p = parse_problem(kTrivial, "trivial");
  PlannerConfig c = config_for(p, 0);
  c.delta_rate = 1.0;
  BOOST_CHECK_THROW(idb_rrt(p, library_for(p), c), UsageError);
  c = config_for(p, 0);
  c.primitive_rate = 0.9;
  BOOST_CHECK_THROW(idb_rrt(p, library_for(p), c), UsageError);
  c = config_for(p, 0);
  c.delta_0 = 0.0;
  BOOST_CHECK_THROW(idb_rrt(p, library_for(p), c), UsageError);
  BOOST_CHECK_THROW(parse_variant("sideways"), UsageError);
}
