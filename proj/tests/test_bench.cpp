#define BOOST_TEST_MODULE bench
#include <boost/test/unit_test.hpp>

#include "dbrrt/bench.hpp"
#include "support.hpp"

#include <fstream>

using namespace dbrrt;
using dbrrt::testing::vec;

namespace {

const char *kEmpty = R"(name: empty
system: unicycle1
environment: {dim: 2, min: [0, 0], max: [8, 8], obstacles: []}
start: [1.0, 1.0, 0.0]
goal: [6.0, 5.0, 1.5707963267948966]
)";

const char *kScattered = R"(name: scattered
system: unicycle1
environment:
  dim: 2
  min: [0, 0]
  max: [8, 8]
  obstacles:
    - {name: pillar, type: sphere, center: [3.0, 3.0], radius: 0.7}
    - {name: crate, type: box, center: [5.5, 2.0], half_extents: [0.5, 0.8]}
    - {name: outside, type: box, center: [9.0, 4.0], half_extents: [1.5, 0.5]}
start: [1.0, 1.0, 0.0]
goal: [7.0, 7.0, 0.0]
)";

std::filesystem::path temp_path(const std::string &name) {
  return std::filesystem::temp_directory_path() / ("dbrrt_bench_" + name);
}

std::string with_line(const std::string &text, const std::string &from, const std::string &to) {
  std::string s = text;
  s.replace(s.find(from), from.size(), to);
  return s;
}

std::shared_ptr<const PrimitiveLibrary> small_library(const ProblemInstance &p) {
  static std::shared_ptr<const PrimitiveLibrary> lib;
  if (!lib)
    lib = std::make_shared<const PrimitiveLibrary>(
        p.system_ptr(), generate_primitives_serial(p.system_ptr(), p.config.generation, 600, 4, 12000));
  return lib;
}

RunRecord record(RunOutcome o, double t, double c) {
  RunRecord r;
  r.problem = "p";
  r.system = "unicycle1";
  r.variant = "forward";
  r.outcome = o;
  r.t = t;
  r.c = c;
  return r;
}

} // namespace

namespace dbrrt {
std::ostream &operator<<(std::ostream &os, RunOutcome o) { return os << to_string(o); }
} // namespace dbrrt

BOOST_AUTO_TEST_CASE(minimal_problem_loads) {
  const ProblemInstance p = parse_problem(kEmpty, "empty");
  BOOST_TEST(p.name == "empty");
  BOOST_TEST(p.env.obstacles.empty());
  BOOST_TEST(p.start == vec({1, 1, 0}));
  BOOST_TEST(p.system().name() == "unicycle1");
  BOOST_TEST(p.sample_lower[0] == 0.0);
  BOOST_TEST(p.sample_upper[1] == 8.0);
}

BOOST_AUTO_TEST_CASE(schema_errors_carry_line_numbers) {
  const std::string bad_number = with_line(kEmpty, "start: [1.0, 1.0, 0.0]", "start: [1.0, abc, 0.0]");
  try {
    parse_problem(bad_number, "f.yaml");
    BOOST_FAIL("expected a parse error");
  } catch (const ParseError &e) {
    BOOST_TEST(std::string(e.what()).find("f.yaml:4") != std::string::npos, e.what());
  }
  const std::string bad_shape = with_line(kScattered, "type: sphere", "type: cone");
  try {
    parse_problem(bad_shape, "g.yaml");
    BOOST_FAIL("expected a parse error");
  } catch (const ParseError &e) {
    BOOST_TEST(std::string(e.what()).find("g.yaml:8") != std::string::npos, e.what());
  }
  BOOST_CHECK_THROW(parse_problem("name: [unclosed", "h.yaml"), ParseError);
  BOOST_CHECK_THROW(parse_problem(with_line(kEmpty, "start: [1.0, 1.0, 0.0]", "start: [1.0, 1.0]"), "i"),
                    ParseError);
  BOOST_CHECK_THROW(parse_problem(with_line(kEmpty, "system: unicycle1", "system: hovercraft"), "j"),
                    ParseError);
  BOOST_CHECK_THROW(load_problem(temp_path("missing.yaml")), ConfigError);
}

BOOST_AUTO_TEST_CASE(start_in_obstacle_names_it) {
  const std::string inside = with_line(kScattered, "start: [1.0, 1.0, 0.0]", "start: [3.0, 3.2, 0.0]");
  try {
    parse_problem(inside, "s.yaml");
    BOOST_FAIL("expected a validation error");
  } catch (const ConfigError &e) {
    BOOST_TEST(std::string(e.what()).find("pillar") != std::string::npos, e.what());
  }
  const std::string out = with_line(kEmpty, "goal: [6.0, 5.0", "goal: [9.0, 5.0");
  BOOST_CHECK_THROW(parse_problem(out, "o.yaml"), ConfigError);
}

BOOST_AUTO_TEST_CASE(problem_round_trip) {
  const ProblemInstance a = parse_problem(kScattered, "scattered");
  const auto path = temp_path("round.yaml");
  save_problem(a, path);
  const ProblemInstance b = load_problem(path);
  BOOST_TEST(problem_to_yaml(a) == problem_to_yaml(b));
  BOOST_TEST(a.start == b.start);
  BOOST_TEST(a.goal == b.goal);
  BOOST_REQUIRE(a.env.obstacles.size() == b.env.obstacles.size());
  for (std::size_t i = 0; i < a.env.obstacles.size(); ++i) {
    BOOST_TEST(a.env.obstacles[i].name == b.env.obstacles[i].name);
    BOOST_TEST(a.env.obstacles[i].center == b.env.obstacles[i].center);
    BOOST_TEST(a.env.obstacles[i].half_extents == b.env.obstacles[i].half_extents);
    BOOST_TEST(a.env.obstacles[i].radius == b.env.obstacles[i].radius);
  }
  std::filesystem::remove(path);
}

BOOST_AUTO_TEST_CASE(shipped_problems_load) {
  const auto suite = load_suite(config_dir() / "problems");
  BOOST_TEST(suite.size() >= 17u);
  for (const auto &p : suite)
    BOOST_TEST(is_state_free(p.env, p.system(), p.start), p.name);
}

BOOST_AUTO_TEST_CASE(median_of_sorted_sample) {
  BOOST_TEST(median({3.0, 1.0, 2.0}) == 2.0);
  BOOST_TEST(median({4.0, 1.0, 3.0, 2.0}) == 2.5);
  BOOST_TEST(median({7.0}) == 7.0);
  BOOST_CHECK_THROW(median({}), UsageError);
}

BOOST_AUTO_TEST_CASE(aggregates_flag_low_success) {
  std::vector<RunRecord> all, some, none;
  for (int i = 0; i < 20; ++i) {
    all.push_back(record(RunOutcome::Solved, 1.0 + i, 10.0 + i));
    some.push_back(i < 9 ? record(RunOutcome::Solved, 2.0 * i, 5.0) : record(RunOutcome::Timeout, 60.0, 0.0));
    none.push_back(record(i % 2 ? RunOutcome::Timeout : RunOutcome::Error, 60.0, 0.0));
  }
  const auto a = aggregate(all).at(0);
  BOOST_TEST(a.success_rate == 1.0);
  BOOST_TEST(!a.low_success);
  BOOST_TEST(*a.median_t == 10.5);
  BOOST_TEST(*a.median_c == 19.5);

  const auto s = aggregate(some).at(0);
  BOOST_TEST(s.successes == 9u);
  BOOST_TEST(s.low_success);
  BOOST_TEST(*s.median_t == 8.0);
  BOOST_TEST(format_summary({s}).find("8.0000*") != std::string::npos);

  const auto n = aggregate(none).at(0);
  BOOST_TEST(n.successes == 0u);
  BOOST_TEST(!n.median_t.has_value());
  const std::string table = format_summary({n});
  BOOST_TEST(table.find("0/20      -") != std::string::npos, table);
}

BOOST_AUTO_TEST_CASE(records_split_by_problem_and_variant) {
  std::vector<RunRecord> rs{record(RunOutcome::Solved, 1, 1), record(RunOutcome::Solved, 2, 2)};
  rs[1].variant = "connect";
  rs.push_back(record(RunOutcome::Solved, 3, 3));
  rs.back().problem = "q";
  const auto agg = aggregate(rs);
  BOOST_REQUIRE(agg.size() == 3u);
  BOOST_TEST(agg[0].runs == 1u);
  BOOST_TEST(agg[2].problem == "q");
  const std::string jsonl = records_to_jsonl(rs, false);
  BOOST_TEST(std::count(jsonl.begin(), jsonl.end(), '\n') == 3);
  BOOST_TEST(jsonl.find("\"t\"") == std::string::npos);
  BOOST_TEST(records_to_jsonl(rs).find("\"t\":") != std::string::npos);
}

BOOST_AUTO_TEST_CASE(runners_agree_and_are_deterministic) {
  const std::vector<ProblemInstance> problems{parse_problem(kEmpty, "empty"),
                                              parse_problem(kScattered, "scattered")};
  const LibraryProvider lib = [](const ProblemInstance &p) { return small_library(p); };
  BenchConfig bc;
  bc.seeds = seed_range(3, 4);
  bc.timeout = 30;
  const auto serial = run_benchmark_serial(problems, lib, bc);
  const auto parallel = run_benchmark_omp(problems, lib, bc);
  BOOST_TEST(records_to_jsonl(serial, false) == records_to_jsonl(parallel, false));
  BOOST_REQUIRE(serial.size() == 8u);
  BOOST_TEST(serial[5].problem == "scattered");
  BOOST_TEST(serial[5].seed == 4u);
  for (const auto &r : serial) {
    BOOST_TEST(r.outcome == RunOutcome::Solved);
    BOOST_TEST(r.t <= bc.timeout + 1.0);
  }
}

BOOST_AUTO_TEST_CASE(costs_match_the_validator) {
  const ProblemInstance p = parse_problem(kScattered, "scattered");
  BenchConfig bc;
  bc.keep_reports = true;
  const RunRecord r = run_once(p, small_library(p), bc, 11);
  BOOST_REQUIRE(r.outcome == RunOutcome::Solved);
  const auto &traj = r.report->solution;
  BOOST_TEST(validate_solution(p, traj).ok);
  BOOST_TEST(r.c == static_cast<double>(traj.controls.size()) * p.system().dt());
}

BOOST_AUTO_TEST_CASE(timeout_is_enforced) {
  const ProblemInstance p = parse_problem(kScattered, "scattered");
  BenchConfig bc;
  bc.timeout = 0.3;
  bc.tweak = [](const ProblemInstance &, PlannerConfig &c) {
    // one search call that can never finish in time: goal far away and a tiny library
    c.num_primitives_0 = 2;
    c.inner_iterations = 100000000;
    c.inner_time_budget = 1000;
  };
  const RunRecord r = run_once(p, small_library(p), bc, 0);
  BOOST_TEST(r.outcome == RunOutcome::Timeout);
  BOOST_TEST(r.t <= bc.timeout + 1.0);
  BOOST_TEST(r.c == 0.0);
}

BOOST_AUTO_TEST_CASE(crashing_runs_are_recorded) {
  const ProblemInstance p = parse_problem(kEmpty, "empty");
  BenchConfig bc;
  bc.tweak = [](const ProblemInstance &, PlannerConfig &c) { c.delta_rate = 2.0; };
  const RunRecord r = run_once(p, small_library(p), bc, 0);
  BOOST_TEST(r.outcome == RunOutcome::Error);
  BOOST_TEST(!r.error.empty());
  BOOST_CHECK_THROW(run_benchmark_serial({p}, [](const ProblemInstance &q) { return small_library(q); },
                                         BenchConfig{}),
                    UsageError);
}

BOOST_AUTO_TEST_CASE(trajectory_dump_round_trip) {
  TrajectoryDump d;
  d.system = "unicycle1";
  d.problem = "empty";
  d.stage = "search";
  d.delta = 0.3;
  d.seed = 12;
  d.time = 0.125;
  d.traj.states = {vec({0.1, 1.0 / 3.0, -2.5}), vec({1e-17, 2, 3})};
  d.traj.controls = {vec({0.5, -0.25})};
  d.defects = {0.1234567890123456789};
  const auto path = temp_path("dump.yaml");
  write_dump(d, path);
  const TrajectoryDump e = read_dump(path);
  BOOST_TEST(e.system == d.system);
  BOOST_TEST(e.seed == d.seed);
  BOOST_TEST(e.delta == d.delta);
  BOOST_TEST(e.time == d.time);
  BOOST_TEST(e.traj.states[0] == d.traj.states[0]);
  BOOST_TEST(e.traj.states[1] == d.traj.states[1]);
  BOOST_TEST(e.traj.controls[0] == d.traj.controls[0]);
  BOOST_TEST(e.defects == d.defects);
  BOOST_TEST(dump_to_yaml(e) == dump_to_yaml(d));
  d.time = 99.0;
  BOOST_TEST(dump_to_yaml(e, false) == dump_to_yaml(d, false));

  std::ofstream(path) << "system: unicycle1\nstates:\n  - [1, 2]\n  - [x, 2]\n";
  try {
    read_dump(path);
    BOOST_FAIL("expected a parse error");
  } catch (const ParseError &e) {
    BOOST_TEST(std::string(e.what()).find(":4") != std::string::npos, e.what());
  }
  std::filesystem::remove(path);
}

BOOST_AUTO_TEST_CASE(svg_rendering) {
  const ProblemInstance p = parse_problem(kScattered, "scattered");
  const std::string empty = solution_svg(p, {});
  BOOST_TEST(empty.find("<svg") == 0u);
  BOOST_TEST(empty.find("polyline") == std::string::npos);
  BOOST_TEST(empty.find("clipPath") != std::string::npos);
  BOOST_TEST(empty == solution_svg(p, {}));

  BenchConfig bc;
  bc.keep_reports = true;
  const RunRecord r = run_once(p, small_library(p), bc, 2);
  BOOST_REQUIRE(r.outcome == RunOutcome::Solved);
  const auto path = temp_path("plot.svg");
  plot_solution_svg(p, r.report->solution, path);
  BOOST_TEST(std::filesystem::file_size(path) > 0u);
  const std::string svg = solution_svg(p, r.report->solution);
  BOOST_TEST(svg.find("polyline") != std::string::npos);
  BOOST_TEST(svg == solution_svg(p, r.report->solution));
  std::filesystem::remove(path);
}
