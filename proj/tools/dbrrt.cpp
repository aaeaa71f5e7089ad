// Command line front end: primitive generation, planning, optimization, validation,
// benchmarking and plotting. Exit codes: 0 success, 1 failure (not solved / invalid),
// 2 usage or input error.

#include "dbrrt/bench.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

using namespace dbrrt;

namespace {

constexpr int kOk = 0;
constexpr int kFail = 1;
constexpr int kUsage = 2;

std::shared_ptr<const PrimitiveLibrary> library_for(const ProblemInstance &problem,
                                                    const std::string &file, std::uint64_t lib_seed) {
  if (!file.empty())
    return std::make_shared<const PrimitiveLibrary>(problem.system_ptr(),
                                                    load_primitives(file, problem.system()));
  CachedLibraries libs(lib_seed);
  return libs(problem);
}

void print_log(const PlannerReport &rep) {
  for (const auto &l : rep.log) {
    std::cerr << "iteration " << l.iteration << ": delta " << l.delta << ", primitives "
              << l.num_primitives << ", search " << (l.search_solved ? "solved" : "timeout") << " ("
              << l.search_stats.expansions << " expansions, " << l.search_stats.nodes_added << " nodes, "
              << l.search_stats.rejected_too_close << " too close, " << l.search_stats.failed_expansions
              << " failed, " << l.search_seconds << " s)";
    if (l.optimized)
      std::cerr << ", optimizer " << (l.opt_converged ? "converged" : "failed") << " after "
                << l.opt_iterations << " iterations";
    if (!l.opt_failure.empty())
      std::cerr << " [" << l.opt_failure << "]";
    std::cerr << "\n";
  }
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"dbrrt: kinodynamic planner, primitive generator and benchmark runner"};
  app.require_subcommand(1);

  // generate-primitives
  std::string system, out, in, problem_file, primitives_file, variant = "forward", suite;
  std::size_t count = 1000, max_attempts = 0, n_seeds = 20;
  std::uint64_t seed = 0, lib_seed = 1;
  double timeout = 60.0;
  bool serial = false;
  std::optional<double> delta;

  auto *gen = app.add_subcommand("generate-primitives", "Generate a primitive library");
  gen->add_option("--system", system, "System name or system file")->required();
  gen->add_option("--count", count, "Number of primitives")->check(CLI::PositiveNumber);
  gen->add_option("--seed", seed, "Random seed");
  gen->add_option("--max-attempts", max_attempts, "Attempt cap (default 100 * count)");
  gen->add_option("--out", out, "Output file")->required();
  gen->add_flag("--serial", serial, "Use the serial kernel");

  auto *valp = app.add_subcommand("validate-primitives", "Re-check every primitive of a library");
  valp->add_option("--system", system, "System name or system file")->required();
  valp->add_option("--in", in, "Library file")->required();

  auto *plan = app.add_subcommand("plan", "Solve one problem");
  plan->add_option("--problem", problem_file, "Problem file")->required();
  plan->add_option("--primitives", primitives_file, "Library file (default: cached library)");
  plan->add_option("--variant", variant, "forward or connect")
      ->check(CLI::IsMember({"forward", "connect"}));
  plan->add_option("--seed", seed, "Random seed");
  plan->add_option("--library-seed", lib_seed, "Seed of the cached library");
  plan->add_option("--timeout", timeout, "Seconds")->check(CLI::PositiveNumber);
  plan->add_option("--out", out, "Optimized trajectory file");
  std::string search_out;
  plan->add_option("--search-out", search_out, "Search output of the final iteration");

  auto *opt = app.add_subcommand("optimize", "Optimize a stored search output");
  opt->add_option("--problem", problem_file, "Problem file")->required();
  opt->add_option("--in", in, "Trajectory file")->required();
  opt->add_option("--out", out, "Output trajectory file")->required();

  auto *val = app.add_subcommand("validate", "Check a trajectory against a problem");
  val->add_option("--problem", problem_file, "Problem file")->required();
  val->add_option("--in", in, "Trajectory file")->required();
  val->add_option("--delta", delta,
                  "Check the discontinuity bound delta instead of full feasibility");

  auto *bench = app.add_subcommand("bench", "Run a problem suite over several seeds");
  bench->add_option("--suite", suite, "Directory of problem files")->required();
  bench->add_option("--variant", variant, "forward or connect")
      ->check(CLI::IsMember({"forward", "connect"}));
  bench->add_option("--seeds", n_seeds, "Number of seeds")->check(CLI::PositiveNumber);
  bench->add_option("--first-seed", seed, "First seed");
  bench->add_option("--library-seed", lib_seed, "Seed of the cached libraries");
  bench->add_option("--timeout", timeout, "Seconds per run")->check(CLI::PositiveNumber);
  bench->add_option("--out", out, "Output directory")->required();
  bench->add_flag("--serial", serial, "Run the pairs one after another");

  auto *plot = app.add_subcommand("plot", "Render a problem and optional trajectory as SVG");
  plot->add_option("--problem", problem_file, "Problem file")->required();
  plot->add_option("--in", in, "Trajectory file");
  plot->add_option("--out", out, "SVG file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) {
      const SystemConfig cfg = find_system_config(system);
      GenerationStats stats;
      const std::size_t cap = max_attempts ? max_attempts : 100 * count;
      const auto prims = serial ? generate_primitives_serial(cfg.system, cfg.generation, count, seed, cap, &stats)
                                : generate_primitives_omp(cfg.system, cfg.generation, count, seed, cap, &stats);
      save_primitives(out, *cfg.system, prims);
      std::cout << "generated " << prims.size() << " primitives in " << stats.attempts
                << " attempts\n";
      return prims.size() == count ? kOk : kFail;
    }

    if (*valp) {
      const SystemConfig cfg = find_system_config(system);
      const auto prims = load_primitives(in, *cfg.system);
      std::cout << prims.size() << " primitives valid\n";
      return kOk;
    }

    if (*plan) {
      const ProblemInstance problem = load_problem(problem_file);
      PlannerConfig pc = default_planner_config(problem.config);
      pc.variant = parse_variant(variant);
      pc.seed = seed;
      pc.selection_seed = seed;
      pc.global_timeout = timeout;
      const PlannerReport rep = idb_rrt(problem, library_for(problem, primitives_file, lib_seed), pc);
      print_log(rep);
      if (!search_out.empty() && rep.db_solution) {
        TrajectoryDump d{problem.system().name(), problem.name, "search", rep.db_solution->delta,
                         seed, rep.time_to_solution, rep.db_solution->trajectory(),
                         rep.db_solution->defects};
        write_dump(d, search_out);
      }
      if (!rep.solved()) {
        std::cout << "timeout after " << rep.time_to_solution << " s\n";
        return kFail;
      }
      if (!out.empty()) {
        TrajectoryDump d{problem.system().name(), problem.name, "optimized", 0.0, seed,
                         rep.time_to_solution, rep.solution,
                         step_defects(problem.system(), rep.solution)};
        write_dump(d, out);
      }
      std::cout << "solved: t = " << rep.time_to_solution << " s, c = " << rep.cost << " s, "
                << rep.outer_iterations() << " outer iterations\n";
      return kOk;
    }

    if (*opt) {
      const ProblemInstance problem = load_problem(problem_file);
      const TrajectoryDump d = read_dump(in);
      DbSolution sol{d.traj.states, d.traj.controls, d.delta, d.defects};
      const Trajectory warm = warm_start_from(problem.system(), sol);
      OcpProblem ocp;
      ocp.system = problem.system_ptr();
      ocp.horizon = static_cast<int>(warm.controls.size());
      ocp.x_start = problem.start;
      ocp.x_goal = problem.goal;
      ocp.env = problem.env;
      ocp.weights = problem.config.weights;
      const OptResult res = solve_fddp(ocp, warm.states, warm.controls);
      TrajectoryDump o{problem.system().name(), problem.name, "optimized", 0.0, d.seed, 0.0,
                       res.trajectory(), step_defects(problem.system(), res.trajectory())};
      write_dump(o, out);
      const auto v = validate_solution(problem, res.trajectory());
      std::cout << (res.converged ? "converged" : "not converged") << " after " << res.iterations
                << " iterations, max defect " << res.max_defect << ", "
                << (v.ok ? "valid" : "invalid: " + v.reason) << "\n";
      return v.ok ? kOk : kFail;
    }

    if (*val) {
      const ProblemInstance problem = load_problem(problem_file);
      const TrajectoryDump d = read_dump(in);
      if (delta) {
        const auto v = validate_db_solution(problem.system(), problem.env, problem.start,
                                            problem.goal, d.traj, *delta);
        std::cout << (v.ok ? "valid" : "invalid: " + v.reason) << " (max defect " << v.max_defect
                  << ")\n";
        return v.ok ? kOk : kFail;
      }
      const auto v = validate_solution(problem, d.traj);
      std::cout << (v.ok ? "valid" : "invalid: " + v.reason) << " (max defect "
                << v.report.max_defect << ", goal distance " << v.report.goal_distance << ")\n";
      return v.ok ? kOk : kFail;
    }

    if (*bench) {
      const auto problems = load_suite(suite);
      if (problems.empty()) {
        std::cerr << "no problem files in " << suite << "\n";
        return kUsage;
      }
      BenchConfig bc;
      bc.variant = parse_variant(variant);
      bc.seeds = seed_range(seed, n_seeds);
      bc.timeout = timeout;
      CachedLibraries libs(lib_seed);
      LibraryProvider provider = [&](const ProblemInstance &p) { return libs(p); };
      const auto records = serial ? run_benchmark_serial(problems, provider, bc)
                                  : run_benchmark_omp(problems, provider, bc);
      std::filesystem::create_directories(out);
      std::ofstream(std::filesystem::path(out) / "runs.jsonl") << records_to_jsonl(records);
      const std::string summary = format_summary(aggregate(records));
      std::ofstream(std::filesystem::path(out) / "summary.txt") << summary;
      std::cout << summary;
      return kOk;
    }

    if (*plot) {
      const ProblemInstance problem = load_problem(problem_file);
      Trajectory traj;
      if (!in.empty())
        traj = read_dump(in).traj;
      plot_solution_svg(problem, traj, out);
      return kOk;
    }
  } catch (const UsageError &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ConfigError &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ParseError &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFail;
  }
  return kUsage;
}
