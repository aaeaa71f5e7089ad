#pragma once

#include "dbrrt/planner.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <mutex>

namespace dbrrt {

/// Trajectory file shared by search, optimizer, validator and plot. YAML with 17
/// significant digits; `time` is the only wall-clock field.
struct TrajectoryDump {
  std::string system;
  std::string problem;
  std::string stage; ///< "search" or "optimized"
  double delta = 0.0;
  std::uint64_t seed = 0;
  double time = 0.0;
  Trajectory traj;
  std::vector<double> defects;
};

std::string dump_to_yaml(const TrajectoryDump &d, bool include_timing = true);
void write_dump(const TrajectoryDump &d, const std::filesystem::path &path);
/// Throws ParseError with line information on malformed files.
TrajectoryDump read_dump(const std::filesystem::path &path);

enum class RunOutcome { Solved, Timeout, Error };
std::string to_string(RunOutcome o);

struct RunRecord {
  std::string problem;
  std::string system;
  std::string variant;
  std::uint64_t seed = 0;
  RunOutcome outcome = RunOutcome::Timeout;
  double t = 0.0; ///< seconds to first solution (or until giving up)
  double c = 0.0; ///< trajectory duration in seconds; 0 unless solved
  int outer_iterations = 0;
  std::size_t expansions = 0;
  std::string error;
  /// Kept only when the runner is asked to; not part of the machine-readable record.
  std::optional<PlannerReport> report;
};

struct BenchAggregate {
  std::string problem;
  std::string system;
  std::string variant;
  std::size_t runs = 0;
  std::size_t successes = 0;
  double success_rate = 0.0;
  std::optional<double> median_t; ///< over solved runs
  std::optional<double> median_c;
  /// Fewer than half the runs solved: reported with an asterisk.
  bool low_success = false;
};

/// Median of a non-empty sample (mean of the middle pair for even sizes).
double median(std::vector<double> v);
/// Groups records by (problem, variant), in first-appearance order.
std::vector<BenchAggregate> aggregate(const std::vector<RunRecord> &records);

/// Produces the full library M_L for a problem's system.
using LibraryProvider =
    std::function<std::shared_ptr<const PrimitiveLibrary>(const ProblemInstance &)>;

/// Caches libraries per system from cached_primitives(system file library_size, seed).
class CachedLibraries {
public:
  explicit CachedLibraries(std::uint64_t seed = 1, std::filesystem::path dir = cache_dir());
  std::shared_ptr<const PrimitiveLibrary> operator()(const ProblemInstance &problem);

private:
  std::uint64_t seed_;
  std::filesystem::path dir_;
  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<const PrimitiveLibrary>> libs_;
};

struct BenchConfig {
  SearchVariant variant = SearchVariant::Forward;
  std::vector<std::uint64_t> seeds;
  double timeout = 60.0;
  bool keep_reports = false;
  /// Applied to each problem's default planner config before a run.
  std::function<void(const ProblemInstance &, PlannerConfig &)> tweak;
};

/// Seeds first, first+1, ..., first+n-1.
std::vector<std::uint64_t> seed_range(std::uint64_t first, std::size_t n);

/// One planner run; exceptions become Error records.
RunRecord run_once(const ProblemInstance &problem, std::shared_ptr<const PrimitiveLibrary> lib,
                   const BenchConfig &config, std::uint64_t seed);

/// Records in (problem, seed) order. The OpenMP runner spreads the pairs over threads;
/// libraries are resolved before the parallel region.
std::vector<RunRecord> run_benchmark_serial(const std::vector<ProblemInstance> &problems,
                                            const LibraryProvider &libraries,
                                            const BenchConfig &config);
std::vector<RunRecord> run_benchmark_omp(const std::vector<ProblemInstance> &problems,
                                         const LibraryProvider &libraries,
                                         const BenchConfig &config);

/// One JSON object per line.
std::string records_to_jsonl(const std::vector<RunRecord> &records, bool include_timing = true);
/// Table with median t and c per problem; '*' marks low success, '-' no success.
std::string format_summary(const std::vector<BenchAggregate> &aggregates);

/// Top-down SVG of the workspace, obstacles (clipped to the workspace), start and goal
/// markers, the path and robot footprints along it. 3-D workspaces are projected on x-y
/// with a notice in the image.
void plot_solution_svg(const ProblemInstance &problem, const Trajectory &traj,
                       const std::filesystem::path &out);
std::string solution_svg(const ProblemInstance &problem, const Trajectory &traj);

} // namespace dbrrt
