#include "dbrrt/bench.hpp"

#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace dbrrt {

namespace {

void emit_rows(YAML::Emitter &out, const std::vector<Eigen::VectorXd> &rows) {
  out << YAML::BeginSeq;
  for (const auto &r : rows) {
    out << YAML::Flow << YAML::BeginSeq;
    for (Eigen::Index i = 0; i < r.size(); ++i)
      out << r[i];
    out << YAML::EndSeq;
  }
  out << YAML::EndSeq;
}

[[noreturn]] void parse_fail(const std::string &where, const YAML::Node &n, const std::string &msg) {
  const int line = n.Mark().line;
  throw ParseError(where + (line >= 0 ? ":" + std::to_string(line + 1) : "") + ": " + msg);
}

std::vector<Eigen::VectorXd> read_rows(const std::string &where, const YAML::Node &n,
                                       const char *what) {
  if (!n || !n.IsSequence())
    parse_fail(where, n, std::string(what) + " must be a list of vectors");
  std::vector<Eigen::VectorXd> rows;
  for (const auto &r : n) {
    if (!r.IsSequence())
      parse_fail(where, r, std::string(what) + " entries must be lists");
    Eigen::VectorXd v(static_cast<Eigen::Index>(r.size()));
    for (std::size_t i = 0; i < r.size(); ++i) {
      try {
        v[static_cast<Eigen::Index>(i)] = r[i].as<double>();
      } catch (const YAML::Exception &) {
        parse_fail(where, r[i], std::string(what) + " entries must be numbers");
      }
    }
    rows.push_back(std::move(v));
  }
  return rows;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

} // namespace

std::string dump_to_yaml(const TrajectoryDump &d, bool include_timing) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "system" << YAML::Value << d.system;
  out << YAML::Key << "problem" << YAML::Value << d.problem;
  out << YAML::Key << "stage" << YAML::Value << d.stage;
  out << YAML::Key << "delta" << YAML::Value << d.delta;
  out << YAML::Key << "seed" << YAML::Value << d.seed;
  if (include_timing)
    out << YAML::Key << "time" << YAML::Value << d.time;
  out << YAML::Key << "states" << YAML::Value;
  emit_rows(out, d.traj.states);
  out << YAML::Key << "controls" << YAML::Value;
  emit_rows(out, d.traj.controls);
  out << YAML::Key << "defects" << YAML::Value << YAML::Flow << d.defects;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

void write_dump(const TrajectoryDump &d, const std::filesystem::path &path) {
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out)
    throw ConfigError("cannot write " + path.string());
  out << dump_to_yaml(d);
}

TrajectoryDump read_dump(const std::filesystem::path &path) {
  const std::string where = path.string();
  YAML::Node root;
  try {
    root = YAML::LoadFile(where);
  } catch (const YAML::BadFile &) {
    throw ConfigError("cannot open " + where);
  } catch (const YAML::ParserException &e) {
    throw ParseError(where + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  if (!root.IsMap())
    parse_fail(where, root, "a trajectory file must be a mapping");
  TrajectoryDump d;
  try {
    d.system = root["system"] ? root["system"].as<std::string>() : "";
    d.problem = root["problem"] ? root["problem"].as<std::string>() : "";
    d.stage = root["stage"] ? root["stage"].as<std::string>() : "";
    d.delta = root["delta"] ? root["delta"].as<double>() : 0.0;
    d.seed = root["seed"] ? root["seed"].as<std::uint64_t>() : 0;
    d.time = root["time"] ? root["time"].as<double>() : 0.0;
    if (root["defects"])
      d.defects = root["defects"].as<std::vector<double>>();
  } catch (const YAML::Exception &e) {
    parse_fail(where, root, e.what());
  }
  d.traj.states = read_rows(where, root["states"], "states");
  d.traj.controls = read_rows(where, root["controls"], "controls");
  if (d.traj.states.size() != d.traj.controls.size() + 1)
    parse_fail(where, root, "need exactly one more state than controls");
  return d;
}

// ---------------------------------------------------------------------------

std::string to_string(RunOutcome o) {
  switch (o) {
  case RunOutcome::Solved:
    return "solved";
  case RunOutcome::Timeout:
    return "timeout";
  case RunOutcome::Error:
    return "error";
  }
  return "error";
}

double median(std::vector<double> v) {
  if (v.empty())
    throw UsageError("median of an empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<BenchAggregate> aggregate(const std::vector<RunRecord> &records) {
  std::vector<BenchAggregate> out;
  std::vector<std::vector<double>> ts, cs;
  for (const auto &r : records) {
    auto it = std::find_if(out.begin(), out.end(), [&](const BenchAggregate &a) {
      return a.problem == r.problem && a.variant == r.variant;
    });
    if (it == out.end()) {
      BenchAggregate a;
      a.problem = r.problem;
      a.system = r.system;
      a.variant = r.variant;
      out.push_back(a);
      ts.emplace_back();
      cs.emplace_back();
      it = out.end() - 1;
    }
    const auto k = static_cast<std::size_t>(it - out.begin());
    ++it->runs;
    if (r.outcome == RunOutcome::Solved) {
      ++it->successes;
      ts[k].push_back(r.t);
      cs[k].push_back(r.c);
    }
  }
  for (std::size_t k = 0; k < out.size(); ++k) {
    auto &a = out[k];
    a.success_rate = static_cast<double>(a.successes) / static_cast<double>(a.runs);
    a.low_success = 2 * a.successes < a.runs;
    if (a.successes > 0) {
      a.median_t = median(ts[k]);
      a.median_c = median(cs[k]);
    }
  }
  return out;
}

CachedLibraries::CachedLibraries(std::uint64_t seed, std::filesystem::path dir)
    : seed_(seed), dir_(std::move(dir)) {}

std::shared_ptr<const PrimitiveLibrary> CachedLibraries::operator()(const ProblemInstance &problem) {
  const auto &cfg = problem.config;
  const std::string key = cfg.source.string();
  std::lock_guard lock(mutex_);
  auto it = libs_.find(key);
  if (it == libs_.end()) {
    auto prims = cached_primitives(cfg, cfg.planner.library_size, seed_, dir_);
    it = libs_.emplace(key, std::make_shared<const PrimitiveLibrary>(cfg.system, std::move(prims)))
             .first;
  }
  return it->second;
}

std::vector<std::uint64_t> seed_range(std::uint64_t first, std::size_t n) {
  std::vector<std::uint64_t> s(n);
  for (std::size_t i = 0; i < n; ++i)
    s[i] = first + i;
  return s;
}

RunRecord run_once(const ProblemInstance &problem, std::shared_ptr<const PrimitiveLibrary> lib,
                   const BenchConfig &config, std::uint64_t seed) {
  RunRecord r;
  r.problem = problem.name;
  r.system = problem.system().name();
  r.variant = to_string(config.variant);
  r.seed = seed;
  try {
    PlannerConfig pc = default_planner_config(problem.config);
    pc.variant = config.variant;
    pc.seed = seed;
    pc.selection_seed = seed;
    pc.global_timeout = config.timeout;
    if (config.tweak)
      config.tweak(problem, pc);
    PlannerReport rep = idb_rrt(problem, std::move(lib), pc);
    r.outcome = rep.solved() ? RunOutcome::Solved : RunOutcome::Timeout;
    r.t = rep.time_to_solution;
    r.c = rep.solved() ? rep.cost : 0.0;
    r.outer_iterations = rep.outer_iterations();
    for (const auto &l : rep.log)
      r.expansions += l.search_stats.expansions;
    if (config.keep_reports)
      r.report = std::move(rep);
  } catch (const std::exception &e) {
    r.outcome = RunOutcome::Error;
    r.error = e.what();
  }
  return r;
}

namespace {

std::vector<std::shared_ptr<const PrimitiveLibrary>>
resolve_libraries(const std::vector<ProblemInstance> &problems, const LibraryProvider &libraries) {
  std::vector<std::shared_ptr<const PrimitiveLibrary>> libs;
  libs.reserve(problems.size());
  for (const auto &p : problems)
    libs.push_back(libraries(p));
  return libs;
}

} // namespace

std::vector<RunRecord> run_benchmark_serial(const std::vector<ProblemInstance> &problems,
                                            const LibraryProvider &libraries,
                                            const BenchConfig &config) {
  if (config.seeds.empty())
    throw UsageError("benchmark needs at least one seed");
  const auto libs = resolve_libraries(problems, libraries);
  std::vector<RunRecord> out;
  for (std::size_t p = 0; p < problems.size(); ++p)
    for (std::uint64_t s : config.seeds)
      out.push_back(run_once(problems[p], libs[p], config, s));
  return out;
}

std::vector<RunRecord> run_benchmark_omp(const std::vector<ProblemInstance> &problems,
                                         const LibraryProvider &libraries,
                                         const BenchConfig &config) {
  if (config.seeds.empty())
    throw UsageError("benchmark needs at least one seed");
  const auto libs = resolve_libraries(problems, libraries);
  const std::size_t ns = config.seeds.size();
  const auto total = static_cast<std::int64_t>(problems.size() * ns);
  std::vector<RunRecord> out(static_cast<std::size_t>(total));
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < total; ++i) {
    const auto k = static_cast<std::size_t>(i);
    out[k] = run_once(problems[k / ns], libs[k / ns], config, config.seeds[k % ns]);
  }
  return out;
}

std::string records_to_jsonl(const std::vector<RunRecord> &records, bool include_timing) {
  std::string out;
  for (const auto &r : records) {
    nlohmann::ordered_json j;
    j["problem"] = r.problem;
    j["system"] = r.system;
    j["variant"] = r.variant;
    j["seed"] = r.seed;
    j["outcome"] = to_string(r.outcome);
    if (include_timing)
      j["t"] = r.t;
    j["c"] = r.c;
    j["outer_iterations"] = r.outer_iterations;
    j["expansions"] = r.expansions;
    if (!r.error.empty())
      j["error"] = r.error;
    out += j.dump() + "\n";
  }
  return out;
}

std::string format_summary(const std::vector<BenchAggregate> &aggregates) {
  std::ostringstream s;
  s << std::left << std::setw(32) << "problem" << std::setw(10) << "variant" << std::setw(10)
    << "success" << std::setw(12) << "t [s]" << std::setw(12) << "c [s]" << "\n";
  for (const auto &a : aggregates) {
    const std::string mark = a.low_success ? "*" : "";
    auto cell = [&](const std::optional<double> &v) { return v ? fmt(*v) + mark : std::string("-"); };
    s << std::left << std::setw(32) << a.problem << std::setw(10) << a.variant << std::setw(10)
      << (std::to_string(a.successes) + "/" + std::to_string(a.runs)) << std::setw(12)
      << cell(a.median_t) << std::setw(12) << cell(a.median_c) << "\n";
  }
  s << "* fewer than half of the runs solved; - no run solved\n";
  return s.str();
}

// ---------------------------------------------------------------------------

std::string solution_svg(const ProblemInstance &problem, const Trajectory &traj) {
  const auto &env = problem.env;
  const auto &sys = problem.system();
  const double w = env.workspace_max[0] - env.workspace_min[0];
  const double h = env.workspace_max[1] - env.workspace_min[1];
  const double scale = 600.0 / std::max(w, h);
  const double W = w * scale, H = h * scale;
  auto px = [&](double x) { return fmt((x - env.workspace_min[0]) * scale); };
  auto py = [&](double y) { return fmt((env.workspace_max[1] - y) * scale); };
  auto len = [&](double l) { return fmt(l * scale); };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(W) << "\" height=\"" << fmt(H)
    << "\" viewBox=\"0 0 " << fmt(W) << " " << fmt(H) << "\">\n";
  s << "<defs><clipPath id=\"ws\"><rect x=\"0\" y=\"0\" width=\"" << fmt(W) << "\" height=\""
    << fmt(H) << "\"/></clipPath></defs>\n";
  s << "<rect x=\"0\" y=\"0\" width=\"" << fmt(W) << "\" height=\"" << fmt(H)
    << "\" fill=\"white\" stroke=\"black\"/>\n";
  s << "<g clip-path=\"url(#ws)\">\n";
  for (const auto &o : env.obstacles) {
    if (o.kind == ShapeKind::Box)
      s << "<rect x=\"" << px(o.center[0] - o.half_extents[0]) << "\" y=\""
        << py(o.center[1] + o.half_extents[1]) << "\" width=\"" << len(2 * o.half_extents[0])
        << "\" height=\"" << len(2 * o.half_extents[1]) << "\" fill=\"#888\"/>\n";
    else
      s << "<circle cx=\"" << px(o.center[0]) << "\" cy=\"" << py(o.center[1]) << "\" r=\""
        << len(o.radius) << "\" fill=\"#888\"/>\n";
  }

  std::vector<Eigen::Vector3d> bodies;
  const auto &radii = sys.geometry().radii;
  auto footprint = [&](const State &x, const char *color) {
    sys.body_positions(x, bodies);
    for (std::size_t b = 0; b < bodies.size(); ++b)
      s << "<circle cx=\"" << px(bodies[b][0]) << "\" cy=\"" << py(bodies[b][1]) << "\" r=\""
        << len(radii[b]) << "\" fill=\"none\" stroke=\"" << color << "\"/>\n";
  };
  auto anchor = [&](const State &x) {
    sys.body_positions(x, bodies);
    return sys.spec().translation_dim() > 0 ? bodies.front() : bodies.back();
  };

  if (!traj.states.empty()) {
    const std::size_t stride = std::max<std::size_t>(1, traj.states.size() / 25);
    for (std::size_t k = 0; k < traj.states.size(); k += stride)
      footprint(traj.states[k], "#4a7fd4");
    s << "<polyline fill=\"none\" stroke=\"#1f3f8f\" stroke-width=\"2\" points=\"";
    for (const auto &x : traj.states) {
      const auto p = anchor(x);
      s << px(p[0]) << "," << py(p[1]) << " ";
    }
    s << "\"/>\n";
  }
  footprint(problem.start, "green");
  footprint(problem.goal, "red");
  s << "</g>\n";
  if (env.dim == 3)
    s << "<text x=\"6\" y=\"16\" font-size=\"12\">x-y projection of a 3-D workspace</text>\n";
  s << "</svg>\n";
  return s.str();
}

void plot_solution_svg(const ProblemInstance &problem, const Trajectory &traj,
                       const std::filesystem::path &out) {
  if (out.has_parent_path())
    std::filesystem::create_directories(out.parent_path());
  std::ofstream f(out);
  if (!f)
    throw ConfigError("cannot write " + out.string());
  f << solution_svg(problem, traj);
}

} // namespace dbrrt
