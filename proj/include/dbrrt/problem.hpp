#pragma once

#include "dbrrt/collision.hpp"
#include "dbrrt/config.hpp"

#include <filesystem>

namespace dbrrt {

/// One planning query: system, environment, start, goal and a sampling box.
struct ProblemInstance {
  std::string name;
  /// System reference as written in the file (a name in config/systems or a path).
  std::string system_ref;
  SystemConfig config;
  Environment env;
  State start;
  State goal;
  /// Box for Sample(X_free). Translation components default to the workspace, the
  /// rest to the state bounds; every component must end up finite.
  State sample_lower;
  State sample_upper;
  std::filesystem::path source;

  const DynamicalSystem &system() const { return *config.system; }
  const SystemPtr &system_ptr() const { return config.system; }
};

/// Parses and validates a problem file. Schema errors throw ParseError with the line;
/// a start or goal that is out of bounds or in collision throws ConfigError naming the
/// offending obstacle.
ProblemInstance load_problem(const std::filesystem::path &path);
/// Same for in-memory text; `where` prefixes the messages.
ProblemInstance parse_problem(const std::string &text, const std::string &where);
/// Writes the instance back in the same schema (17 significant digits).
void save_problem(const ProblemInstance &prob, const std::filesystem::path &path);
std::string problem_to_yaml(const ProblemInstance &prob);

/// Throws ConfigError when the instance violates its invariants.
void validate_problem(const ProblemInstance &prob);

/// Every *.yaml problem in `dir`, sorted by file name.
std::vector<ProblemInstance> load_suite(const std::filesystem::path &dir);

} // namespace dbrrt
