#pragma once

#include "dbrrt/primitives.hpp"

#include <filesystem>

namespace dbrrt {

/// Planner defaults stored with each system.
struct PlannerDefaults {
  double delta_0 = 0.3;
  std::size_t num_primitives_0 = 200;
  double goal_bias = 0.1;
  /// Size of the precomputed library M_L the planner draws from.
  std::size_t library_size = 2000;
  /// Search iterations of the first Db-RRT call; later calls grow geometrically.
  std::size_t inner_iterations = 4000;
};

/// Everything a system file holds.
struct SystemConfig {
  SystemPtr system;
  GenerationConfig generation;
  PlannerDefaults planner;
  OcpWeights weights;
  /// CRC-32 of the system, generation and optimizer sections; part of the library cache key.
  std::uint32_t fingerprint = 0;
  std::filesystem::path source;
};

/// Directory holding systems/ and problems/. DBRRT_CONFIG_DIR in the environment
/// overrides the compiled-in location.
std::filesystem::path config_dir();

SystemConfig load_system_config(const std::filesystem::path &path);
/// `name_or_path` is either a file or the name of a file in config_dir()/systems.
SystemConfig find_system_config(const std::string &name_or_path);

/// Directory for generated libraries. DBRRT_CACHE_DIR overrides the default.
std::filesystem::path cache_dir();

/// Loads the library for (system, count, seed) from the cache or generates and stores
/// it. Generation uses the OpenMP kernel; the result does not depend on the thread count.
std::vector<MotionPrimitive> cached_primitives(const SystemConfig &cfg, std::size_t count,
                                               std::uint64_t seed,
                                               const std::filesystem::path &dir = cache_dir());

} // namespace dbrrt
