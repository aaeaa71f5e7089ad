#include "dbrrt/config.hpp"

#include <boost/crc.hpp>
#include <string_view>
#include <yaml-cpp/yaml.h>

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#ifndef DBRRT_CONFIG_DIR
#define DBRRT_CONFIG_DIR "config"
#endif
#ifndef DBRRT_CACHE_DIR
#define DBRRT_CACHE_DIR "cache"
#endif

namespace dbrrt {

namespace {

// bump when generation changes in a way the system files do not capture
constexpr int kGeneratorVersion = 1;

std::string read_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ConfigError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

State read_vector(const YAML::Node &node, int n, const std::string &what) {
  const auto v = node.as<std::vector<double>>();
  if (static_cast<int>(v.size()) != n)
    throw ConfigError(what + " must have " + std::to_string(n) + " entries");
  return Eigen::Map<const Eigen::VectorXd>(v.data(), n);
}

template <typename T> void read(const YAML::Node &node, const char *key, T &value) {
  if (node && node[key])
    value = node[key].as<T>();
}

void read_weights(const YAML::Node &o, OcpWeights &w) {
  if (!o)
    return;
  read(o, "goal", w.goal);
  read(o, "collision", w.collision);
  read(o, "bounds", w.bounds);
  read(o, "control_reg", w.control_reg);
  read(o, "accel_reg", w.accel_reg);
  read(o, "collision_margin", w.collision_margin);
  read(o, "bounds_margin", w.bounds_margin);
}

} // namespace

std::filesystem::path config_dir() {
  if (const char *env = std::getenv("DBRRT_CONFIG_DIR"))
    return env;
  return DBRRT_CONFIG_DIR;
}

std::filesystem::path cache_dir() {
  if (const char *env = std::getenv("DBRRT_CACHE_DIR"))
    return env;
  return DBRRT_CACHE_DIR;
}

SystemConfig load_system_config(const std::filesystem::path &path) {
  const std::string text = read_file(path);
  SystemConfig cfg;
  cfg.source = path;
  try {
    const YAML::Node root = YAML::Load(text);
    // only what generation reads goes into the cache key; optimizer weights count
    // unless the generation section carries its own
    const bool own_weights = root["generation"] && root["generation"]["weights"];
    boost::crc_32_type crc;
    for (const char *key : {"system", "generation", "optimizer"}) {
      if (own_weights && std::string_view(key) == "optimizer")
        continue;
      const std::string part = std::string(key) + ":" + (root[key] ? YAML::Dump(root[key]) : "") + "\n";
      crc.process_bytes(part.data(), part.size());
    }
    cfg.fingerprint = crc.checksum();
    cfg.system = make_system(root["system"]);
    const auto &spec = cfg.system->spec();

    cfg.generation = default_generation_config(*cfg.system);
    if (const YAML::Node g = root["generation"]) {
      auto &gen = cfg.generation;
      read(g, "min_length", gen.min_length);
      read(g, "max_length", gen.max_length);
      read(g, "control_pieces", gen.control_pieces);
      read(g, "control_spread", gen.control_spread);
      read(g, "goal_tolerance", gen.goal_tolerance);
      read(g, "max_iterations", gen.solver.max_iterations);
      if (g["start_lower"])
        gen.start_lower = read_vector(g["start_lower"], spec.nx, "generation.start_lower");
      if (g["start_upper"])
        gen.start_upper = read_vector(g["start_upper"], spec.nx, "generation.start_upper");
      gen.validate(spec);
    }

    if (const YAML::Node p = root["planner"]) {
      read(p, "delta_0", cfg.planner.delta_0);
      read(p, "num_primitives_0", cfg.planner.num_primitives_0);
      read(p, "goal_bias", cfg.planner.goal_bias);
      read(p, "library_size", cfg.planner.library_size);
      read(p, "inner_iterations", cfg.planner.inner_iterations);
    }
    if (!(cfg.planner.delta_0 > 0) || cfg.planner.num_primitives_0 == 0 ||
        !(cfg.planner.goal_bias >= 0 && cfg.planner.goal_bias <= 1))
      throw ConfigError("planner section needs delta_0 > 0, num_primitives_0 > 0 and goal_bias in [0, 1]");

    read_weights(root["optimizer"], cfg.weights);
    cfg.generation.weights = cfg.weights;
    if (own_weights) {
      cfg.generation.weights = OcpWeights{};
      read_weights(root["generation"]["weights"], cfg.generation.weights);
    }
  } catch (const YAML::Exception &e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const ConfigError &e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return cfg;
}

SystemConfig find_system_config(const std::string &name_or_path) {
  const std::filesystem::path p(name_or_path);
  if (std::filesystem::is_regular_file(p))
    return load_system_config(p);
  const auto in_dir = config_dir() / "systems" / (name_or_path + ".yaml");
  if (std::filesystem::is_regular_file(in_dir))
    return load_system_config(in_dir);
  throw ConfigError("no system file '" + name_or_path + "' (looked in " +
                    (config_dir() / "systems").string() + ")");
}

std::vector<MotionPrimitive> cached_primitives(const SystemConfig &cfg, std::size_t count,
                                               std::uint64_t seed,
                                               const std::filesystem::path &dir) {
  std::ostringstream name;
  name << cfg.system->name() << "_" << count << "_" << seed << "_" << std::hex << std::setw(8)
       << std::setfill('0') << cfg.fingerprint << "_v" << std::dec << kGeneratorVersion
       << ".prims";
  const auto path = dir / name.str();
  if (std::filesystem::is_regular_file(path))
    return load_primitives(path, *cfg.system);

  GenerationStats stats;
  auto prims = generate_primitives_omp(cfg.system, cfg.generation, count, seed, count * 100, &stats);
  if (prims.size() < count)
    std::clog << "warning: generated only " << prims.size() << " of " << count << " primitives for "
              << cfg.system->name() << " in " << stats.attempts << " attempts\n";
  // write then rename so concurrent readers never see a partial file
  std::filesystem::create_directories(dir);
  const auto tmp = path.string() + ".tmp" + std::to_string(seed);
  save_primitives(tmp, *cfg.system, prims);
  std::filesystem::rename(tmp, path);
  return prims;
}

} // namespace dbrrt
