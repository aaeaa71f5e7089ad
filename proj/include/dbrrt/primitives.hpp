#pragma once

#include "dbrrt/nearest.hpp"
#include "dbrrt/trajopt.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>

namespace dbrrt {

/// A dynamically feasible segment: states[k+1] = step(states[k], controls[k]).
struct MotionPrimitive {
  StateSequence states;
  ControlSequence controls;

  std::size_t length() const { return controls.size(); }
  const State &start() const { return states.front(); }
  const State &end() const { return states.back(); }
  /// Duration in seconds.
  double cost(double dt) const { return static_cast<double>(length()) * dt; }
};

/// Largest weighted per-step defect when replaying the controls from the first state.
double max_defect(const DynamicalSystem &sys, const MotionPrimitive &m);

/// Empty string when m is feasible (defect, bounds, lengths), otherwise the reason.
std::string check_primitive(const DynamicalSystem &sys, const MotionPrimitive &m,
                            double defect_tol = 1e-9);

/// Translates every state so the translation components of the start are zero.
MotionPrimitive canonicalize(const SystemSpec &spec, const MotionPrimitive &m);
MotionPrimitive translated(const SystemSpec &spec, const MotionPrimitive &m,
                           const Eigen::VectorXd &offset);

/// States and controls in reverse order. The result is not itself feasible; in a
/// backward tree an edge from result.start to result.end means that the original
/// primitive drives result.end to result.start.
MotionPrimitive reverse(const MotionPrimitive &m);

/// Primitives of one system in canonical form, with a k-d index over the
/// non-translation components of their start states.
class PrimitiveLibrary {
public:
  PrimitiveLibrary(SystemPtr system, std::vector<MotionPrimitive> primitives, bool reversed = false);

  const DynamicalSystem &system() const { return *system_; }
  const SystemPtr &system_ptr() const { return system_; }
  std::size_t size() const { return prims_.size(); }
  bool empty() const { return prims_.empty(); }
  bool is_reversed() const { return reversed_; }
  const MotionPrimitive &primitive(std::size_t i) const { return prims_[i]; }
  const std::vector<MotionPrimitive> &primitives() const { return prims_; }

  /// Indices of every primitive whose start, translated onto x, is within delta of x.
  /// Sorted ascending.
  std::vector<std::size_t> nearest_r_indices(const State &x, double delta) const;
  /// Same result by a linear scan; reference for the index.
  std::vector<std::size_t> nearest_r_indices_brute(const State &x, double delta) const;
  /// Offset that moves primitive i onto x.
  Eigen::VectorXd adapt_offset(std::size_t i, const State &x) const;
  /// Copy of primitive i translated onto x.
  MotionPrimitive adapt(std::size_t i, const State &x) const;
  /// Adapted copies of every primitive returned by nearest_r_indices.
  std::vector<MotionPrimitive> nearest_r(const State &x, double delta) const;

  /// Library of the reversed primitives (for the backward tree of the connect variant).
  PrimitiveLibrary reversed() const;
  /// The primitives at `ids`, in that order.
  PrimitiveLibrary subset(std::span<const std::size_t> ids) const;

private:
  SystemPtr system_;
  std::vector<MotionPrimitive> prims_;
  bool reversed_;
  std::shared_ptr<KdTree> index_;
};

/// Seeded random order over a library; `choose` and `increase` take prefixes of it, so
/// each larger selection contains the previous one.
class PrimitiveSelector {
public:
  PrimitiveSelector(std::shared_ptr<const PrimitiveLibrary> library, std::uint64_t seed);

  std::size_t library_size() const { return order_.size(); }
  /// The first n primitives of the order. n > size clamps with a warning.
  PrimitiveLibrary choose(std::size_t n) const;
  /// Next count in the geometric schedule: min(size, ceil(n * rate)).
  std::size_t increased_count(std::size_t n, double rate) const;
  const std::vector<std::size_t> &order() const { return order_; }

private:
  std::shared_ptr<const PrimitiveLibrary> library_;
  std::vector<std::size_t> order_;
};

/// How primitives of one system are generated.
struct GenerationConfig {
  int min_length = 5;
  int max_length = 30;
  /// Box for start states. Translation components are ignored (set to zero).
  State start_lower;
  State start_upper;
  /// Goals are the end of a rollout of `control_pieces` random constant controls drawn
  /// around the nominal control, `control_spread` being the fraction of the way to each
  /// bound. The optimizer then solves the two-point problem from an interpolated guess.
  int control_pieces = 2;
  double control_spread = 1.0;
  /// Weighted distance by which the solution must reach the sampled goal.
  double goal_tolerance = 0.05;
  OcpWeights weights;
  SolverOptions solver;

  void validate(const SystemSpec &spec) const;
};

/// Default generation settings of a built-in system.
GenerationConfig default_generation_config(const DynamicalSystem &sys);

/// Solves the fixed-horizon two-point problem from x_s towards x_g in open space and
/// replays the clamped controls from x_s. Nothing on failure.
std::optional<MotionPrimitive> solve_primitive_bvp(const SystemPtr &sys, const State &x_s,
                                                   const State &x_g, int horizon,
                                                   const GenerationConfig &cfg);

/// One generation attempt: samples length, start and a reachable goal from rng, then
/// solves.
std::optional<MotionPrimitive> generate_primitive(const SystemPtr &sys, const GenerationConfig &cfg,
                                                  std::mt19937_64 &rng);

/// RNG of attempt `attempt` of a batch with `seed`; independent of scheduling.
std::mt19937_64 attempt_rng(std::uint64_t seed, std::uint64_t attempt);

struct GenerationStats {
  std::size_t attempts = 0;
  std::size_t successes = 0;
};

/// Runs attempts 0, 1, 2, ... until `count` successes or `max_attempts`. The result is
/// the successes in attempt order, canonicalized, and identical for both kernels.
std::vector<MotionPrimitive> generate_primitives_serial(const SystemPtr &sys,
                                                        const GenerationConfig &cfg,
                                                        std::size_t count, std::uint64_t seed,
                                                        std::size_t max_attempts,
                                                        GenerationStats *stats = nullptr);
std::vector<MotionPrimitive> generate_primitives_omp(const SystemPtr &sys,
                                                     const GenerationConfig &cfg,
                                                     std::size_t count, std::uint64_t seed,
                                                     std::size_t max_attempts,
                                                     GenerationStats *stats = nullptr);

/// Text header (format tag, system, count, dt, nx, nu, CRC-32 of the payload) followed by
/// a little-endian binary payload of lengths, states and controls.
void save_primitives(const std::filesystem::path &path, const DynamicalSystem &sys,
                     const std::vector<MotionPrimitive> &prims);
/// Loads and re-validates every primitive. Throws ParseError on a malformed or
/// corrupted file and ConfigError when it belongs to a different system.
std::vector<MotionPrimitive> load_primitives(const std::filesystem::path &path,
                                             const DynamicalSystem &sys);

} // namespace dbrrt
