#pragma once

#include "dbrrt/collision.hpp"
#include "dbrrt/nearest.hpp"
#include "dbrrt/primitives.hpp"

#include <chrono>
#include <functional>
#include <optional>
#include <random>

namespace dbrrt {

enum class TreeDirection { Forward, Backward };

/// Node of a search tree. In a forward tree the incoming primitive starts within delta
/// of the parent and ends exactly at `state`. In a backward tree the incoming primitive
/// is a reversed one: replaying its original forward from `state` reaches a point within
/// delta of the parent.
struct TreeNode {
  State state;
  int parent = -1;
  std::optional<MotionPrimitive> incoming;
  std::size_t primitive_id = 0;
  /// distance(incoming start, parent state)
  double edge_defect = 0.0;
};

class SearchTree {
public:
  SearchTree(const SystemSpec &spec, State root, TreeDirection direction);

  TreeDirection direction() const { return direction_; }
  std::size_t size() const { return nodes_.size(); }
  const TreeNode &node(std::size_t i) const { return nodes_[i]; }
  const std::vector<TreeNode> &nodes() const { return nodes_; }

  std::size_t add(TreeNode node);
  std::optional<Neighbor> nearest(const State &x) const { return index_.nearest(x); }
  /// Node ids from the root to `leaf`, root first.
  std::vector<std::size_t> path_to(std::size_t leaf) const;

private:
  TreeDirection direction_;
  std::vector<TreeNode> nodes_;
  KdTree index_;
};

struct Expansion {
  State x_new;
  MotionPrimitive primitive; ///< adapted copy
  std::size_t primitive_id = 0;
};

/// Algorithm "focused": of the primitives applicable at x_o, the collision-free one whose
/// end is closest to x_t (ties by library index).
std::optional<Expansion> expand_db_focused(const State &x_o, const State &x_t,
                                           const Environment &env, const PrimitiveLibrary &lib,
                                           double delta, std::mt19937_64 &rng,
                                           double inflation = 0.0);
/// Algorithm "randomized": the first collision-free primitive of a random permutation.
std::optional<Expansion> expand_db_randomized(const State &x_o, const State &x_t,
                                              const Environment &env, const PrimitiveLibrary &lib,
                                              double delta, std::mt19937_64 &rng,
                                              double inflation = 0.0);

struct SearchParams {
  double goal_bias = 0.1;
  /// Success radius around the goal; defaults to delta and may not exceed it.
  std::optional<double> goal_tolerance;
  std::size_t max_iterations = 5000;
  /// Wall-clock safety cap in seconds.
  double time_budget = 60.0;
  std::optional<std::chrono::steady_clock::time_point> deadline;
  /// Sampling box (full state length; angles may be infinite).
  State sample_lower;
  State sample_upper;
  int sample_retries = 100;
  /// Added to robot radii in search-time collision checks.
  double inflation = 0.0;
  /// Called after every iteration with the tree that was extended.
  std::function<void(const SearchTree &)> observer;
};

/// A delta-discontinuity bounded trajectory.
struct DbSolution {
  StateSequence states;
  ControlSequence controls;
  double delta = 0.0;
  /// distance(states[k+1], step(states[k], controls[k]))
  std::vector<double> defects;

  Trajectory trajectory() const { return {states, controls}; }
};

struct SearchStats {
  std::size_t iterations = 0;
  /// Calls to an expansion routine (one per iteration and tree).
  std::size_t expansions = 0;
  std::size_t nodes_added = 0;
  std::size_t rejected_too_close = 0;
  std::size_t failed_expansions = 0;
  std::size_t sample_rejections = 0;
  std::size_t forward_nodes = 0;
  std::size_t backward_nodes = 0;
  double seconds = 0.0;
};

struct SearchResult {
  std::optional<DbSolution> solution;
  SearchStats stats;
  bool solved() const { return solution.has_value(); }
};

SearchResult db_rrt(const SystemPtr &sys, const State &x_s, const State &x_g,
                    const Environment &env, const PrimitiveLibrary &lib, double delta,
                    const SearchParams &params, std::mt19937_64 &rng);

/// Bidirectional variant: a forward tree from x_s and a backward tree from x_g grown
/// with `lib_bwd` (the reversed library), strictly alternating.
SearchResult db_rrt_connect(const SystemPtr &sys, const State &x_s, const State &x_g,
                            const Environment &env, const PrimitiveLibrary &lib_fwd,
                            const PrimitiveLibrary &lib_bwd, double delta,
                            const SearchParams &params, std::mt19937_64 &rng);

/// Concatenates the primitives from the root of a forward tree to `leaf`. Each
/// non-final primitive contributes all states but its last; the next primitive's first
/// state follows, so junction defects stay in the sequence. A root leaf gives one state.
Trajectory traceback(const SearchTree &tree, std::size_t leaf);

/// Per-step defects of a trajectory: distance(x_{k+1}, step(x_k, u_k)).
std::vector<double> step_defects(const DynamicalSystem &sys, const Trajectory &traj);

/// Independent check of the delta-discontinuity bounded solution conditions.
struct DbValidation {
  bool ok = false;
  double max_defect = 0.0;
  double start_distance = 0.0;
  double goal_distance = 0.0;
  std::size_t colliding_states = 0;
  std::size_t control_violations = 0;
  std::string reason;
};
DbValidation validate_db_solution(const DynamicalSystem &sys, const Environment &env,
                                  const State &x_s, const State &x_g, const Trajectory &traj,
                                  double delta);

} // namespace dbrrt
