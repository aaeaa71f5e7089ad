#pragma once

#include "dbrrt/dynamics.hpp"

#include <optional>
#include <span>

namespace dbrrt {

/// Maps a subset of state components to Euclidean coordinates. Plain components become
/// sqrt(w) * x; angles become sqrt(w) * (cos, sin), whose chord never exceeds the wrapped
/// arc. Euclidean distance in the embedding is therefore a lower bound of the weighted
/// metric restricted to the same components, which keeps k-d pruning exact.
class StateEmbedding {
public:
  StateEmbedding(const SystemSpec &spec, std::vector<int> components);

  /// All components of the state.
  static StateEmbedding full(const SystemSpec &spec);
  /// Everything except the translation-invariant components.
  static StateEmbedding without_translation(const SystemSpec &spec);

  int dim() const { return dim_; }
  const std::vector<int> &components() const { return components_; }
  void embed(const State &x, double *out) const;
  /// Weighted metric restricted to the selected components.
  double distance(const State &a, const State &b) const;

private:
  SystemSpec spec_;
  std::vector<int> components_;
  std::vector<double> sqrt_w_;
  int dim_ = 0;
};

struct Neighbor {
  std::size_t id = 0;
  double distance = 0.0;
};

/// k-d tree over embedded states. Points are identified by insertion order. Supports
/// incremental insertion (search trees) and a balanced bulk build (primitive index).
/// Results are exact under the true metric; ties are broken towards the smaller id.
class KdTree {
public:
  explicit KdTree(StateEmbedding embedding);

  void insert(const State &x);
  /// Replaces the content with a balanced tree over `points`.
  void build(std::vector<State> points);

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const State &point(std::size_t id) const { return points_[id]; }
  const StateEmbedding &embedding() const { return emb_; }

  std::optional<Neighbor> nearest(const State &q) const;
  /// All points with distance <= r, sorted by id.
  std::vector<Neighbor> radius(const State &q, double r) const;

private:
  struct Node {
    std::size_t point;
    int axis;
    int left = -1;
    int right = -1;
  };

  const double *coords(std::size_t id) const { return &coords_[id * static_cast<std::size_t>(dim_)]; }
  int build_range(std::vector<std::size_t> &ids, std::size_t lo, std::size_t hi);
  void nearest_rec(int node, const State &q, const double *qe, Neighbor &best, bool &found) const;
  void radius_rec(int node, const State &q, const double *qe, double r,
                  std::vector<Neighbor> &out) const;

  StateEmbedding emb_;
  int dim_;
  std::vector<State> points_;
  std::vector<double> coords_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

/// Linear scans used as the reference for the tree.
std::optional<Neighbor> brute_force_nearest(const StateEmbedding &emb, std::span<const State> points,
                                            const State &q);
std::vector<Neighbor> brute_force_radius(const StateEmbedding &emb, std::span<const State> points,
                                         const State &q, double r);

} // namespace dbrrt
