#include "dbrrt/nearest.hpp"

#include <algorithm>
#include <numeric>

namespace dbrrt {

namespace {

// Pruning bound with a little slack so that rounding in the embedding never drops a
// point the exact metric would keep.
inline bool may_contain(double plane_gap, double r) {
  return std::abs(plane_gap) <= r * (1.0 + 1e-9) + 1e-12;
}

inline bool better(const Neighbor &a, const Neighbor &b) {
  return a.distance < b.distance || (a.distance == b.distance && a.id < b.id);
}

} // namespace

StateEmbedding::StateEmbedding(const SystemSpec &spec, std::vector<int> components)
    : spec_(spec), components_(std::move(components)) {
  for (int c : components_) {
    if (c < 0 || c >= spec.nx)
      throw UsageError("embedding component out of range");
    sqrt_w_.push_back(std::sqrt(spec.distance_weights[c]));
    dim_ += spec.is_angle(c) ? 2 : 1;
  }
}

StateEmbedding StateEmbedding::full(const SystemSpec &spec) {
  std::vector<int> all(static_cast<std::size_t>(spec.nx));
  std::iota(all.begin(), all.end(), 0);
  return {spec, all};
}

StateEmbedding StateEmbedding::without_translation(const SystemSpec &spec) {
  std::vector<int> comps;
  for (int i = 0; i < spec.nx; ++i)
    if (!spec.is_translation(i))
      comps.push_back(i);
  return {spec, comps};
}

void StateEmbedding::embed(const State &x, double *out) const {
  for (std::size_t k = 0; k < components_.size(); ++k) {
    const int c = components_[k];
    if (spec_.is_angle(c)) {
      *out++ = sqrt_w_[k] * std::cos(x[c]);
      *out++ = sqrt_w_[k] * std::sin(x[c]);
    } else {
      *out++ = sqrt_w_[k] * x[c];
    }
  }
}

double StateEmbedding::distance(const State &a, const State &b) const {
  double acc = 0.0;
  for (int c : components_) {
    const double d = spec_.is_angle(c) ? angle_dist(a[c], b[c]) : a[c] - b[c];
    acc += spec_.distance_weights[c] * d * d;
  }
  return std::sqrt(acc);
}

// ---------------------------------------------------------------------------

KdTree::KdTree(StateEmbedding embedding) : emb_(std::move(embedding)), dim_(emb_.dim()) {}

void KdTree::insert(const State &x) {
  const std::size_t id = points_.size();
  points_.push_back(x);
  coords_.resize(coords_.size() + static_cast<std::size_t>(dim_));
  emb_.embed(x, &coords_[id * static_cast<std::size_t>(dim_)]);

  const int new_node = static_cast<int>(nodes_.size());
  if (root_ < 0) {
    nodes_.push_back({id, 0});
    root_ = new_node;
    return;
  }
  const double *c = coords(id);
  int cur = root_;
  int depth = 0;
  while (true) {
    ++depth;
    Node &n = nodes_[static_cast<std::size_t>(cur)];
    const bool go_left = dim_ > 0 && c[n.axis] < coords(n.point)[n.axis];
    int &child = go_left ? n.left : n.right;
    if (child < 0) {
      child = new_node;
      nodes_.push_back({id, dim_ > 0 ? depth % dim_ : 0});
      return;
    }
    cur = child;
  }
}

void KdTree::build(std::vector<State> points) {
  points_ = std::move(points);
  nodes_.clear();
  root_ = -1;
  coords_.assign(points_.size() * static_cast<std::size_t>(dim_), 0.0);
  for (std::size_t i = 0; i < points_.size(); ++i)
    emb_.embed(points_[i], &coords_[i * static_cast<std::size_t>(dim_)]);
  std::vector<std::size_t> ids(points_.size());
  std::iota(ids.begin(), ids.end(), 0);
  nodes_.reserve(points_.size());
  root_ = build_range(ids, 0, ids.size());
}

int KdTree::build_range(std::vector<std::size_t> &ids, std::size_t lo, std::size_t hi) {
  if (lo >= hi)
    return -1;
  int axis = 0;
  if (dim_ > 0) {
    double best_spread = -1.0;
    for (int a = 0; a < dim_; ++a) {
      double mn = std::numeric_limits<double>::infinity(), mx = -mn;
      for (std::size_t i = lo; i < hi; ++i) {
        mn = std::min(mn, coords(ids[i])[a]);
        mx = std::max(mx, coords(ids[i])[a]);
      }
      if (mx - mn > best_spread) {
        best_spread = mx - mn;
        axis = a;
      }
    }
  }
  std::size_t mid = lo + (hi - lo) / 2;
  if (dim_ > 0) {
    auto key = [&](std::size_t a, std::size_t b) {
      const double ca = coords(a)[axis], cb = coords(b)[axis];
      return ca < cb || (ca == cb && a < b);
    };
    // left <= split <= right is all the pruning bound needs
    std::nth_element(ids.begin() + static_cast<std::ptrdiff_t>(lo),
                     ids.begin() + static_cast<std::ptrdiff_t>(mid),
                     ids.begin() + static_cast<std::ptrdiff_t>(hi), key);
  }
  const int node = static_cast<int>(nodes_.size());
  nodes_.push_back({ids[mid], axis});
  const int left = build_range(ids, lo, mid);
  const int right = build_range(ids, mid + 1, hi);
  nodes_[static_cast<std::size_t>(node)].left = left;
  nodes_[static_cast<std::size_t>(node)].right = right;
  return node;
}

std::optional<Neighbor> KdTree::nearest(const State &q) const {
  if (root_ < 0)
    return std::nullopt;
  std::vector<double> qe(static_cast<std::size_t>(dim_));
  emb_.embed(q, qe.data());
  Neighbor best;
  bool found = false;
  nearest_rec(root_, q, qe.data(), best, found);
  return best;
}

void KdTree::nearest_rec(int node, const State &q, const double *qe, Neighbor &best,
                         bool &found) const {
  if (node < 0)
    return;
  const Node &n = nodes_[static_cast<std::size_t>(node)];
  const Neighbor cand{n.point, emb_.distance(q, points_[n.point])};
  if (!found || better(cand, best)) {
    best = cand;
    found = true;
  }
  if (dim_ == 0) {
    nearest_rec(n.left, q, qe, best, found);
    nearest_rec(n.right, q, qe, best, found);
    return;
  }
  const double gap = qe[n.axis] - coords(n.point)[n.axis];
  const int near = gap < 0 ? n.left : n.right;
  const int far = gap < 0 ? n.right : n.left;
  nearest_rec(near, q, qe, best, found);
  if (may_contain(gap, best.distance))
    nearest_rec(far, q, qe, best, found);
}

std::vector<Neighbor> KdTree::radius(const State &q, double r) const {
  std::vector<Neighbor> out;
  if (root_ < 0)
    return out;
  std::vector<double> qe(static_cast<std::size_t>(dim_));
  emb_.embed(q, qe.data());
  radius_rec(root_, q, qe.data(), r, out);
  std::sort(out.begin(), out.end(), [](const Neighbor &a, const Neighbor &b) { return a.id < b.id; });
  return out;
}

void KdTree::radius_rec(int node, const State &q, const double *qe, double r,
                        std::vector<Neighbor> &out) const {
  if (node < 0)
    return;
  const Node &n = nodes_[static_cast<std::size_t>(node)];
  const double d = emb_.distance(q, points_[n.point]);
  if (d <= r)
    out.push_back({n.point, d});
  if (dim_ == 0) {
    radius_rec(n.left, q, qe, r, out);
    radius_rec(n.right, q, qe, r, out);
    return;
  }
  const double gap = qe[n.axis] - coords(n.point)[n.axis];
  const int near = gap < 0 ? n.left : n.right;
  const int far = gap < 0 ? n.right : n.left;
  radius_rec(near, q, qe, r, out);
  if (may_contain(gap, r))
    radius_rec(far, q, qe, r, out);
}

// ---------------------------------------------------------------------------

std::optional<Neighbor> brute_force_nearest(const StateEmbedding &emb, std::span<const State> points,
                                            const State &q) {
  std::optional<Neighbor> best;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Neighbor cand{i, emb.distance(q, points[i])};
    if (!best || better(cand, *best))
      best = cand;
  }
  return best;
}

std::vector<Neighbor> brute_force_radius(const StateEmbedding &emb, std::span<const State> points,
                                         const State &q, double r) {
  std::vector<Neighbor> out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double d = emb.distance(q, points[i]);
    if (d <= r)
      out.push_back({i, d});
  }
  return out;
}

} // namespace dbrrt
