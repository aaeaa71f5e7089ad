#define BOOST_TEST_MODULE nearest
#include <boost/test/unit_test.hpp>

#include "dbrrt/nearest.hpp"
#include "dbrrt/systems.hpp"
#include "support.hpp"

#include <random>

using namespace dbrrt;
using dbrrt::testing::vec;

namespace {

std::vector<State> random_states(const SystemSpec &spec, int n, std::mt19937_64 &rng) {
  State lo = spec.state_lower, hi = spec.state_upper;
  for (int i = 0; i < spec.nx; ++i)
    if (spec.is_translation(i)) {
      lo[i] = 0.0;
      hi[i] = 8.0;
    }
  std::vector<State> out;
  for (int i = 0; i < n; ++i)
    out.push_back(sample_uniform_state(spec, lo, hi, rng));
  return out;
}

bool same(const std::vector<Neighbor> &a, const std::vector<Neighbor> &b) {
  if (a.size() != b.size())
    return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].id != b[i].id || a[i].distance != b[i].distance)
      return false;
  return true;
}

} // namespace

BOOST_AUTO_TEST_CASE(embedding_is_a_lower_bound) {
  std::mt19937_64 rng(1);
  for (const auto &name : available_systems()) {
    const SystemPtr sys = make_default_system(name);
    const StateEmbedding emb = StateEmbedding::full(sys->spec());
    const auto pts = random_states(sys->spec(), 400, rng);
    std::vector<double> ea(static_cast<std::size_t>(emb.dim())), eb(ea.size());
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      emb.embed(pts[i], ea.data());
      emb.embed(pts[i + 1], eb.data());
      double acc = 0.0;
      for (std::size_t k = 0; k < ea.size(); ++k)
        acc += (ea[k] - eb[k]) * (ea[k] - eb[k]);
      BOOST_TEST(std::sqrt(acc) <= emb.distance(pts[i], pts[i + 1]) + 1e-12);
      BOOST_TEST(emb.distance(pts[i], pts[i + 1]) == distance(sys->spec(), pts[i], pts[i + 1]));
    }
  }
}

BOOST_AUTO_TEST_CASE(incremental_tree_matches_brute_force) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> radius(0.05, 1.5);
  for (const auto &name : available_systems()) {
    const SystemPtr sys = make_default_system(name);
    const StateEmbedding emb = StateEmbedding::full(sys->spec());
    KdTree tree(emb);
    std::vector<State> pts;
    for (const State &x : random_states(sys->spec(), 1500, rng)) {
      tree.insert(x);
      pts.push_back(x);
      // every node is queryable straight after insertion
      if (pts.size() % 100 == 0) {
        const auto nn = tree.nearest(x);
        BOOST_TEST_REQUIRE(nn.has_value());
        BOOST_TEST(nn->distance == 0.0);
      }
    }
    for (const State &q : random_states(sys->spec(), 100, rng)) {
      const auto a = tree.nearest(q);
      const auto b = brute_force_nearest(emb, pts, q);
      BOOST_TEST((a->id == b->id && a->distance == b->distance), name);
      const double r = radius(rng);
      BOOST_TEST(same(tree.radius(q, r), brute_force_radius(emb, pts, q, r)), name);
    }
  }
}

BOOST_AUTO_TEST_CASE(bulk_tree_on_subset_matches_brute_force) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> radius(0.05, 1.0);
  for (const auto &name : available_systems()) {
    const SystemPtr sys = make_default_system(name);
    const StateEmbedding emb = StateEmbedding::without_translation(sys->spec());
    auto pts = random_states(sys->spec(), 2000, rng);
    KdTree tree(emb);
    tree.build(pts);
    BOOST_TEST(tree.size() == pts.size());
    for (const State &q : random_states(sys->spec(), 100, rng)) {
      const double r = radius(rng);
      BOOST_TEST(same(tree.radius(q, r), brute_force_radius(emb, pts, q, r)), name);
      const auto a = tree.nearest(q);
      const auto b = brute_force_nearest(emb, pts, q);
      BOOST_TEST((a->id == b->id && a->distance == b->distance), name);
    }
  }
}

BOOST_AUTO_TEST_CASE(duplicates_ties_and_wraparound) {
  const SystemPtr sys = make_default_system("unicycle1");
  const StateEmbedding emb = StateEmbedding::full(sys->spec());
  KdTree tree(emb);
  BOOST_TEST(!tree.nearest(vec({0, 0, 0})).has_value());
  BOOST_TEST(tree.radius(vec({0, 0, 0}), 1.0).empty());
  // identical points: the smaller id wins
  for (int i = 0; i < 5; ++i)
    tree.insert(vec({1, 1, 0}));
  tree.insert(vec({0, 0, 3.1}));
  BOOST_TEST(tree.nearest(vec({1, 1, 0}))->id == 0u);
  BOOST_TEST(tree.radius(vec({1, 1, 0}), 0.0).size() == 5u);
  // the angle 3.1 is close to -3.1 across the cut
  const auto nn = tree.nearest(vec({0, 0, -3.1}));
  BOOST_TEST(nn->id == 5u);
  BOOST_TEST(nn->distance < 0.06);

  KdTree bulk(emb);
  bulk.build(std::vector<State>(7, vec({2, 2, 1})));
  BOOST_TEST(bulk.nearest(vec({2, 2, 1}))->id == 0u);
  BOOST_TEST(bulk.radius(vec({2, 2, 1}), 0.0).size() == 7u);
}

BOOST_AUTO_TEST_CASE(grid_points_with_many_equal_coordinates) {
  const SystemPtr sys = make_default_system("unicycle2");
  const StateEmbedding emb = StateEmbedding::full(sys->spec());
  std::vector<State> pts;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j)
      for (int k = 0; k < 4; ++k)
        pts.push_back(vec({0.5 * i, 0.5 * j, -3.0 + 1.5 * k, 0.1 * (k % 2), 0.0}));
  KdTree inc(emb), bulk(emb);
  for (const auto &p : pts)
    inc.insert(p);
  bulk.build(pts);
  std::mt19937_64 rng(4);
  for (int t = 0; t < 200; ++t) {
    const State q = pts[rng() % pts.size()] + vec({0.25, 0.0, 0.0, 0.0, 0.0}) * (t % 3);
    for (double r : {0.0, 0.25, 0.5, 0.7}) {
      const auto ref = brute_force_radius(emb, pts, q, r);
      BOOST_TEST(same(inc.radius(q, r), ref));
      BOOST_TEST(same(bulk.radius(q, r), ref));
    }
    BOOST_TEST(inc.nearest(q)->id == brute_force_nearest(emb, pts, q)->id);
    BOOST_TEST(bulk.nearest(q)->id == brute_force_nearest(emb, pts, q)->id);
  }
}
