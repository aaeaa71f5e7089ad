#define BOOST_TEST_MODULE collision
#include <boost/test/unit_test.hpp>

#include "dbrrt/collision.hpp"
#include "dbrrt/systems.hpp"
#include "support.hpp"

#include <random>

using namespace dbrrt;
using dbrrt::testing::vec;
namespace tt = boost::test_tools;

namespace {

std::shared_ptr<Unicycle1> disc(double r) {
  Unicycle1::Params p;
  p.radius = r;
  return std::make_shared<Unicycle1>(p);
}

Environment scattered() {
  Environment env;
  env.workspace_min = Eigen::Vector3d(0, 0, 0);
  env.workspace_max = Eigen::Vector3d(5, 5, 0);
  env.obstacles.push_back(Obstacle::box({1.5, 2, 0}, {0.3, 0.8, 0}, "wall"));
  env.obstacles.push_back(Obstacle::sphere({3.5, 1, 0}, 0.5, "rock"));
  env.obstacles.push_back(Obstacle::box({3.5, 4, 0}, {0.6, 0.2, 0}, "shelf"));
  return env;
}

} // namespace

BOOST_AUTO_TEST_CASE(disc_against_sphere) {
  const auto sys = disc(0.25);
  Environment env = Environment::open();
  BOOST_TEST(is_state_free(env, *sys, vec({0, 0, 0})));
  env.obstacles.push_back(Obstacle::sphere({0.4, 0, 0}, 0.25));
  BOOST_TEST(!is_state_free(env, *sys, vec({0, 0, 0})));
  env.obstacles[0].center = Eigen::Vector3d(0.6, 0, 0);
  BOOST_TEST(is_state_free(env, *sys, vec({0, 0, 0})));
}

BOOST_AUTO_TEST_CASE(signed_distance_examples) {
  const auto sys = disc(0.25);
  Environment env = Environment::open();
  env.obstacles.push_back(Obstacle::sphere({1, 0, 0}, 0.25));
  BOOST_TEST(signed_distance(env, *sys, vec({0, 0, 0})).distance == 0.5, tt::tolerance(1e-15));
  BOOST_TEST(signed_distance(env, *sys, vec({0.5, 0, 0})).distance == 0.0);
  BOOST_TEST(!is_state_free(env, *sys, vec({0.5, 0, 0})));
  BOOST_TEST(signed_distance(env, *sys, vec({0.6, 0, 0})).distance == -0.1, tt::tolerance(1e-12));
  // disc against a box face and against a box corner
  env.obstacles = {Obstacle::box({0, 0, 0}, {1, 1, 0})};
  BOOST_TEST(signed_distance_value(env, *sys, vec({2, 0, 0})) == 0.75, tt::tolerance(1e-15));
  BOOST_TEST(signed_distance_value(env, *sys, vec({2, 2, 0})) == std::sqrt(2.0) - 0.25,
             tt::tolerance(1e-15));
  BOOST_TEST(signed_distance_value(env, *sys, vec({0.5, 0, 0})) == -0.75, tt::tolerance(1e-15));
}

BOOST_AUTO_TEST_CASE(workspace_walls) {
  const auto sys = disc(0.2);
  Environment env;
  env.workspace_min = Eigen::Vector3d(0, 0, 0);
  env.workspace_max = Eigen::Vector3d(2, 2, 0);
  BOOST_TEST(is_state_free(env, *sys, vec({1, 1, 0})));
  BOOST_TEST(signed_distance_value(env, *sys, vec({1, 1, 0})) == 0.8, tt::tolerance(1e-15));
  BOOST_TEST(!is_state_free(env, *sys, vec({0.1, 1, 0})));
  BOOST_TEST(!is_state_free(env, *sys, vec({1, 5, 0})));
  BOOST_TEST(is_state_free(env, *sys, vec({0.25, 1, 0})));
  BOOST_TEST(!is_state_free(env, *sys, vec({0.25, 1, 0}), 0.1));
}

BOOST_AUTO_TEST_CASE(free_iff_positive_signed_distance) {
  std::mt19937_64 rng(4);
  const Environment env = scattered();
  for (const auto &name : available_systems()) {
    const SystemPtr sys = make_default_system(name);
    const auto &spec = sys->spec();
    State lo = spec.state_lower, hi = spec.state_upper;
    for (int i = 0; i < spec.nx; ++i)
      if (spec.is_translation(i)) {
        lo[i] = -0.5;
        hi[i] = 5.5;
      }
    int agree = 0;
    for (int trial = 0; trial < 1000; ++trial) {
      const State x = sample_uniform_state(spec, lo, hi, rng);
      agree += is_state_free(env, *sys, x) == (signed_distance_value(env, *sys, x) > 0.0);
    }
    BOOST_TEST(agree == 1000, name);
  }
}

BOOST_AUTO_TEST_CASE(gradient_matches_finite_differences) {
  std::mt19937_64 rng(8);
  const Environment env = scattered();
  const SystemPtr sys = make_default_system("car_with_trailer");
  const auto &spec = sys->spec();
  State lo = spec.state_lower, hi = spec.state_upper;
  lo.head(2).setConstant(0.5);
  hi.head(2).setConstant(4.5);
  int checked = 0;
  for (int trial = 0; trial < 200 && checked < 100; ++trial) {
    const State x = sample_uniform_state(spec, lo, hi, rng);
    const SignedDistance sd = signed_distance(env, *sys, x);
    // reference with a wider stencil; points where the two disagree sit on a kink
    const SignedDistance ref = signed_distance(env, *sys, x, 1e-4);
    const SignedDistance ref2 = signed_distance(env, *sys, x, 1e-3);
    if ((ref.gradient - ref2.gradient).cwiseAbs().maxCoeff() > 1e-3)
      continue;
    ++checked;
    BOOST_TEST((sd.gradient - ref.gradient).cwiseAbs().maxCoeff() <= 1e-4);
  }
  BOOST_TEST(checked >= 50);
}

BOOST_AUTO_TEST_CASE(distance_grows_moving_away) {
  const auto sys = disc(0.2);
  Environment env = Environment::open();
  env.obstacles.push_back(Obstacle::sphere({0, 0, 0}, 0.5));
  double prev = -std::numeric_limits<double>::infinity();
  for (double r = 0.1; r < 3.0; r += 0.05) {
    const double d = signed_distance_value(env, *sys, vec({r * std::cos(0.7), r * std::sin(0.7), 0}));
    BOOST_TEST(d > prev);
    prev = d;
  }
}

BOOST_AUTO_TEST_CASE(motion_checks) {
  const auto sys = disc(0.2);
  const Environment env = scattered();
  std::vector<State> path;
  for (int k = 0; k <= 10; ++k)
    path.push_back(vec({0.5, 0.5 + 0.3 * k, 0}));
  BOOST_TEST(is_motion_free(env, *sys, path));
  path[5] = vec({1.5, 2.0, 0});
  BOOST_TEST(!is_motion_free(env, *sys, path));
  const std::vector<State> one{vec({1.5, 2.0, 0})};
  BOOST_TEST(is_motion_free(env, *sys, one) == is_state_free(env, *sys, one[0]));
}

BOOST_AUTO_TEST_CASE(environment_validation) {
  Environment env;
  env.workspace_min = Eigen::Vector3d(0, 0, 0);
  env.workspace_max = Eigen::Vector3d(0, 1, 0);
  BOOST_CHECK_THROW(env.validate(), ConfigError);
  env.workspace_max = Eigen::Vector3d(1, 1, 0);
  env.obstacles.push_back(Obstacle::sphere({0, 0, 0}, -1.0));
  BOOST_CHECK_THROW(env.validate(), ConfigError);
  env.obstacles = {Obstacle::box({0, 0, 0}, {0.1, 0.1, 0})};
  BOOST_CHECK_NO_THROW(env.validate());
}
