#include "dbrrt/problem.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace dbrrt {

namespace {

class Parser {
public:
  explicit Parser(std::string where) : where_(std::move(where)) {}

  [[noreturn]] void fail(const YAML::Node &node, const std::string &msg) const {
    const auto mark = node.Mark();
    std::string at = where_;
    if (mark.line >= 0)
      at += ":" + std::to_string(mark.line + 1);
    throw ParseError(at + ": " + msg);
  }

  YAML::Node need(const YAML::Node &parent, const char *key) const {
    if (!parent.IsMap())
      fail(parent, "expected a mapping");
    const YAML::Node n = parent[key];
    if (!n)
      fail(parent, std::string("missing key '") + key + "'");
    return n;
  }

  double number(const YAML::Node &n, const std::string &what) const {
    try {
      return n.as<double>();
    } catch (const YAML::Exception &) {
      fail(n, what + " must be a number");
    }
  }

  Eigen::VectorXd vector(const YAML::Node &n, int len, const std::string &what) const {
    if (!n.IsSequence())
      fail(n, what + " must be a list");
    if (len >= 0 && static_cast<int>(n.size()) != len)
      fail(n, what + " must have " + std::to_string(len) + " entries, got " +
                  std::to_string(n.size()));
    Eigen::VectorXd v(static_cast<Eigen::Index>(n.size()));
    for (std::size_t i = 0; i < n.size(); ++i)
      v[static_cast<Eigen::Index>(i)] = number(n[i], what);
    return v;
  }

  Eigen::Vector3d point(const YAML::Node &n, int dim, const std::string &what) const {
    Eigen::Vector3d p = Eigen::Vector3d::Zero();
    p.head(dim) = vector(n, dim, what);
    return p;
  }

private:
  std::string where_;
};

void emit_vector(YAML::Emitter &out, const Eigen::VectorXd &v) {
  out << YAML::Flow << YAML::BeginSeq;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    out << v[i];
  out << YAML::EndSeq;
}

std::string describe(const Obstacle &o, std::size_t index) {
  return o.name.empty() ? "#" + std::to_string(index) : "'" + o.name + "'";
}

void check_endpoint(const ProblemInstance &prob, const State &x, const char *which) {
  const auto &sys = prob.system();
  const auto &spec = sys.spec();
  if (x.size() != spec.nx || !x.allFinite())
    throw ConfigError(std::string(which) + " state must be finite with " + std::to_string(spec.nx) +
                      " entries");
  if (!is_within_bounds(spec, x))
    throw ConfigError(std::string(which) + " state is outside the state bounds");
  std::vector<Eigen::Vector3d> bodies;
  sys.body_positions(x, bodies);
  const auto &radii = sys.geometry().radii;
  for (std::size_t i = 0; i < prob.env.obstacles.size(); ++i)
    for (std::size_t b = 0; b < bodies.size(); ++b)
      if (ball_obstacle_distance(bodies[b], radii[b], prob.env.obstacles[i], prob.env.dim) <= 0.0)
        throw ConfigError(std::string(which) + " state collides with obstacle " +
                          describe(prob.env.obstacles[i], i));
  if (!is_state_free(prob.env, sys, x))
    throw ConfigError(std::string(which) + " state leaves the workspace");
}

} // namespace

void validate_problem(const ProblemInstance &prob) {
  if (!prob.config.system)
    throw ConfigError("problem has no system");
  prob.env.validate();
  const auto &spec = prob.system().spec();
  check_endpoint(prob, prob.start, "start");
  check_endpoint(prob, prob.goal, "goal");
  if (prob.sample_lower.size() != spec.nx || prob.sample_upper.size() != spec.nx)
    throw ConfigError("sampling box must have " + std::to_string(spec.nx) + " entries");
  for (int i = 0; i < spec.nx; ++i) {
    if (spec.is_angle(i))
      continue;
    if (!std::isfinite(prob.sample_lower[i]) || !std::isfinite(prob.sample_upper[i]))
      throw ConfigError("sampling box component " + std::to_string(i) +
                        " is unbounded; give it in the 'sampling' section");
    if (prob.sample_lower[i] > prob.sample_upper[i])
      throw ConfigError("sampling box component " + std::to_string(i) + " is inverted");
  }
}

ProblemInstance parse_problem(const std::string &text, const std::string &where) {
  Parser p(where);
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException &e) {
    throw ParseError(where + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  if (!root.IsMap())
    p.fail(root, "a problem file must be a mapping");

  ProblemInstance prob;
  prob.name = root["name"] ? root["name"].as<std::string>() : std::string{};
  const YAML::Node sys_node = p.need(root, "system");
  prob.system_ref = sys_node.as<std::string>();
  try {
    prob.config = find_system_config(prob.system_ref);
  } catch (const ConfigError &e) {
    p.fail(sys_node, e.what());
  }
  const auto &spec = prob.config.system->spec();

  const YAML::Node env = p.need(root, "environment");
  auto &e = prob.env;
  if (env["dim"])
    e.dim = static_cast<int>(p.number(env["dim"], "environment.dim"));
  if (e.dim != 2 && e.dim != 3)
    p.fail(env["dim"], "environment.dim must be 2 or 3");
  e.workspace_min = p.point(p.need(env, "min"), e.dim, "environment.min");
  e.workspace_max = p.point(p.need(env, "max"), e.dim, "environment.max");
  if (const YAML::Node obs = env["obstacles"]) {
    if (!obs.IsSequence())
      p.fail(obs, "environment.obstacles must be a list");
    for (const auto &o : obs) {
      const std::string name = o["name"] ? o["name"].as<std::string>() : std::string{};
      const std::string type = p.need(o, "type").as<std::string>();
      const Eigen::Vector3d c = p.point(p.need(o, "center"), e.dim, "obstacle center");
      if (type == "box") {
        const Eigen::Vector3d h = p.point(p.need(o, "half_extents"), e.dim, "obstacle half_extents");
        if (!(h.head(e.dim).array() > 0).all())
          p.fail(o, "obstacle half_extents must be positive");
        e.obstacles.push_back(Obstacle::box(c, h, name));
      } else if (type == "sphere") {
        const double r = p.number(p.need(o, "radius"), "obstacle radius");
        if (!(r > 0))
          p.fail(o, "obstacle radius must be positive");
        e.obstacles.push_back(Obstacle::sphere(c, r, name));
      } else {
        p.fail(o["type"], "obstacle type must be 'box' or 'sphere', got '" + type + "'");
      }
    }
  }
  for (int i = 0; i < e.dim; ++i)
    if (!(e.workspace_min[i] < e.workspace_max[i]))
      p.fail(env, "environment.min must be below environment.max");

  prob.start = p.vector(p.need(root, "start"), spec.nx, "start");
  prob.goal = p.vector(p.need(root, "goal"), spec.nx, "goal");

  prob.sample_lower = spec.state_lower;
  prob.sample_upper = spec.state_upper;
  int t = 0;
  for (int i = 0; i < spec.nx; ++i)
    if (spec.is_translation(i)) {
      if (t < e.dim) {
        prob.sample_lower[i] = e.workspace_min[t];
        prob.sample_upper[i] = e.workspace_max[t];
      }
      ++t;
    }
  if (const YAML::Node s = root["sampling"]) {
    if (s["lower"])
      prob.sample_lower = p.vector(s["lower"], spec.nx, "sampling.lower");
    if (s["upper"])
      prob.sample_upper = p.vector(s["upper"], spec.nx, "sampling.upper");
  }
  try {
    validate_problem(prob);
  } catch (const ConfigError &e) {
    throw ConfigError(where + ": " + e.what());
  }
  return prob;
}

ProblemInstance load_problem(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open problem file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  ProblemInstance prob = parse_problem(ss.str(), path.string());
  prob.source = path;
  if (prob.name.empty())
    prob.name = path.stem().string();
  return prob;
}

std::string problem_to_yaml(const ProblemInstance &prob) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "name" << YAML::Value << prob.name;
  out << YAML::Key << "system" << YAML::Value << prob.system_ref;
  out << YAML::Key << "environment" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "dim" << YAML::Value << prob.env.dim;
  out << YAML::Key << "min" << YAML::Value;
  emit_vector(out, prob.env.workspace_min.head(prob.env.dim));
  out << YAML::Key << "max" << YAML::Value;
  emit_vector(out, prob.env.workspace_max.head(prob.env.dim));
  out << YAML::Key << "obstacles" << YAML::Value << YAML::BeginSeq;
  for (const auto &o : prob.env.obstacles) {
    out << YAML::Flow << YAML::BeginMap;
    if (!o.name.empty())
      out << YAML::Key << "name" << YAML::Value << o.name;
    out << YAML::Key << "type" << YAML::Value << (o.kind == ShapeKind::Box ? "box" : "sphere");
    out << YAML::Key << "center" << YAML::Value;
    emit_vector(out, o.center.head(prob.env.dim));
    if (o.kind == ShapeKind::Box) {
      out << YAML::Key << "half_extents" << YAML::Value;
      emit_vector(out, o.half_extents.head(prob.env.dim));
    } else {
      out << YAML::Key << "radius" << YAML::Value << o.radius;
    }
    out << YAML::EndMap;
  }
  out << YAML::EndSeq << YAML::EndMap;
  out << YAML::Key << "start" << YAML::Value;
  emit_vector(out, prob.start);
  out << YAML::Key << "goal" << YAML::Value;
  emit_vector(out, prob.goal);
  out << YAML::Key << "sampling" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "lower" << YAML::Value;
  emit_vector(out, prob.sample_lower);
  out << YAML::Key << "upper" << YAML::Value;
  emit_vector(out, prob.sample_upper);
  out << YAML::EndMap << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

void save_problem(const ProblemInstance &prob, const std::filesystem::path &path) {
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out)
    throw ConfigError("cannot write " + path.string());
  out << problem_to_yaml(prob);
}

std::vector<ProblemInstance> load_suite(const std::filesystem::path &dir) {
  std::vector<std::filesystem::path> files;
  for (const auto &entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".yaml")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<ProblemInstance> out;
  for (const auto &f : files)
    out.push_back(load_problem(f));
  return out;
}

} // namespace dbrrt
