#include "dbrrt/primitives.hpp"

#include <boost/crc.hpp>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

namespace dbrrt {

double max_defect(const DynamicalSystem &sys, const MotionPrimitive &m) {
  double worst = 0.0;
  for (std::size_t k = 0; k < m.controls.size(); ++k)
    worst = std::max(worst, distance(sys.spec(), m.states[k + 1], sys.step(m.states[k], m.controls[k])));
  return worst;
}

std::string check_primitive(const DynamicalSystem &sys, const MotionPrimitive &m, double defect_tol) {
  const auto &spec = sys.spec();
  if (m.controls.empty())
    return "primitive has no controls";
  if (m.states.size() != m.controls.size() + 1)
    return "primitive must have one more state than controls";
  for (const auto &x : m.states)
    if (x.size() != spec.nx || !x.allFinite())
      return "state has wrong size or is not finite";
  for (const auto &u : m.controls)
    if (u.size() != spec.nu || !u.allFinite())
      return "control has wrong size or is not finite";
  for (const auto &u : m.controls)
    if (!is_control_within_bounds(spec, u))
      return "control outside its bounds";
  for (const auto &x : m.states)
    if (!is_within_bounds(spec, x))
      return "state outside its bounds";
  const double d = max_defect(sys, m);
  if (!(d <= defect_tol))
    return "dynamics defect " + std::to_string(d);
  return {};
}

MotionPrimitive translated(const SystemSpec &spec, const MotionPrimitive &m,
                           const Eigen::VectorXd &offset) {
  MotionPrimitive out;
  out.controls = m.controls;
  out.states.reserve(m.states.size());
  for (const auto &x : m.states)
    out.states.push_back(translate_state(spec, x, offset));
  return out;
}

MotionPrimitive canonicalize(const SystemSpec &spec, const MotionPrimitive &m) {
  if (m.states.empty())
    return m;
  return translated(spec, m, -translation_part(spec, m.start()));
}

MotionPrimitive reverse(const MotionPrimitive &m) {
  MotionPrimitive out;
  out.states.assign(m.states.rbegin(), m.states.rend());
  out.controls.assign(m.controls.rbegin(), m.controls.rend());
  return out;
}

// ---------------------------------------------------------------------------

PrimitiveLibrary::PrimitiveLibrary(SystemPtr system, std::vector<MotionPrimitive> primitives,
                                   bool reversed)
    : system_(std::move(system)), reversed_(reversed) {
  if (!system_)
    throw UsageError("primitive library without a system");
  const auto &spec = system_->spec();
  prims_.reserve(primitives.size());
  std::vector<State> starts;
  starts.reserve(primitives.size());
  for (auto &m : primitives) {
    if (m.states.empty() || m.states.size() != m.controls.size() + 1)
      throw UsageError("malformed primitive in library");
    prims_.push_back(canonicalize(spec, m));
    starts.push_back(prims_.back().start());
  }
  index_ = std::make_shared<KdTree>(StateEmbedding::without_translation(spec));
  index_->build(std::move(starts));
}

std::vector<std::size_t> PrimitiveLibrary::nearest_r_indices(const State &x, double delta) const {
  if (!(delta > 0))
    throw UsageError("nearest_r needs a positive radius");
  const auto hits = index_->radius(x, delta);
  std::vector<std::size_t> ids;
  ids.reserve(hits.size());
  for (const auto &h : hits)
    ids.push_back(h.id);
  return ids;
}

std::vector<std::size_t> PrimitiveLibrary::nearest_r_indices_brute(const State &x,
                                                                   double delta) const {
  if (!(delta > 0))
    throw UsageError("nearest_r needs a positive radius");
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < prims_.size(); ++i) {
    const State s = translate_state(system_->spec(), prims_[i].start(), adapt_offset(i, x));
    if (distance(system_->spec(), s, x) <= delta)
      ids.push_back(i);
  }
  return ids;
}

Eigen::VectorXd PrimitiveLibrary::adapt_offset(std::size_t i, const State &x) const {
  const auto &spec = system_->spec();
  return translation_part(spec, x) - translation_part(spec, prims_[i].start());
}

MotionPrimitive PrimitiveLibrary::adapt(std::size_t i, const State &x) const {
  return translated(system_->spec(), prims_[i], adapt_offset(i, x));
}

std::vector<MotionPrimitive> PrimitiveLibrary::nearest_r(const State &x, double delta) const {
  std::vector<MotionPrimitive> out;
  for (std::size_t i : nearest_r_indices(x, delta))
    out.push_back(adapt(i, x));
  return out;
}

PrimitiveLibrary PrimitiveLibrary::reversed() const {
  std::vector<MotionPrimitive> rev;
  rev.reserve(prims_.size());
  for (const auto &m : prims_)
    rev.push_back(reverse(m));
  return {system_, std::move(rev), !reversed_};
}

PrimitiveLibrary PrimitiveLibrary::subset(std::span<const std::size_t> ids) const {
  std::vector<MotionPrimitive> sel;
  sel.reserve(ids.size());
  for (std::size_t i : ids)
    sel.push_back(prims_.at(i));
  return {system_, std::move(sel), reversed_};
}

// ---------------------------------------------------------------------------

PrimitiveSelector::PrimitiveSelector(std::shared_ptr<const PrimitiveLibrary> library,
                                     std::uint64_t seed)
    : library_(std::move(library)) {
  order_.resize(library_->size());
  std::iota(order_.begin(), order_.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order_.begin(), order_.end(), rng);
}

PrimitiveLibrary PrimitiveSelector::choose(std::size_t n) const {
  if (n > order_.size()) {
    std::clog << "warning: requested " << n << " primitives but the library holds "
              << order_.size() << "; using all of them\n";
    n = order_.size();
  }
  return library_->subset(std::span<const std::size_t>(order_.data(), n));
}

std::size_t PrimitiveSelector::increased_count(std::size_t n, double rate) const {
  if (!(rate > 1.0))
    throw UsageError("primitive growth rate must exceed 1");
  const auto next = static_cast<std::size_t>(std::ceil(static_cast<double>(n) * rate));
  return std::min(order_.size(), next);
}

// ---------------------------------------------------------------------------

void GenerationConfig::validate(const SystemSpec &spec) const {
  if (min_length < 1 || max_length < min_length)
    throw ConfigError("generation length range must satisfy 1 <= min <= max");
  if (start_lower.size() != spec.nx || start_upper.size() != spec.nx)
    throw ConfigError("generation start box must have length nx");
  if ((start_lower.array() > start_upper.array()).any())
    throw ConfigError("generation start box is inverted");
  if (control_pieces < 1 || !(control_spread >= 0 && control_spread <= 1))
    throw ConfigError("generation needs control_pieces >= 1 and control_spread in [0, 1]");
  if (!(goal_tolerance > 0))
    throw ConfigError("generation goal tolerance must be positive");
}

GenerationConfig default_generation_config(const DynamicalSystem &sys) {
  const auto &spec = sys.spec();
  GenerationConfig c;
  c.start_lower = spec.state_lower;
  c.start_upper = spec.state_upper;
  for (int i = 0; i < spec.nx; ++i)
    if (spec.is_translation(i))
      c.start_lower[i] = c.start_upper[i] = 0.0;
  const std::string &n = spec.name;
  if (n == "acrobot") {
    c.min_length = 20;
    c.max_length = 100;
    c.start_lower.tail(2).setConstant(-3.0);
    c.start_upper.tail(2).setConstant(3.0);
    c.control_spread = 0.3;
  } else if (n == "planar_rotor") {
    c.min_length = 20;
    c.max_length = 100;
    c.start_lower.segment(2, 4) << -0.6, -1.0, -1.0, -1.0;
    c.start_upper.segment(2, 4) << 0.6, 1.0, 1.0, 1.0;
    c.control_spread = 0.3;
  }
  c.solver.max_iterations = 300;
  return c;
}

std::optional<MotionPrimitive> solve_primitive_bvp(const SystemPtr &sys, const State &x_s,
                                                   const State &x_g, int horizon,
                                                   const GenerationConfig &cfg) {
  const auto &spec = sys->spec();
  OcpProblem prob;
  prob.system = sys;
  prob.horizon = horizon;
  prob.x_start = x_s;
  prob.x_goal = x_g;
  prob.env = Environment::open();
  prob.weights = cfg.weights;

  StateSequence xs;
  xs.reserve(static_cast<std::size_t>(horizon) + 1);
  const State dx = state_diff(spec, x_g, x_s);
  for (int k = 0; k <= horizon; ++k)
    xs.push_back(normalized(spec, x_s + dx * (static_cast<double>(k) / horizon)));
  const ControlSequence us(static_cast<std::size_t>(horizon), sys->nominal_control());

  SolverOptions opt = cfg.solver;
  opt.tolerances.goal = cfg.goal_tolerance;
  OptResult res;
  try {
    res = solve_fddp(prob, xs, us, opt);
  } catch (const UsageError &) {
    return std::nullopt;
  }
  if (!res.converged)
    return std::nullopt;

  // replay so the stored primitive is exactly consistent with step
  MotionPrimitive m;
  m.controls = res.controls;
  for (auto &u : m.controls)
    u = u.cwiseMax(spec.control_lower).cwiseMin(spec.control_upper);
  m.states.push_back(x_s);
  for (const auto &u : m.controls)
    m.states.push_back(sys->step(m.states.back(), u));
  if (distance(spec, m.end(), x_g) > cfg.goal_tolerance)
    return std::nullopt;
  if (!check_primitive(*sys, m, 0.0).empty())
    return std::nullopt;
  return m;
}

std::optional<MotionPrimitive> generate_primitive(const SystemPtr &sys, const GenerationConfig &cfg,
                                                  std::mt19937_64 &rng) {
  const auto &spec = sys->spec();
  const int N = std::uniform_int_distribution<int>(cfg.min_length, cfg.max_length)(rng);
  State x_s = sample_uniform_state(spec, cfg.start_lower, cfg.start_upper, rng);
  for (int i = 0; i < spec.nx; ++i)
    if (spec.is_translation(i))
      x_s[i] = 0.0;

  const Control nominal = sys->nominal_control();
  const Control lo = nominal + cfg.control_spread * (spec.control_lower - nominal);
  const Control hi = nominal + cfg.control_spread * (spec.control_upper - nominal);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  State x_g = x_s;
  Control u(spec.nu);
  for (int k = 0; k < N; ++k) {
    if (k * cfg.control_pieces % N < cfg.control_pieces)
      for (int i = 0; i < spec.nu; ++i)
        u[i] = lo[i] + unit(rng) * (hi[i] - lo[i]);
    x_g = sys->step(x_g, u);
  }
  if (!is_within_bounds(spec, x_g))
    return std::nullopt;
  return solve_primitive_bvp(sys, x_s, x_g, N, cfg);
}

std::mt19937_64 attempt_rng(std::uint64_t seed, std::uint64_t attempt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(attempt), static_cast<std::uint32_t>(attempt >> 32)};
  return std::mt19937_64(seq);
}

namespace {

std::optional<MotionPrimitive> run_attempt(const SystemPtr &sys, const GenerationConfig &cfg,
                                           std::uint64_t seed, std::size_t attempt) {
  std::mt19937_64 rng = attempt_rng(seed, attempt);
  return generate_primitive(sys, cfg, rng);
}

} // namespace

std::vector<MotionPrimitive> generate_primitives_serial(const SystemPtr &sys,
                                                        const GenerationConfig &cfg,
                                                        std::size_t count, std::uint64_t seed,
                                                        std::size_t max_attempts,
                                                        GenerationStats *stats) {
  cfg.validate(sys->spec());
  std::vector<MotionPrimitive> out;
  std::size_t attempt = 0;
  while (out.size() < count && attempt < max_attempts) {
    if (auto m = run_attempt(sys, cfg, seed, attempt))
      out.push_back(canonicalize(sys->spec(), *m));
    ++attempt;
  }
  if (stats)
    *stats = {attempt, out.size()};
  return out;
}

std::vector<MotionPrimitive> generate_primitives_omp(const SystemPtr &sys,
                                                     const GenerationConfig &cfg,
                                                     std::size_t count, std::uint64_t seed,
                                                     std::size_t max_attempts,
                                                     GenerationStats *stats) {
  cfg.validate(sys->spec());
  std::vector<MotionPrimitive> out;
  std::size_t next = 0;
  std::size_t used = 0;
  const std::size_t block = 256;
  std::vector<std::optional<MotionPrimitive>> results;
  while (out.size() < count && next < max_attempts) {
    const std::size_t n = std::min(block, max_attempts - next);
    results.assign(n, std::nullopt);
    const auto first = static_cast<std::int64_t>(next);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i)
      results[static_cast<std::size_t>(i)] =
          run_attempt(sys, cfg, seed, static_cast<std::size_t>(first + i));
    // merge in attempt order so the outcome does not depend on scheduling
    for (std::size_t i = 0; i < n && out.size() < count; ++i) {
      used = next + i + 1;
      if (results[i])
        out.push_back(canonicalize(sys->spec(), *results[i]));
    }
    next += n;
  }
  if (stats)
    *stats = {used, out.size()};
  return out;
}

// ---------------------------------------------------------------------------

namespace {

constexpr const char *kMagic = "DBRRT-PRIMITIVES 1";

static_assert(std::endian::native == std::endian::little,
              "the primitive file payload is little-endian");

template <typename T> void put(std::string &buf, T v) {
  char raw[sizeof(T)];
  std::memcpy(raw, &v, sizeof(T));
  buf.append(raw, sizeof(T));
}

class Reader {
public:
  Reader(const std::string &buf, std::string where) : buf_(buf), where_(std::move(where)) {}
  template <typename T> T get() {
    if (pos_ + sizeof(T) > buf_.size())
      throw ParseError(where_ + ": payload truncated");
    T v;
    std::memcpy(&v, buf_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  bool done() const { return pos_ == buf_.size(); }

private:
  const std::string &buf_;
  std::string where_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32(const std::string &payload) {
  boost::crc_32_type crc;
  crc.process_bytes(payload.data(), payload.size());
  return crc.checksum();
}

} // namespace

void save_primitives(const std::filesystem::path &path, const DynamicalSystem &sys,
                     const std::vector<MotionPrimitive> &prims) {
  const auto &spec = sys.spec();
  std::string payload;
  put<std::uint32_t>(payload, static_cast<std::uint32_t>(prims.size()));
  for (const auto &m : prims) {
    if (m.states.size() != m.controls.size() + 1)
      throw UsageError("cannot save a malformed primitive");
    put<std::uint32_t>(payload, static_cast<std::uint32_t>(m.length()));
    for (const auto &x : m.states)
      for (int i = 0; i < spec.nx; ++i)
        put<double>(payload, x[i]);
    for (const auto &u : m.controls)
      for (int i = 0; i < spec.nu; ++i)
        put<double>(payload, u[i]);
  }
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw ConfigError("cannot write " + path.string());
  std::ostringstream header;
  header.precision(17);
  header << kMagic << "\n"
         << "system: " << spec.name << "\n"
         << "count: " << prims.size() << "\n"
         << "dt: " << spec.dt << "\n"
         << "nx: " << spec.nx << "\n"
         << "nu: " << spec.nu << "\n"
         << "checksum: " << std::hex << crc32(payload) << std::dec << "\n"
         << "end_header\n";
  out << header.str();
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out)
    throw ConfigError("failed writing " + path.string());
}

std::vector<MotionPrimitive> load_primitives(const std::filesystem::path &path,
                                             const DynamicalSystem &sys) {
  const auto &spec = sys.spec();
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ParseError(path.string() + ": cannot open");
  const std::string where = path.string();

  std::string line;
  int line_no = 0;
  auto header_error = [&](const std::string &msg) {
    return ParseError(where + ":" + std::to_string(line_no) + ": " + msg);
  };
  if (!std::getline(in, line) || (++line_no, line != kMagic))
    throw header_error("not a primitive library (expected '" + std::string(kMagic) + "')");

  std::string system;
  long long count = -1;
  double dt = 0.0;
  int nx = -1, nu = -1;
  std::uint32_t checksum = 0;
  bool have_checksum = false, ended = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line == "end_header") {
      ended = true;
      break;
    }
    const auto colon = line.find(':');
    if (colon == std::string::npos)
      throw header_error("malformed header line '" + line + "'");
    const std::string key = line.substr(0, colon);
    std::istringstream val(line.substr(colon + 1));
    bool ok = true;
    if (key == "system")
      ok = static_cast<bool>(val >> system);
    else if (key == "count")
      ok = static_cast<bool>(val >> count);
    else if (key == "dt")
      ok = static_cast<bool>(val >> dt);
    else if (key == "nx")
      ok = static_cast<bool>(val >> nx);
    else if (key == "nu")
      ok = static_cast<bool>(val >> nu);
    else if (key == "checksum")
      ok = have_checksum = static_cast<bool>(val >> std::hex >> checksum);
    else
      throw header_error("unknown header key '" + key + "'");
    if (!ok)
      throw header_error("bad value for '" + key + "'");
  }
  if (!ended)
    throw header_error("missing end_header");
  if (system.empty() || count < 0 || nx < 0 || nu < 0 || !have_checksum)
    throw header_error("incomplete header");
  if (system != spec.name)
    throw ConfigError(where + ": library is for system '" + system + "', not '" + spec.name + "'");
  if (nx != spec.nx || nu != spec.nu)
    throw ConfigError(where + ": library dimensions do not match the system");
  if (std::abs(dt - spec.dt) > 1e-12 * spec.dt)
    throw ConfigError(where + ": library dt " + std::to_string(dt) + " differs from the system");

  const std::string payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (crc32(payload) != checksum)
    throw ParseError(where + ": checksum mismatch, file is corrupted");

  Reader r(payload, where);
  const auto n = r.get<std::uint32_t>();
  if (static_cast<long long>(n) != count)
    throw ParseError(where + ": header count does not match the payload");
  std::vector<MotionPrimitive> prims(n);
  for (std::uint32_t p = 0; p < n; ++p) {
    const auto len = r.get<std::uint32_t>();
    auto &m = prims[p];
    m.states.assign(len + 1, State(spec.nx));
    m.controls.assign(len, Control(spec.nu));
    for (auto &x : m.states)
      for (int i = 0; i < spec.nx; ++i)
        x[i] = r.get<double>();
    for (auto &u : m.controls)
      for (int i = 0; i < spec.nu; ++i)
        u[i] = r.get<double>();
    const std::string bad = check_primitive(sys, m);
    if (!bad.empty())
      throw ParseError(where + ": primitive " + std::to_string(p) + " is invalid: " + bad);
  }
  if (!r.done())
    throw ParseError(where + ": trailing bytes after the payload");
  return prims;
}

} // namespace dbrrt
