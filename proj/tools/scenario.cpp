#include "scenario.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace minmove::cli {

using nlohmann::json;

namespace {

// Reads one JSON object, records defaults into the resolved copy and rejects keys
// that were never consumed.
class Block {
 public:
  Block(const json& src, std::string path) : src_(src), path_(std::move(path)), out_(json::object()) {
    if (!src_.is_object()) fail("must be an object");
  }

  [[noreturn]] void fail(const std::string& msg) const { throw ConfigError(path_ + ": " + msg); }
  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    throw ConfigError(path_ + "." + key + ": " + msg);
  }

  bool has(const std::string& key) const { return src_.contains(key); }

  const json* raw(const std::string& key) {
    used_.insert(key);
    auto it = src_.find(key);
    return it == src_.end() ? nullptr : &*it;
  }

  double number(const std::string& key, std::optional<double> def = std::nullopt) {
    const json* v = raw(key);
    double x = 0.0;
    if (!v) {
      if (!def) fail(key, "is required");
      x = *def;
    } else {
      if (!v->is_number()) fail(key, "must be a number");
      x = v->get<double>();
    }
    out_[key] = x;
    return x;
  }

  std::int64_t integer(const std::string& key, std::optional<std::int64_t> def = std::nullopt) {
    const json* v = raw(key);
    std::int64_t x = 0;
    if (!v) {
      if (!def) fail(key, "is required");
      x = *def;
    } else {
      if (!v->is_number_integer()) fail(key, "must be an integer");
      x = v->get<std::int64_t>();
    }
    out_[key] = x;
    return x;
  }

  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t def) {
    const json* v = raw(key);
    std::uint64_t x = def;
    if (v) {
      if (!v->is_number_unsigned()) fail(key, "must be a non-negative integer");
      x = v->get<std::uint64_t>();
    }
    out_[key] = x;
    return x;
  }

  bool boolean(const std::string& key, bool def) {
    const json* v = raw(key);
    bool x = def;
    if (v) {
      if (!v->is_boolean()) fail(key, "must be true or false");
      x = v->get<bool>();
    }
    out_[key] = x;
    return x;
  }

  std::string string(const std::string& key, std::optional<std::string> def = std::nullopt) {
    const json* v = raw(key);
    std::string x;
    if (!v) {
      if (!def) fail(key, "is required");
      x = *def;
    } else {
      if (!v->is_string()) fail(key, "must be a string");
      x = v->get<std::string>();
    }
    out_[key] = x;
    return x;
  }

  std::vector<double> numbers(const std::string& key, std::optional<std::vector<double>> def = std::nullopt) {
    const json* v = raw(key);
    std::vector<double> x;
    if (!v) {
      if (!def) fail(key, "is required");
      x = *def;
    } else {
      if (!v->is_array()) fail(key, "must be an array of numbers");
      for (const auto& e : *v) {
        if (!e.is_number()) fail(key, "must be an array of numbers");
        x.push_back(e.get<double>());
      }
    }
    out_[key] = x;
    return x;
  }

  std::vector<std::string> strings(const std::string& key, std::vector<std::string> def) {
    const json* v = raw(key);
    std::vector<std::string> x = std::move(def);
    if (v) {
      if (!v->is_array()) fail(key, "must be an array of strings");
      x.clear();
      for (const auto& e : *v) {
        if (!e.is_string()) fail(key, "must be an array of strings");
        x.push_back(e.get<std::string>());
      }
    }
    out_[key] = x;
    return x;
  }

  /// Nested object; a missing optional block reads as {}.
  Block child(const std::string& key, bool required = false) {
    const json* v = raw(key);
    if (!v && required) fail(key, "is required");
    static const json empty = json::object();
    return Block(v ? *v : empty, path_ + "." + key);
  }

  void put(const std::string& key, json value) { out_[key] = std::move(value); }

  json finish() const {
    for (const auto& [k, v] : src_.items()) {
      if (!used_.count(k)) fail("unknown key '" + k + "'");
    }
    return out_;
  }

  const std::string& path() const { return path_; }

 private:
  const json& src_;
  std::string path_;
  json out_;
  std::set<std::string> used_;
};

void require(bool ok, const Block& b, const std::string& key, const std::string& msg) {
  if (!ok) b.fail(key, msg);
}

State to_state(const std::vector<double>& v) {
  State s(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) s[static_cast<Eigen::Index>(i)] = v[i];
  return s;
}

void parse_banach(Block& b, Scenario& sc, double p) {
  Block fb = b.child("functional", true);
  const std::string kind = fb.string("kind");
  const std::int64_t n = b.integer("dimension");
  require(n >= 1 && n <= 4096, b, "dimension", "must lie in [1, 4096]");
  const auto un = static_cast<std::size_t>(n);

  PNormSpace sp = PNormSpace::euclidean(un, p);
  sp.q_norm = b.number("q_norm", 2.0);
  require(sp.q_norm > 1.0, b, "q_norm", "must be > 1");
  sp.finsler = b.boolean("finsler", false);

  BanachFunctional f;
  if (kind == "quadratic" || kind == "power") {
    const double lambda = fb.number("lambda", 1.0);
    const double r = kind == "power" ? fb.number("exponent", 2.0) : 2.0;
    require(r > 1.0, fb, "exponent", "must be > 1");
    const auto c = fb.numbers("center", std::vector<double>(un, 0.0));
    require(c.size() == un, fb, "center", "must have `dimension` entries");
    f = BanachFunctional::power(un, lambda, r, to_state(c));
  } else if (kind == "double-well") {
    f = BanachFunctional::double_well(un, fb.number("h", 1.0));
    require(f.h > 0.0, fb, "h", "must be positive");
  } else if (kind == "allen-cahn-1d") {
    f = BanachFunctional::allen_cahn(un);
  } else {
    fb.fail("kind", "must be one of quadratic, power, double-well, allen-cahn-1d");
  }
  const double default_volume = f.kind == BanachFunctional::Kind::allen_cahn_1d ? f.h : 1.0;
  sp.cell_volume = b.number("cell_volume", default_volume);
  require(sp.cell_volume > 0.0, b, "cell_volume", "must be positive");
  b.put("functional", fb.finish());

  const json* init = b.raw("initial");
  if (!init) b.fail("initial", "is required");
  if (init->is_array()) {
    std::vector<double> v;
    for (const auto& e : *init) {
      if (!e.is_number()) b.fail("initial", "must be an array of numbers or {\"constant\": x}");
      v.push_back(e.get<double>());
    }
    require(v.size() == un, b, "initial", "must have `dimension` entries");
    sc.initial = to_state(v);
    b.put("initial", v);
  } else {
    Block ib(*init, b.path() + ".initial");
    const double c = ib.number("constant");
    sc.initial = State::Constant(static_cast<Eigen::Index>(un), c);
    b.put("initial", ib.finish());
  }
  sc.backend = std::make_shared<BanachBackend>(sp, f);
}

void parse_wasserstein(Block& b, Scenario& sc, double p) {
  const std::int64_t n = b.integer("grid", 256);
  require(n >= 2 && n <= static_cast<std::int64_t>(w1d::kMaxGrid), b, "grid", "must lie in [2, 4096]");
  const auto un = static_cast<std::size_t>(n);

  Block eb = b.child("energy", true);
  w1d::EnergySpec spec;
  spec.c1 = eb.number("c1", 1.0);
  spec.c2 = eb.number("c2", 0.0);
  spec.c3 = eb.number("c3", 0.0);
  {
    Block vb = eb.child("potential");
    const std::string k = vb.string("kind", "quadratic");
    if (k == "quadratic") spec.V.kind = w1d::Potential::Kind::quadratic;
    else if (k == "power") spec.V.kind = w1d::Potential::Kind::power;
    else if (k == "double-well") spec.V.kind = w1d::Potential::Kind::double_well;
    else vb.fail("kind", "must be one of quadratic, power, double-well");
    spec.V.strength = vb.number("strength", 1.0);
    spec.V.center = vb.number("center", 0.0);
    spec.V.exponent = vb.number("exponent", 2.0);
    eb.put("potential", vb.finish());
  }
  {
    Block fb = eb.child("internal");
    const std::string k = fb.string("kind", spec.c2 > 0.0 ? "entropy" : "none");
    if (k == "entropy") spec.F.kind = w1d::InternalEnergy::Kind::entropy;
    else if (k == "power") spec.F.kind = w1d::InternalEnergy::Kind::power;
    else if (k == "none") spec.F.kind = w1d::InternalEnergy::Kind::none;
    else fb.fail("kind", "must be one of entropy, power, none");
    spec.F.m = fb.number("m", 2.0);
    eb.put("internal", fb.finish());
  }
  {
    Block wb = eb.child("interaction");
    const std::string k = wb.string("kind", "none");
    if (k == "power") spec.W.kind = w1d::Interaction::Kind::power;
    else if (k == "none") spec.W.kind = w1d::Interaction::Kind::none;
    else wb.fail("kind", "must be one of power, none");
    spec.W.exponent = wb.number("exponent", 2.0);
    eb.put("interaction", wb.finish());
  }
  try {
    spec.validate();
  } catch (const InputError& e) {
    eb.fail(e.what());
  }
  b.put("energy", eb.finish());

  Block ib = b.child("initial", true);
  const std::string kind = ib.string("kind");
  w1d::QuantileMeasure mu;
  if (kind == "gaussian") {
    const double m = ib.number("mean", 0.0), sd = ib.number("sd", 1.0);
    require(sd > 0.0, ib, "sd", "must be positive");
    mu = w1d::QuantileMeasure::gaussian(un, m, sd, p);
  } else if (kind == "point_mass") {
    mu = w1d::QuantileMeasure::point_mass(un, ib.number("at"), p);
  } else if (kind == "uniform") {
    const double a = ib.number("a"), bb = ib.number("b");
    require(bb > a, ib, "b", "must exceed a");
    mu = w1d::QuantileMeasure::uniform(un, a, bb, p);
  } else if (kind == "gibbs") {
    try {
      mu = w1d::gibbs_stationary(spec, un, p);
    } catch (const DomainError& e) {
      ib.fail("kind", e.what());
    }
  } else {
    ib.fail("kind", "must be one of gaussian, point_mass, uniform, gibbs");
  }
  b.put("initial", ib.finish());
  sc.initial = mu.q;
  sc.backend = std::make_shared<w1d::Wasserstein1DBackend>(spec, un, p);
}

json parse_experiment(Block& xb, const Scenario& sc) {
  const std::string& kind = sc.experiment;
  const bool banach = sc.backend_kind == "banach";
  const auto n = static_cast<std::size_t>(sc.initial.size());
  if (kind == "run") {
  } else if (kind == "check") {
    const std::vector<std::string> def = banach
        ? std::vector<std::string>{"energy_solution", "edi", "lyapunov"}
        : std::vector<std::string>{"energy_solution", "lyapunov"};
    const auto checks = xb.strings("checks", def);
    static const std::set<std::string> known{"energy_solution", "edi", "key_estimate", "lyapunov",
                                             "gibbs_stationarity", "pde_residual"};
    for (const auto& c : checks) {
      if (!known.count(c)) xb.fail("checks", "unknown check '" + c + "'");
      if (!banach && c == "key_estimate") xb.fail("checks", "key_estimate needs a banach backend");
      if (banach && (c == "gibbs_stationarity" || c == "pde_residual"))
        xb.fail("checks", c + " needs a wasserstein1d backend");
    }
    xb.number("energy_solution_tolerance", 5e-2);
    xb.number("edi_tolerance", 1e-6);
    require(xb.integer("key_estimate_samples", 1000) >= 1, xb, "key_estimate_samples", "must be >= 1");
    xb.number("key_estimate_radius", 1.0);
    xb.number("lyapunov_eps", 1e-6);
    const double end = sc.flow.partition.end();
    const auto win = xb.numbers("lyapunov_window", std::vector<double>{0.5 * end, end});
    require(win.size() == 2 && win[0] <= win[1], xb, "lyapunov_window", "must be [begin, end] with begin <= end");
    xb.number("gibbs_slope_tolerance", 5e-2);
    xb.number("pde_tolerance", 1e-3);
  } else if (kind == "attractor") {
    const auto c = xb.numbers("center", std::vector<double>(sc.initial.data(), sc.initial.data() + n));
    require(c.size() == n, xb, "center", "must match the state dimension");
    require(xb.number("radius", 1.0) >= 0.0, xb, "radius", "must be >= 0");
    require(xb.integer("count", 64) >= 1, xb, "count", "must be >= 1");
    require(xb.number("horizon", sc.flow.partition.end()) > 0.0, xb, "horizon", "must be positive");
    require(xb.number("cluster_radius", 1e-2) > 0.0, xb, "cluster_radius", "must be positive");
    require(xb.number("rest_tolerance", 1e-8) > 0.0, xb, "rest_tolerance", "must be positive");
    require(xb.integer("snapshots", 50) >= 1, xb, "snapshots", "must be >= 1");
  } else if (kind == "decay") {
    require(xb.number("t0", 0.0) >= 0.0, xb, "t0", "must be >= 0");
    require(xb.number("tolerance", 0.03) >= 0.0, xb, "tolerance", "must be >= 0");
  } else if (kind == "restpoints") {
    const auto c = xb.numbers("center", std::vector<double>(sc.initial.data(), sc.initial.data() + n));
    require(c.size() == n, xb, "center", "must match the state dimension");
    require(xb.number("radius", 1.0) >= 0.0, xb, "radius", "must be >= 0");
    require(xb.integer("count", 16) >= 1, xb, "count", "must be >= 1");
    require(xb.number("tolerance", 1e-8) > 0.0, xb, "tolerance", "must be positive");
    require(xb.integer("max_iterations", 200) >= 1, xb, "max_iterations", "must be >= 1");
    require(xb.number("dedup_radius", 1e-6) > 0.0, xb, "dedup_radius", "must be positive");
  } else if (kind == "refine") {
    require(xb.integer("refinements", 3) >= 2, xb, "refinements", "must be >= 2");
  } else {
    xb.fail("kind", "must be one of run, check, attractor, decay, restpoints, refine");
  }
  return xb.finish();
}

std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  const std::size_t end = std::min(byte > 0 ? byte - 1 : 0, text.size());
  for (std::size_t i = 0; i < end; ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace

Scenario parse_scenario(const std::string& text, const Overrides& overrides) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_column(text, e.byte);
    throw ConfigError("scenario is not valid JSON at line " + std::to_string(line) + ", column " +
                          std::to_string(col) + ": " + e.what(),
                      line, col);
  }

  Scenario sc;
  Block root(doc, "scenario");
  const std::int64_t version = root.integer("schema_version", kSchemaVersion);
  if (version != kSchemaVersion) root.fail("schema_version", "unsupported version");

  Block fb = root.child("flow", true);
  const double p = fb.number("p");
  require(p > 1.0 && std::isfinite(p), fb, "p", "must lie in (1, inf)");

  Block bb = root.child("backend", true);
  sc.backend_kind = bb.string("kind");
  const bool banach = sc.backend_kind == "banach";
  if (!banach && sc.backend_kind != "wasserstein1d") bb.fail("kind", "must be banach or wasserstein1d");

  MMConfig& cfg = sc.flow;
  cfg.p = p;
  if (fb.has("steps")) {
    if (fb.has("tau")) fb.fail("give either tau or steps, not both");
    const auto steps = fb.numbers("steps");
    require(!steps.empty(), fb, "steps", "must be non-empty");
    for (double s : steps) require(s > 0.0, fb, "steps", "entries must be positive");
    cfg.partition = Partition(steps);
  } else {
    const double tau = fb.number("tau");
    const double horizon = fb.number("horizon");
    require(tau > 0.0, fb, "tau", "must be positive");
    require(horizon > 0.0, fb, "horizon", "must be positive");
    cfg.partition = Partition::uniform(tau, horizon);
  }
  cfg.prox_tolerance = fb.number("prox_tolerance", banach ? 1e-10 : 1e-8);
  require(cfg.prox_tolerance > 0.0, fb, "prox_tolerance", "must be positive");
  cfg.max_inner_iterations = static_cast<int>(fb.integer("max_inner_iterations", 500));
  require(cfg.max_inner_iterations >= 1, fb, "max_inner_iterations", "must be >= 1");
  cfg.quadrature_points = static_cast<int>(fb.integer("quadrature_points", 8));
  require(cfg.quadrature_points >= 0, fb, "quadrature_points", "must be >= 0");
  cfg.seed = fb.unsigned_integer("seed", 0);
  if (overrides.seed) {
    cfg.seed = *overrides.seed;
    fb.put("seed", cfg.seed);
  }

  try {
    if (banach) parse_banach(bb, sc, p);
    else parse_wasserstein(bb, sc, p);
  } catch (const InputError& e) {
    bb.fail(e.what());
  }

  Block xb = root.child("experiment", true);
  sc.experiment = xb.string("kind");
  sc.params = parse_experiment(xb, sc);

  Block ob = root.child("output");
  sc.output_dir = ob.string("directory", "out");
  if (overrides.out) sc.output_dir = *overrides.out;
  sc.formats = ob.strings("formats", {"csv", "json"});
  for (const auto& f : sc.formats)
    if (f != "csv" && f != "json") ob.fail("formats", "entries must be csv or json");

  root.put("flow", fb.finish());
  root.put("backend", bb.finish());
  root.put("experiment", sc.params);
  root.put("output", ob.finish());
  sc.resolved = root.finish();
  return sc;
}

Scenario load_scenario(const std::string& path, const Overrides& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open scenario file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), overrides);
}

}  // namespace minmove::cli
