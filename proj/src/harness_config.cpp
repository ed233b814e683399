#include "skt/harness.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace skt {

using nlohmann::json;

Grid GridSpec::make() const {
  return dim == 2 ? Grid::rectangle(nx, ny, lx, ly) : Grid::line(nx, lx);
}

namespace {

[[noreturn]] void bad(const std::string& key, const std::string& what) {
  throw ConfigError("config key '" + key + "': " + what);
}

void check_range(const std::string& key, double v, double lo, double hi) {
  if (!std::isfinite(v) || v < lo || v > hi) {
    std::ostringstream os;
    os << "value " << v << " outside [" << lo << ", " << hi << "]";
    bad(key, os.str());
  }
}

void check_vector(const std::string& key, const Vector& v, Eigen::Index n, double lo, double hi) {
  if (v.size() != n) bad(key, "expected " + std::to_string(n) + " entries");
  for (Eigen::Index i = 0; i < n; ++i) check_range(key, v(i), lo, hi);
}

Vector spread_centers(Eigen::Index n) {
  Vector c(n);
  for (Eigen::Index i = 0; i < n; ++i) c(i) = static_cast<double>(i + 1) / static_cast<double>(n + 1);
  return c;
}

InitialSpec default_initial(Eigen::Index n) {
  InitialSpec s;
  s.level = Vector::Constant(n, 0.5);
  s.amplitude = Vector::Ones(n);
  s.center = spread_centers(n);
  s.width = Vector::Constant(n, 0.1);
  s.lo = Vector::Zero(n);
  s.hi = Vector::Constant(n, 0.5);
  return s;
}

ScenarioConfig base_config(std::string name, Matrix a, Vector a0) {
  ScenarioConfig cfg;
  cfg.label = name;
  cfg.preset = std::move(name);
  const Eigen::Index n = a.rows();
  cfg.a = std::move(a);
  cfg.a0 = std::move(a0);
  cfg.scheme.mode = SchemeMode::tied;
  cfg.scheme.reg.eps = 1e-4;
  cfg.scheme.reg.tau = 1e-3;
  cfg.t_end = 0.5;
  cfg.initial = default_initial(n);
  return cfg;
}

}  // namespace

void ScenarioConfig::validate() const {
  const Eigen::Index n = a.rows();
  if (n < 1 || a.cols() != n) bad("coefficients.a", "must be a nonempty square matrix");
  if (a0.size() != n) bad("coefficients.a0", "length must equal the species count");
  for (Eigen::Index k = 0; k < a.size(); ++k) check_range("coefficients.a", a.data()[k], 0.0, 1e6);
  check_vector("coefficients.a0", a0, n, 0.0, 1e6);
  if (pi) check_vector("coefficients.pi", *pi, n, 1e-300, 1e300);
  if (pi && !((pi->array() > 0.0).all())) bad("coefficients.pi", "entries must be positive");

  if (grid.dim != 1 && grid.dim != 2) bad("grid.cells", "one or two entries expected");
  check_range("grid.cells", grid.nx, 2, 1e6);
  if (grid.dim == 2) check_range("grid.cells", grid.ny, 2, 1e4);
  check_range("grid.length", grid.lx, 1e-12, 1e12);
  if (grid.dim == 2) check_range("grid.length", grid.ly, 1e-12, 1e12);

  check_range("scheme.eps", scheme.reg.eps, 1e-14, 1e3);
  check_range("scheme.delta", scheme.reg.delta, 0.0, 1e3);
  check_range("scheme.tau", scheme.reg.tau, 1e-14, 1e6);
  check_range("scheme.t_end", t_end, 0.0, 1e9);
  if (eta >= 0.0) check_range("scheme.eta", eta, 0.0, 1e6);
  check_range("scheme.newton_tol", scheme.newton.tol, 1e-16, 1e-2);
  check_range("scheme.newton_max_iters", scheme.newton.max_iters, 1, 1e4);
  check_range("scheme.entropy_slack", scheme.entropy_check.slack, 0.0, 1.0);

  const auto& in = initial;
  check_vector("initial.level", in.level, n, 0.0, 1e6);
  check_vector("initial.amplitude", in.amplitude, n, 0.0, 1e6);
  check_vector("initial.center", in.center, n, 0.0, 1.0);
  check_vector("initial.width", in.width, n, 1e-6, 1e6);
  check_vector("initial.lo", in.lo, n, 0.0, 1.0);
  check_vector("initial.hi", in.hi, n, 0.0, 1.0);
  check_range("initial.floor", in.floor, 1e-12, 1e6);
  if (in.profile == InitialProfile::random && (in.amplitude.array() >= 1.0).any())
    bad("initial.amplitude", "random profile needs amplitude < 1");

  check_range("output.cadence", output.cadence, 1, 1e9);
}

std::vector<PresetInfo> scenario_presets() {
  return {
      {"cyclic3", "three species, cyclic cross-diffusion a13 = a21 = a32 = 1, a_ii = 0.2"},
      {"skt-two-species", "symmetric two species, a_ii = 1, a12 = a21 = 0.5, gaussian bumps"},
      {"skt-two-species-asym", "nonsymmetric two species a12 = 2, a21 = 0, relaxation to the mean"},
      {"heat1", "one species, linear diffusion"},
      {"porous1", "one species, diffusion 0.1 + 2u"},
      {"segregation", "two species, strong cross-diffusion, segregated steps"},
  };
}

ScenarioConfig preset_config(const std::string& name, std::optional<double> param) {
  if (name == "cyclic3") {
    const double aii = param.value_or(0.2);
    if (!(aii > 0.0)) bad("preset", "cyclic3 needs a_ii > 0");
    const auto c = cyclic3_coefficients(aii, aii, aii);
    auto cfg = base_config(name, c.a(), c.a0());
    cfg.initial.center << 0.25, 0.5, 0.75;
    return cfg;
  }
  if (name == "skt-two-species") {
    Matrix a(2, 2);
    a << 1.0, 0.5, 0.5, 1.0;
    return base_config(name, a, Vector::Ones(2));
  }
  if (name == "skt-two-species-asym") {
    Matrix a(2, 2);
    a << 0.3, 2.0, 0.0, 0.3;
    auto cfg = base_config(name, a, Vector::Ones(2));
    cfg.grid.nx = 200;
    cfg.scheme.mode = SchemeMode::standard;
    cfg.scheme.reg.delta = 0.0;
    cfg.t_end = 20.0;
    cfg.output.cadence = 100;
    cfg.initial.level.setOnes();
    cfg.initial.amplitude.setConstant(0.5);
    cfg.initial.center << 0.3, 0.7;
    cfg.initial.width.setConstant(0.15);
    return cfg;
  }
  if (name == "heat1") {
    auto cfg = base_config(name, Matrix::Zero(1, 1), Vector::Ones(1));
    cfg.initial.profile = InitialProfile::step;
    cfg.initial.lo << 0.25;
    cfg.initial.hi << 0.5;
    return cfg;
  }
  if (name == "porous1") {
    auto cfg = base_config(name, Matrix::Constant(1, 1, 1.0), Vector::Constant(1, 0.1));
    cfg.initial.level << 0.1;
    return cfg;
  }
  if (name == "segregation") {
    Matrix a(2, 2);
    a << 0.5, 3.0, 3.0, 0.5;
    auto cfg = base_config(name, a, Vector::Constant(2, 0.05));
    cfg.initial.profile = InitialProfile::step;
    cfg.initial.level.setConstant(0.05);
    cfg.initial.lo << 0.0, 0.5;
    cfg.initial.hi << 0.5, 1.0;
    return cfg;
  }
  throw ConfigError("config key 'preset': unknown preset '" + name + "'");
}

// ---------------------------------------------------------------------------

namespace {

const json& section(const json& doc, const char* key) {
  if (!doc.contains(key)) throw ConfigError(std::string("missing section '") + key + "'");
  const json& s = doc.at(key);
  if (!s.is_object()) bad(key, "must be an object");
  return s;
}

double number(const json& obj, const std::string& section, const char* key) {
  const json& v = obj.at(key);
  if (!v.is_number()) bad(section + "." + key, "must be a number");
  return v.get<double>();
}

int integer(const json& obj, const std::string& section, const char* key) {
  const json& v = obj.at(key);
  if (!v.is_number_integer()) bad(section + "." + key, "must be an integer");
  return v.get<int>();
}

// A number broadcasts to every species; an array must have n entries.
Vector per_species(const json& obj, const std::string& section, const char* key, Eigen::Index n) {
  const json& v = obj.at(key);
  const std::string name = section + "." + key;
  if (v.is_number()) return Vector::Constant(n, v.get<double>());
  if (!v.is_array()) bad(name, "must be a number or an array");
  if (static_cast<Eigen::Index>(v.size()) != n)
    bad(name, "expected " + std::to_string(n) + " entries");
  Vector out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const json& e = v[static_cast<std::size_t>(i)];
    if (!e.is_number()) bad(name, "entries must be numbers");
    out(i) = e.get<double>();
  }
  return out;
}

Matrix matrix_of(const json& v, const std::string& name) {
  if (!v.is_array() || v.empty()) bad(name, "must be a nonempty array of rows");
  const auto n = static_cast<Eigen::Index>(v.size());
  Matrix m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const json& row = v[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n) bad(name, "must be square");
    for (Eigen::Index j = 0; j < n; ++j) {
      const json& e = row[static_cast<std::size_t>(j)];
      if (!e.is_number()) bad(name, "entries must be numbers");
      m(i, j) = e.get<double>();
    }
  }
  return m;
}

void resize_initial(InitialSpec& in, Eigen::Index n) {
  if (in.level.size() == n) return;
  const InitialSpec fresh = default_initial(n);
  in.level = fresh.level;
  in.amplitude = fresh.amplitude;
  in.center = fresh.center;
  in.width = fresh.width;
  in.lo = fresh.lo;
  in.hi = fresh.hi;
}

void known_keys(const json& obj, const std::string& section,
                std::initializer_list<const char*> keys) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool found = false;
    for (const char* k : keys) found = found || it.key() == k;
    if (!found) bad(section + "." + it.key(), "unknown key");
  }
}

}  // namespace

ScenarioConfig parse_config(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end(), nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  known_keys(doc, "", {"schema_version", "label", "preset", "preset_param", "seed",
                       "coefficients", "grid", "scheme", "initial", "output"});
  if (!doc.contains("schema_version")) throw ConfigError("missing key 'schema_version'");
  if (!doc["schema_version"].is_number_integer() ||
      doc["schema_version"].get<int>() != kConfigSchemaVersion)
    bad("schema_version", "expected " + std::to_string(kConfigSchemaVersion));

  const json& jc = section(doc, "coefficients");
  const json& jg = section(doc, "grid");
  const json& js = section(doc, "scheme");
  const json& ji = section(doc, "initial");
  const json& jo = section(doc, "output");

  ScenarioConfig cfg;
  std::optional<double> param;
  if (doc.contains("preset_param")) param = number(doc, "", "preset_param");
  if (doc.contains("preset")) {
    if (!doc["preset"].is_string()) bad("preset", "must be a string");
    cfg = preset_config(doc["preset"].get<std::string>(), param);
  } else {
    cfg.initial = default_initial(0);
  }
  if (doc.contains("label")) {
    if (!doc["label"].is_string()) bad("label", "must be a string");
    cfg.label = doc["label"].get<std::string>();
  }
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned()) bad("seed", "must be a nonnegative integer");
    cfg.seed = doc["seed"].get<std::uint64_t>();
    cfg.initial.seed = cfg.seed;
  }

  known_keys(jc, "coefficients", {"a", "a0", "pi"});
  if (jc.contains("a")) cfg.a = matrix_of(jc["a"], "coefficients.a");
  if (cfg.a.size() == 0) bad("coefficients.a", "required without a preset");
  const Eigen::Index n = cfg.a.rows();
  if (jc.contains("a0")) cfg.a0 = per_species(jc, "coefficients", "a0", n);
  if (cfg.a0.size() != n) bad("coefficients.a0", "required with length " + std::to_string(n));
  if (jc.contains("pi")) cfg.pi = per_species(jc, "coefficients", "pi", n);

  known_keys(jg, "grid", {"cells", "length"});
  if (jg.contains("cells")) {
    const json& c = jg["cells"];
    if (c.is_number_integer()) {
      cfg.grid.dim = 1;
      cfg.grid.nx = c.get<int>();
    } else if (c.is_array() && (c.size() == 1 || c.size() == 2) && c[0].is_number_integer() &&
               (c.size() == 1 || c[1].is_number_integer())) {
      cfg.grid.dim = static_cast<int>(c.size());
      cfg.grid.nx = c[0].get<int>();
      cfg.grid.ny = c.size() == 2 ? c[1].get<int>() : 1;
    } else {
      bad("grid.cells", "must be an integer or one or two integers");
    }
  }
  if (jg.contains("length")) {
    const json& l = jg["length"];
    if (l.is_number()) {
      cfg.grid.lx = cfg.grid.ly = l.get<double>();
    } else if (l.is_array() && static_cast<int>(l.size()) == cfg.grid.dim && l[0].is_number() &&
               (l.size() == 1 || l[1].is_number())) {
      cfg.grid.lx = l[0].get<double>();
      if (l.size() == 2) cfg.grid.ly = l[1].get<double>();
    } else {
      bad("grid.length", "must be a number or one entry per axis");
    }
  }

  known_keys(js, "scheme", {"eps", "delta", "tau", "t_end", "eta", "mode", "newton_tol",
                            "newton_max_iters", "entropy_check", "entropy_slack"});
  if (js.contains("eps")) cfg.scheme.reg.eps = number(js, "scheme", "eps");
  if (js.contains("delta")) cfg.scheme.reg.delta = number(js, "scheme", "delta");
  if (js.contains("tau")) cfg.scheme.reg.tau = number(js, "scheme", "tau");
  if (js.contains("t_end")) cfg.t_end = number(js, "scheme", "t_end");
  if (js.contains("eta")) cfg.eta = number(js, "scheme", "eta");
  if (js.contains("mode")) {
    const json& m = js["mode"];
    if (m == "standard") cfg.scheme.mode = SchemeMode::standard;
    else if (m == "tied") cfg.scheme.mode = SchemeMode::tied;
    else bad("scheme.mode", "must be \"standard\" or \"tied\"");
  }
  if (js.contains("newton_tol")) cfg.scheme.newton.tol = number(js, "scheme", "newton_tol");
  if (js.contains("newton_max_iters"))
    cfg.scheme.newton.max_iters = integer(js, "scheme", "newton_max_iters");
  if (js.contains("entropy_check")) {
    if (!js["entropy_check"].is_boolean()) bad("scheme.entropy_check", "must be a boolean");
    cfg.scheme.entropy_check.enabled = js["entropy_check"].get<bool>();
  }
  if (js.contains("entropy_slack"))
    cfg.scheme.entropy_check.slack = number(js, "scheme", "entropy_slack");

  known_keys(ji, "initial", {"profile", "level", "amplitude", "center", "width", "lo", "hi",
                             "floor", "seed"});
  resize_initial(cfg.initial, n);
  auto& in = cfg.initial;
  if (ji.contains("profile")) {
    const json& p = ji["profile"];
    if (p == "constant") in.profile = InitialProfile::constant;
    else if (p == "gaussian") in.profile = InitialProfile::gaussian;
    else if (p == "step") in.profile = InitialProfile::step;
    else if (p == "random") in.profile = InitialProfile::random;
    else bad("initial.profile", "must be constant, gaussian, step or random");
  }
  if (ji.contains("level")) in.level = per_species(ji, "initial", "level", n);
  if (ji.contains("amplitude")) in.amplitude = per_species(ji, "initial", "amplitude", n);
  if (ji.contains("center")) in.center = per_species(ji, "initial", "center", n);
  if (ji.contains("width")) in.width = per_species(ji, "initial", "width", n);
  if (ji.contains("lo")) in.lo = per_species(ji, "initial", "lo", n);
  if (ji.contains("hi")) in.hi = per_species(ji, "initial", "hi", n);
  if (ji.contains("floor")) in.floor = number(ji, "initial", "floor");
  if (ji.contains("seed")) {
    if (!ji["seed"].is_number_unsigned()) bad("initial.seed", "must be a nonnegative integer");
    in.seed = ji["seed"].get<std::uint64_t>();
  }

  known_keys(jo, "output", {"cadence", "diagnostics", "field"});
  if (jo.contains("cadence")) cfg.output.cadence = integer(jo, "output", "cadence");
  for (const char* key : {"diagnostics", "field"}) {
    if (!jo.contains(key)) continue;
    if (!jo[key].is_string()) bad(std::string("output.") + key, "must be a string");
    (std::string(key) == "field" ? cfg.output.field : cfg.output.diagnostics) =
        jo[key].get<std::string>();
  }
  if (cfg.label.empty()) cfg.label = cfg.preset.empty() ? "scenario" : cfg.preset;

  cfg.validate();
  return cfg;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

// ---------------------------------------------------------------------------

SpeciesField make_initial(const InitialSpec& init, const Grid& grid, Eigen::Index n) {
  detail::require(init.level.size() == n, "make_initial: parameters do not match species count");
  SpeciesField u{grid, Matrix(n, grid.num_cells())};
  std::mt19937_64 rng(init.seed);
  std::uniform_real_distribution<double> noise(-1.0, 1.0);
  for (Eigen::Index c = 0; c < grid.num_cells(); ++c) {
    const double x = grid.center(c, 0) / grid.length(0);
    const double y = grid.dim() == 2 ? grid.center(c, 1) / grid.length(1) : 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double v = init.level(i);
      switch (init.profile) {
        case InitialProfile::constant:
          break;
        case InitialProfile::gaussian: {
          double r2 = (x - init.center(i)) * (x - init.center(i));
          if (grid.dim() == 2) r2 += (y - init.center(i)) * (y - init.center(i));
          v += init.amplitude(i) * std::exp(-r2 / (2.0 * init.width(i) * init.width(i)));
          break;
        }
        case InitialProfile::step:
          if (x >= init.lo(i) && x < init.hi(i)) v += init.amplitude(i);
          break;
        case InitialProfile::random:
          v *= 1.0 + init.amplitude(i) * noise(rng);
          break;
      }
      u.values(i, c) = std::max(v, init.floor);
    }
  }
  return u;
}

EntropyWeights resolve_weights(const ScenarioConfig& cfg) {
  const CoefficientSet coeffs = cfg.coefficients();
  if (cfg.pi) return make_weights(coeffs, *cfg.pi);
  if (const auto db = check_detailed_balance(coeffs)) {
    auto w = make_weights(coeffs, *db);
    if (w.kappa > 0.0) return w;
  }
  if (auto w = find_pi_max_kappa(coeffs)) return *w;
  return make_weights(coeffs, Vector::Constant(coeffs.size(), 1.0 / static_cast<double>(coeffs.size())));
}

CoefficientReport check_coefficients(const CoefficientSet& coeffs) {
  CoefficientReport r;
  r.detailed_balance_pi = check_detailed_balance(coeffs);
  r.self_diffusion_dominance = check_wcd(coeffs);
  r.kappa_weights = find_pi_max_kappa(coeffs);
  if ((coeffs.a0().array() > 0.0).all()) r.eta0 = eta0(coeffs);
  return r;
}

namespace {

std::string format_vector(const Vector& v) {
  std::ostringstream os;
  os.precision(10);
  os << "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v(i);
  os << "]";
  return os.str();
}

}  // namespace

std::string format_report(const CoefficientReport& r) {
  std::ostringstream os;
  os.precision(10);
  os << "detailed balance: " << (r.detailed_balance_pi ? "YES" : "NO")
     << "; self-diffusion dominance: " << (r.self_diffusion_dominance ? "YES" : "NO")
     << "; kappa condition: ";
  if (r.kappa_weights)
    os << "YES, kappa=" << r.kappa_weights->kappa << "\n";
  else
    os << "NO\n";
  if (r.detailed_balance_pi) os << "detailed balance pi = " << format_vector(*r.detailed_balance_pi) << "\n";
  if (r.kappa_weights) {
    os << "max-kappa pi = " << format_vector(r.kappa_weights->pi) << "\n";
    os << "mu = " << format_vector(r.kappa_weights->mu) << "\n";
  }
  if (r.eta0)
    os << "eta0 = " << *r.eta0 << "\n";
  else
    os << "eta0 undefined (some a_i0 = 0)\n";
  return os.str();
}

}  // namespace skt
