#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "eigopt/eigensolver.hpp"
#include "eigopt/mesh.hpp"
#include "eigopt/optimizer.hpp"

namespace eigopt {

struct InitSpec {
  enum class Kind { constant, random, cosine };
  Kind kind = Kind::constant;
  double value = 0.5;
  std::uint64_t seed = 1;
};

struct AfemParams {
  int K = 4;
  std::vector<double> thetas;  // one per estimator, size l+1
  enum class Mode { adaptive, uniform } mode = Mode::adaptive;
  long vertex_budget = 0;      // 0 = unlimited
  double estimator_tol = 0.0;  // 0 = disabled; threshold on sum_j eta_j^2
  bool cold_restart = false;   // restart phi, mu, beta on every mesh
  bool carry_penalty = false;        // continue the beta schedule across meshes
  bool lagrangian_estimator = true;  // include mu + G/beta in the design residual
  enum class Marking { minimal, bulk } marking = Marking::bulk;
};

struct OutputSpec {
  std::string directory = "out";
  int vtk_every = 1;
  bool csv = true;
  bool png = true;
};

struct RunConfig {
  DomainSpec domain;
  ObjectiveSpec objective;  // weights already in minimization convention
  bool maximize = false;
  AfemParams afem;
  InnerParams inner;
  InitSpec init;
  EigenOpts eig;
  OutputSpec out;

  // Objective value in the user's convention (eigenvalue/gap being optimized).
  double reported_objective(double psi) const { return maximize ? -psi : psi; }
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

struct ConfigValue {
  enum class Type { number, string, boolean, number_list } type;
  double num = 0.0;
  std::string str;
  bool b = false;
  std::vector<double> list;
  int line = 0;
};

struct ConfigTable {
  std::map<std::string, std::map<std::string, ConfigValue>> sections;
  mutable std::set<std::string> consumed;

  const ConfigValue* find(const std::string& sec, const std::string& key) const {
    auto s = sections.find(sec);
    if (s == sections.end()) return nullptr;
    auto k = s->second.find(key);
    if (k == s->second.end()) return nullptr;
    consumed.insert(sec + "." + key);
    return &k->second;
  }
  double number(const std::string& sec, const std::string& key, double fallback) const {
    const auto* v = find(sec, key);
    if (!v) return fallback;
    if (v->type != ConfigValue::Type::number)
      throw ConfigError("config: " + sec + "." + key + " must be a number");
    return v->num;
  }
  double require_number(const std::string& sec, const std::string& key) const {
    const auto* v = find(sec, key);
    if (!v) throw ConfigError("config: missing mandatory key " + sec + "." + key);
    if (v->type != ConfigValue::Type::number)
      throw ConfigError("config: " + sec + "." + key + " must be a number");
    return v->num;
  }
  std::string str(const std::string& sec, const std::string& key,
                  const std::string& fallback) const {
    const auto* v = find(sec, key);
    if (!v) return fallback;
    if (v->type != ConfigValue::Type::string)
      throw ConfigError("config: " + sec + "." + key + " must be a string");
    return v->str;
  }
  bool boolean(const std::string& sec, const std::string& key, bool fallback) const {
    const auto* v = find(sec, key);
    if (!v) return fallback;
    if (v->type != ConfigValue::Type::boolean)
      throw ConfigError("config: " + sec + "." + key + " must be a boolean");
    return v->b;
  }
  std::vector<double> list(const std::string& sec, const std::string& key,
                           std::vector<double> fallback) const {
    const auto* v = find(sec, key);
    if (!v) return fallback;
    if (v->type != ConfigValue::Type::number_list)
      throw ConfigError("config: " + sec + "." + key + " must be an array of numbers");
    return v->list;
  }
};

inline std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline ConfigValue parse_value(const std::string& raw, int line) {
  ConfigValue v;
  v.line = line;
  std::string s = trim(raw);
  if (s.empty()) throw ConfigError("config: empty value on line " + std::to_string(line));
  if (s.front() == '"') {
    if (s.size() < 2 || s.back() != '"')
      throw ConfigError("config: unterminated string on line " + std::to_string(line));
    v.type = ConfigValue::Type::string;
    v.str = s.substr(1, s.size() - 2);
    return v;
  }
  if (s == "true" || s == "false") {
    v.type = ConfigValue::Type::boolean;
    v.b = (s == "true");
    return v;
  }
  if (s.front() == '[') {
    if (s.back() != ']')
      throw ConfigError("config: unterminated array on line " + std::to_string(line));
    v.type = ConfigValue::Type::number_list;
    std::string inner = s.substr(1, s.size() - 2);
    std::stringstream ss(inner);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      size_t used = 0;
      double d = std::stod(item, &used);
      if (used != item.size())
        throw ConfigError("config: bad array entry '" + item + "' on line " +
                          std::to_string(line));
      v.list.push_back(d);
    }
    return v;
  }
  size_t used = 0;
  try {
    v.num = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ConfigError("config: cannot parse value '" + s + "' on line " + std::to_string(line));
  }
  if (used != s.size())
    throw ConfigError("config: cannot parse value '" + s + "' on line " + std::to_string(line));
  v.type = ConfigValue::Type::number;
  return v;
}

inline ConfigTable parse_table(const std::string& text) {
  ConfigTable tab;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    // comments start at an unquoted '#'
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line = line.substr(0, i);
        break;
      }
    }
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("config: malformed section header on line " + std::to_string(lineno));
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty())
        throw ConfigError("config: empty section name on line " + std::to_string(lineno));
      tab.sections[section];
      continue;
    }
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: expected key = value on line " + std::to_string(lineno));
    std::string key = trim(line.substr(0, eq));
    if (key.empty() || section.empty())
      throw ConfigError("config: key outside a section on line " + std::to_string(lineno));
    if (tab.sections[section].count(key))
      throw ConfigError("config: duplicate key " + section + "." + key);
    tab.sections[section][key] = parse_value(line.substr(eq + 1), lineno);
  }
  return tab;
}

inline std::vector<int> to_indices(const std::vector<double>& xs, const std::string& path) {
  std::vector<int> out;
  for (double x : xs) {
    int i = static_cast<int>(std::lround(x));
    if (std::abs(x - i) > 1e-12) throw ConfigError("config: " + path + " must be integers");
    out.push_back(i);
  }
  return out;
}

}  // namespace detail

inline RunConfig parse_config(const std::string& text) {
  auto tab = detail::parse_table(text);
  RunConfig c;

  // [domain]
  {
    std::string kind = tab.str("domain", "kind", "");
    if (kind.empty()) throw ConfigError("config: missing mandatory key domain.kind");
    auto& d = c.domain;
    if (kind == "unit_square") d.kind = DomainSpec::Kind::unit_square;
    else if (kind == "rectangle") d.kind = DomainSpec::Kind::rectangle;
    else if (kind == "l_shape") d.kind = DomainSpec::Kind::l_shape;
    else if (kind == "polygon") d.kind = DomainSpec::Kind::polygon;
    else if (kind == "circle") d.kind = DomainSpec::Kind::circle;
    else if (kind == "annulus") d.kind = DomainSpec::Kind::annulus;
    else if (kind == "dumbbell") d.kind = DomainSpec::Kind::dumbbell;
    else throw ConfigError("config: unknown domain.kind '" + kind + "'");
    d.resolution = static_cast<int>(tab.number("domain", "resolution", 1));
    if (d.resolution < 1) throw ConfigError("config: domain.resolution must be >= 1");
    d.snap_boundary = tab.boolean("domain", "snap_boundary", false);
    auto xr = tab.list("domain", "x_range", {0.0, 1.0});
    auto yr = tab.list("domain", "y_range", {0.0, 1.0});
    if (xr.size() != 2 || yr.size() != 2)
      throw ConfigError("config: domain ranges must have two entries");
    d.x0 = xr[0]; d.x1 = xr[1]; d.y0 = yr[0]; d.y1 = yr[1];
    d.radius = tab.number("domain", "radius", 1.0);
    d.segments = static_cast<int>(tab.number("domain", "segments", 16));
    d.r_inner = tab.number("domain", "r_inner", 1.0);
    d.r_outer = tab.number("domain", "r_outer", 2.0);
    d.handle_halfwidth = tab.number("domain", "handle_halfwidth", 0.3);
    auto poly = tab.list("domain", "vertices", {});
    if (!poly.empty()) {
      if (poly.size() % 2 != 0)
        throw ConfigError("config: domain.vertices must list x,y pairs");
      for (size_t i = 0; i < poly.size(); i += 2) d.polygon.push_back({poly[i], poly[i + 1]});
    }
    if (d.kind == DomainSpec::Kind::polygon && d.polygon.empty())
      throw ConfigError("config: missing mandatory key domain.vertices");
  }

  // [objective]
  {
    auto& o = c.objective;
    o.epsilon = tab.require_number("objective", "epsilon");
    o.gamma = tab.require_number("objective", "gamma");
    o.alpha = tab.require_number("objective", "alpha");
    o.volume_fraction = tab.require_number("objective", "volume_fraction");
    o.indices = detail::to_indices(tab.list("objective", "indices", {1.0}), "objective.indices");
    auto w = tab.list("objective", "weights", {1.0});
    c.maximize = tab.boolean("objective", "maximize", false);
    if (w.size() != o.indices.size())
      throw ConfigError("config: objective.weights must match objective.indices");
    for (double x : w) o.weights.push_back(c.maximize ? -x : x);
    std::string pot = tab.str("objective", "potential", "double_well");
    if (pot == "double_well") o.potential = PotentialKind::double_well;
    else if (pot == "double_obstacle") o.potential = PotentialKind::double_obstacle;
    else throw ConfigError("config: unknown objective.potential '" + pot + "'");
    try {
      o.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError("config: objective invalid: " + std::string(e.what()));
    }
  }

  // [afem]
  {
    auto& a = c.afem;
    a.K = static_cast<int>(tab.number("afem", "K", 4));
    if (a.K < 1) throw ConfigError("config: afem.K must be >= 1");
    std::vector<double> def = {0.8};
    for (size_t j = 0; j < c.objective.indices.size(); ++j) def.push_back(0.1);
    a.thetas = tab.list("afem", "theta", def);
    if (a.thetas.size() != c.objective.indices.size() + 1)
      throw ConfigError("config: afem.theta needs one entry per estimator (l+1)");
    for (double th : a.thetas)
      if (!(th > 0.0 && th <= 1.0))
        throw ConfigError("config: afem.theta entries must lie in (0,1]");
    std::string mode = tab.str("afem", "mode", "adaptive");
    if (mode == "adaptive") a.mode = AfemParams::Mode::adaptive;
    else if (mode == "uniform") a.mode = AfemParams::Mode::uniform;
    else throw ConfigError("config: afem.mode must be adaptive or uniform");
    a.vertex_budget = static_cast<long>(tab.number("afem", "vertex_budget", 0));
    a.estimator_tol = tab.number("afem", "estimator_tol", 0.0);
    a.cold_restart = tab.boolean("afem", "cold_restart", false);
    a.carry_penalty = tab.boolean("afem", "carry_penalty", false);
    a.lagrangian_estimator = tab.boolean("afem", "lagrangian_estimator", true);
    std::string marking = tab.str("afem", "marking", "bulk");
    if (marking == "minimal") a.marking = AfemParams::Marking::minimal;
    else if (marking == "bulk") a.marking = AfemParams::Marking::bulk;
    else throw ConfigError("config: afem.marking must be minimal or bulk");
  }

  // [inner]
  {
    auto& i = c.inner;
    i.n_outer = static_cast<int>(tab.number("inner", "N", 20));
    i.m_inner = static_cast<int>(tab.number("inner", "M", 10));
    i.mu0 = tab.number("inner", "mu0", 0.0);
    i.beta0 = tab.number("inner", "beta0", 100.0);
    i.gamma_tilde = tab.number("inner", "gamma_tilde", 20.0);
    i.xi = tab.number("inner", "xi", 0.9);
    i.zeta = tab.number("inner", "zeta", 0.1);
    if (i.n_outer < 0) throw ConfigError("config: inner.N must be >= 0");
    if (i.m_inner < 1) throw ConfigError("config: inner.M must be >= 1");
    if (!(i.beta0 > 0)) throw ConfigError("config: inner.beta0 must be > 0");
    if (!(i.gamma_tilde > 0)) throw ConfigError("config: inner.gamma_tilde must be > 0");
    if (!(i.xi > 0 && i.xi < 1)) throw ConfigError("config: inner.xi must be in (0,1)");
    if (!(i.zeta > 0)) throw ConfigError("config: inner.zeta must be > 0");
  }

  // [init]
  {
    std::string kind = tab.str("init", "kind", "constant");
    if (kind == "constant") c.init.kind = InitSpec::Kind::constant;
    else if (kind == "random") c.init.kind = InitSpec::Kind::random;
    else if (kind == "cosine") c.init.kind = InitSpec::Kind::cosine;
    else throw ConfigError("config: unknown init.kind '" + kind + "'");
    c.init.value = tab.number("init", "value", c.objective.volume_fraction);
    if (c.init.kind == InitSpec::Kind::constant && !(c.init.value >= 0.0 && c.init.value <= 1.0))
      throw ConfigError("config: init.value must lie in [0,1]");
    c.init.seed = static_cast<std::uint64_t>(tab.number("init", "seed", 1));
  }

  // [eigensolver]
  {
    c.eig.tol = tab.number("eigensolver", "tol", 1e-9);
    c.eig.max_iter = static_cast<int>(tab.number("eigensolver", "max_iter", 0));
    c.eig.dense_threshold = static_cast<int>(tab.number("eigensolver", "dense_threshold", 96));
    if (!(c.eig.tol > 0)) throw ConfigError("config: eigensolver.tol must be > 0");
  }

  // [output]
  {
    c.out.directory = tab.str("output", "directory", "out");
    c.out.vtk_every = static_cast<int>(tab.number("output", "vtk_every", 1));
    c.out.csv = tab.boolean("output", "csv", true);
    c.out.png = tab.boolean("output", "png", true);
  }

  // reject unknown keys
  for (const auto& [sec, keys] : tab.sections)
    for (const auto& [key, val] : keys)
      if (!tab.consumed.count(sec + "." + key))
        throw ConfigError("config: unknown key " + sec + "." + key + " (line " +
                          std::to_string(val.line) + ")");
  return c;
}

inline RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

// Resolved-config dump, written into run directories so post-processing tools
// can rebuild the domain and objective.
inline std::string serialize_config(const RunConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "[domain]\n";
  const char* dk[] = {"unit_square", "rectangle", "l_shape", "polygon",
                      "circle",      "annulus",   "dumbbell"};
  os << "kind = \"" << dk[static_cast<int>(c.domain.kind)] << "\"\n";
  os << "resolution = " << c.domain.resolution << "\n";
  os << "snap_boundary = " << (c.domain.snap_boundary ? "true" : "false") << "\n";
  switch (c.domain.kind) {
    case DomainSpec::Kind::rectangle:
      os << "x_range = [" << c.domain.x0 << ", " << c.domain.x1 << "]\n";
      os << "y_range = [" << c.domain.y0 << ", " << c.domain.y1 << "]\n";
      break;
    case DomainSpec::Kind::circle:
      os << "radius = " << c.domain.radius << "\nsegments = " << c.domain.segments << "\n";
      break;
    case DomainSpec::Kind::annulus:
      os << "r_inner = " << c.domain.r_inner << "\nr_outer = " << c.domain.r_outer
         << "\nsegments = " << c.domain.segments << "\n";
      break;
    case DomainSpec::Kind::dumbbell:
      os << "handle_halfwidth = " << c.domain.handle_halfwidth
         << "\nsegments = " << c.domain.segments << "\n";
      break;
    case DomainSpec::Kind::polygon: {
      os << "vertices = [";
      for (size_t i = 0; i < c.domain.polygon.size(); ++i)
        os << (i ? ", " : "") << c.domain.polygon[i].x << ", " << c.domain.polygon[i].y;
      os << "]\n";
      break;
    }
    default:
      break;
  }
  os << "\n[objective]\n";
  os << "indices = [";
  for (size_t j = 0; j < c.objective.indices.size(); ++j)
    os << (j ? ", " : "") << c.objective.indices[j];
  os << "]\nweights = [";
  for (size_t j = 0; j < c.objective.weights.size(); ++j)
    os << (j ? ", " : "") << (c.maximize ? -c.objective.weights[j] : c.objective.weights[j]);
  os << "]\nmaximize = " << (c.maximize ? "true" : "false") << "\n";
  os << "epsilon = " << c.objective.epsilon << "\ngamma = " << c.objective.gamma
     << "\nalpha = " << c.objective.alpha
     << "\nvolume_fraction = " << c.objective.volume_fraction << "\n";
  os << "potential = \""
     << (c.objective.potential == PotentialKind::double_well ? "double_well" : "double_obstacle")
     << "\"\n";
  os << "\n[afem]\nK = " << c.afem.K << "\ntheta = [";
  for (size_t j = 0; j < c.afem.thetas.size(); ++j) os << (j ? ", " : "") << c.afem.thetas[j];
  os << "]\nmode = \"" << (c.afem.mode == AfemParams::Mode::adaptive ? "adaptive" : "uniform")
     << "\"\nvertex_budget = " << c.afem.vertex_budget
     << "\nestimator_tol = " << c.afem.estimator_tol
     << "\ncold_restart = " << (c.afem.cold_restart ? "true" : "false")
     << "\ncarry_penalty = " << (c.afem.carry_penalty ? "true" : "false")
     << "\nlagrangian_estimator = " << (c.afem.lagrangian_estimator ? "true" : "false")
     << "\nmarking = \"" << (c.afem.marking == AfemParams::Marking::minimal ? "minimal" : "bulk")
     << "\"\n";
  os << "\n[inner]\nN = " << c.inner.n_outer << "\nM = " << c.inner.m_inner
     << "\nmu0 = " << c.inner.mu0 << "\nbeta0 = " << c.inner.beta0
     << "\ngamma_tilde = " << c.inner.gamma_tilde << "\nxi = " << c.inner.xi
     << "\nzeta = " << c.inner.zeta << "\n";
  const char* ik[] = {"constant", "random", "cosine"};
  os << "\n[init]\nkind = \"" << ik[static_cast<int>(c.init.kind)] << "\"\nvalue = "
     << c.init.value << "\nseed = " << c.init.seed << "\n";
  os << "\n[eigensolver]\ntol = " << c.eig.tol << "\nmax_iter = " << c.eig.max_iter
     << "\ndense_threshold = " << c.eig.dense_threshold << "\n";
  os << "\n[output]\ndirectory = \"" << c.out.directory << "\"\nvtk_every = " << c.out.vtk_every
     << "\ncsv = " << (c.out.csv ? "true" : "false") << "\npng = " << (c.out.png ? "true" : "false")
     << "\n";
  return os.str();
}

}  // namespace eigopt
