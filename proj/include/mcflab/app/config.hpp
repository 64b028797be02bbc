#pragma once

#include "mcflab/core.hpp"

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace mcflab::app {

// Flat key/value text with [section] headers. '#' and ';' start comments.
struct IniEntry {
  std::string value;
  int line = 0;
  int column = 0;
};

struct IniDocument {
  std::string source;
  std::map<std::string, std::map<std::string, IniEntry>> sections;
};

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline std::string location(const std::string& source, int line, int column) {
  return source + ":" + std::to_string(line) + ":" + std::to_string(column);
}

inline IniDocument parse_ini(const std::string& text, const std::string& source = "<config>") {
  IniDocument doc;
  doc.source = source;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    std::string content = raw;
    const auto hash = content.find_first_of("#;");
    if (hash != std::string::npos) content = content.substr(0, hash);
    const std::string t = trim(content);
    if (t.empty()) continue;
    const int indent = static_cast<int>(content.find_first_not_of(" \t")) + 1;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw ConfigurationError(location(source, line, indent) + ": section header is missing ']'");
      section = trim(t.substr(1, t.size() - 2));
      if (section.empty()) throw ConfigurationError(location(source, line, indent) + ": empty section name");
      if (doc.sections.count(section))
        throw ConfigurationError(location(source, line, indent) + ": duplicate section [" + section + "]");
      doc.sections[section];
      continue;
    }
    const auto eq = content.find('=');
    if (eq == std::string::npos)
      throw ConfigurationError(location(source, line, indent) + ": expected 'key = value'");
    if (section.empty())
      throw ConfigurationError(location(source, line, indent) + ": key outside of any [section]");
    const std::string key = trim(content.substr(0, eq));
    if (key.empty()) throw ConfigurationError(location(source, line, indent) + ": missing key before '='");
    const std::string value = trim(content.substr(eq + 1));
    const auto vpos = content.find_first_not_of(" \t", eq + 1);
    const int vcol = vpos == std::string::npos ? static_cast<int>(eq) + 2 : static_cast<int>(vpos) + 1;
    auto& sec = doc.sections[section];
    if (sec.count(key))
      throw ConfigurationError(location(source, line, indent) + ": duplicate key '" + section + "." + key + "'");
    sec[key] = {value, line, vcol};
  }
  return doc;
}

// ---------------------------------------------------------------------------

struct ScenarioConfig {
  // [scenario]
  std::string name;
  std::uint64_t seed = 12345;
  // [M]
  std::string M_kind;
  int M_dim = 2;
  double M_radius = 1.0;
  double M_scale = 1.0;
  // [N]
  std::string N_kind;
  double N_radius = 1.0;
  double N_scale = 1.0;
  std::string N_warp = "cosh";
  std::vector<double> N_warp_coefficients;
  double N_z_min = -3.0;
  double N_z_max = 3.0;
  // [map]
  std::string map_kind;
  double map_amplitude = 0.5;
  double map_z0 = 0.0;
  std::vector<double> map_value = {kPi / 2.0, 0.0};
  // [grid]
  std::string grid_mode = "reduced";
  int grid_n = 64;
  int grid_quad_n = 0;
  // [flow]
  double cfl = 0.4;
  double t_end = 1.0;
  double dt_max = std::numeric_limits<double>::infinity();
  int record_every = 100;
  double H_tol = 1e-6;
  double diam_tol = 1e-3;
  int converge_steps = 100;
  std::string integrator = "rk2";
  double blowup_factor = 1e3;
  // [verify]
  bool decay_bounds = true;
  bool residuals = true;
  bool inequalities = true;
  bool budget = true;
  std::optional<double> bound_tol;  // empty: 1e-6 + 10 h^2
  double budget_rel_tol = 0.02;
  int snapshot_every = 10;
  int samples = 1000;
  int curvature_points = 200;
  int curvature_frames = 64;
  // [barrier]
  std::string barrier_kind = "none";
  double barrier_c = 1.0;
  std::vector<double> barrier_point = {0.0, 0.0};
  double barrier_z0 = 0.0;
  int barrier_axis = 1;
  std::string barrier_terms;
  int barrier_m = 0;  // 0: dim M
  // [output]
  std::string output_dir;
};

inline const std::vector<std::string>& builtin_scenarios() {
  static const std::vector<std::string> names = {"tsui_wang_s2",     "cylinder_drift",      "cylinder_waist",
                                                 "torus_projection", "hopf_pointwise",      "torus_identity_edge",
                                                 "constant_map",     "custom"};
  return names;
}

// Defaults of a builtin scenario before the file's own keys are applied.
inline ScenarioConfig preset(const std::string& name) {
  ScenarioConfig c;
  c.name = name;
  if (name == "tsui_wang_s2") {
    c.M_kind = "round_sphere";
    c.N_kind = "round_sphere";
    c.map_kind = "equivariant_sine";
    c.map_amplitude = 0.5;
    c.grid_n = 64;
    c.t_end = 20.0;
    c.record_every = 100;
  } else if (name == "cylinder_drift" || name == "cylinder_waist") {
    const bool waist = name == "cylinder_waist";
    c.M_kind = "product_s1xs2";
    c.M_dim = 3;
    c.N_kind = "warped";
    c.N_warp = waist ? "cosh" : "exp_neg";
    c.N_z_min = waist ? -3.0 : -5.0;
    c.N_z_max = waist ? 3.0 : 10.0;
    c.map_kind = "circle";
    c.map_z0 = waist ? 0.5 : 0.0;
    c.grid_n = 4;
    c.t_end = waist ? 40.0 : 5.0;
    c.dt_max = 0.01;
    c.integrator = "rk4";
    c.record_every = waist ? 100 : 20;
    c.snapshot_every = 1;
    c.barrier_kind = "squared_distance_to_waist_geodesic";
    c.barrier_z0 = 0.0;
    c.barrier_c = waist ? 0.5 : 1.0;
  } else if (name == "torus_projection") {
    c.M_kind = "flat_torus";
    c.M_dim = 3;
    c.N_kind = "flat_torus";
    c.N_scale = 0.5;
    c.map_kind = "projection";
    c.grid_mode = "full";
    c.grid_n = 8;
    c.t_end = 5.0;
    c.record_every = 20;
    c.snapshot_every = 1;
  } else if (name == "hopf_pointwise") {
    c.M_kind = "hopf_s3";
    c.M_dim = 3;
    c.N_kind = "round_sphere";
    c.map_kind = "hopf";
    c.grid_mode = "pointwise";
    c.samples = 1000;
  } else if (name == "torus_identity_edge") {
    c.M_kind = "flat_torus";
    c.M_dim = 2;
    c.N_kind = "flat_torus";
    c.map_kind = "identity";
    c.grid_mode = "full";
    c.grid_n = 16;
  } else if (name == "constant_map") {
    c.M_kind = "round_sphere";
    c.N_kind = "round_sphere";
    c.map_kind = "constant";
    c.t_end = 1.0;
    c.record_every = 20;
    c.snapshot_every = 1;
  }
  return c;
}

namespace detail {

inline std::string fmt_real(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fmt_list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt_real(v[i]);
  return s;
}

}  // namespace detail

// One schema entry: how to read a key into the config and how to print it back.
struct KeySpec {
  std::string section;
  std::string key;
  std::function<void(ScenarioConfig&, const std::string&)> read;
  std::function<std::string(const ScenarioConfig&)> write;
};

namespace detail {

inline double parse_real(const std::string& s) {
  if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw ConfigurationError("expected a real number, got '" + s + "'");
  }
  if (pos != s.size()) throw ConfigurationError("expected a real number, got '" + s + "'");
  return v;
}

inline long long parse_integer(const std::string& s) {
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &pos);
  } catch (const std::exception&) {
    throw ConfigurationError("expected an integer, got '" + s + "'");
  }
  if (pos != s.size()) throw ConfigurationError("expected an integer, got '" + s + "'");
  return v;
}

inline bool parse_bool(const std::string& s) {
  if (s == "true" || s == "yes" || s == "1" || s == "on") return true;
  if (s == "false" || s == "no" || s == "0" || s == "off") return false;
  throw ConfigurationError("expected true or false, got '" + s + "'");
}

inline std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::string t = trim(item);
    if (t.empty()) throw ConfigurationError("empty entry in list '" + s + "'");
    out.push_back(parse_real(t));
  }
  return out;
}

inline std::string one_of(const std::string& s, std::initializer_list<const char*> options) {
  std::string all;
  for (const char* o : options) {
    if (s == o) return s;
    all += std::string(all.empty() ? "" : ", ") + o;
  }
  throw ConfigurationError("'" + s + "' is not one of: " + all);
}

}  // namespace detail

inline const std::vector<KeySpec>& schema() {
  using detail::fmt_real;
  using detail::parse_integer;
  using detail::parse_real;
  auto real = [](const char* sec, const char* key, double ScenarioConfig::*field) {
    return KeySpec{sec, key, [field](ScenarioConfig& c, const std::string& v) { c.*field = parse_real(v); },
                   [field](const ScenarioConfig& c) { return fmt_real(c.*field); }};
  };
  auto integer = [](const char* sec, const char* key, int ScenarioConfig::*field) {
    return KeySpec{sec, key,
                   [field](ScenarioConfig& c, const std::string& v) { c.*field = static_cast<int>(parse_integer(v)); },
                   [field](const ScenarioConfig& c) { return std::to_string(c.*field); }};
  };
  auto flag = [](const char* sec, const char* key, bool ScenarioConfig::*field) {
    return KeySpec{sec, key, [field](ScenarioConfig& c, const std::string& v) { c.*field = detail::parse_bool(v); },
                   [field](const ScenarioConfig& c) { return std::string(c.*field ? "true" : "false"); }};
  };
  auto text = [](const char* sec, const char* key, std::string ScenarioConfig::*field,
                 std::initializer_list<const char*> options = {}) {
    std::vector<std::string> opts(options.begin(), options.end());
    return KeySpec{sec, key,
                   [field, opts](ScenarioConfig& c, const std::string& v) {
                     if (!opts.empty()) {
                       bool ok = false;
                       std::string all;
                       for (const auto& o : opts) {
                         ok = ok || v == o;
                         all += (all.empty() ? "" : ", ") + o;
                       }
                       if (!ok) throw ConfigurationError("'" + v + "' is not one of: " + all);
                     }
                     c.*field = v;
                   },
                   [field](const ScenarioConfig& c) { return c.*field; }};
  };
  auto list = [](const char* sec, const char* key, std::vector<double> ScenarioConfig::*field) {
    return KeySpec{sec, key, [field](ScenarioConfig& c, const std::string& v) { c.*field = detail::parse_list(v); },
                   [field](const ScenarioConfig& c) { return detail::fmt_list(c.*field); }};
  };
  static const std::vector<KeySpec> specs = {
      {"scenario", "name", [](ScenarioConfig&, const std::string&) {}, [](const ScenarioConfig& c) { return c.name; }},
      {"scenario", "seed",
       [](ScenarioConfig& c, const std::string& v) {
         const long long s = parse_integer(v);
         if (s < 0) throw ConfigurationError("seed must be nonnegative");
         c.seed = static_cast<std::uint64_t>(s);
       },
       [](const ScenarioConfig& c) { return std::to_string(c.seed); }},
      text("M", "kind", &ScenarioConfig::M_kind, {"round_sphere", "flat_torus", "product_s1xs2", "hopf_s3"}),
      integer("M", "dim", &ScenarioConfig::M_dim),
      real("M", "radius", &ScenarioConfig::M_radius),
      real("M", "scale", &ScenarioConfig::M_scale),
      text("N", "kind", &ScenarioConfig::N_kind, {"round_sphere", "flat_torus", "warped"}),
      real("N", "radius", &ScenarioConfig::N_radius),
      real("N", "scale", &ScenarioConfig::N_scale),
      text("N", "warp", &ScenarioConfig::N_warp, {"const", "sin", "cosh", "exp_neg", "polynomial"}),
      list("N", "warp_coefficients", &ScenarioConfig::N_warp_coefficients),
      real("N", "z_min", &ScenarioConfig::N_z_min),
      real("N", "z_max", &ScenarioConfig::N_z_max),
      text("map", "kind", &ScenarioConfig::map_kind,
           {"equivariant_sine", "circle", "projection", "identity", "constant", "hopf"}),
      real("map", "amplitude", &ScenarioConfig::map_amplitude),
      real("map", "z0", &ScenarioConfig::map_z0),
      list("map", "value", &ScenarioConfig::map_value),
      text("grid", "mode", &ScenarioConfig::grid_mode, {"reduced", "full", "pointwise"}),
      integer("grid", "n", &ScenarioConfig::grid_n),
      integer("grid", "quad_n", &ScenarioConfig::grid_quad_n),
      real("flow", "cfl", &ScenarioConfig::cfl),
      real("flow", "t_end", &ScenarioConfig::t_end),
      real("flow", "dt_max", &ScenarioConfig::dt_max),
      integer("flow", "record_every", &ScenarioConfig::record_every),
      real("flow", "H_tol", &ScenarioConfig::H_tol),
      real("flow", "diam_tol", &ScenarioConfig::diam_tol),
      integer("flow", "converge_steps", &ScenarioConfig::converge_steps),
      text("flow", "integrator", &ScenarioConfig::integrator, {"euler", "rk2", "rk4"}),
      real("flow", "blowup_factor", &ScenarioConfig::blowup_factor),
      flag("verify", "decay_bounds", &ScenarioConfig::decay_bounds),
      flag("verify", "residuals", &ScenarioConfig::residuals),
      flag("verify", "inequalities", &ScenarioConfig::inequalities),
      flag("verify", "budget", &ScenarioConfig::budget),
      {"verify", "bound_tol",
       [](ScenarioConfig& c, const std::string& v) {
         if (v == "auto")
           c.bound_tol.reset();
         else
           c.bound_tol = parse_real(v);
       },
       [](const ScenarioConfig& c) { return c.bound_tol ? fmt_real(*c.bound_tol) : std::string("auto"); }},
      real("verify", "budget_rel_tol", &ScenarioConfig::budget_rel_tol),
      integer("verify", "snapshot_every", &ScenarioConfig::snapshot_every),
      integer("verify", "samples", &ScenarioConfig::samples),
      integer("verify", "curvature_points", &ScenarioConfig::curvature_points),
      integer("verify", "curvature_frames", &ScenarioConfig::curvature_frames),
      text("barrier", "kind", &ScenarioConfig::barrier_kind,
           {"none", "squared_distance_to_point", "squared_distance_to_waist_geodesic", "coordinate_height",
            "custom_polynomial_in_chart"}),
      real("barrier", "c", &ScenarioConfig::barrier_c),
      list("barrier", "point", &ScenarioConfig::barrier_point),
      real("barrier", "z0", &ScenarioConfig::barrier_z0),
      integer("barrier", "axis", &ScenarioConfig::barrier_axis),
      text("barrier", "terms", &ScenarioConfig::barrier_terms),
      integer("barrier", "m", &ScenarioConfig::barrier_m),
      text("output", "dir", &ScenarioConfig::output_dir),
  };
  return specs;
}

// Range and consistency checks; errors name the offending key.
inline void validate(const ScenarioConfig& c) {
  auto fail = [](const std::string& key, const std::string& why) {
    throw ConfigurationError("invalid value for '" + key + "': " + why);
  };
  if (c.M_kind.empty()) fail("M.kind", "missing required key");
  if (c.N_kind.empty()) fail("N.kind", "missing required key");
  if (c.map_kind.empty()) fail("map.kind", "missing required key");
  if (c.M_dim < 2) fail("M.dim", "must be at least 2");
  if (!(c.M_radius > 0.0)) fail("M.radius", "must be positive");
  if (!(c.M_scale > 0.0)) fail("M.scale", "must be positive");
  if (!(c.N_radius > 0.0)) fail("N.radius", "must be positive");
  if (!(c.N_scale > 0.0)) fail("N.scale", "must be positive");
  if (!(c.N_z_max > c.N_z_min)) fail("N.z_max", "must exceed N.z_min");
  if (c.map_value.size() != 2) fail("map.value", "needs two coordinates");
  if (c.grid_n < 2) fail("grid.n", "must be at least 2");
  if (c.grid_quad_n < 0) fail("grid.quad_n", "must be nonnegative");
  if (!(c.cfl > 0.0 && c.cfl <= 1.0)) fail("flow.cfl", "must lie in (0, 1]");
  if (!(c.t_end >= 0.0)) fail("flow.t_end", "must be nonnegative");
  if (!(c.dt_max > 0.0)) fail("flow.dt_max", "must be positive");
  if (c.record_every < 1) fail("flow.record_every", "must be at least 1");
  if (!(c.H_tol > 0.0)) fail("flow.H_tol", "must be positive");
  if (!(c.diam_tol > 0.0)) fail("flow.diam_tol", "must be positive");
  if (c.converge_steps < 1) fail("flow.converge_steps", "must be at least 1");
  if (!(c.blowup_factor > 1.0)) fail("flow.blowup_factor", "must exceed 1");
  if (c.bound_tol && !(*c.bound_tol >= 0.0)) fail("verify.bound_tol", "must be nonnegative");
  if (!(c.budget_rel_tol > 0.0)) fail("verify.budget_rel_tol", "must be positive");
  if (c.snapshot_every < 1) fail("verify.snapshot_every", "must be at least 1");
  if (c.samples < 1) fail("verify.samples", "must be at least 1");
  if (c.curvature_points < 1) fail("verify.curvature_points", "must be at least 1");
  if (c.curvature_frames < 1) fail("verify.curvature_frames", "must be at least 1");
  if (c.barrier_point.size() != 2) fail("barrier.point", "needs two coordinates");
  if (c.barrier_axis < 0 || c.barrier_axis > 1) fail("barrier.axis", "must be 0 or 1");
  if (c.barrier_m < 0) fail("barrier.m", "must be nonnegative");
}

inline ScenarioConfig parse_config(const std::string& text, const std::string& source = "<config>") {
  const IniDocument doc = parse_ini(text, source);
  const auto sit = doc.sections.find("scenario");
  if (sit == doc.sections.end() || !sit->second.count("name"))
    throw ConfigurationError(source + ": missing required key 'scenario.name'");
  const IniEntry& name_entry = sit->second.at("name");
  bool known = false;
  for (const auto& n : builtin_scenarios()) known = known || n == name_entry.value;
  if (!known) {
    std::string all;
    for (const auto& n : builtin_scenarios()) all += (all.empty() ? "" : ", ") + n;
    throw ConfigurationError(location(source, name_entry.line, name_entry.column) + ": unknown scenario '" +
                             name_entry.value + "' (expected one of: " + all + ")");
  }
  ScenarioConfig cfg = preset(name_entry.value);
  for (const auto& [section, entries] : doc.sections) {
    for (const auto& [key, entry] : entries) {
      const KeySpec* spec = nullptr;
      for (const KeySpec& k : schema())
        if (k.section == section && k.key == key) spec = &k;
      if (!spec)
        throw ConfigurationError(location(source, entry.line, entry.column) + ": unknown key '" + section + "." + key +
                                 "'");
      try {
        spec->read(cfg, entry.value);
      } catch (const ConfigurationError& e) {
        throw ConfigurationError(location(source, entry.line, entry.column) + ": key '" + section + "." + key +
                                 "': " + e.what());
      }
    }
  }
  if (cfg.output_dir.empty()) cfg.output_dir = "runs/" + cfg.name;
  validate(cfg);
  return cfg;
}

inline ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigurationError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

// Every key, in schema order; parse_config(serialize(c)) reproduces c.
inline std::string serialize(const ScenarioConfig& c) {
  std::string out;
  std::string section;
  for (const KeySpec& k : schema()) {
    if (k.section != section) {
      out += (section.empty() ? "" : "\n") + std::string("[") + k.section + "]\n";
      section = k.section;
    }
    out += k.key + " = " + k.write(c) + "\n";
  }
  return out;
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string config_hash(const ScenarioConfig& c) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(serialize(c))));
  return buf;
}

}  // namespace mcflab::app
