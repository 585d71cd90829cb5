#include "kelvinlab/config.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numbers>
#include <set>
#include <sstream>

#include "kelvinlab/error.hpp"
#include "kelvinlab/rng.hpp"

namespace kelvinlab {

std::string to_string(SweepKind k) {
  switch (k) {
    case SweepKind::dt_halving: return "dt_halving";
    case SweepKind::m_scaling: return "m_scaling";
    case SweepKind::amplitude: return "amplitude";
  }
  return "unknown";
}

SweepKind sweep_kind_from_string(const std::string& s) {
  if (s == "dt_halving") return SweepKind::dt_halving;
  if (s == "m_scaling") return SweepKind::m_scaling;
  if (s == "amplitude") return SweepKind::amplitude;
  throw InvalidArgument("unknown sweep kind '" + s + "'");
}

std::uint64_t RunConfig::w_seed() const { return seeds.w ? *seeds.w : derive_seed(seeds.master, 0x57); }
std::uint64_t RunConfig::b_seed() const { return derive_seed(seeds.master, 0x42); }
std::uint64_t RunConfig::b_seed_base() const { return seeds.b_base ? *seeds.b_base : b_seed(); }

namespace {

int line_of(const YAML::Node& n) { return n.Mark().line >= 0 ? n.Mark().line + 1 : 0; }

std::string join(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

void require_map(const YAML::Node& n, const std::string& key) {
  if (!n.IsMap()) throw ConfigError(key, line_of(n), "expected a mapping");
}

void check_keys(const YAML::Node& n, const std::string& prefix, const std::set<std::string>& allowed) {
  require_map(n, prefix.empty() ? "<root>" : prefix);
  for (const auto& kv : n) {
    const std::string k = kv.first.as<std::string>();
    if (!allowed.count(k)) throw ConfigError(join(prefix, k), line_of(kv.first), "unknown key");
  }
}

template <class T>
T convert(const YAML::Node& v, const std::string& key, const char* type) {
  if (!v.IsScalar()) throw ConfigError(key, line_of(v), std::string("expected ") + type);
  try {
    return v.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(key, line_of(v), std::string("expected ") + type + ", got '" + v.Scalar() + "'");
  }
}

template <class T>
T get(const YAML::Node& n, const std::string& prefix, const std::string& key, T def, const char* type) {
  const YAML::Node v = n[key];
  if (!v) return def;
  return convert<T>(v, join(prefix, key), type);
}

template <class T>
T require(const YAML::Node& n, const std::string& prefix, const std::string& key, const char* type) {
  const YAML::Node v = n[key];
  if (!v) throw ConfigError(join(prefix, key), line_of(n), "missing required key");
  return convert<T>(v, join(prefix, key), type);
}

template <class T>
std::vector<T> get_list(const YAML::Node& v, const std::string& key, const char* type) {
  if (!v.IsSequence()) throw ConfigError(key, line_of(v), "expected a list");
  std::vector<T> out;
  for (std::size_t i = 0; i < v.size(); ++i)
    out.push_back(convert<T>(v[i], key + "[" + std::to_string(i) + "]", type));
  return out;
}

Point get_point(const YAML::Node& v, const std::string& key, int d) {
  auto xs = get_list<double>(v, key, "number");
  if (static_cast<int>(xs.size()) != d)
    throw ConfigError(key, line_of(v), "expected " + std::to_string(d) + " components");
  Point p{0.0, 0.0, 0.0};
  for (int a = 0; a < d; ++a) p[a] = xs[a];
  return p;
}

template <class Fn>
auto checked_enum(const YAML::Node& n, const std::string& key, Fn&& fn) {
  const std::string s = convert<std::string>(n, key, "string");
  try {
    return fn(s);
  } catch (const InvalidArgument& e) {
    throw ConfigError(key, line_of(n), e.what());
  }
}

FamilySpec parse_family(const YAML::Node& n, const std::string& prefix, int d, double default_amp) {
  FamilySpec f;
  f.amplitude = default_amp;
  if (!n) return f;
  check_keys(n, prefix, {"kind", "amplitude", "members", "files", "eta"});
  if (n["kind"]) {
    const std::string kind = convert<std::string>(n["kind"], join(prefix, "kind"), "string");
    if (kind == "none")
      f.kind = BasisKind::none;
    else if (kind == "constant" || kind == "constant_euclidean" || kind == "euclidean")
      f.kind = BasisKind::constant_euclidean;
    else if (kind == "trig")
      f.kind = BasisKind::trig;
    else if (kind == "explicit")
      f.kind = BasisKind::explicit_files;
    else
      throw ConfigError(join(prefix, "kind"), line_of(n["kind"]),
                        "expected one of none, constant_euclidean, trig, explicit");
  }
  f.amplitude = get<double>(n, prefix, "amplitude", default_amp, "number");
  if (f.kind == BasisKind::trig) {
    if (!n["members"]) {
      const double a = f.amplitude;
      f = default_trig_family(d, a);
    } else {
      const YAML::Node ms = n["members"];
      const std::string mkey = join(prefix, "members");
      if (!ms.IsSequence()) throw ConfigError(mkey, line_of(ms), "expected a list of members");
      for (std::size_t i = 0; i < ms.size(); ++i) {
        const std::string ikey = mkey + "[" + std::to_string(i) + "]";
        // A member is one mode (mapping) or a list of modes.
        std::vector<YAML::Node> modes;
        if (ms[i].IsMap())
          modes.push_back(ms[i]);
        else if (ms[i].IsSequence())
          for (std::size_t j = 0; j < ms[i].size(); ++j) modes.push_back(ms[i][j]);
        else
          throw ConfigError(ikey, line_of(ms[i]), "expected a mode mapping or a list of modes");
        std::vector<TrigMode> member;
        for (const auto& m : modes) {
          check_keys(m, ikey, {"k", "dir", "phase", "amplitude"});
          TrigMode t;
          if (!m["k"]) throw ConfigError(ikey + ".k", line_of(m), "missing required key");
          if (!m["dir"]) throw ConfigError(ikey + ".dir", line_of(m), "missing required key");
          auto k = get_list<int>(m["k"], ikey + ".k", "integer");
          if (static_cast<int>(k.size()) != d) throw ConfigError(ikey + ".k", line_of(m["k"]), "wrong length");
          for (int a = 0; a < d; ++a) t.k[a] = k[a];
          t.dir = get_point(m["dir"], ikey + ".dir", d);
          t.phase = get<double>(m, ikey, "phase", 0.0, "number");
          t.amplitude = get<double>(m, ikey, "amplitude", 1.0, "number");
          member.push_back(t);
        }
        f.members.push_back(std::move(member));
      }
    }
  }
  if (f.kind == BasisKind::explicit_files) {
    if (!n["files"]) throw ConfigError(join(prefix, "files"), line_of(n), "missing required key");
    f.files = get_list<std::string>(n["files"], join(prefix, "files"), "string");
  }
  return f;
}

LoopSpec parse_loop(const YAML::Node& n, const std::string& key, int d) {
  check_keys(n, key, {"kind", "center", "radius", "c", "axis", "offset", "points", "winding", "P"});
  LoopSpec s;
  if (n["kind"]) {
    const std::string k = convert<std::string>(n["kind"], key + ".kind", "string");
    if (k == "circle")
      s.kind = LoopKind::circle;
    else if (k == "axis_line")
      s.kind = LoopKind::axis_line;
    else if (k == "custom")
      s.kind = LoopKind::custom;
    else
      throw ConfigError(key + ".kind", line_of(n["kind"]), "expected circle, axis_line or custom");
  }
  s.P = get<int>(n, key, "P", 256, "integer");
  if (s.P < 3) throw ConfigError(key + ".P", line_of(n), "must be at least 3");
  const double pi = std::numbers::pi;
  switch (s.kind) {
    case LoopKind::circle:
      s.center = n["center"] ? get_point(n["center"], key + ".center", d) : Point{pi, pi, d == 3 ? pi : 0.0};
      s.radius = get<double>(n, key, "radius", 1.0, "number");
      if (!(s.radius > 0.0) || !(s.radius < pi))
        throw ConfigError(key + ".radius", line_of(n), "circle radius must lie in (0, pi)");
      break;
    case LoopKind::axis_line: {
      s.axis = get<int>(n, key, "axis", 0, "integer");
      if (s.axis < 0 || s.axis >= d) throw ConfigError(key + ".axis", line_of(n), "axis out of range");
      s.center = n["offset"] ? get_point(n["offset"], key + ".offset", d) : Point{0.0, 0.0, 0.0};
      const double c = get<double>(n, key, "c", pi / 2.0, "number");
      if (d == 2) s.center[s.axis == 0 ? 1 : 0] = c;
      break;
    }
    case LoopKind::custom: {
      if (!n["points"]) throw ConfigError(key + ".points", line_of(n), "missing required key");
      const YAML::Node ps = n["points"];
      if (!ps.IsSequence()) throw ConfigError(key + ".points", line_of(ps), "expected a list of points");
      for (std::size_t i = 0; i < ps.size(); ++i)
        s.points.push_back(get_point(ps[i], key + ".points[" + std::to_string(i) + "]", d));
      if (n["winding"]) {
        auto w = get_list<int>(n["winding"], key + ".winding", "integer");
        if (static_cast<int>(w.size()) != d) throw ConfigError(key + ".winding", line_of(n["winding"]), "wrong length");
        for (int a = 0; a < d; ++a) s.winding[a] = w[a];
      }
      s.P = static_cast<int>(s.points.size());
      break;
    }
  }
  return s;
}

std::vector<LoopSpec> default_loops(int d) {
  const double pi = std::numbers::pi;
  LoopSpec circle;
  circle.kind = LoopKind::circle;
  circle.center = {pi, pi, d == 3 ? pi : 0.0};
  circle.radius = 1.0;
  LoopSpec line;
  line.kind = LoopKind::axis_line;
  line.axis = 0;
  line.center = {0.0, pi / 2.0, d == 3 ? pi / 2.0 : 0.0};
  return {circle, line};
}

RunConfig parse_node(const YAML::Node& root, const std::string& source) {
  RunConfig cfg;
  cfg.source = source;
  check_keys(root, "", {"grid", "model", "basis", "initial", "time", "seeds", "diagnostics", "output"});
  for (const char* req : {"grid", "model", "time"})
    if (!root[req]) throw ConfigError(req, line_of(root), "missing required block");

  const YAML::Node g = root["grid"];
  check_keys(g, "grid", {"d", "n_per_axis", "dealias"});
  cfg.grid.d = require<int>(g, "grid", "d", "integer");
  if (cfg.grid.d != 2 && cfg.grid.d != 3) throw ConfigError("grid.d", line_of(g["d"]), "must be 2 or 3");
  cfg.grid.n_per_axis = require<int>(g, "grid", "n_per_axis", "integer");
  if (cfg.grid.n_per_axis < 8 || cfg.grid.n_per_axis % 2)
    throw ConfigError("grid.n_per_axis", line_of(g["n_per_axis"]), "must be even and at least 8");
  cfg.grid.dealias = get<double>(g, "grid", "dealias", 2.0 / 3.0, "number");
  if (!(cfg.grid.dealias > 0.0 && cfg.grid.dealias <= 1.0))
    throw ConfigError("grid.dealias", line_of(g["dealias"]), "must lie in (0, 1]");
  const int d = cfg.grid.d;

  const YAML::Node m = root["model"];
  check_keys(m, "model", {"family", "nu", "passive_kind", "ito_flow_drift"});
  if (!m["family"]) throw ConfigError("model.family", line_of(m), "missing required key");
  cfg.model.family = checked_enum(m["family"], "model.family", family_from_string);
  cfg.model.nu = get<double>(m, "model", "nu", 0.0, "number");
  if (!(cfg.model.nu >= 0.0)) throw ConfigError("model.nu", line_of(m["nu"]), "must be non-negative");
  if (m["passive_kind"]) cfg.model.passive_kind = checked_enum(m["passive_kind"], "model.passive_kind", passive_kind_from_string);
  cfg.model.ito_flow_drift = get<bool>(m, "model", "ito_flow_drift", false, "boolean");

  cfg.basis.xi.kind = BasisKind::trig;
  cfg.basis.xi = default_trig_family(d, 0.1);
  cfg.basis.eta.kind = BasisKind::none;
  cfg.basis.eta.amplitude = 1.0;
  if (root["basis"]) {
    const YAML::Node b = root["basis"];
    cfg.basis.xi = parse_family(b, "basis", d, 0.1);
    if (!b["kind"]) {
      const double a = cfg.basis.xi.amplitude;
      cfg.basis.xi = default_trig_family(d, a);
    }
    if (b["eta"]) {
      const YAML::Node e = b["eta"];
      if (e.IsMap() && e["eta"]) throw ConfigError("basis.eta.eta", line_of(e["eta"]), "unknown key");
      cfg.basis.eta = parse_family(e, "basis.eta", d, 1.0);
    }
  }

  if (root["initial"]) {
    const YAML::Node n = root["initial"];
    check_keys(n, "initial", {"kind", "seed", "kmax", "amplitude", "file"});
    if (n["kind"]) {
      const std::string k = convert<std::string>(n["kind"], "initial.kind", "string");
      if (k == "random")
        cfg.initial.kind = InitialKind::random;
      else if (k == "file")
        cfg.initial.kind = InitialKind::file;
      else if (k == "shear")
        cfg.initial.kind = InitialKind::shear;
      else if (k == "abc")
        cfg.initial.kind = InitialKind::abc;
      else
        throw ConfigError("initial.kind", line_of(n["kind"]), "expected random, file, shear or abc");
    }
    cfg.initial.seed = get<std::uint64_t>(n, "initial", "seed", 7, "unsigned integer");
    cfg.initial.kmax = get<int>(n, "initial", "kmax", 3, "integer");
    cfg.initial.amplitude = get<double>(n, "initial", "amplitude", 1.0, "number");
    if (cfg.initial.kind == InitialKind::file) cfg.initial.file = require<std::string>(n, "initial", "file", "string");
    if (cfg.initial.kind == InitialKind::abc && d != 3)
      throw ConfigError("initial.kind", line_of(n["kind"]), "abc needs d = 3");
  }

  const YAML::Node t = root["time"];
  check_keys(t, "time", {"T", "dt", "save_stride", "scheme"});
  cfg.time.T = require<double>(t, "time", "T", "number");
  cfg.time.dt = require<double>(t, "time", "dt", "number");
  if (!(cfg.time.dt > 0.0)) throw ConfigError("time.dt", line_of(t["dt"]), "must be positive");
  if (!(cfg.time.T >= 0.0)) throw ConfigError("time.T", line_of(t["T"]), "must be non-negative");
  const double r = cfg.time.T / cfg.time.dt;
  if (std::abs(r - std::round(r)) > 1e-9 * std::max(1.0, r))
    throw ConfigError("time.T", line_of(t["T"]), "T/dt must be an integer");
  cfg.time.save_stride = get<int>(t, "time", "save_stride", 1, "integer");
  if (cfg.time.save_stride < 1) throw ConfigError("time.save_stride", line_of(t["save_stride"]), "must be >= 1");
  if (t["scheme"]) cfg.time.scheme = checked_enum(t["scheme"], "time.scheme", scheme_from_string);

  if (root["seeds"]) {
    const YAML::Node s = root["seeds"];
    check_keys(s, "seeds", {"master", "w", "b_base"});
    cfg.seeds.master = get<std::uint64_t>(s, "seeds", "master", 1, "unsigned integer");
    if (s["w"]) cfg.seeds.w = convert<std::uint64_t>(s["w"], "seeds.w", "unsigned integer");
    if (s["b_base"]) cfg.seeds.b_base = convert<std::uint64_t>(s["b_base"], "seeds.b_base", "unsigned integer");
  }

  cfg.diagnostics.loops = default_loops(d);
  if (root["diagnostics"]) {
    const YAML::Node n = root["diagnostics"];
    check_keys(n, "diagnostics",
               {"which", "loops", "flavor", "M", "label_n", "steepening_bound", "tolerance", "sweep"});
    if (n["which"]) cfg.diagnostics.which = get_list<std::string>(n["which"], "diagnostics.which", "string");
    if (n["loops"]) {
      const YAML::Node ls = n["loops"];
      if (!ls.IsSequence()) throw ConfigError("diagnostics.loops", line_of(ls), "expected a list");
      cfg.diagnostics.loops.clear();
      for (std::size_t i = 0; i < ls.size(); ++i)
        cfg.diagnostics.loops.push_back(parse_loop(ls[i], "diagnostics.loops[" + std::to_string(i) + "]", d));
    }
    if (n["flavor"]) cfg.diagnostics.flavor = checked_enum(n["flavor"], "diagnostics.flavor", flavor_from_string);
    const long M = get<long>(n, "diagnostics", "M", 256, "integer");
    if (M < 1) throw ConfigError("diagnostics.M", line_of(n["M"]), "must be >= 1");
    cfg.diagnostics.M = static_cast<std::size_t>(M);
    cfg.diagnostics.label_n = get<int>(n, "diagnostics", "label_n", 32, "integer");
    if (cfg.diagnostics.label_n < 8 || cfg.diagnostics.label_n % 2)
      throw ConfigError("diagnostics.label_n", line_of(n["label_n"]), "must be even and at least 8");
    cfg.diagnostics.steepening_bound = get<double>(n, "diagnostics", "steepening_bound", 50.0, "number");
    cfg.diagnostics.tolerance = get<double>(n, "diagnostics", "tolerance", 0.0, "number");
    if (n["sweep"]) {
      const YAML::Node s = n["sweep"];
      check_keys(s, "diagnostics.sweep", {"kind", "points", "metric", "paths"});
      if (s["kind"]) cfg.diagnostics.sweep.kind = checked_enum(s["kind"], "diagnostics.sweep.kind", sweep_kind_from_string);
      if (s["points"]) cfg.diagnostics.sweep.points = get_list<double>(s["points"], "diagnostics.sweep.points", "number");
      cfg.diagnostics.sweep.metric = get<std::string>(s, "diagnostics.sweep", "metric", "kelvin", "string");
      cfg.diagnostics.sweep.paths = get<int>(s, "diagnostics.sweep", "paths", 1, "integer");
      if (cfg.diagnostics.sweep.paths < 1) throw ConfigError("diagnostics.sweep.paths", line_of(s["paths"]), "must be >= 1");
    }
  }
  if (cfg.diagnostics.sweep.points.empty()) {
    switch (cfg.diagnostics.sweep.kind) {
      case SweepKind::dt_halving: cfg.diagnostics.sweep.points = {4e-3, 2e-3, 1e-3}; break;
      case SweepKind::m_scaling: cfg.diagnostics.sweep.points = {64, 256, 1024}; break;
      case SweepKind::amplitude: cfg.diagnostics.sweep.points = {0.1, 0.05, 0.025}; break;
    }
  }

  if (root["output"]) {
    const YAML::Node o = root["output"];
    check_keys(o, "output", {"directory", "formats", "field_format", "dump_fields"});
    cfg.output.directory = get<std::string>(o, "output", "directory", "", "string");
    if (o["formats"]) {
      auto fs = get_list<std::string>(o["formats"], "output.formats", "string");
      cfg.output.csv = cfg.output.json = false;
      for (const auto& f : fs) {
        if (f == "csv")
          cfg.output.csv = true;
        else if (f == "json")
          cfg.output.json = true;
        else
          throw ConfigError("output.formats", line_of(o["formats"]), "unknown format '" + f + "'");
      }
    }
    if (o["field_format"]) {
      const std::string f = convert<std::string>(o["field_format"], "output.field_format", "string");
      if (f == "binary")
        cfg.output.field_format = DumpFormat::binary;
      else if (f == "csv")
        cfg.output.field_format = DumpFormat::csv;
      else
        throw ConfigError("output.field_format", line_of(o["field_format"]), "expected binary or csv");
    }
    cfg.output.dump_fields = get<bool>(o, "output", "dump_fields", false, "boolean");
  }

  // Explicit basis files are checked here so a bad member fails at load time.
  if (cfg.basis.xi.kind == BasisKind::explicit_files || cfg.basis.eta.kind == BasisKind::explicit_files) {
    const TorusGrid grid(d, cfg.grid.n_per_axis, cfg.grid.dealias);
    build_basis(grid, cfg.basis);
  }
  return cfg;
}

}  // namespace

RunConfig parse_config_string(const std::string& text, const std::string& source) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError("<syntax>", e.mark.line + 1, e.msg);
  }
  if (!root || root.IsNull()) throw ConfigError("<root>", 0, "empty configuration");
  return parse_node(root, source);
}

RunConfig parse_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("<file>", 0, "cannot open " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config_string(ss.str(), path);
}

namespace {

nlohmann::json family_json(const FamilySpec& f) {
  nlohmann::json j;
  const char* kinds[] = {"none", "constant_euclidean", "trig", "explicit"};
  j["kind"] = kinds[static_cast<int>(f.kind)];
  j["amplitude"] = f.amplitude;
  nlohmann::json ms = nlohmann::json::array();
  for (const auto& m : f.members) {
    nlohmann::json modes = nlohmann::json::array();
    for (const auto& t : m)
      modes.push_back({{"k", t.k}, {"dir", t.dir}, {"phase", t.phase}, {"amplitude", t.amplitude}});
    ms.push_back(modes);
  }
  j["members"] = ms;
  j["files"] = f.files;
  return j;
}

}  // namespace

std::string resolved_config_json(const RunConfig& cfg) {
  nlohmann::json j;
  j["grid"] = {{"d", cfg.grid.d}, {"n_per_axis", cfg.grid.n_per_axis}, {"dealias", cfg.grid.dealias}};
  j["model"] = {{"family", to_string(cfg.model.family)},
                {"nu", cfg.model.nu},
                {"passive_kind", to_string(cfg.model.passive_kind)},
                {"ito_flow_drift", cfg.model.ito_flow_drift}};
  j["basis"] = family_json(cfg.basis.xi);
  j["basis"]["eta"] = family_json(cfg.basis.eta);
  const char* ik[] = {"random", "file", "shear", "abc"};
  j["initial"] = {{"kind", ik[static_cast<int>(cfg.initial.kind)]},
                  {"seed", cfg.initial.seed},
                  {"kmax", cfg.initial.kmax},
                  {"amplitude", cfg.initial.amplitude},
                  {"file", cfg.initial.file}};
  j["time"] = {{"T", cfg.time.T},
               {"dt", cfg.time.dt},
               {"save_stride", cfg.time.save_stride},
               {"scheme", to_string(cfg.time.scheme)}};
  j["seeds"] = {{"master", cfg.seeds.master}, {"w", cfg.w_seed()}, {"b_base", cfg.b_seed_base()}};
  nlohmann::json loops = nlohmann::json::array();
  for (const auto& l : cfg.diagnostics.loops) {
    const char* lk[] = {"circle", "axis_line", "custom"};
    nlohmann::json lj = {{"kind", lk[static_cast<int>(l.kind)]}, {"P", l.P}};
    if (l.kind == LoopKind::circle) {
      lj["center"] = l.center;
      lj["radius"] = l.radius;
    } else if (l.kind == LoopKind::axis_line) {
      lj["axis"] = l.axis;
      lj["offset"] = l.center;
    } else {
      lj["points"] = l.points;
      lj["winding"] = l.winding;
    }
    loops.push_back(lj);
  }
  j["diagnostics"] = {{"which", cfg.diagnostics.which},
                      {"loops", loops},
                      {"flavor", to_string(cfg.diagnostics.flavor)},
                      {"M", cfg.diagnostics.M},
                      {"label_n", cfg.diagnostics.label_n},
                      {"steepening_bound", cfg.diagnostics.steepening_bound},
                      {"tolerance", cfg.diagnostics.tolerance},
                      {"sweep",
                       {{"kind", to_string(cfg.diagnostics.sweep.kind)},
                        {"points", cfg.diagnostics.sweep.points},
                        {"metric", cfg.diagnostics.sweep.metric},
                        {"paths", cfg.diagnostics.sweep.paths}}}};
  j["output"] = {{"csv", cfg.output.csv},
                 {"json", cfg.output.json},
                 {"field_format", cfg.output.field_format == DumpFormat::binary ? "binary" : "csv"},
                 {"dump_fields", cfg.output.dump_fields}};
  return j.dump(2);
}

}  // namespace kelvinlab
