#pragma once

// JSON scenario files. Every object is checked against a fixed key list and
// unknown keys are rejected. See README.md for the keys and their units.

#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "phasefrac/errors.hpp"
#include "phasefrac/fields.hpp"
#include "phasefrac/material.hpp"
#include "phasefrac/mesh.hpp"
#include "phasefrac/model.hpp"
#include "phasefrac/stepper.hpp"

namespace phasefrac {

using Json = nlohmann::json;

/// Axis-aligned box [lo, hi] per axis; a point inside gets `value`.
struct BoxRegion {
  std::vector<double> lo, hi;
  double value = 0.0;

  bool contains(const Point& x, int dim) const {
    for (int a = 0; a < dim; ++a)
      if (x[a] < lo[a] || x[a] > hi[a]) return false;
    return true;
  }
};

struct Scenario {
  std::string name;
  int dim = 1;
  std::vector<double> extents;
  std::vector<int> cells;
  BoundarySpec boundary;
  MaterialModel material;
  std::vector<BoxRegion> weak_regions;  // value = stiffness multiplier
  BoundaryData data;
  // initial data not yet bound to a mesh
  SpaceTimeField u0_extra, u1_field;
  bool u1_given = false;
  double v0_value = 1.0;
  std::vector<BoxRegion> v0_regions;
  double w2_value = 1.0;
  SimulationConfig config;
  int snapshot_every = 0;

  /// Mesh with every cell count multiplied by 2^refinement.
  Mesh build_mesh(int refinement = 0) const {
    std::vector<int> c = cells;
    for (int& x : c) x <<= refinement;
    return build_structured_mesh(dim, extents, c, boundary);
  }

  /// Binds the initial data to a mesh: u0 = w1(0) + extra terms,
  /// u1 = given field or dw1/dt(0), v0 from the base value and boxes.
  BoundaryData bind(const Mesh& mesh) const {
    BoundaryData d = data;
    d.u0 = d.w1.nodal(mesh, 0.0, 0, dim);
    if (!u0_extra.empty()) d.u0 += u0_extra.nodal(mesh, 0.0, 0, dim);
    d.u1 = u1_given ? u1_field.nodal(mesh, 0.0, 0, dim) : d.w1.nodal(mesh, 0.0, 1, dim);
    d.v0 = Vec::Constant(mesh.node_count(), v0_value);
    for (int n = 0; n < mesh.node_count(); ++n)
      for (const auto& r : v0_regions)
        if (r.contains(mesh.nodes[n], dim)) d.v0[n] = r.value;
    d.w2 = Vec::Constant(mesh.node_count(), w2_value);
    for (int n : mesh.tagged_nodes(Tag::D2)) d.v0[n] = w2_value;
    return d;
  }

  MaterialModel material_for(const Mesh& mesh) const {
    MaterialModel m = material;
    if (!weak_regions.empty()) {
      m.stiffness_scale.assign(static_cast<std::size_t>(mesh.element_count()), 1.0);
      for (int e = 0; e < mesh.element_count(); ++e) {
        Point c{0.0, 0.0};
        for (int a = 0; a <= dim; ++a)
          for (int k = 0; k < 2; ++k) c[k] += mesh.nodes[mesh.elements[e][a]][k] / (dim + 1);
        for (const auto& r : weak_regions)
          if (r.contains(c, dim)) m.stiffness_scale[static_cast<std::size_t>(e)] = r.value;
      }
    }
    return m;
  }

  Simulation make_simulation(int n, int refinement = 0) const {
    Mesh mesh = build_mesh(refinement);
    MaterialModel mat = material_for(mesh);
    BoundaryData d = bind(mesh);
    SimulationConfig cfg = config;
    cfg.n = n;
    return Simulation(Discretization(std::move(mesh)), std::move(mat), std::move(d), cfg);
  }

  Simulation make_simulation() const { return make_simulation(config.n, 0); }
};

namespace detail {

inline void check_keys(const Json& j, const std::string& where,
                       const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& item : j.items())
    if (!allowed.count(item.key()))
      throw ConfigError("unknown key '" + item.key() + "' in " + where);
}

inline const Json& require(const Json& j, const std::string& key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError("missing required key '" + key + "' in " + where);
  return *it;
}

template <class T>
T get(const Json& j, const std::string& key, const std::string& where) {
  const Json& v = require(j, key, where);
  try {
    return v.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("key '" + key + "' in " + where + " has the wrong type");
  }
}

template <class T>
T get_or(const Json& j, const std::string& key, const std::string& where, T fallback) {
  return j.contains(key) ? get<T>(j, key, where) : fallback;
}

inline TimeFunction parse_time(const Json& j, const std::string& where) {
  const auto kind = get<std::string>(j, "kind", where);
  if (kind == "constant") {
    check_keys(j, where, {"kind", "value"});
    return TimeFunction::Constant{get<double>(j, "value", where)};
  }
  if (kind == "ramp") {
    check_keys(j, where, {"kind", "slope", "offset"});
    return TimeFunction::Ramp{get<double>(j, "slope", where),
                              get_or<double>(j, "offset", where, 0.0)};
  }
  if (kind == "sinusoid") {
    check_keys(j, where, {"kind", "amplitude", "omega", "phase", "offset"});
    return TimeFunction::Sinusoid{get<double>(j, "amplitude", where),
                                  get<double>(j, "omega", where),
                                  get_or<double>(j, "phase", where, 0.0),
                                  get_or<double>(j, "offset", where, 0.0)};
  }
  if (kind == "table") {
    check_keys(j, where, {"kind", "times", "values"});
    return TimeFunction::Table{get<std::vector<double>>(j, "times", where),
                               get<std::vector<double>>(j, "values", where)};
  }
  throw ConfigError("unknown time function kind '" + kind + "' in " + where);
}

inline Point parse_direction(const Json& j, const std::string& key, const std::string& where,
                             int dim) {
  if (!j.contains(key)) return {1.0, 0.0};
  const auto d = get<std::vector<double>>(j, key, where);
  if (static_cast<int>(d.size()) != dim)
    throw ConfigError("'" + key + "' in " + where + " needs " + std::to_string(dim) + " entries");
  return {d[0], dim == 2 ? d[1] : 0.0};
}

inline SpaceTimeField parse_field(const Json& j, const std::string& where, int dim) {
  if (!j.is_array()) throw ConfigError(where + " must be a list of terms");
  SpaceTimeField field;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string w = where + "[" + std::to_string(i) + "]";
    const Json& t = j[i];
    check_keys(t, w, {"profile", "direction", "time"});
    SpaceTimeField::Term term;
    const auto profile = get_or<std::string>(t, "profile", w, "uniform");
    if (profile == "uniform") {
      term.profile.kind = SpatialProfile::Kind::Uniform;
    } else if (profile == "linear_x" || (profile == "linear_y" && dim == 2)) {
      term.profile.kind = SpatialProfile::Kind::Linear;
      term.profile.axis = profile == "linear_x" ? 0 : 1;
    } else {
      throw ConfigError("unknown profile '" + profile + "' in " + w);
    }
    term.direction = parse_direction(t, "direction", w, dim);
    term.time = parse_time(require(t, "time", w), w + ".time");
    field.add(std::move(term));
  }
  return field;
}

inline std::vector<BoxRegion> parse_regions(const Json& j, const std::string& where, int dim,
                                            const std::string& value_key) {
  if (!j.is_array()) throw ConfigError(where + " must be a list");
  std::vector<BoxRegion> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string w = where + "[" + std::to_string(i) + "]";
    check_keys(j[i], w, {"lo", "hi", value_key});
    BoxRegion r;
    r.lo = get<std::vector<double>>(j[i], "lo", w);
    r.hi = get<std::vector<double>>(j[i], "hi", w);
    if (static_cast<int>(r.lo.size()) != dim || static_cast<int>(r.hi.size()) != dim)
      throw ConfigError("box corners in " + w + " need one entry per axis");
    r.value = get<double>(j[i], value_key, w);
    out.push_back(std::move(r));
  }
  return out;
}

inline DegradationLaw parse_degradation(const Json& j, const std::string& where) {
  const auto kind = get<std::string>(j, "kind", where);
  if (kind == "prototype") {
    check_keys(j, where, {"kind", "eta"});
    return DegradationLaw::prototype(get<double>(j, "eta", where));
  }
  if (kind == "power") {
    check_keys(j, where, {"kind", "eta", "p"});
    return DegradationLaw::power(get<double>(j, "p", where), get<double>(j, "eta", where));
  }
  if (kind == "exponential") {
    check_keys(j, where, {"kind", "eta", "beta"});
    return DegradationLaw::exponential(get<double>(j, "beta", where),
                                       get<double>(j, "eta", where));
  }
  throw ConfigError("unknown degradation kind '" + kind + "' in " + where);
}

inline SolverConfig parse_solver(const Json& j) {
  const std::string w = "solver";
  check_keys(j, w,
             {"cg_rel_tol", "cg_max_iter", "vstep_kkt_tol", "vstep_max_outer", "armijo_sigma",
              "backtrack_factor", "max_backtracks"});
  SolverConfig s;
  s.cg_rel_tol = get_or(j, "cg_rel_tol", w, s.cg_rel_tol);
  s.cg_max_iter = get_or(j, "cg_max_iter", w, s.cg_max_iter);
  s.vstep_kkt_tol = get_or(j, "vstep_kkt_tol", w, s.vstep_kkt_tol);
  s.vstep_max_outer = get_or(j, "vstep_max_outer", w, s.vstep_max_outer);
  s.armijo_sigma = get_or(j, "armijo_sigma", w, s.armijo_sigma);
  s.backtrack_factor = get_or(j, "backtrack_factor", w, s.backtrack_factor);
  s.max_backtracks = get_or(j, "max_backtracks", w, s.max_backtracks);
  s.validate();
  return s;
}

}  // namespace detail

inline Scenario parse_scenario(const Json& root) {
  using namespace detail;
  check_keys(root, "scenario",
             {"name", "mesh", "material", "dissipation", "loading", "initial", "time", "solver",
              "output"});
  Scenario s;
  s.name = get_or<std::string>(root, "name", "scenario", "scenario");

  const Json& mesh = require(root, "mesh", "scenario");
  check_keys(mesh, "mesh", {"dim", "extents", "cells", "boundary"});
  s.dim = get<int>(mesh, "dim", "mesh");
  if (s.dim != 1 && s.dim != 2) throw ConfigError("mesh.dim must be 1 or 2");
  s.extents = get<std::vector<double>>(mesh, "extents", "mesh");
  s.cells = get<std::vector<int>>(mesh, "cells", "mesh");
  const Json& bnd = require(mesh, "boundary", "mesh");
  check_keys(bnd, "mesh.boundary",
             s.dim == 1 ? std::set<std::string>{"left", "right"}
                        : std::set<std::string>{"left", "right", "bottom", "top"});
  for (const auto& item : bnd.items()) {
    TagSet tags;
    for (const auto& t : item.value()) {
      if (!t.is_string()) throw ConfigError("boundary tags must be strings");
      tags.add(tag_from_string(t.get<std::string>()));
    }
    s.boundary[face_from_string(item.key())] = tags;
  }

  const Json& mat = require(root, "material", "scenario");
  check_keys(mat, "material", {"mu", "lambda", "epsilon", "degradation", "weak_regions"});
  s.material.dim = s.dim;
  s.material.mu = get<double>(mat, "mu", "material");
  s.material.lambda = get_or<double>(mat, "lambda", "material", 0.0);
  s.material.epsilon = get<double>(mat, "epsilon", "material");
  s.material.degradation =
      parse_degradation(require(mat, "degradation", "material"), "material.degradation");
  if (mat.contains("weak_regions"))
    s.weak_regions = parse_regions(mat["weak_regions"], "material.weak_regions", s.dim, "factor");

  const Json& dis = require(root, "dissipation", "scenario");
  const auto mode = get<std::string>(dis, "mode", "dissipation");
  if (mode == "rate") {
    check_keys(dis, "dissipation", {"mode", "k", "alphas"});
    s.material.rate_dissipation = true;
    s.material.k = get<int>(dis, "k", "dissipation");
    s.material.alphas = get<std::vector<double>>(dis, "alphas", "dissipation");
  } else if (mode == "none") {
    check_keys(dis, "dissipation", {"mode"});
    s.material.rate_dissipation = false;
    s.material.k = 0;
    s.material.alphas.clear();
  } else {
    throw ConfigError("dissipation.mode must be 'rate' or 'none'");
  }
  s.material.validate();

  if (root.contains("loading")) {
    const Json& ld = root["loading"];
    check_keys(ld, "loading", {"w1", "w2", "f", "g", "traction", "point_loads"});
    if (ld.contains("w1")) s.data.w1 = parse_field(ld["w1"], "loading.w1", s.dim);
    if (ld.contains("f")) s.data.f = parse_field(ld["f"], "loading.f", s.dim);
    if (ld.contains("g")) s.data.g = parse_field(ld["g"], "loading.g", s.dim);
    s.w2_value = get_or<double>(ld, "w2", "loading", 1.0);
    if (ld.contains("traction")) {
      const Json& tr = ld["traction"];
      if (!tr.is_array()) throw ConfigError("loading.traction must be a list");
      for (std::size_t i = 0; i < tr.size(); ++i) {
        const std::string w = "loading.traction[" + std::to_string(i) + "]";
        check_keys(tr[i], w, {"face", "terms"});
        FaceTraction ft;
        ft.face = face_from_string(get<std::string>(tr[i], "face", w));
        ft.field = parse_field(require(tr[i], "terms", w), w + ".terms", s.dim);
        s.data.traction.push_back(std::move(ft));
      }
    }
    if (ld.contains("point_loads")) {
      const Json& pl = ld["point_loads"];
      if (!pl.is_array()) throw ConfigError("loading.point_loads must be a list");
      for (std::size_t i = 0; i < pl.size(); ++i) {
        const std::string w = "loading.point_loads[" + std::to_string(i) + "]";
        check_keys(pl[i], w, {"node", "direction", "time"});
        PointLoad p;
        p.node = get<int>(pl[i], "node", w);
        p.direction = parse_direction(pl[i], "direction", w, s.dim);
        p.time = parse_time(require(pl[i], "time", w), w + ".time");
        s.data.point_loads.push_back(std::move(p));
      }
    }
  }

  if (root.contains("initial")) {
    const Json& in = root["initial"];
    check_keys(in, "initial", {"u0", "u1", "v0", "v0_regions"});
    if (in.contains("u0")) s.u0_extra = parse_field(in["u0"], "initial.u0", s.dim);
    if (in.contains("u1")) {
      s.u1_field = parse_field(in["u1"], "initial.u1", s.dim);
      s.u1_given = true;
    }
    s.v0_value = get_or<double>(in, "v0", "initial", 1.0);
    if (in.contains("v0_regions"))
      s.v0_regions = parse_regions(in["v0_regions"], "initial.v0_regions", s.dim, "value");
  }

  const Json& time = require(root, "time", "scenario");
  check_keys(time, "time", {"T", "n"});
  s.config.T = get<double>(time, "T", "time");
  s.config.n = get<int>(time, "n", "time");
  if (root.contains("solver")) s.config.solver = parse_solver(root["solver"]);
  if (root.contains("output")) {
    check_keys(root["output"], "output", {"snapshots"});
    s.snapshot_every = get_or<int>(root["output"], "snapshots", "output", 0);
    if (s.snapshot_every < 0) throw ConfigError("output.snapshots must be non-negative");
  }
  s.config.validate();
  s.build_mesh();  // surfaces boundary-spec and extent errors at load time
  return s;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read scenario file '" + path + "'");
  Json root;
  try {
    root = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("scenario '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_scenario(root);
}

}  // namespace phasefrac
