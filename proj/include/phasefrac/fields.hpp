#pragma once

// Time-dependent data from a small catalog: constant, linear ramp, sinusoid
// and piecewise-linear tables, combined with a spatial profile and a direction
// into nodal space-time fields.

#include <cmath>
#include <string>
#include <variant>
#include <vector>

#include "phasefrac/assembly.hpp"
#include "phasefrac/errors.hpp"
#include "phasefrac/mesh.hpp"

namespace phasefrac {

class TimeFunction {
 public:
  struct Constant {
    double value = 0.0;
  };
  /// offset + slope * t
  struct Ramp {
    double slope = 0.0;
    double offset = 0.0;
  };
  /// offset + amplitude * sin(omega * t + phase)
  struct Sinusoid {
    double amplitude = 0.0;
    double omega = 0.0;
    double phase = 0.0;
    double offset = 0.0;
  };
  /// Linear interpolation of (times, values); constant outside the table.
  struct Table {
    std::vector<double> times;
    std::vector<double> values;
  };

  TimeFunction() : kind_(Constant{0.0}) {}
  TimeFunction(Constant c) : kind_(c) {}
  TimeFunction(Ramp r) : kind_(r) {}
  TimeFunction(Sinusoid s) : kind_(s) {}
  TimeFunction(Table t) : kind_(std::move(t)) {
    const auto& tab = std::get<Table>(kind_);
    if (tab.times.empty() || tab.times.size() != tab.values.size())
      throw ConfigError("table needs matching, non-empty time and value lists");
    for (std::size_t i = 1; i < tab.times.size(); ++i)
      if (!(tab.times[i] > tab.times[i - 1]))
        throw ConfigError("table times must be strictly increasing");
  }

  double value(double t) const { return eval(t, 0); }
  double rate(double t) const { return eval(t, 1); }
  double acceleration(double t) const { return eval(t, 2); }

  /// Exact integral over [t0, t1].
  double integral(double t0, double t1) const {
    return std::visit(
        [&](const auto& k) -> double {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, Constant>) {
            return k.value * (t1 - t0);
          } else if constexpr (std::is_same_v<K, Ramp>) {
            return k.offset * (t1 - t0) + 0.5 * k.slope * (t1 * t1 - t0 * t0);
          } else if constexpr (std::is_same_v<K, Sinusoid>) {
            double base = k.offset * (t1 - t0);
            if (k.omega == 0.0) return base + k.amplitude * std::sin(k.phase) * (t1 - t0);
            return base - k.amplitude / k.omega *
                              (std::cos(k.omega * t1 + k.phase) - std::cos(k.omega * t0 + k.phase));
          } else {
            return table_integral(k, t1) - table_integral(k, t0);
          }
        },
        kind_);
  }

 private:
  double eval(double t, int order) const {
    return std::visit(
        [&](const auto& k) -> double {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, Constant>) {
            return order == 0 ? k.value : 0.0;
          } else if constexpr (std::is_same_v<K, Ramp>) {
            return order == 0 ? k.offset + k.slope * t : (order == 1 ? k.slope : 0.0);
          } else if constexpr (std::is_same_v<K, Sinusoid>) {
            const double arg = k.omega * t + k.phase;
            if (order == 0) return k.offset + k.amplitude * std::sin(arg);
            if (order == 1) return k.amplitude * k.omega * std::cos(arg);
            return -k.amplitude * k.omega * k.omega * std::sin(arg);
          } else {
            return table_eval(k, t, order);
          }
        },
        kind_);
  }

  static double table_eval(const Table& tab, double t, int order) {
    const auto& ts = tab.times;
    const auto& vs = tab.values;
    if (order == 2) return 0.0;
    if (t <= ts.front()) return order == 0 ? vs.front() : 0.0;
    if (t >= ts.back()) return order == 0 ? vs.back() : 0.0;
    std::size_t i = 1;
    while (ts[i] < t) ++i;
    const double slope = (vs[i] - vs[i - 1]) / (ts[i] - ts[i - 1]);
    return order == 0 ? vs[i - 1] + slope * (t - ts[i - 1]) : slope;
  }

  // Antiderivative with value 0 at t = times.front().
  static double table_integral(const Table& tab, double t) {
    const auto& ts = tab.times;
    const auto& vs = tab.values;
    if (t <= ts.front()) return vs.front() * (t - ts.front());
    double acc = 0.0;
    for (std::size_t i = 1; i < ts.size(); ++i) {
      if (t <= ts[i]) {
        const double vt = table_eval(tab, t, 0);
        return acc + 0.5 * (vs[i - 1] + vt) * (t - ts[i - 1]);
      }
      acc += 0.5 * (vs[i - 1] + vs[i]) * (ts[i] - ts[i - 1]);
    }
    return acc + vs.back() * (t - ts.back());
  }

  std::variant<Constant, Ramp, Sinusoid, Table> kind_;
};

/// Uniform (1 everywhere) or linear along an axis, normalized to 0 at the
/// mesh origin and 1 at the far face.
struct SpatialProfile {
  enum class Kind { Uniform, Linear } kind = Kind::Uniform;
  int axis = 0;

  double at(const Mesh& mesh, const Point& x) const {
    if (kind == Kind::Uniform) return 1.0;
    return (x[axis] - mesh.origin[axis]) / mesh.extents[axis];
  }
};

/// sum_terms profile(x) * time(t) * direction
class SpaceTimeField {
 public:
  struct Term {
    SpatialProfile profile;
    Point direction{1.0, 0.0};
    TimeFunction time;
  };

  SpaceTimeField() = default;
  explicit SpaceTimeField(std::vector<Term> terms) : terms_(std::move(terms)) {}

  void add(Term t) { terms_.push_back(std::move(t)); }
  bool empty() const { return terms_.empty(); }
  const std::vector<Term>& terms() const { return terms_; }

  /// Nodal interpolant of the `order`-th time derivative at time t, with
  /// `components` values per node.
  Vec nodal(const Mesh& mesh, double t, int order, int components) const {
    Vec out = Vec::Zero(mesh.node_count() * components);
    for (const auto& term : terms_) {
      const double s = order == 0   ? term.time.value(t)
                       : order == 1 ? term.time.rate(t)
                                    : term.time.acceleration(t);
      if (s == 0.0) continue;
      for (int n = 0; n < mesh.node_count(); ++n) {
        const double p = term.profile.at(mesh, mesh.nodes[n]) * s;
        for (int c = 0; c < components; ++c) out[n * components + c] += p * term.direction[c];
      }
    }
    return out;
  }

  /// Nodal interpolant of the time average over [t0, t1].
  Vec nodal_average(const Mesh& mesh, double t0, double t1, int components) const {
    Vec out = Vec::Zero(mesh.node_count() * components);
    for (const auto& term : terms_) {
      const double s = term.time.integral(t0, t1) / (t1 - t0);
      for (int n = 0; n < mesh.node_count(); ++n) {
        const double p = term.profile.at(mesh, mesh.nodes[n]) * s;
        for (int c = 0; c < components; ++c) out[n * components + c] += p * term.direction[c];
      }
    }
    return out;
  }

  /// Pointwise value; used for boundary tractions.
  Point at(const Mesh& mesh, const Point& x, double t) const {
    Point out{0.0, 0.0};
    for (const auto& term : terms_) {
      const double s = term.profile.at(mesh, x) * term.time.value(t);
      out[0] += s * term.direction[0];
      out[1] += s * term.direction[1];
    }
    return out;
  }

 private:
  std::vector<Term> terms_;
};

/// A traction applied on the N1 facets of one face.
struct FaceTraction {
  Face face = Face::Right;
  SpaceTimeField field;
};

/// Boundary integral of all face tractions at time t.
inline Vec assemble_face_tractions(const Mesh& mesh, const std::vector<FaceTraction>& tractions,
                                   double t) {
  Vec load = Vec::Zero(mesh.node_count() * mesh.dim);
  for (const auto& ft : tractions) {
    load += assemble_traction(
        mesh, [&](const Point& x) { return ft.field.at(mesh, x, t); },
        [&](const Facet& f) { return f.face == ft.face; });
  }
  return load;
}

}  // namespace phasefrac
