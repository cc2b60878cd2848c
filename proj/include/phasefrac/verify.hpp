#pragma once

// Independent checks: a brute-force minimizer for small phase-field steps,
// central finite-difference gradient checks, the moving crack-tip dissipation
// probe and resolution studies of the energy ledger.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "phasefrac/errors.hpp"
#include "phasefrac/fields.hpp"
#include "phasefrac/solvers.hpp"
#include "phasefrac/stepper.hpp"

namespace phasefrac {

struct BruteForceOptions {
  double span = 2.0;     // search box is [v_prev - span, v_prev]
  int points = 7;        // grid points per free dof and level
  double target = 1e-6;  // stop once the grid spacing is below this
};

/// Nested tensor-grid search for the phase-field step minimizer. The
/// objective is evaluated from a dense copy of the quadratic part, independent
/// of the Newton solver's machinery. Each level keeps a box of three grid
/// spacings around the best point; a second pass restarts from a wider box
/// around the first answer.
inline Vec brute_force_vstep(const VStepObjective& obj, const MaterialModel& mat,
                             const std::vector<bool>& fixed, const Vec& fixed_values,
                             const BruteForceOptions& opt = {}) {
  const Vec& ub = obj.v_prev();
  const Eigen::Index n = ub.size();
  std::vector<int> free;
  for (Eigen::Index i = 0; i < n; ++i)
    if (!fixed[static_cast<std::size_t>(i)]) free.push_back(static_cast<int>(i));
  if (free.size() > 6) throw ConfigError("brute-force oracle supports at most 6 free dofs");

  Vec base = ub;
  for (Eigen::Index i = 0; i < n; ++i)
    if (fixed[static_cast<std::size_t>(i)]) base[i] = fixed_values[i];
  if (free.empty()) return base;

  // J(v) = 1/2 v^T Q v + l^T v + c + 1/2 sum b(v_i) omega_i, with Q, l from
  // probing the objective's gradient at 0 and unit vectors.
  const Eigen::MatrixXd q = Eigen::MatrixXd(obj.quadratic_hessian());
  Vec zero = Vec::Zero(n);
  Vec lin = obj.gradient(zero);
  for (Eigen::Index i = 0; i < n; ++i) lin[i] -= 0.5 * mat.degradation.derivative(0.0) * obj.omega()[i];
  const Vec& omega = obj.omega();
  const auto& law = mat.degradation;
  auto value = [&](const Vec& v) {
    double e = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) e += law.value(v[i]) * omega[i];
    return 0.5 * v.dot(q * v) + lin.dot(v) + 0.5 * e;
  };

  const int m = static_cast<int>(free.size());
  const int r = std::max(3, opt.points);
  auto search = [&](Vec center, double half) {
    Vec best = center;
    double best_j = value(best);
    while (true) {
      const double h = 2.0 * half / (r - 1);
      std::vector<double> lo(static_cast<std::size_t>(m));
      for (int a = 0; a < m; ++a) lo[static_cast<std::size_t>(a)] = center[free[a]] - half;
      std::vector<int> idx(static_cast<std::size_t>(m), 0);
      Vec trial = center;
      while (true) {
        bool ok = true;
        for (int a = 0; a < m; ++a) {
          const int i = free[a];
          trial[i] = lo[static_cast<std::size_t>(a)] + h * idx[static_cast<std::size_t>(a)];
          if (trial[i] > ub[i]) {
            if (trial[i] - h >= ub[i]) ok = false;  // duplicate of the clamped point
            trial[i] = ub[i];
          }
        }
        if (ok) {
          const double jt = value(trial);
          if (jt < best_j) {
            best_j = jt;
            best = trial;
          }
        }
        int a = 0;
        while (a < m && ++idx[static_cast<std::size_t>(a)] == r) idx[static_cast<std::size_t>(a++)] = 0;
        if (a == m) break;
      }
      if (h < opt.target) break;
      center = best;
      half = 1.5 * h;
    }
    return best;
  };

  Vec start = base;
  for (int i : free) start[i] = ub[i] - 0.5 * opt.span;
  const Vec first = search(start, 0.5 * opt.span);
  return search(first, 64.0 * opt.target);
}

/// Relative error of the central difference of f along chi against the
/// supplied directional derivative.
inline double fd_gradient_check(const std::function<double(const Vec&)>& f, const Vec& x,
                                const Vec& chi, double derivative, double h) {
  if (!(h > 0.0)) throw ConfigError("finite-difference step must be positive");
  const double fd = (f(x + h * chi) - f(x - h * chi)) / (2.0 * h);
  return std::abs(fd - derivative) / (std::abs(derivative) + 1e-30);
}

/// Regularized moving crack: v(t, x) = Psi(dist(x, Gamma_t) / eps) with
/// Gamma_t = {(y, 0) : y <= s(t)} and Psi the cubic smoothstep from delta to 1.
struct TipProfile {
  double delta = 0.2;
  double epsilon = 0.05;
  double s0 = 0.0;
  TimeFunction speed = TimeFunction::Constant{1.0};  // sdot(t) >= 0

  void validate() const {
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("profile delta must lie in (0, 1)");
    if (!(epsilon > 0.0)) throw ConfigError("profile width must be positive");
  }

  double psi(double r) const {
    if (r <= delta) return 0.0;
    if (r >= 1.0) return 1.0;
    const double x = (r - delta) / (1.0 - delta);
    return x * x * (3.0 - 2.0 * x);
  }

  double psi_prime(double r) const {
    if (r <= delta || r >= 1.0) return 0.0;
    const double x = (r - delta) / (1.0 - delta);
    return 6.0 * x * (1.0 - x) / (1.0 - delta);
  }

  double tip(double t) const { return s0 + speed.integral(0.0, t); }

  /// Phi(y) = Psi(dist(y, Gamma_0)) in stretched coordinates.
  double phi(double y1, double y2) const {
    const double d = y1 <= 0.0 ? std::abs(y2) : std::hypot(y1, y2);
    return psi(d);
  }

  double phi_dx(double y1, double y2) const {
    if (y1 <= 0.0) return 0.0;
    const double r = std::hypot(y1, y2);
    return psi_prime(r) * y1 / r;
  }

  double field(double t, double x1, double x2) const {
    return phi((x1 - tip(t)) / epsilon, x2 / epsilon);
  }

  /// Closed form of the integral of |d1 Phi|^2 for the smoothstep profile.
  double c_phi_closed_form() const { return 0.3 * M_PI * (1.0 + delta) / (1.0 - delta); }
};

/// Integral of |d1 Phi|^2 over the square [-half, half]^2 (stretched units) by
/// the midpoint rule with `cells` cells per axis.
inline double c_phi_quadrature(const TipProfile& p, int cells, double half = 1.0) {
  const double h = 2.0 * half / cells;
  double acc = 0.0;
  for (int i = 0; i < cells; ++i) {
    const double y1 = -half + (i + 0.5) * h;
    if (y1 <= 0.0) continue;
    for (int j = 0; j < cells; ++j) {
      const double d = p.phi_dx(y1, -half + (j + 0.5) * h);
      acc += d * d;
    }
  }
  return acc * h * h;
}

struct ProbeRow {
  double t = 0.0;
  double speed = 0.0;
  double rate_norm2 = 0.0;  // ||dv/dt||^2 over the window
  double predicted = 0.0;   // C_Phi sdot^2
  double ratio = 1.0;       // rate_norm2 / predicted (1 when both vanish)
};

struct ProbeReport {
  double c_phi = 0.0;             // reference-grid quadrature
  double c_phi_closed_form = 0.0;
  double truncation = 0.0;        // part of C_Phi outside the window
  bool window_ok = true;
  std::vector<ProbeRow> rows;
};

/// ||dv/dt||^2 from a central difference of the analytic field along the tip
/// path (dv/dt = sdot dv/ds) and the midpoint rule on an N x N grid over a window of half-width
/// `half_width * eps` centred on the tip, compared against C_Phi sdot^2.
inline ProbeReport tip_dissipation_probe(const TipProfile& p, int resolution, double half_width,
                                         const std::vector<double>& times,
                                         int reference_cells = 2048) {
  p.validate();
  if (resolution < 2) throw ConfigError("probe resolution must be at least 2");
  ProbeReport rep;
  rep.c_phi_closed_form = p.c_phi_closed_form();
  rep.c_phi = c_phi_quadrature(p, reference_cells, 1.0);
  if (half_width < 1.0) {
    rep.window_ok = false;
    rep.truncation =
        rep.c_phi - c_phi_quadrature(p, std::max(2, static_cast<int>(reference_cells * half_width)),
                                     half_width);
  }
  const double eps = p.epsilon;
  const double hw = half_width * eps;
  const double h = 2.0 * hw / resolution;
  for (double t : times) {
    ProbeRow row;
    row.t = t;
    row.speed = p.speed.value(t);
    if (row.speed < 0.0) throw ConfigError("tip speed must be non-negative");
    const double s = p.tip(t);
    // dv/dt = sdot * dv/ds; dv/ds by a central difference over a tip shift of 1e-4 eps
    const double ds = 1e-4 * eps;
    double acc = 0.0;
    for (int i = 0; i < resolution; ++i) {
      const double x1 = s - hw + (i + 0.5) * h;
      for (int j = 0; j < resolution; ++j) {
        const double y2 = (-hw + (j + 0.5) * h) / eps;
        const double dvds =
            (p.phi((x1 - s - ds) / eps, y2) - p.phi((x1 - s + ds) / eps, y2)) / (2.0 * ds);
        acc += dvds * dvds;
      }
    }
    acc *= row.speed * row.speed;
    row.rate_norm2 = acc * h * h;
    row.predicted = rep.c_phi * row.speed * row.speed;
    row.ratio = row.predicted > 0.0 ? row.rate_norm2 / row.predicted
                                    : (row.rate_norm2 == 0.0 ? 1.0 : 0.0);
    rep.rows.push_back(row);
  }
  return rep;
}

/// One resolution of a refinement study.
struct RefinementRow {
  int n = 0;
  int refinement = 0;
  double min_slack = 0.0;          // most negative relative slack over the run
  double final_slack = 0.0;
  double balance = 0.0;            // at the final step
  bool balance_certified = false;
  double pointwise_identity = 0.0; // max magnitude over the run
  int violations = 0;
};

using SimulationFactory = std::function<Simulation(int n, int refinement)>;

/// Runs the scenario at each (n, refinement) pair and collects the ledger
/// diagnostics. `ns` and `refinements` must have the same length (paired) or
/// one of them a single entry (broadcast).
inline std::vector<RefinementRow> refinement_study(const SimulationFactory& make,
                                                   const std::vector<int>& ns,
                                                   const std::vector<int>& refinements) {
  const std::size_t count = std::max(ns.size(), refinements.size());
  if (count < 3) throw ConfigError("a refinement study needs at least 3 resolutions");
  if ((ns.size() != count && ns.size() != 1) ||
      (refinements.size() != count && refinements.size() != 1))
    throw ConfigError("refinement lists must match in length or be single values");
  std::vector<RefinementRow> out;
  for (std::size_t i = 0; i < count; ++i) {
    RefinementRow row;
    row.n = ns.size() == 1 ? ns[0] : ns[i];
    row.refinement = refinements.size() == 1 ? refinements[0] : refinements[i];
    Simulation sim = make(row.n, row.refinement);
    sim.run();
    const auto& ledger = sim.ledger();
    for (const auto& r : ledger) {
      row.min_slack = std::min(row.min_slack, r.slack / std::max(r.energy_scale, 1e-300));
      row.pointwise_identity = std::max(row.pointwise_identity, std::abs(r.pointwise_identity));
    }
    row.final_slack = ledger.back().slack;
    row.balance = ledger.back().balance;
    row.balance_certified = ledger.back().balance_certified;
    row.violations = static_cast<int>(sim.violations().size());
    out.push_back(row);
  }
  return out;
}

/// True if each value is at most (1 + noise) times its predecessor.
inline bool monotone_decreasing(const std::vector<double>& values, double noise = 0.05) {
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > (1.0 + noise) * values[i - 1]) return false;
  return true;
}

}  // namespace phasefrac
