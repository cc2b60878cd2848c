#pragma once

// Linear solves for the displacement step and the obstacle-constrained convex
// minimization for the phase-field step, with checkable optimality certificates.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

#include "phasefrac/assembly.hpp"
#include "phasefrac/errors.hpp"
#include "phasefrac/material.hpp"
#include "phasefrac/model.hpp"

namespace phasefrac {

struct SolverConfig {
  double cg_rel_tol = 1e-10;
  int cg_max_iter = 20000;
  double vstep_kkt_tol = 1e-9;
  int vstep_max_outer = 100;
  double armijo_sigma = 1e-4;
  double backtrack_factor = 0.5;
  int max_backtracks = 50;

  void validate() const {
    if (!(cg_rel_tol > 0.0) || !(vstep_kkt_tol > 0.0))
      throw ConfigError("solver tolerances must be positive");
    if (cg_max_iter < 1 || vstep_max_outer < 1 || max_backtracks < 1)
      throw ConfigError("solver iteration limits must be positive");
    if (!(armijo_sigma > 0.0 && armijo_sigma < 0.5) ||
        !(backtrack_factor > 0.0 && backtrack_factor < 1.0))
      throw ConfigError("line search parameters out of range");
  }
};

struct SolveResult {
  Vec x;
  int iterations = 0;
  double relative_residual = 0.0;
};

/// Jacobi-preconditioned conjugate gradients; ||A x - b|| <= cg_rel_tol ||b||.
inline SolveResult solve_spd(const SparseOperator& a, const Vec& b, const SolverConfig& config,
                             const Vec& guess = Vec()) {
  SolveResult r;
  const double bnorm = b.norm();
  if (b.size() == 0) return r;
  if (bnorm == 0.0) {
    r.x = Vec::Zero(b.size());
    return r;
  }
  Eigen::ConjugateGradient<SparseOperator, Eigen::Lower | Eigen::Upper,
                           Eigen::DiagonalPreconditioner<double>>
      cg;
  cg.setTolerance(config.cg_rel_tol);
  cg.setMaxIterations(config.cg_max_iter);
  cg.compute(a);
  r.x = guess.size() == b.size() ? Vec(cg.solveWithGuess(b, guess)) : Vec(cg.solve(b));
  r.iterations = static_cast<int>(cg.iterations());
  r.relative_residual = (a * r.x - b).norm() / bnorm;
  if (cg.info() != Eigen::Success || !(r.relative_residual <= config.cg_rel_tol * 10.0))
    throw SolverError("conjugate gradients did not converge (relative residual " +
                          std::to_string(r.relative_residual) + " after " +
                          std::to_string(r.iterations) + " iterations)",
                      r.relative_residual);
  return r;
}

struct UStepInput {
  const SparseOperator& mass;
  const SparseOperator& stiffness;  // K(v^{j-1})
  const Vec& load;                  // body load + dual load at step j
  const Vec& lift;                  // w^j (values on fixed dofs are prescribed)
  const std::vector<int>& fixed_dofs;
  const Vec& u_prev;      // u^{j-1}
  const Vec& udot_prev;   // (u^{j-1} - u^{j-2}) / tau
  double tau;
};

struct UStepResult {
  Vec u;
  int iterations = 0;
  double relative_residual = 0.0;  // of the discrete weak form on free dofs
};

/// Residual of (d2u, psi) + (b(v) C Eu, E psi) - <L, psi> on the free dofs,
/// relative to the norm of the reduced right-hand side.
inline double u_step_residual(const UStepInput& in, const Vec& u) {
  const double inv_tau2 = 1.0 / (in.tau * in.tau);
  const Vec accel = (u - in.u_prev - in.tau * in.udot_prev) * inv_tau2;
  const Vec r = in.mass * accel + in.stiffness * u - in.load;
  const Vec rhs = in.mass * (in.u_prev + in.tau * in.udot_prev) * inv_tau2 + in.load;
  std::vector<bool> fixed(static_cast<std::size_t>(u.size()), false);
  for (int d : in.fixed_dofs) fixed[static_cast<std::size_t>(d)] = true;
  // reduced rhs: subtract the lift coupling
  SparseOperator a = in.mass * inv_tau2 + in.stiffness;
  Vec lift_only = Vec::Zero(u.size());
  for (int d : in.fixed_dofs) lift_only[d] = in.lift[d];
  const Vec reduced = rhs - a * lift_only;
  double rn = 0.0, bn = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    if (fixed[static_cast<std::size_t>(i)]) continue;
    rn += r[i] * r[i];
    bn += reduced[i] * reduced[i];
  }
  return bn > 0.0 ? std::sqrt(rn / bn) : std::sqrt(rn);
}

/// Solves (M / tau^2 + K) u = M (u^{j-1} + tau du^{j-1}) / tau^2 + L with u = w^j
/// on the fixed dofs.
inline UStepResult u_step(const UStepInput& in, const SolverConfig& config) {
  if (!(in.tau > 0.0)) throw ConfigError("time step must be positive");
  const double inv_tau2 = 1.0 / (in.tau * in.tau);
  const Vec predictor = in.u_prev + in.tau * in.udot_prev;
  SparseOperator a = in.mass * inv_tau2 + in.stiffness;
  const Vec rhs = in.mass * predictor * inv_tau2 + in.load;
  const ReducedSystem sys = apply_dirichlet(a, rhs, in.fixed_dofs, in.lift);
  UStepResult out;
  if (sys.free_dofs.empty()) {
    out.u = sys.lift;
    return out;
  }
  const SolveResult s = solve_spd(sys.matrix, sys.rhs, config, sys.restrict(predictor));
  out.u = sys.reconstruct(s.x);
  out.iterations = s.iterations;
  out.relative_residual = u_step_residual(in, out.u);
  return out;
}

/// Phase-field step objective
///   J(v) = E(u, v) + H(v) + 1/(2 tau) G_k(v - v_prev)
/// with E written through the nodal strain weights omega (vertex quadrature of b).
/// Without rate dissipation the last term is dropped.
class VStepObjective {
 public:
  VStepObjective(const Discretization& disc, const MaterialModel& mat, Vec omega, Vec v_prev,
                 double tau, const SparseOperator* dissipation)
      : disc_(&disc), mat_(&mat), omega_(std::move(omega)), v_prev_(std::move(v_prev)),
        tau_(tau), dissipation_(dissipation) {
    if (dissipation_ && !(tau_ > 0.0)) throw ConfigError("time step must be positive");
    const double eps = mat.epsilon;
    quad_ = disc.scalar_mass * (0.5 / eps) + disc.scalar_stiffness * (2.0 * eps);
    if (dissipation_) quad_ += (*dissipation_) * (1.0 / tau_);
    quad_.makeCompressed();
  }

  const Vec& v_prev() const { return v_prev_; }
  const Vec& omega() const { return omega_; }
  const SparseOperator& quadratic_hessian() const { return quad_; }
  bool has_dissipation() const { return dissipation_ != nullptr; }

  double value(const Vec& v) const {
    const auto& law = mat_->degradation;
    const double eps = mat_->epsilon;
    double e = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) e += law.value(v[i]) * omega_[i];
    const Vec crack = Vec::Ones(v.size()) - v;
    double j = 0.5 * e + crack.dot(disc_->scalar_mass * crack) / (4.0 * eps) +
               eps * crack.dot(disc_->scalar_stiffness * crack);
    if (dissipation_) {
      const Vec dv = v - v_prev_;
      j += dv.dot(*dissipation_ * dv) / (2.0 * tau_);
    }
    return j;
  }

  Vec gradient(const Vec& v) const {
    const auto& law = mat_->degradation;
    const double eps = mat_->epsilon;
    Vec g = disc_->scalar_mass * (v - Vec::Ones(v.size())) * (0.5 / eps) +
            disc_->scalar_stiffness * v * (2.0 * eps);
    for (Eigen::Index i = 0; i < v.size(); ++i) g[i] += 0.5 * law.derivative(v[i]) * omega_[i];
    if (dissipation_) g += (*dissipation_) * (v - v_prev_) / tau_;
    return g;
  }

  /// Diagonal curvature of the elastic part, 1/2 b''(v_i) omega_i.
  Vec elastic_curvature(const Vec& v) const {
    Vec c(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i)
      c[i] = 0.5 * mat_->degradation.curvature(v[i]) * omega_[i];
    return c;
  }

 private:
  const Discretization* disc_;
  const MaterialModel* mat_;
  Vec omega_;
  Vec v_prev_;
  double tau_;
  const SparseOperator* dissipation_;
  SparseOperator quad_;
};

/// Discrete KKT conditions of min J(v) s.t. v <= v_prev, v = w2 on fixed nodes.
/// Multipliers are lambda = -grad J on the free nodes.
struct KktCertificate {
  double stationarity = 0.0;    // max |grad J| over free nodes strictly below the obstacle
  double max_violation = 0.0;   // max(v - v_prev, 0) and |v - w2| on fixed nodes
  double min_multiplier = 0.0;  // min lambda over nodes at the obstacle (0 if none)
  double complementarity = 0.0; // max |lambda_i (v_prev_i - v_i)|
  int active_nodes = 0;

  bool finite() const {
    return std::isfinite(stationarity) && std::isfinite(max_violation) &&
           std::isfinite(min_multiplier) && std::isfinite(complementarity);
  }

  bool passes(double tol) const {
    return finite() && stationarity <= tol && max_violation <= tol && min_multiplier >= -tol &&
           complementarity <= tol;
  }
};

inline KktCertificate kkt_certificate(const Vec& gradient, const Vec& v, const Vec& v_prev,
                                      const std::vector<bool>& fixed, const Vec& fixed_values) {
  KktCertificate c;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (fixed[static_cast<std::size_t>(i)]) {
      c.max_violation = std::max(c.max_violation, std::abs(v[i] - fixed_values[i]));
      continue;
    }
    c.max_violation = std::max(c.max_violation, v[i] - v_prev[i]);
    const double lambda = -gradient[i];
    if (v[i] >= v_prev[i]) {
      ++c.active_nodes;
      c.min_multiplier = std::min(c.min_multiplier, lambda);
    } else {
      c.stationarity = std::max(c.stationarity, std::abs(gradient[i]));
      c.complementarity = std::max(c.complementarity, std::abs(lambda * (v_prev[i] - v[i])));
    }
  }
  return c;
}

struct VStepResult {
  Vec v;
  KktCertificate certificate;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

/// Minimizes 1/2 d^T H d + g^T d subject to d <= r (r >= 0) by a primal-dual
/// active-set iteration. Returns false if the active set did not settle.
inline bool bound_qp(const SparseOperator& h, const Vec& g, const Vec& r, Vec& d,
                     int max_iter = 50) {
  const Eigen::Index n = g.size();
  const Vec diag = h.diagonal();
  std::vector<char> active(static_cast<std::size_t>(n), 0);
  d = Vec::Zero(n);
  for (int it = 0; it < max_iter; ++it) {
    std::vector<int> map(static_cast<std::size_t>(n), -1);
    std::vector<int> inactive;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (active[static_cast<std::size_t>(i)]) {
        d[i] = r[i];
      } else {
        map[static_cast<std::size_t>(i)] = static_cast<int>(inactive.size());
        inactive.push_back(static_cast<int>(i));
      }
    }
    if (!inactive.empty()) {
      Vec dact = d;
      for (int i : inactive) dact[i] = 0.0;
      const Vec coupling = h * dact;
      Triplets t;
      for (int col = 0; col < h.outerSize(); ++col)
        for (SparseOperator::InnerIterator q(h, col); q; ++q) {
          const int a = map[static_cast<std::size_t>(q.row())];
          const int b = map[static_cast<std::size_t>(q.col())];
          if (a >= 0 && b >= 0) t.emplace_back(a, b, q.value());
        }
      const int m = static_cast<int>(inactive.size());
      SparseOperator hii(m, m);
      hii.setFromTriplets(t.begin(), t.end());
      Eigen::SimplicialLDLT<SparseOperator> ldlt(hii);
      if (ldlt.info() != Eigen::Success || (ldlt.vectorD().array() <= 0.0).any())
        throw SolverError("phase-field Hessian is not positive definite on the free set", 0.0);
      Vec rhs(m);
      for (int k = 0; k < m; ++k) rhs[k] = -g[inactive[k]] - coupling[inactive[k]];
      const Vec sol = ldlt.solve(rhs);
      for (int k = 0; k < m; ++k) d[inactive[k]] = sol[k];
    }
    const Vec lambda = -(g + h * d);
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double mult = active[static_cast<std::size_t>(i)] ? lambda[i] : 0.0;
      const char next = mult + diag[i] * (d[i] - r[i]) > 0.0 ? 1 : 0;
      if (next != active[static_cast<std::size_t>(i)]) changed = true;
      active[static_cast<std::size_t>(i)] = next;
    }
    if (!changed) return true;
  }
  return false;
}

}  // namespace detail

/// Newton method for the bound-constrained convex problem: each iteration
/// minimizes the local quadratic model subject to v <= v_prev exactly
/// (primal-dual active sets), then backtracks along the resulting feasible
/// direction. If the model problem does not settle, a projected step with a
/// gradient-sized binding band is used instead. The iterate always satisfies
/// v <= v_prev exactly.
inline VStepResult v_step(const VStepObjective& obj, const std::vector<bool>& fixed,
                          const Vec& fixed_values, const SolverConfig& config) {
  const Vec& ub = obj.v_prev();
  const Eigen::Index n = ub.size();
  for (Eigen::Index i = 0; i < n; ++i)
    if (fixed[static_cast<std::size_t>(i)] && ub[i] != fixed_values[i])
      throw ConfigError("previous phase field differs from its lift on D2");

  std::vector<int> free;
  std::vector<int> map(static_cast<std::size_t>(n), -1);
  for (Eigen::Index i = 0; i < n; ++i)
    if (!fixed[static_cast<std::size_t>(i)]) {
      map[static_cast<std::size_t>(i)] = static_cast<int>(free.size());
      free.push_back(static_cast<int>(i));
    }
  const int m = static_cast<int>(free.size());
  const SparseOperator& quad = obj.quadratic_hessian();
  SparseOperator quad_free(m, m);
  {
    Triplets t;
    for (int col = 0; col < quad.outerSize(); ++col)
      for (SparseOperator::InnerIterator q(quad, col); q; ++q) {
        const int a = map[static_cast<std::size_t>(q.row())];
        const int b = map[static_cast<std::size_t>(q.col())];
        if (a >= 0 && b >= 0) t.emplace_back(a, b, q.value());
      }
    quad_free.setFromTriplets(t.begin(), t.end());
  }

  VStepResult out;
  Vec v = ub;
  double jv = obj.value(v);
  const double inner_tol = 1e-3 * config.vstep_kkt_tol;
  int stagnant = 0;

  auto gradient = [&](const Vec& x) {
    Vec g = obj.gradient(x);
    for (Eigen::Index i = 0; i < n; ++i)
      if (fixed[static_cast<std::size_t>(i)]) g[i] = 0.0;
    return g;
  };

  // Armijo backtracking along v + alpha dir; `exact` nodes land on the
  // obstacle exactly at alpha = 1.
  auto line_search = [&](const Vec& dir, double slope, const std::vector<char>& exact) {
    double alpha = 1.0;
    Vec trial(n);
    const double roundoff = 1e-14 * (std::abs(jv) + 1.0);
    for (int bt = 0; bt < config.max_backtracks; ++bt, alpha *= config.backtrack_factor) {
      for (Eigen::Index i = 0; i < n; ++i) {
        if (fixed[static_cast<std::size_t>(i)]) {
          trial[i] = v[i];
        } else if (alpha == 1.0 && exact[static_cast<std::size_t>(i)]) {
          trial[i] = ub[i];
        } else {
          trial[i] = std::min(v[i] + alpha * dir[i], ub[i]);
        }
      }
      const double jt = obj.value(trial);
      if (jv - jt >= -config.armijo_sigma * alpha * slope ||
          (-alpha * slope <= roundoff && jt <= jv + roundoff)) {
        stagnant = jv - jt > roundoff ? 0 : stagnant + 1;
        v = trial;
        jv = jt;
        return true;
      }
    }
    return false;
  };

  for (int it = 0; it < config.vstep_max_outer; ++it) {
    out.iterations = it;
    const Vec g = gradient(v);
    const KktCertificate cert = kkt_certificate(g, v, ub, fixed, fixed_values);
    if (cert.stationarity <= inner_tol && cert.min_multiplier >= -inner_tol &&
        cert.complementarity <= inner_tol) {
      out.converged = true;
      break;
    }
    const Vec curv = obj.elastic_curvature(v);

    // Newton model on the free nodes
    SparseOperator h = quad_free;
    Vec gf(m), r(m);
    for (int k = 0; k < m; ++k) {
      h.coeffRef(k, k) += curv[free[k]];
      gf[k] = g[free[k]];
      r[k] = ub[free[k]] - v[free[k]];
    }
    Vec d;
    bool stepped = false;
    if (detail::bound_qp(h, gf, r, d)) {
      Vec dir = Vec::Zero(n);
      std::vector<char> exact(static_cast<std::size_t>(n), 0);
      for (int k = 0; k < m; ++k) {
        dir[free[k]] = d[k];
        exact[static_cast<std::size_t>(free[k])] = d[k] >= r[k] ? 1 : 0;
      }
      const double slope = gf.dot(d);
      if (slope < 0.0 || std::abs(slope) <= 1e-300) stepped = line_search(dir, slope, exact);
    }
    if (!stepped) {
      // projected step: nodes within a gradient-sized band of the obstacle
      // that are pushed into it move by their diagonal Newton step
      double band = 0.0;
      for (int i : free) band = std::max(band, std::abs(v[i] - std::min(v[i] - g[i], ub[i])));
      band = std::min(1e-3, band);
      std::vector<int> inactive;
      std::vector<int> local(static_cast<std::size_t>(m), -1);
      Vec dir = Vec::Zero(n);
      double slope = 0.0;
      for (int k = 0; k < m; ++k) {
        const int i = free[k];
        if (v[i] >= ub[i] - band && g[i] < 0.0) {
          dir[i] = -g[i] / h.coeff(k, k);
          slope += g[i] * dir[i];
        } else {
          local[static_cast<std::size_t>(k)] = static_cast<int>(inactive.size());
          inactive.push_back(k);
        }
      }
      if (!inactive.empty()) {
        Triplets t;
        for (int col = 0; col < h.outerSize(); ++col)
          for (SparseOperator::InnerIterator q(h, col); q; ++q) {
            const int a = local[static_cast<std::size_t>(q.row())];
            const int b = local[static_cast<std::size_t>(q.col())];
            if (a >= 0 && b >= 0) t.emplace_back(a, b, q.value());
          }
        const int mi = static_cast<int>(inactive.size());
        SparseOperator hii(mi, mi);
        hii.setFromTriplets(t.begin(), t.end());
        Eigen::SimplicialLDLT<SparseOperator> ldlt(hii);
        if (ldlt.info() != Eigen::Success || (ldlt.vectorD().array() <= 0.0).any())
          throw SolverError("phase-field Hessian is not positive definite on the free set", 0.0);
        Vec rhs(mi);
        for (int k = 0; k < mi; ++k) rhs[k] = -gf[inactive[k]];
        const Vec sol = ldlt.solve(rhs);
        for (int k = 0; k < mi; ++k) {
          dir[free[inactive[k]]] = sol[k];
          slope += gf[inactive[k]] * sol[k];
        }
      }
      stepped = line_search(dir, slope, std::vector<char>(static_cast<std::size_t>(n), 0));
    }
    if (!stepped || stagnant >= 5) break;
  }

  out.v = v;
  out.certificate = kkt_certificate(gradient(v), v, ub, fixed, fixed_values);
  if (!out.certificate.finite())
    throw SolverError("phase-field step produced non-finite values", 0.0);
  return out;
}

/// Left-hand side of the phase-field variational inequality
///   dE(u, v)[chi] + dH(v)[chi] + sum_i alpha_i (grad^i vdot, grad^i chi)
/// minimized over the trial directions (chi <= 0, chi = 0 on D2).
inline double vi_residual(const Discretization& disc, const MaterialModel& mat,
                          const SparseOperator* dissipation, const Vec& u, const Vec& v,
                          const Vec& vdot, const std::vector<Vec>& trials) {
  const Vec omega = nodal_strain_weights(disc.mesh, element_strain_energy(disc.mesh, mat, u));
  Vec grad = disc.scalar_mass * (v - Vec::Ones(v.size())) * (0.5 / mat.epsilon) +
             disc.scalar_stiffness * v * (2.0 * mat.epsilon);
  for (Eigen::Index i = 0; i < v.size(); ++i)
    grad[i] += 0.5 * mat.degradation.derivative(v[i]) * omega[i];
  if (dissipation) grad += (*dissipation) * vdot;
  double worst = trials.empty() ? 0.0 : std::numeric_limits<double>::infinity();
  for (const Vec& chi : trials) worst = std::min(worst, grad.dot(chi));
  return worst;
}

/// Random directions with entries in [-1, 0], zero on the fixed nodes.
inline std::vector<Vec> random_admissible_directions(const std::vector<bool>& fixed, int count,
                                                     std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 0.0);
  std::vector<Vec> out;
  for (int k = 0; k < count; ++k) {
    Vec chi(static_cast<Eigen::Index>(fixed.size()));
    for (std::size_t i = 0; i < fixed.size(); ++i)
      chi[static_cast<Eigen::Index>(i)] = fixed[i] ? 0.0 : dist(rng);
    out.push_back(std::move(chi));
  }
  return out;
}

}  // namespace phasefrac
