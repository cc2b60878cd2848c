#pragma once

// Boundary/initial data and the energy bookkeeping: kinetic, elastic and
// surface energies, their phase-field derivatives, and the total work of the
// external loads and the moving Dirichlet boundary.

#include <cmath>
#include <string>
#include <vector>

#include "phasefrac/assembly.hpp"
#include "phasefrac/errors.hpp"
#include "phasefrac/fields.hpp"
#include "phasefrac/material.hpp"
#include "phasefrac/mesh.hpp"

namespace phasefrac {

/// Mesh plus the state-independent operators every energy needs.
struct Discretization {
  Mesh mesh;
  SparseOperator vector_mass;
  SparseOperator scalar_mass;
  SparseOperator scalar_stiffness;

  explicit Discretization(Mesh m) : mesh(std::move(m)) {
    mesh.validate();
    vector_mass = assemble_mass(mesh, FieldArity::Vector);
    scalar_mass = assemble_mass(mesh, FieldArity::Scalar);
    scalar_stiffness = assemble_scalar_stiffness(mesh);
  }

  int dim() const { return mesh.dim; }
  int displacement_dofs() const { return mesh.node_count() * mesh.dim; }
};

struct PointLoad {
  int node = 0;
  Point direction{1.0, 0.0};
  TimeFunction time;
};

struct BoundaryData {
  SpaceTimeField w1;  // displacement lift, prescribed on D1
  Vec w2;             // phase-field lift (one value per node, used on D2)
  SpaceTimeField f;   // body force density
  SpaceTimeField g;   // dual load, as an L^2 density
  std::vector<FaceTraction> traction;  // Neumann data on N1
  std::vector<PointLoad> point_loads;  // nodal part of the dual load
  Vec u0, u1, v0;

  /// Throws ConfigError unless u0 matches w1(0) on D1, v0 <= 1, w2 <= 1 on
  /// D2 and v0 = w2 on D2.
  void validate(const Mesh& mesh) const {
    const int nd = mesh.node_count() * mesh.dim;
    if (u0.size() != nd || u1.size() != nd)
      throw ConfigError("initial displacement/velocity need one vector per node");
    if (v0.size() != mesh.node_count() || w2.size() != mesh.node_count())
      throw ConfigError("initial phase field and its lift need one value per node");
    const Vec lift0 = w1.nodal(mesh, 0.0, 0, mesh.dim);
    for (int n : mesh.tagged_nodes(Tag::D1))
      for (int c = 0; c < mesh.dim; ++c) {
        const int i = n * mesh.dim + c;
        if (std::abs(u0[i] - lift0[i]) > 1e-12 * (1.0 + std::abs(lift0[i])))
          throw ConfigError("initial displacement does not match the Dirichlet lift at node " +
                            std::to_string(n));
      }
    for (int n = 0; n < mesh.node_count(); ++n)
      if (v0[n] > 1.0) throw ConfigError("initial phase field exceeds 1 at node " + std::to_string(n));
    for (int n : mesh.tagged_nodes(Tag::D2)) {
      if (w2[n] > 1.0) throw ConfigError("phase-field lift exceeds 1 on the D2 boundary");
      if (v0[n] != w2[n])
        throw ConfigError("initial phase field differs from its lift at D2 node " +
                          std::to_string(n));
    }
    for (const auto& ft : traction)
      for (const auto& facet : mesh.facets)
        if (facet.face == ft.face && !facet.tags.has(Tag::N1))
          throw ConfigError("traction on face '" + to_string(ft.face) + "' which is not N1");
    for (const auto& p : point_loads)
      if (p.node < 0 || p.node >= mesh.node_count())
        throw ConfigError("point load on an out-of-range node");
  }

  /// Load vector of the dual load g~(t): density, face tractions and point loads.
  Vec dual_load(const Discretization& disc, double t) const {
    const Mesh& mesh = disc.mesh;
    Vec load = assemble_face_tractions(mesh, traction, t);
    if (!g.empty()) load += disc.vector_mass * g.nodal(mesh, t, 0, mesh.dim);
    for (const auto& p : point_loads) {
      const double s = p.time.value(t);
      for (int c = 0; c < mesh.dim; ++c) load[p.node * mesh.dim + c] += s * p.direction[c];
    }
    return load;
  }

  /// Load vector of the body force averaged over [t0, t1].
  Vec body_load(const Discretization& disc, double t0, double t1) const {
    if (f.empty()) return Vec::Zero(disc.displacement_dofs());
    return disc.vector_mass * f.nodal_average(disc.mesh, t0, t1, disc.dim());
  }

  Vec lift(const Mesh& mesh, double t, int order = 0) const {
    return w1.nodal(mesh, t, order, mesh.dim);
  }
};

inline double kinetic_energy(const SparseOperator& vector_mass, const Vec& w) {
  return 0.5 * w.dot(vector_mass * w);
}

inline double elastic_energy(const Mesh& mesh, const MaterialModel& mat, const Vec& u,
                             const Vec& v) {
  return 0.5 * degraded_coefficients(mesh, mat, v).dot(element_strain_energy(mesh, mat, u));
}

inline double surface_energy(const Discretization& disc, const Vec& v, double eps) {
  const Vec crack = Vec::Ones(v.size()) - v;
  // grad v = -grad(1 - v); the crack form is exact for v = 1
  return crack.dot(disc.scalar_mass * crack) / (4.0 * eps) +
         eps * crack.dot(disc.scalar_stiffness * crack);
}

/// F(u, w, v) = K(w) + E(u, v) + H(v)
inline double total_energy(const Discretization& disc, const MaterialModel& mat, const Vec& u,
                           const Vec& udot, const Vec& v) {
  return kinetic_energy(disc.vector_mass, udot) + elastic_energy(disc.mesh, mat, u, v) +
         surface_energy(disc, v, mat.epsilon);
}

/// d/ds E(u, v + s chi) at s = 0: 1/2 sum_i b'(v_i) chi_i omega_i.
inline double elastic_energy_v_derivative(const Mesh& mesh, const MaterialModel& mat,
                                          const Vec& u, const Vec& v, const Vec& chi) {
  const Vec omega = nodal_strain_weights(mesh, element_strain_energy(mesh, mat, u));
  double s = 0.0;
  for (int i = 0; i < mesh.node_count(); ++i)
    s += mat.degradation.derivative(v[i]) * chi[i] * omega[i];
  return 0.5 * s;
}

/// dH(v)[chi] = 1/(2 eps) (v - 1, chi) + 2 eps (grad v, grad chi)
inline double surface_energy_derivative(const Discretization& disc, const Vec& v, const Vec& chi,
                                        double eps) {
  const Vec shifted = v - Vec::Ones(v.size());
  return shifted.dot(disc.scalar_mass * chi) / (2.0 * eps) +
         2.0 * eps * v.dot(disc.scalar_stiffness * chi);
}

/// Kinematic and load state at one time node, as needed by the work sums.
struct WorkNode {
  Vec u;
  Vec udot;       // backward difference velocity (u^1 at the initial node)
  Vec lift;       // w_1 interpolant
  Vec lift_rate;  // backward difference of the lift (w_1'(0) at the initial node)
  Vec dual_load;  // load vector of g~
};

/// Work done over [t1, t2] by the body force, the dual load and the moving
/// Dirichlet boundary, using the same rectangle rule as the time stepping:
///   tau [ (f, du - dw) + (b(v_prev) C Eu, E dw) - (du_prev, d2w) - <dg, u_prev - w_prev> ]
///   + [ (du, dw) + <g, u - w> ]_{t1}^{t2}
/// `body_load` is the load vector of the averaged body force and
/// `stiffness_prev` the degraded stiffness frozen over the step.
inline double total_work_increment(const WorkNode& a, const WorkNode& b, double t1, double t2,
                                   const Vec& body_load, const SparseOperator& stiffness_prev,
                                   const SparseOperator& vector_mass) {
  if (!(t2 > t1)) throw ConfigError("total work needs t2 > t1");
  const double tau = t2 - t1;
  const Vec lift_accel = (b.lift_rate - a.lift_rate) / tau;
  const Vec dual_rate = (b.dual_load - a.dual_load) / tau;
  const Vec slip_prev = a.u - a.lift;
  double interior = body_load.dot(b.udot - b.lift_rate);
  interior += (stiffness_prev * b.u).dot(b.lift_rate);
  interior -= a.udot.dot(vector_mass * lift_accel);
  interior -= dual_rate.dot(slip_prev);
  const double end_b = b.udot.dot(vector_mass * b.lift_rate) + b.dual_load.dot(b.u - b.lift);
  const double end_a = a.udot.dot(vector_mass * a.lift_rate) + a.dual_load.dot(slip_prev);
  return tau * interior + end_b - end_a;
}

}  // namespace phasefrac
