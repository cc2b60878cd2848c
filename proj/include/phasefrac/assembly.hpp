#pragma once

// Discrete operators on P1 spaces: consistent mass, degraded elasticity,
// Ambrosio-Tortorelli pieces, the H^k dissipation operators, load vectors and
// Dirichlet elimination.
//
// Vector fields are stored node-major: dof (node, component) -> node * dim + component.

#include <array>
#include <functional>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "phasefrac/errors.hpp"
#include "phasefrac/material.hpp"
#include "phasefrac/mesh.hpp"

namespace phasefrac {

using Vec = Eigen::VectorXd;
using SparseOperator = Eigen::SparseMatrix<double>;
using Triplets = std::vector<Eigen::Triplet<double>>;

enum class FieldArity { Scalar, Vector };

inline int dofs_per_node(const Mesh& mesh, FieldArity arity) {
  return arity == FieldArity::Scalar ? 1 : mesh.dim;
}

/// Consistent P1 mass matrix (exact for products of P1 functions).
inline SparseOperator assemble_mass(const Mesh& mesh, FieldArity arity) {
  const int npe = mesh.nodes_per_element();
  const int c = dofs_per_node(mesh, arity);
  // 1D: h/6 [2 1; 1 2], 2D: area/12 [2 1 1; 1 2 1; 1 1 2]
  const double denom = mesh.dim == 1 ? 6.0 : 12.0;
  Triplets t;
  t.reserve(static_cast<std::size_t>(mesh.element_count() * npe * npe * c));
  for (int e = 0; e < mesh.element_count(); ++e) {
    const double w = mesh.element_measure(e) / denom;
    const auto& el = mesh.elements[e];
    for (int a = 0; a < npe; ++a)
      for (int b = 0; b < npe; ++b)
        for (int k = 0; k < c; ++k)
          t.emplace_back(el[a] * c + k, el[b] * c + k, a == b ? 2.0 * w : w);
  }
  const int n = mesh.node_count() * c;
  SparseOperator m(n, n);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

/// Row sums of the scalar consistent mass: the integral of each hat function.
inline Vec lumped_mass(const Mesh& mesh) {
  Vec d = Vec::Zero(mesh.node_count());
  const int npe = mesh.nodes_per_element();
  for (int e = 0; e < mesh.element_count(); ++e) {
    const double share = mesh.element_measure(e) / npe;
    for (int a = 0; a < npe; ++a) d[mesh.elements[e][a]] += share;
  }
  return d;
}

/// Scalar P1 stiffness, (grad phi_i, grad phi_j).
inline SparseOperator assemble_scalar_stiffness(const Mesh& mesh) {
  const int npe = mesh.nodes_per_element();
  Triplets t;
  for (int e = 0; e < mesh.element_count(); ++e) {
    const auto g = mesh.shape_gradients(e);
    const double m = mesh.element_measure(e);
    const auto& el = mesh.elements[e];
    for (int a = 0; a < npe; ++a)
      for (int b = 0; b < npe; ++b)
        t.emplace_back(el[a], el[b], m * (g[a][0] * g[b][0] + g[a][1] * g[b][1]));
  }
  SparseOperator s(mesh.node_count(), mesh.node_count());
  s.setFromTriplets(t.begin(), t.end());
  return s;
}

/// Element strain measures |e| * (C Eu . Eu), including any per-element
/// stiffness scale. The elastic energy is 1/2 sum_e bbar_e * W_e.
inline Vec element_strain_energy(const Mesh& mesh, const MaterialModel& mat, const Vec& u) {
  Vec w(mesh.element_count());
  for (int e = 0; e < mesh.element_count(); ++e) {
    const auto g = mesh.shape_gradients(e);
    const auto& el = mesh.elements[e];
    double density;
    if (mesh.dim == 1) {
      const double strain = g[0][0] * u[el[0]] + g[1][0] * u[el[1]];
      density = (2.0 * mat.mu + mat.lambda) * strain * strain;
    } else {
      double exx = 0.0, eyy = 0.0, gxy = 0.0;
      for (int a = 0; a < 3; ++a) {
        const double ux = u[2 * el[a]];
        const double uy = u[2 * el[a] + 1];
        exx += g[a][0] * ux;
        eyy += g[a][1] * uy;
        gxy += g[a][1] * ux + g[a][0] * uy;
      }
      density = (2.0 * mat.mu + mat.lambda) * (exx * exx + eyy * eyy) +
                2.0 * mat.lambda * exx * eyy + mat.mu * gxy * gxy;
    }
    w[e] = mesh.element_measure(e) * mat.element_scale(e) * density;
  }
  return w;
}

/// Spreads element strain measures onto vertices: omega_i = sum_{e ∋ i} W_e / (d+1).
/// With vertex quadrature for b, E(u, v) = 1/2 sum_i b(v_i) omega_i.
inline Vec nodal_strain_weights(const Mesh& mesh, const Vec& element_strain) {
  Vec w = Vec::Zero(mesh.node_count());
  const int npe = mesh.nodes_per_element();
  for (int e = 0; e < mesh.element_count(); ++e)
    for (int a = 0; a < npe; ++a) w[mesh.elements[e][a]] += element_strain[e] / npe;
  return w;
}

/// Element degradation coefficients: the vertex average of b(v).
inline Vec degraded_coefficients(const Mesh& mesh, const MaterialModel& mat, const Vec& v) {
  if (v.size() != mesh.node_count()) throw ConfigError("phase field needs one value per node");
  Vec c(mesh.element_count());
  const int npe = mesh.nodes_per_element();
  for (int e = 0; e < mesh.element_count(); ++e) {
    double s = 0.0;
    for (int a = 0; a < npe; ++a) s += mat.degradation.value(v[mesh.elements[e][a]]);
    c[e] = s / npe;
  }
  return c;
}

/// K(v) with 1/2 u^T K(v) u = E(u, v).
inline SparseOperator assemble_degraded_stiffness(const Mesh& mesh, const MaterialModel& mat,
                                                  const Vec& v) {
  const Vec coef = degraded_coefficients(mesh, mat, v);
  const int d = mesh.dim;
  const int npe = mesh.nodes_per_element();
  const double c11 = 2.0 * mat.mu + mat.lambda;
  Triplets t;
  t.reserve(static_cast<std::size_t>(mesh.element_count() * npe * npe * d * d));
  for (int e = 0; e < mesh.element_count(); ++e) {
    const auto g = mesh.shape_gradients(e);
    const auto& el = mesh.elements[e];
    const double w = mesh.element_measure(e) * mat.element_scale(e) * coef[e];
    if (d == 1) {
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) t.emplace_back(el[a], el[b], w * c11 * g[a][0] * g[b][0]);
      continue;
    }
    // Voigt: B columns (gx, 0, gy) and (0, gy, gx); D = [[c11, l, 0], [l, c11, 0], [0, 0, mu]]
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        const double ax = g[a][0], ay = g[a][1], bx = g[b][0], by = g[b][1];
        const double kxx = c11 * ax * bx + mat.mu * ay * by;
        const double kxy = mat.lambda * ax * by + mat.mu * ay * bx;
        const double kyx = mat.lambda * ay * bx + mat.mu * ax * by;
        const double kyy = c11 * ay * by + mat.mu * ax * bx;
        t.emplace_back(2 * el[a], 2 * el[b], w * kxx);
        t.emplace_back(2 * el[a], 2 * el[b] + 1, w * kxy);
        t.emplace_back(2 * el[a] + 1, 2 * el[b], w * kyx);
        t.emplace_back(2 * el[a] + 1, 2 * el[b] + 1, w * kyy);
      }
  }
  const int n = mesh.node_count() * d;
  SparseOperator k(n, n);
  k.setFromTriplets(t.begin(), t.end());
  return k;
}

/// Discrete H^k dissipation: G_k(s) = sum_i alpha_i s^T A_i s with A_0 the
/// lumped mass, A_1 the scalar stiffness and A_2 = A_1 A_0^{-1} A_1.
struct DissipationOperators {
  int k = 0;
  std::vector<double> alphas;
  Vec lumped;             // diagonal of A_0
  SparseOperator a0, a1, a2;
  SparseOperator combined;  // sum_i alpha_i A_i

  double energy(const Vec& s) const { return s.dot(combined * s); }
};

inline DissipationOperators assemble_dissipation_ops(const Mesh& mesh, int k,
                                                     const std::vector<double>& alphas) {
  if (k < 0 || k > 2) throw ConfigError("dissipation order k must be 0, 1 or 2");
  if (static_cast<int>(alphas.size()) != k + 1)
    throw ConfigError("dissipation needs exactly k+1 weights");
  for (double a : alphas)
    if (!(a >= 0.0)) throw ConfigError("dissipation weights must be non-negative");
  if (!(alphas.front() > 0.0) || !(alphas.back() > 0.0))
    throw ConfigError("dissipation weights alpha_0 and alpha_k must be positive");
  DissipationOperators ops;
  ops.k = k;
  ops.alphas = alphas;
  ops.lumped = lumped_mass(mesh);
  const int n = mesh.node_count();
  ops.a0 = SparseOperator(n, n);
  {
    Triplets t;
    for (int i = 0; i < n; ++i) t.emplace_back(i, i, ops.lumped[i]);
    ops.a0.setFromTriplets(t.begin(), t.end());
  }
  ops.a1 = assemble_scalar_stiffness(mesh);
  SparseOperator inv_a0(n, n);
  {
    Triplets t;
    for (int i = 0; i < n; ++i) t.emplace_back(i, i, 1.0 / ops.lumped[i]);
    inv_a0.setFromTriplets(t.begin(), t.end());
  }
  ops.a2 = SparseOperator(ops.a1 * inv_a0 * ops.a1);
  ops.combined = alphas[0] * ops.a0;
  if (k >= 1) ops.combined += alphas[1] * ops.a1;
  if (k >= 2) ops.combined += alphas[2] * ops.a2;
  ops.combined.makeCompressed();
  return ops;
}

/// Traction field on the N1 boundary: position -> force per unit boundary measure.
using TractionFn = std::function<Point(const Point&)>;

/// Boundary integral of F . psi over N1 facets (2-point Gauss on edges,
/// point evaluation on 1D endpoints), optionally restricted by `facet_filter`.
inline Vec assemble_traction(const Mesh& mesh, const TractionFn& traction,
                             const std::function<bool(const Facet&)>& facet_filter = {}) {
  const int d = mesh.dim;
  Vec load = Vec::Zero(mesh.node_count() * d);
  if (!traction) return load;
  for (const auto& f : mesh.facets) {
    if (!f.tags.has(Tag::N1)) continue;
    if (facet_filter && !facet_filter(f)) continue;
    if (f.node_count == 1) {
      const Point F = traction(mesh.nodes[f.nodes[0]]);
      for (int c = 0; c < d; ++c) load[f.nodes[0] * d + c] += F[c];
      continue;
    }
    const Point& a = mesh.nodes[f.nodes[0]];
    const Point& b = mesh.nodes[f.nodes[1]];
    const double len = mesh.facet_measure(f);
    const double gp = 0.5 / std::sqrt(3.0);
    for (double xi : {0.5 - gp, 0.5 + gp}) {
      const Point x{a[0] + xi * (b[0] - a[0]), a[1] + xi * (b[1] - a[1])};
      const Point F = traction(x);
      for (int c = 0; c < d; ++c) {
        load[f.nodes[0] * d + c] += 0.5 * len * (1.0 - xi) * F[c];
        load[f.nodes[1] * d + c] += 0.5 * len * xi * F[c];
      }
    }
  }
  return load;
}

/// Load vector L with L . psi = (f, psi) + <g, psi> + int_{N1} F . psi, where f
/// and g are given as nodal interpolants of L^2 densities, plus optional nodal
/// point loads. Any of the inputs may be empty.
inline Vec assemble_loads(const Mesh& mesh, const SparseOperator& vector_mass, const Vec& body,
                          const Vec& dual_density, const TractionFn& traction,
                          const Vec& point_loads = Vec()) {
  Vec load = assemble_traction(mesh, traction);
  if (body.size() > 0) load += vector_mass * body;
  if (dual_density.size() > 0) load += vector_mass * dual_density;
  if (point_loads.size() > 0) load += point_loads;
  return load;
}

/// Linear system restricted to the free dofs after eliminating prescribed values.
struct ReducedSystem {
  SparseOperator matrix;
  Vec rhs;
  std::vector<int> free_dofs;
  Vec lift;  // full-length vector carrying the prescribed values (zero elsewhere)

  Vec reconstruct(const Vec& free_values) const {
    Vec x = lift;
    for (std::size_t i = 0; i < free_dofs.size(); ++i)
      x[free_dofs[i]] = free_values[static_cast<Eigen::Index>(i)];
    return x;
  }

  Vec restrict(const Vec& full) const {
    Vec r(static_cast<Eigen::Index>(free_dofs.size()));
    for (std::size_t i = 0; i < free_dofs.size(); ++i)
      r[static_cast<Eigen::Index>(i)] = full[free_dofs[i]];
    return r;
  }
};

/// Eliminates `fixed_dofs` (with values taken from `lift`) from A x = b.
/// An empty fixed set leaves the system unchanged.
inline ReducedSystem apply_dirichlet(const SparseOperator& a, const Vec& b,
                                     const std::vector<int>& fixed_dofs, const Vec& lift) {
  const Eigen::Index n = a.rows();
  std::vector<int> map(static_cast<std::size_t>(n), 0);
  for (int d : fixed_dofs) map[static_cast<std::size_t>(d)] = -1;
  ReducedSystem r;
  r.lift = Vec::Zero(n);
  for (int d : fixed_dofs) r.lift[d] = lift[d];
  int next = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    if (map[static_cast<std::size_t>(i)] == 0) {
      map[static_cast<std::size_t>(i)] = next++;
      r.free_dofs.push_back(static_cast<int>(i));
    } else {
      map[static_cast<std::size_t>(i)] = -1;
    }
  const Vec coupling = a * r.lift;
  r.rhs.resize(next);
  for (int i = 0; i < next; ++i) r.rhs[i] = b[r.free_dofs[i]] - coupling[r.free_dofs[i]];
  Triplets t;
  for (int col = 0; col < a.outerSize(); ++col)
    for (SparseOperator::InnerIterator it(a, col); it; ++it) {
      const int ri = map[static_cast<std::size_t>(it.row())];
      const int ci = map[static_cast<std::size_t>(it.col())];
      if (ri >= 0 && ci >= 0) t.emplace_back(ri, ci, it.value());
    }
  r.matrix = SparseOperator(next, next);
  r.matrix.setFromTriplets(t.begin(), t.end());
  return r;
}

/// Vector dofs of the given nodes.
inline std::vector<int> node_dofs(const std::vector<int>& nodes, int components) {
  std::vector<int> dofs;
  dofs.reserve(nodes.size() * static_cast<std::size_t>(components));
  for (int n : nodes)
    for (int c = 0; c < components; ++c) dofs.push_back(n * components + c);
  return dofs;
}

}  // namespace phasefrac
