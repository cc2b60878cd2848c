#include <gtest/gtest.h>

#include <random>

#include "phasefrac/solvers.hpp"
#include "phasefrac/suites.hpp"
#include "phasefrac/verify.hpp"
#include "test_util.hpp"

using namespace phasefrac;
using namespace phasefrac::testing;

namespace {

SparseOperator dense_to_sparse(const Eigen::MatrixXd& a) { return a.sparseView(); }

struct PhaseProblem {
  Discretization disc;
  MaterialModel mat;
  std::optional<DissipationOperators> ops;
  Vec omega, v_prev, w2;
  std::vector<bool> fixed;
  double tau = 0.1;

  VStepObjective objective() const {
    return VStepObjective(disc, mat, omega, v_prev, tau, ops ? &ops->combined : nullptr);
  }
};

// Bar on (0,1) with both phase ends pinned to 1 and a displacement that
// concentrates strain in one element.
PhaseProblem strained_bar(int cells, int k, double alpha0, double strain) {
  PhaseProblem p{Discretization(unit_interval(cells, {Tag::D1, Tag::D2}, {Tag::D1, Tag::D2})),
                 {}, {}, {}, {}, {}, {}};
  p.mat.dim = 1;
  p.mat.mu = 0.5;
  p.mat.epsilon = 0.2;
  p.mat.k = k;
  p.mat.alphas = std::vector<double>(static_cast<std::size_t>(k + 1), alpha0);
  const Mesh& m = p.disc.mesh;
  Vec u = Vec::Zero(m.node_count());
  for (int i = cells / 2 + 1; i < m.node_count(); ++i) u[i] = strain / cells;
  p.omega = nodal_strain_weights(m, element_strain_energy(m, p.mat, u));
  p.ops = assemble_dissipation_ops(m, k, p.mat.alphas);
  p.fixed = m.tagged_mask(Tag::D2);
  p.w2 = Vec::Ones(m.node_count());
  p.v_prev = Vec::Ones(m.node_count());
  return p;
}

}  // namespace

TEST(SolveSpd, HandSystems) {
  SolverConfig cfg;
  SparseOperator id(4, 4);
  id.setIdentity();
  Vec b(4);
  b << 1.0, -2.0, 3.0, 0.5;
  EXPECT_LT((solve_spd(id, b, cfg).x - b).norm(), 1e-14);
  Eigen::MatrixXd a(2, 2);
  a << 2.0, 1.0, 1.0, 2.0;
  Vec rhs(2);
  rhs << 3.0, 3.0;
  const Vec x = solve_spd(dense_to_sparse(a), rhs, cfg).x;
  EXPECT_NEAR(x[0], 1.0, 1e-12);
  EXPECT_NEAR(x[1], 1.0, 1e-12);
  EXPECT_EQ(solve_spd(dense_to_sparse(a), Vec::Zero(2), cfg).x.norm(), 0.0);
}

TEST(SolveSpd, ReportsNonConvergence) {
  SolverConfig cfg;
  cfg.cg_max_iter = 1;
  const Mesh m = unit_square(6);
  SparseOperator a = assemble_scalar_stiffness(m);
  a += assemble_mass(m, FieldArity::Scalar) * 1e-3;
  std::mt19937_64 rng(1);
  EXPECT_THROW(solve_spd(a, random_vec(a.rows(), rng), cfg), SolverError);
}

TEST(UStep, OneDofHandCases) {
  SolverConfig cfg;
  SparseOperator one(1, 1), zero(1, 1);
  one.insert(0, 0) = 1.0;
  zero.resize(1, 1);
  const std::vector<int> none;
  const Vec lift = Vec::Zero(1);
  {
    // K = 0, no load: constant velocity, u = 2 u^{j-1} - u^{j-2}
    const Vec load = Vec::Zero(1), u_prev = Vec::Ones(1), udot = Vec::Constant(1, 10.0);
    const UStepResult r = u_step(UStepInput{one, zero, load, lift, none, u_prev, udot, 0.1}, cfg);
    EXPECT_NEAR(r.u[0], 2.0, 1e-12);
  }
  {
    const Vec load = Vec::Ones(1), u_prev = Vec::Zero(1), udot = Vec::Zero(1);
    const UStepResult r = u_step(UStepInput{one, one, load, lift, none, u_prev, udot, 1.0}, cfg);
    EXPECT_NEAR(r.u[0], 0.5, 1e-12);
    EXPECT_LT(r.relative_residual, 1e-12);
  }
}

TEST(UStep, QuiescentAndWeakFormResidual) {
  SolverConfig cfg;
  const Discretization disc(unit_square(5));
  MaterialModel mat;
  mat.dim = 2;
  const int n = disc.displacement_dofs();
  std::mt19937_64 rng(3);
  const Vec v = random_vec(disc.mesh.node_count(), rng, 0.2, 1.0);
  const SparseOperator k = assemble_degraded_stiffness(disc.mesh, mat, v);
  const std::vector<int> fixed = node_dofs(disc.mesh.tagged_nodes(Tag::D1), 2);
  const Vec zero = Vec::Zero(n);
  const UStepResult quiet = u_step(UStepInput{disc.vector_mass, k, zero, zero, fixed, zero, zero, 0.05}, cfg);
  EXPECT_EQ(quiet.u.norm(), 0.0);

  Vec lift = Vec::Zero(n);
  for (int d : fixed) lift[d] = 0.01 * d;
  const Vec load = random_vec(n, rng);
  const Vec u_prev = random_vec(n, rng), udot = random_vec(n, rng);
  const UStepResult r = u_step(UStepInput{disc.vector_mass, k, load, lift, fixed, u_prev, udot, 0.05}, cfg);
  for (int d : fixed) EXPECT_EQ(r.u[d], lift[d]);
  // independent dense check of (d2u, psi) + (b C Eu, E psi) = <L, psi> on free dofs
  const Eigen::MatrixXd M(disc.vector_mass), K(k);
  const Vec accel = (r.u - u_prev - 0.05 * udot) / (0.05 * 0.05);
  Vec res = M * accel + K * r.u - load;
  for (int d : fixed) res[d] = 0.0;
  EXPECT_LT(res.norm(), 1e-9 * (M * (u_prev + 0.05 * udot) / (0.05 * 0.05) + load).norm());
}

TEST(VStep, UnstrainedStaysIntact) {
  PhaseProblem p = strained_bar(6, 1, 1.0, 0.0);
  const VStepResult r = v_step(p.objective(), p.fixed, p.w2, SolverConfig{});
  EXPECT_EQ(r.v, Vec::Ones(p.v_prev.size()));
  EXPECT_TRUE(r.certificate.passes(1e-9));
}

TEST(VStep, CertificateAndBounds) {
  PhaseProblem p = strained_bar(20, 1, 0.1, 3.0);
  const VStepResult r = v_step(p.objective(), p.fixed, p.w2, SolverConfig{});
  EXPECT_TRUE(r.converged);
  EXPECT_TRUE(r.certificate.passes(1e-9));
  EXPECT_LT(r.v.minCoeff(), 0.99);  // the strained element cracks
  for (Eigen::Index i = 0; i < r.v.size(); ++i) EXPECT_LE(r.v[i], p.v_prev[i]);
  for (int i : p.disc.mesh.tagged_nodes(Tag::D2)) EXPECT_EQ(r.v[i], 1.0);
}

TEST(VStep, StrongProximalTermFreezesPhase) {
  double last = std::numeric_limits<double>::infinity();
  for (double alpha : {0.01, 0.1, 1.0, 10.0, 100.0}) {
    PhaseProblem p = strained_bar(10, 0, alpha, 3.0);
    p.v_prev = Vec::Constant(p.v_prev.size(), 0.5);
    for (int i : p.disc.mesh.tagged_nodes(Tag::D2)) p.v_prev[i] = 1.0;
    const VStepResult r = v_step(p.objective(), p.fixed, p.w2, SolverConfig{});
    const double change = (r.v - p.v_prev).norm();
    EXPECT_LE(change, last);
    last = change;
  }
  EXPECT_LT(last, 1e-2);
}

TEST(VStep, ThreeNodeMatchesBruteForce) {
  PhaseProblem p = strained_bar(4, 0, 0.2, 4.0);  // 5 nodes, ends pinned: 3 free
  const VStepObjective obj = p.objective();
  const VStepResult r = v_step(obj, p.fixed, p.w2, SolverConfig{});
  const Vec oracle = brute_force_vstep(obj, p.mat, p.fixed, p.w2);
  EXPECT_LT((r.v - oracle).cwiseAbs().maxCoeff(), 1e-3);
  EXPECT_GE(obj.value(oracle), obj.value(r.v) - 1e-9);
}

TEST(VStep, BruteForceTrivialCaseAndLimit) {
  PhaseProblem p = strained_bar(4, 0, 1.0, 0.0);
  EXPECT_EQ(brute_force_vstep(p.objective(), p.mat, p.fixed, p.w2), Vec::Ones(5));
  PhaseProblem big = strained_bar(10, 0, 1.0, 1.0);
  big.fixed.assign(big.fixed.size(), false);
  EXPECT_THROW(brute_force_vstep(big.objective(), big.mat, big.fixed, big.w2), ConfigError);
}

TEST(VStep, ObjectiveIsConvex) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> theta(0.0, 1.0);
  for (int s = 0; s < 10; ++s) {
    const OracleInstance inst = random_oracle_instance(100 + s);
    const VStepObjective obj(inst.disc, inst.mat, inst.omega, inst.v_prev, inst.tau,
                             inst.ops ? &inst.ops->combined : nullptr);
    for (int k = 0; k < 100; ++k) {
      const Vec a = inst.v_prev - random_vec(inst.v_prev.size(), rng, 0.0, 2.0);
      const Vec b = inst.v_prev - random_vec(inst.v_prev.size(), rng, 0.0, 2.0);
      const double t = theta(rng);
      EXPECT_LE(obj.value(t * a + (1 - t) * b),
                t * obj.value(a) + (1 - t) * obj.value(b) + 1e-10);
    }
  }
}

TEST(VStep, SignPreservedForZeroOrder) {
  for (int s = 0; s < 5; ++s) {
    PhaseProblem p = strained_bar(16, 0, 0.01, 20.0 + 10.0 * s);
    p.v_prev = Vec::Constant(p.v_prev.size(), 0.3);
    p.w2 = Vec::Constant(p.w2.size(), 0.3);
    const VStepResult r = v_step(p.objective(), p.fixed, p.w2, SolverConfig{});
    EXPECT_GE(r.v.minCoeff(), 0.0);
  }
}

TEST(VStep, RejectsInconsistentLift) {
  PhaseProblem p = strained_bar(4, 0, 1.0, 1.0);
  p.w2[0] = 0.5;
  EXPECT_THROW(v_step(p.objective(), p.fixed, p.w2, SolverConfig{}), ConfigError);
}

TEST(ViResidual, ZeroDirectionAndConvergedStep) {
  PhaseProblem p = strained_bar(20, 1, 0.1, 3.0);
  const Mesh& m = p.disc.mesh;
  Vec u = Vec::Zero(m.node_count());
  for (int i = 11; i < m.node_count(); ++i) u[i] = 3.0 / 20;
  EXPECT_EQ(vi_residual(p.disc, p.mat, &p.ops->combined, u, p.v_prev, Vec::Zero(m.node_count()),
                        {Vec::Zero(m.node_count())}),
            0.0);
  const VStepResult r = v_step(p.objective(), p.fixed, p.w2, SolverConfig{});
  const Vec vdot = (r.v - p.v_prev) / p.tau;
  const auto trials = random_admissible_directions(p.fixed, 100, 5);
  EXPECT_GE(vi_residual(p.disc, p.mat, &p.ops->combined, u, r.v, vdot, trials), -1e-8);
  // pushing a free node up off the minimizer breaks the inequality
  Vec bad = r.v;
  int worst = 0;
  r.v.minCoeff(&worst);
  bad[worst] += 0.1;
  const Vec bad_rate = (bad - p.v_prev) / p.tau;
  EXPECT_LT(vi_residual(p.disc, p.mat, &p.ops->combined, u, bad, bad_rate, trials), -1e-6);
}

TEST(Kkt, DetectsEachFailureMode) {
  const std::vector<bool> fixed{true, false, false, false};
  Vec ub(4), fv(4);
  ub << 1.0, 1.0, 0.8, 0.5;
  fv << 1.0, 0.0, 0.0, 0.0;
  Vec v(4), g(4);
  v << 1.0, 1.0, 0.6, 0.5;
  g << 5.0, -1.0, 0.0, -0.2;
  EXPECT_TRUE(kkt_certificate(g, v, ub, fixed, fv).passes(1e-12));
  Vec g_bad = g;
  g_bad[2] = 1e-3;
  EXPECT_FALSE(kkt_certificate(g_bad, v, ub, fixed, fv).passes(1e-9));
  g_bad = g;
  g_bad[1] = 1.0;  // wrong-signed multiplier at the obstacle
  EXPECT_FALSE(kkt_certificate(g_bad, v, ub, fixed, fv).passes(1e-9));
  Vec v_bad = v;
  v_bad[3] = 0.6;
  EXPECT_FALSE(kkt_certificate(g, v_bad, ub, fixed, fv).passes(1e-9));
  v_bad = v;
  v_bad[0] = 0.9;
  EXPECT_FALSE(kkt_certificate(g, v_bad, ub, fixed, fv).passes(1e-9));
}

TEST(OracleSuite, SmallBatchAgrees) {
  const SuiteReport rep = run_oracle_suite(10, 500);
  EXPECT_TRUE(rep.passed()) << rep.lines.front().detail;
}
