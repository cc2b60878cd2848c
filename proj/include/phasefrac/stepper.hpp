#pragma once

// Staggered time marching: per step a displacement solve with the phase field
// frozen, then the constrained phase-field minimization with the displacement
// frozen. Every step appends a ledger row with the energy terms and the
// certified discrete properties.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "phasefrac/assembly.hpp"
#include "phasefrac/errors.hpp"
#include "phasefrac/model.hpp"
#include "phasefrac/solvers.hpp"

namespace phasefrac {

struct SimulationConfig {
  double T = 1.0;
  int n = 100;
  SolverConfig solver;
  /// Energy inequality tolerance relative to the running energy scale.
  double energy_rel_tol = 1e-8;
  /// Required relative residual of the discrete momentum balance.
  double u_residual_tol = 1e-9;

  double tau() const { return T / n; }

  void validate() const {
    if (!(T > 0.0)) throw ConfigError("final time T must be positive");
    if (n < 1) throw ConfigError("number of time steps must be at least 1");
    if (!(energy_rel_tol > 0.0) || !(u_residual_tol > 0.0))
      throw ConfigError("certification tolerances must be positive");
    solver.validate();
  }
};

struct State {
  int j = 0;
  double t = 0.0;
  Vec u;       // u^j
  Vec u_prev;  // u^{j-1} (u^0 - tau u^1 at j = 0)
  Vec udot;    // (u^j - u^{j-1}) / tau, u^1 at j = 0
  Vec v;       // v^j
};

struct LedgerRow {
  int j = 0;
  double t = 0.0;
  double kinetic = 0.0;
  double elastic = 0.0;
  double surface = 0.0;
  double dissipation = 0.0;            // sum tau G_k(dv)
  double work = 0.0;                   // discrete total work from 0 to t
  double numerical_dissipation = 0.0;  // sum tau^2 D
  double slack = 0.0;                  // RHS - LHS of the discrete energy inequality
  double energy_scale = 0.0;
  double balance = 0.0;  // |F + sum tau G - F0 - W| when certified, else F0 + W - F - sum tau G
  bool balance_certified = false;
  double pointwise_identity = 0.0;  // dE[dv] + dH[dv] + G(dv)
  int active_nodes = 0;
  double v_min = 0.0;
  double v_max = 0.0;
  double u_residual = 0.0;
  KktCertificate kkt;
  int cg_iterations = 0;
  int vstep_iterations = 0;
  double velocity_norm = 0.0;     // ||du||_{L2}
  double displacement_h1 = 0.0;   // ||u||_{H1}
  double phase_h1 = 0.0;          // ||v||_{H1}

  double total_energy() const { return kinetic + elastic + surface; }
};

/// RHS - LHS of the discrete energy inequality at row j, assembled from the
/// stored terms.
inline double check_discrete_energy_inequality(const std::vector<LedgerRow>& ledger, int j) {
  const LedgerRow& r = ledger.at(static_cast<std::size_t>(j));
  const double f0 = ledger.front().total_energy();
  return f0 + r.work - r.total_energy() - r.dissipation - r.numerical_dissipation;
}

/// Energy-dissipation balance residual at row j. In the certified regime
/// this is |F + sum tau G - F0 - W|; otherwise only the one-sided gap
/// F0 + W - F - sum tau G is meaningful and is returned signed.
inline double check_balance_residual(const std::vector<LedgerRow>& ledger, int j, bool certified) {
  const LedgerRow& r = ledger.at(static_cast<std::size_t>(j));
  const double gap = ledger.front().total_energy() + r.work - r.total_energy() - r.dissipation;
  return certified ? std::abs(gap) : gap;
}

/// max_j (||du|| + ||u||_H1 + ||v||_H1) + sum tau G(dv) + sum tau^2 D
inline double a_priori_bound(const std::vector<LedgerRow>& ledger) {
  double peak = 0.0;
  for (const auto& r : ledger)
    peak = std::max(peak, r.velocity_norm + r.displacement_h1 + r.phase_h1);
  return peak + ledger.back().dissipation + ledger.back().numerical_dissipation;
}

struct CompatibilityResult {
  bool passed = true;
  Vec v0;
  double max_change = 0.0;
  KktCertificate certificate;
};

/// Checks that v0 minimizes E(u0, .) + H among v <= v0 with v = w2 on D2; if
/// not, returns that minimizer as the repaired initial phase field.
inline CompatibilityResult precheck_compatibility_v0(const Discretization& disc,
                                                     const MaterialModel& mat, const Vec& u0,
                                                     const Vec& v0, const Vec& w2,
                                                     const SolverConfig& config,
                                                     double tol = 1e-8) {
  const Vec omega = nodal_strain_weights(disc.mesh, element_strain_energy(disc.mesh, mat, u0));
  VStepObjective obj(disc, mat, omega, v0, 1.0, nullptr);
  const std::vector<bool> fixed = disc.mesh.tagged_mask(Tag::D2);
  const VStepResult r = v_step(obj, fixed, w2, config);
  CompatibilityResult out;
  out.v0 = r.v;
  out.max_change = (r.v - v0).cwiseAbs().maxCoeff();
  out.passed = out.max_change <= tol;
  out.certificate = r.certificate;
  if (out.passed) out.v0 = v0;
  return out;
}

class Simulation {
 public:
  using StepCallback = std::function<void(const State&, const LedgerRow&)>;

  Simulation(Discretization disc, MaterialModel mat, BoundaryData data, SimulationConfig cfg)
      : disc_(std::move(disc)), mat_(std::move(mat)), data_(std::move(data)), cfg_(cfg) {
    if (mat_.dim != disc_.dim()) throw ConfigError("material and mesh dimensions differ");
    mat_.validate();
    cfg_.validate();
    data_.validate(disc_.mesh);
    if (!mat_.stiffness_scale.empty() &&
        static_cast<int>(mat_.stiffness_scale.size()) != disc_.mesh.element_count())
      throw ConfigError("stiffness scale needs one factor per element");
    if (mat_.rate_dissipation)
      dissipation_ = assemble_dissipation_ops(disc_.mesh, mat_.k, mat_.alphas);
    fixed_dofs_ = node_dofs(disc_.mesh.tagged_nodes(Tag::D1), disc_.dim());
    phase_fixed_ = disc_.mesh.tagged_mask(Tag::D2);
    vector_stiffness_ = vector_laplacian();
    initialize();
  }

  const Discretization& discretization() const { return disc_; }
  const MaterialModel& material() const { return mat_; }
  const SimulationConfig& config() const { return cfg_; }
  const State& state() const { return state_; }
  const std::vector<LedgerRow>& ledger() const { return ledger_; }
  const std::vector<std::string>& violations() const { return violations_; }
  const std::optional<CompatibilityResult>& compatibility() const { return compatibility_; }
  const DissipationOperators* dissipation() const {
    return dissipation_ ? &*dissipation_ : nullptr;
  }
  const std::vector<bool>& phase_fixed() const { return phase_fixed_; }
  bool finished() const { return state_.j >= cfg_.n; }
  double tau() const { return cfg_.tau(); }

  /// True when the nonnegativity of v is guaranteed (k = 0 or no rate term,
  /// prototype law, nonnegative initial and boundary phase field).
  bool sign_preservation_applies() const { return sign_preserving_; }

  void run(const StepCallback& on_step = {}) {
    while (!finished()) {
      step();
      if (on_step) on_step(state_, ledger_.back());
    }
  }

  void step() {
    if (finished()) throw ConfigError("simulation already reached the final time");
    const Mesh& mesh = disc_.mesh;
    const double tau = cfg_.tau();
    const int j = state_.j + 1;
    const double t_prev = state_.t;
    const double t = j * tau;

    const SparseOperator k_prev = assemble_degraded_stiffness(mesh, mat_, state_.v);
    const Vec lift = data_.lift(mesh, t);
    const Vec body = data_.body_load(disc_, t_prev, t);
    const Vec dual = data_.dual_load(disc_, t);
    const Vec load = body + dual;

    const UStepInput uin{disc_.vector_mass, k_prev, load, lift, fixed_dofs_,
                         state_.u, state_.udot, tau};
    const UStepResult us = u_step(uin, cfg_.solver);
    const Vec udot = (us.u - state_.u) / tau;
    const Vec uddot = (udot - state_.udot) / tau;

    const Vec omega = nodal_strain_weights(mesh, element_strain_energy(mesh, mat_, us.u));
    const SparseOperator* g_op = dissipation_ ? &dissipation_->combined : nullptr;
    const VStepObjective obj(disc_, mat_, omega, state_.v, tau, g_op);
    const VStepResult vs = v_step(obj, phase_fixed_, data_.w2, cfg_.solver);
    const Vec dv = (vs.v - state_.v) / tau;

    WorkNode node{us.u, udot, lift, (lift - work_prev_.lift) / tau, dual};
    const double dwork = total_work_increment(work_prev_, node, t_prev, t, body, k_prev,
                                              disc_.vector_mass);

    const LedgerRow& last = ledger_.back();
    LedgerRow row;
    row.j = j;
    row.t = t;
    fill_energies(row, us.u, udot, vs.v);
    const double g_dv = dissipation_ ? dissipation_->energy(dv) : 0.0;
    row.dissipation = last.dissipation + tau * g_dv;
    const double eps = mat_.epsilon;
    const double d = 0.5 * uddot.dot(disc_.vector_mass * uddot) +
                     0.5 * udot.dot(k_prev * udot) +
                     dv.dot(disc_.scalar_mass * dv) / (4.0 * eps) +
                     eps * dv.dot(disc_.scalar_stiffness * dv);
    row.numerical_dissipation = last.numerical_dissipation + tau * tau * d;
    row.work = last.work + dwork;
    row.energy_scale = std::max({last.energy_scale, row.total_energy(), std::abs(row.work),
                                 row.dissipation, row.numerical_dissipation});
    row.balance_certified = mat_.balance_certified();
    row.pointwise_identity = elastic_energy_v_derivative(mesh, mat_, us.u, vs.v, dv) +
                             surface_energy_derivative(disc_, vs.v, dv, eps) + g_dv;
    row.active_nodes = vs.certificate.active_nodes;
    row.u_residual = us.relative_residual;
    row.kkt = vs.certificate;
    row.cg_iterations = us.iterations;
    row.vstep_iterations = vs.iterations;
    ledger_.push_back(row);
    ledger_.back().slack = check_discrete_energy_inequality(ledger_, j);
    ledger_.back().balance = check_balance_residual(ledger_, j, row.balance_certified);

    certify(state_.v, vs.v, ledger_.back());

    state_.j = j;
    state_.t = t;
    state_.u_prev = state_.u;
    state_.u = us.u;
    state_.udot = udot;
    state_.v = vs.v;
    work_prev_ = std::move(node);
  }

 private:
  void initialize() {
    const Mesh& mesh = disc_.mesh;
    if (!mat_.rate_dissipation) {
      compatibility_ =
          precheck_compatibility_v0(disc_, mat_, data_.u0, data_.v0, data_.w2, cfg_.solver);
      data_.v0 = compatibility_->v0;
    }
    sign_preserving_ = mat_.degradation.is_prototype() && (!mat_.rate_dissipation || mat_.k == 0) &&
                       data_.v0.minCoeff() >= 0.0;
    for (int n : mesh.tagged_nodes(Tag::D2))
      if (data_.w2[n] < 0.0) sign_preserving_ = false;

    const double tau = cfg_.tau();
    state_.j = 0;
    state_.t = 0.0;
    state_.u = data_.u0;
    state_.udot = data_.u1;
    state_.u_prev = data_.u0 - tau * data_.u1;
    state_.v = data_.v0;

    work_prev_ = WorkNode{data_.u0, data_.u1, data_.lift(mesh, 0.0), data_.lift(mesh, 0.0, 1),
                          data_.dual_load(disc_, 0.0)};
    LedgerRow row;
    fill_energies(row, state_.u, state_.udot, state_.v);
    row.energy_scale = std::max(0.0, row.total_energy());
    row.balance_certified = mat_.balance_certified();
    ledger_.assign(1, row);
  }

  void fill_energies(LedgerRow& row, const Vec& u, const Vec& udot, const Vec& v) const {
    row.kinetic = kinetic_energy(disc_.vector_mass, udot);
    row.elastic = elastic_energy(disc_.mesh, mat_, u, v);
    row.surface = surface_energy(disc_, v, mat_.epsilon);
    row.v_min = v.minCoeff();
    row.v_max = v.maxCoeff();
    row.velocity_norm = std::sqrt(udot.dot(disc_.vector_mass * udot));
    row.displacement_h1 =
        std::sqrt(u.dot(disc_.vector_mass * u) + u.dot(vector_stiffness_ * u));
    row.phase_h1 =
        std::sqrt(v.dot(disc_.scalar_mass * v) + v.dot(disc_.scalar_stiffness * v));
  }

  void certify(const Vec& v_prev, const Vec& v, const LedgerRow& row) {
    const std::string at = " at step " + std::to_string(row.j);
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (v[i] > v_prev[i]) {
        violations_.push_back("irreversibility violated at node " + std::to_string(i) + at);
        break;
      }
    }
    if (row.v_max > 1.0) violations_.push_back("phase field exceeds 1" + at);
    if (sign_preserving_ && row.v_min < 0.0)
      violations_.push_back("phase field became negative" + at);
    if (!(row.u_residual <= cfg_.u_residual_tol))
      violations_.push_back("momentum residual " + std::to_string(row.u_residual) + at);
    if (!row.kkt.passes(cfg_.solver.vstep_kkt_tol))
      violations_.push_back("phase-field KKT certificate failed" + at);
    if (!(row.slack >= -cfg_.energy_rel_tol * row.energy_scale))
      violations_.push_back("discrete energy inequality violated (slack " +
                            std::to_string(row.slack) + ")" + at);
  }

  SparseOperator vector_laplacian() const {
    const int d = disc_.dim();
    const SparseOperator& s = disc_.scalar_stiffness;
    Triplets t;
    for (int col = 0; col < s.outerSize(); ++col)
      for (SparseOperator::InnerIterator it(s, col); it; ++it)
        for (int c = 0; c < d; ++c)
          t.emplace_back(static_cast<int>(it.row()) * d + c, static_cast<int>(it.col()) * d + c,
                         it.value());
    SparseOperator out(disc_.displacement_dofs(), disc_.displacement_dofs());
    out.setFromTriplets(t.begin(), t.end());
    return out;
  }

  Discretization disc_;
  MaterialModel mat_;
  BoundaryData data_;
  SimulationConfig cfg_;
  std::optional<DissipationOperators> dissipation_;
  std::optional<CompatibilityResult> compatibility_;
  std::vector<int> fixed_dofs_;
  std::vector<bool> phase_fixed_;
  SparseOperator vector_stiffness_;
  bool sign_preserving_ = false;
  State state_;
  WorkNode work_prev_;
  std::vector<LedgerRow> ledger_;
  std::vector<std::string> violations_;
};

}  // namespace phasefrac
