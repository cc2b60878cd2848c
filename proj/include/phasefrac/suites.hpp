#pragma once

// Named verification suites shared by the command-line tool and the
// acceptance runner. Each returns one line per check.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "phasefrac/model.hpp"
#include "phasefrac/output.hpp"
#include "phasefrac/scenario.hpp"
#include "phasefrac/solvers.hpp"
#include "phasefrac/verify.hpp"

namespace phasefrac {

struct CheckLine {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct SuiteReport {
  std::string suite;
  std::vector<CheckLine> lines;

  bool passed() const {
    for (const auto& l : lines)
      if (!l.passed) return false;
    return !lines.empty();
  }
};

/// A random small phase-field step problem (at most 6 free nodes).
struct OracleInstance {
  Discretization disc;
  MaterialModel mat;
  std::optional<DissipationOperators> ops;
  Vec omega, v_prev, w2;
  std::vector<bool> fixed;
  double tau = 0.1;
};

inline OracleInstance random_oracle_instance(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uni = [&](double a, double b) { return a + (b - a) * unit(rng); };
  const int dim = unit(rng) < 0.6 ? 1 : 2;
  const TagSet free_tags{Tag::D1, Tag::N2};
  const TagSet pinned_tags{Tag::D1, Tag::D2};
  BoundarySpec bnd = uniform_boundary(dim, free_tags);
  if (unit(rng) < 0.4) bnd[Face::Left] = pinned_tags;
  Mesh mesh = dim == 1 ? build_structured_mesh(1, {uni(0.5, 2.0)}, {2 + static_cast<int>(rng() % 4)}, bnd)
                       : build_structured_mesh(2, {uni(0.5, 2.0), uni(0.5, 2.0)},
                                               {1 + static_cast<int>(rng() % 2), 1}, bnd);
  OracleInstance inst{Discretization(std::move(mesh)), MaterialModel{}, std::nullopt, {}, {}, {}, {},
                      uni(0.01, 1.0)};
  const Mesh& m = inst.disc.mesh;
  MaterialModel& mat = inst.mat;
  mat.dim = dim;
  mat.mu = uni(0.2, 2.0);
  mat.lambda = dim == 2 ? uni(0.0, 1.0) : 0.0;
  mat.epsilon = uni(0.05, 0.5);
  const double law = unit(rng);
  const double eta = uni(1e-4, 1e-2);
  mat.degradation = law < 0.5   ? DegradationLaw::prototype(eta)
                    : law < 0.75 ? DegradationLaw::power(uni(1.5, 3.0), eta)
                                 : DegradationLaw::exponential(uni(0.5, 3.0), eta);
  mat.rate_dissipation = unit(rng) < 0.8;
  if (mat.rate_dissipation) {
    mat.k = static_cast<int>(rng() % 3);
    mat.alphas.assign(static_cast<std::size_t>(mat.k + 1), 0.0);
    for (auto& a : mat.alphas) a = unit(rng) < 0.3 ? 0.0 : uni(1e-3, 1.0);
    mat.alphas.front() = uni(1e-3, 1.0);
    mat.alphas.back() = uni(1e-3, 1.0);
    inst.ops = assemble_dissipation_ops(m, mat.k, mat.alphas);
  } else {
    mat.k = 0;
    mat.alphas.clear();
  }
  Vec u(m.node_count() * dim);
  const double amp = uni(0.0, 3.0);
  for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = amp * uni(-1.0, 1.0);
  inst.omega = nodal_strain_weights(m, element_strain_energy(m, mat, u));
  inst.fixed = m.tagged_mask(Tag::D2);
  inst.v_prev.resize(m.node_count());
  inst.w2.resize(m.node_count());
  for (int i = 0; i < m.node_count(); ++i) {
    inst.v_prev[i] = uni(0.2, 1.0);
    inst.w2[i] = inst.v_prev[i];
  }
  return inst;
}

inline SuiteReport run_oracle_suite(int instances = 100, std::uint64_t seed = 1) {
  SuiteReport rep{"oracle", {}};
  SolverConfig cfg;
  int agree = 0;
  double worst_gap = 0.0, worst_node = 0.0;
  for (int s = 0; s < instances; ++s) {
    const OracleInstance inst = random_oracle_instance(seed + static_cast<std::uint64_t>(s));
    const VStepObjective obj(inst.disc, inst.mat, inst.omega, inst.v_prev, inst.tau,
                             inst.ops ? &inst.ops->combined : nullptr);
    const VStepResult vs = v_step(obj, inst.fixed, inst.w2, cfg);
    const Vec oracle = brute_force_vstep(obj, inst.mat, inst.fixed, inst.w2);
    const double jv = obj.value(vs.v);
    const double jo = obj.value(oracle);
    const double scale = std::max(1.0, std::abs(obj.value(inst.v_prev)));
    const double gap = std::abs(jv - jo) / scale;
    const double node = (vs.v - oracle).cwiseAbs().maxCoeff();
    worst_gap = std::max(worst_gap, gap);
    worst_node = std::max(worst_node, node);
    if (gap <= 1e-6 && node <= 1e-3 && jv <= jo + 1e-9 * scale) ++agree;
  }
  rep.lines.push_back({"v-step matches brute force", agree == instances,
                       std::to_string(agree) + "/" + std::to_string(instances) +
                           " instances, worst objective gap " + format_number(worst_gap) +
                           ", worst nodal gap " + format_number(worst_node)});
  return rep;
}

inline SuiteReport run_fd_suite(std::uint64_t seed = 7) {
  SuiteReport rep{"fd", {}};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst_e = 0.0, worst_h = 0.0, worst_j = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int dim = trial % 2 == 0 ? 1 : 2;
    Mesh mesh = dim == 1 ? build_structured_mesh(1, {1.0}, {16}, uniform_boundary(1, {Tag::D1, Tag::N2}))
                         : build_structured_mesh(2, {1.0, 1.0}, {6, 6}, uniform_boundary(2, {Tag::D1, Tag::N2}));
    const Discretization disc(std::move(mesh));
    const Mesh& m = disc.mesh;
    MaterialModel mat;
    mat.dim = dim;
    mat.mu = 0.5 + unit(rng);
    mat.lambda = dim == 2 ? unit(rng) : 0.0;
    mat.epsilon = 0.05 + 0.4 * unit(rng);
    mat.degradation = trial % 3 == 0   ? DegradationLaw::prototype(1e-3)
                      : trial % 3 == 1 ? DegradationLaw::power(2.5, 1e-3)
                                       : DegradationLaw::exponential(2.0, 1e-3);
    // smooth fields, v in [0.2, 0.8]
    const double a = 1.0 + 3.0 * unit(rng), b = 1.0 + 3.0 * unit(rng), ph = 6.0 * unit(rng);
    Vec v(m.node_count()), chi(m.node_count()), u(m.node_count() * dim);
    for (int n = 0; n < m.node_count(); ++n) {
      const auto& x = m.nodes[n];
      v[n] = 0.5 + 0.3 * std::sin(a * x[0] + b * x[1] + ph);
      chi[n] = std::cos(b * x[0] - a * x[1]);
      for (int c = 0; c < dim; ++c) u[n * dim + c] = std::sin((c + 1) * a * x[0] + ph) * x[1] + x[0] * (1 + c);
    }
    const double h = 1e-5;
    const double de = elastic_energy_v_derivative(m, mat, u, v, chi);
    worst_e = std::max(worst_e, fd_gradient_check([&](const Vec& w) { return elastic_energy(m, mat, u, w); },
                                                  v, chi, de, h));
    const double dh = surface_energy_derivative(disc, v, chi, mat.epsilon);
    worst_h = std::max(worst_h, fd_gradient_check([&](const Vec& w) { return surface_energy(disc, w, mat.epsilon); },
                                                  v, chi, dh, h));
    const auto ops = assemble_dissipation_ops(m, 1, {0.5, 0.5});
    const Vec omega = nodal_strain_weights(m, element_strain_energy(m, mat, u));
    const VStepObjective obj(disc, mat, omega, Vec::Constant(m.node_count(), 0.9), 0.05, &ops.combined);
    worst_j = std::max(worst_j, fd_gradient_check([&](const Vec& w) { return obj.value(w); }, v, chi,
                                                  obj.gradient(v).dot(chi), h));
  }
  rep.lines.push_back({"dE/dv vs central differences", worst_e < 1e-6,
                       "worst relative error " + format_number(worst_e)});
  rep.lines.push_back({"dH/dv vs central differences", worst_h < 1e-6,
                       "worst relative error " + format_number(worst_h)});
  rep.lines.push_back({"phase-step gradient vs central differences", worst_j < 1e-6,
                       "worst relative error " + format_number(worst_j)});
  return rep;
}

struct ProbeCase {
  std::string label;
  TipProfile profile;
  std::vector<double> times;
};

inline std::vector<ProbeCase> default_probe_cases() {
  TipProfile constant;
  constant.speed = TimeFunction::Constant{0.75};
  TipProfile sinusoid;
  sinusoid.speed = TimeFunction::Sinusoid{0.5, 2.0 * M_PI, 0.0, 0.6};
  const std::vector<double> times{0.0, 0.1, 0.35, 0.6, 0.85};
  return {{"constant speed", constant, times}, {"sinusoidal speed", sinusoid, times}};
}

inline SuiteReport run_probe_suite() {
  SuiteReport rep{"probe", {}};
  for (const auto& pc : default_probe_cases()) {
    for (const auto& [res, tol] : std::vector<std::pair<int, double>>{{64, 0.02}, {256, 0.005}}) {
      const ProbeReport pr = tip_dissipation_probe(pc.profile, res, 1.0, pc.times);
      double worst = 0.0;
      for (const auto& r : pr.rows) worst = std::max(worst, std::abs(r.ratio - 1.0));
      rep.lines.push_back({pc.label + " at " + std::to_string(res) + "^2", worst <= tol,
                           "max |ratio - 1| = " + format_number(worst)});
    }
  }
  TipProfile p;
  const ProbeReport ref = tip_dissipation_probe(p, 8, 1.0, {0.0});
  const double rel = std::abs(ref.c_phi - ref.c_phi_closed_form) / ref.c_phi_closed_form;
  rep.lines.push_back({"reference C_Phi vs polar closed form", rel < 1e-3,
                       "C_Phi " + format_number(ref.c_phi) + " vs " +
                           format_number(ref.c_phi_closed_form)});
  TipProfile fast = p;
  fast.speed = TimeFunction::Constant{2.0};
  const double r1 = tip_dissipation_probe(p, 64, 1.0, {0.3}).rows[0].rate_norm2;
  const double r2 = tip_dissipation_probe(fast, 64, 1.0, {0.3}).rows[0].rate_norm2;
  const double scaling = std::abs(r2 / r1 - 4.0) / 4.0;
  rep.lines.push_back({"doubling the tip speed quadruples the rate norm", scaling < 1e-12,
                       "relative deviation " + format_number(scaling)});
  TipProfile still = p;
  still.speed = TimeFunction::Constant{0.0};
  const auto rest = tip_dissipation_probe(still, 64, 1.0, {0.5}).rows[0];
  rep.lines.push_back({"resting tip has no rate", rest.rate_norm2 == 0.0 && rest.predicted == 0.0,
                       "rate norm " + format_number(rest.rate_norm2)});
  return rep;
}

/// Balance residual trends for scenarios in the certified regime.
/// The scenarios shipped in scenarios/ that exercise loading (the quiescent
/// ones are excluded).
inline const std::vector<std::string>& bundled_scenarios() {
  static const std::vector<std::string> names{
      "bar_pull_1d",     "bar_traction_1d",   "bar_power_k2_1d",  "bar_exponential_1d",
      "bar_notch_1d",    "bar_nodiss_1d",     "plate_pull_2d",    "plate_shear_2d",
      "plate_traction_2d", "plate_notch_2d",  "plate_nodiss_2d",  "plate_custom_2d"};
  return names;
}

struct RefinementCase {
  std::string scenario;
  std::vector<int> ns;
  std::vector<int> refinements;
};

inline std::vector<RefinementCase> default_refinement_cases() {
  return {{"bar_pull_1d", {50, 100, 200, 400}, {0}},
          {"bar_pull_1d", {50, 100, 200}, {0, 1, 2}},
          {"plate_pull_2d", {50, 100, 200, 400}, {0}},
          {"plate_pull_2d", {50, 100, 200}, {0, 1, 2}}};
}

inline SuiteReport run_refinement_suite(const std::filesystem::path& scenario_dir,
                                        const std::vector<RefinementCase>& cases =
                                            default_refinement_cases()) {
  SuiteReport rep{"refinement", {}};
  for (const auto& rc : cases) {
    const Scenario sc = load_scenario((scenario_dir / (rc.scenario + ".json")).string());
    const auto rows = refinement_study(
        [&](int n, int r) { return sc.make_simulation(n, r); }, rc.ns, rc.refinements);
    std::vector<double> balances;
    std::string detail;
    bool certified = true;
    for (const auto& r : rows) {
      balances.push_back(r.balance);
      certified = certified && r.balance_certified;
      detail += (detail.empty() ? "" : ", ") + std::string("n=") + std::to_string(r.n) +
                " r=" + std::to_string(r.refinement) + ": " + format_number(r.balance);
    }
    const std::string label = rc.scenario + (rc.refinements.size() > 1 ? " (mesh + time)" : " (time)");
    rep.lines.push_back({label + " balance residual decreasing",
                         certified && monotone_decreasing(balances, 0.05), detail});
  }
  return rep;
}

}  // namespace phasefrac
