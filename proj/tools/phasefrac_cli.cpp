// Command-line front end: simulate a scenario, run verification suites, or
// evaluate the crack-tip probe.
//
// Exit codes: 0 ok, 1 usage, 2 configuration, 3 solver, 4 invariant violation.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <Eigen/Core>

#include "phasefrac/output.hpp"
#include "phasefrac/scenario.hpp"
#include "phasefrac/stepper.hpp"
#include "phasefrac/suites.hpp"
#include "phasefrac/verify.hpp"

namespace fs = std::filesystem;
using namespace phasefrac;

namespace {

enum Exit { kOk = 0, kUsage = 1, kConfig = 2, kSolver = 3, kInvariant = 4 };

void apply_thread_env() {
  const char* env = std::getenv("PHASEFRAC_THREADS");
  if (!env) return;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || n < 1)
    throw ConfigError("PHASEFRAC_THREADS must be a positive integer");
  Eigen::setNbThreads(static_cast<int>(n));
}

int simulate(const std::string& path, int n_override, const std::string& out_dir,
             int snapshots_override) {
  Scenario sc = load_scenario(path);
  if (n_override > 0) sc.config.n = n_override;
  if (snapshots_override >= 0) sc.snapshot_every = snapshots_override;
  const fs::path dir(out_dir);
  fs::create_directories(dir);

  Simulation sim = sc.make_simulation();
  if (const auto& c = sim.compatibility(); c && !c->passed)
    std::cerr << "note: initial phase field repaired (max change "
              << format_number(c->max_change) << ")\n";

  std::ofstream ledger(dir / "ledger.csv", std::ios::binary);
  if (!ledger) throw ConfigError("cannot write " + (dir / "ledger.csv").string());
  write_ledger_header(ledger);
  write_ledger_row(ledger, sim.ledger().front());
  int snapshot = 0;
  auto snap = [&](const State& s) {
    std::ofstream f(dir / snapshot_name(snapshot++), std::ios::binary);
    write_vtk(f, sim.discretization().mesh, s);
  };
  if (sc.snapshot_every > 0) snap(sim.state());
  sim.run([&](const State& s, const LedgerRow& row) {
    write_ledger_row(ledger, row);
    if (sc.snapshot_every > 0 && s.j % sc.snapshot_every == 0) snap(s);
  });

  const LedgerRow& last = sim.ledger().back();
  std::cout << sc.name << ": " << sim.ledger().size() - 1 << " steps, final F "
            << format_number(last.total_energy()) << ", slack " << format_number(last.slack)
            << ", balance " << format_number(last.balance)
            << (last.balance_certified ? "" : " (uncertified)") << '\n';
  if (!sim.violations().empty()) {
    for (const auto& v : sim.violations()) std::cerr << "invariant: " << v << '\n';
    return kInvariant;
  }
  return kOk;
}

int verify(const std::string& suite) {
  SuiteReport rep;
  if (suite == "oracle") rep = run_oracle_suite();
  else if (suite == "fd") rep = run_fd_suite();
  else if (suite == "probe") rep = run_probe_suite();
  else if (suite == "refinement") rep = run_refinement_suite(PHASEFRAC_SCENARIO_DIR);
  else {
    std::cerr << "unknown suite '" << suite << "' (oracle, fd, probe, refinement)\n";
    return kUsage;
  }
  for (const auto& l : rep.lines)
    std::cout << (l.passed ? "PASS  " : "FAIL  ") << l.name << "  [" << l.detail << "]\n";
  return rep.passed() ? kOk : kInvariant;
}

// {"epsilon", "delta", "s0", "speed": <time function>, "resolution",
//  "half_width", "times": [...]}
int probe(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read probe config '" + path + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("probe config is not valid JSON: ") + e.what());
  }
  using namespace detail;
  check_keys(j, "probe", {"epsilon", "delta", "s0", "speed", "resolution", "half_width", "times"});
  TipProfile p;
  p.epsilon = get_or<double>(j, "epsilon", "probe", p.epsilon);
  p.delta = get_or<double>(j, "delta", "probe", p.delta);
  p.s0 = get_or<double>(j, "s0", "probe", p.s0);
  if (j.contains("speed")) p.speed = parse_time(j["speed"], "probe.speed");
  const int res = get_or<int>(j, "resolution", "probe", 64);
  const double hw = get_or<double>(j, "half_width", "probe", 1.0);
  const auto times = get<std::vector<double>>(j, "times", "probe");
  const ProbeReport rep = tip_dissipation_probe(p, res, hw, times);
  if (!rep.window_ok)
    std::cerr << "warning: window cuts the profile support, truncation error about "
              << format_number(rep.truncation) << '\n';
  std::cout << "# C_Phi " << format_number(rep.c_phi) << " (closed form "
            << format_number(rep.c_phi_closed_form) << ")\n";
  std::cout << "t,speed,rate_norm2,predicted,ratio\n";
  for (const auto& r : rep.rows)
    std::cout << format_number(r.t) << ',' << format_number(r.speed) << ','
              << format_number(r.rate_norm2) << ',' << format_number(r.predicted) << ','
              << format_number(r.ratio) << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic phase-field fracture with rate-dependent crack dissipation"};
  app.require_subcommand(1);

  std::string scenario, out_dir = "out";
  int n = 0, snapshots = -1;
  auto* sim_cmd = app.add_subcommand("simulate", "run a scenario and write ledger.csv");
  sim_cmd->add_option("scenario", scenario, "scenario JSON file")->required();
  sim_cmd->add_option("--n", n, "number of time steps (overrides the scenario)");
  sim_cmd->add_option("--output", out_dir, "output directory");
  sim_cmd->add_option("--snapshots", snapshots, "write a VTK snapshot every N steps (0: none)");

  std::string suite;
  auto* ver_cmd = app.add_subcommand("verify", "run a verification suite");
  ver_cmd->add_option("suite", suite, "oracle | fd | probe | refinement")->required();

  std::string probe_cfg;
  auto* probe_cmd = app.add_subcommand("probe", "crack-tip dissipation probe");
  probe_cmd->add_option("config", probe_cfg, "probe JSON file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    apply_thread_env();
    if (*sim_cmd) return simulate(scenario, n, out_dir, snapshots);
    if (*ver_cmd) return verify(suite);
    if (*probe_cmd) return probe(probe_cfg);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kConfig;
  } catch (const SolverError& e) {
    std::cerr << "solver error: " << e.what() << '\n';
    return kSolver;
  } catch (const InvariantViolation& e) {
    std::cerr << "invariant violation: " << e.what() << '\n';
    return kInvariant;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfig;
  }
  return kUsage;
}
