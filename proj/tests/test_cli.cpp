#include <gtest/gtest.h>

#include <sys/wait.h>

#include <clocale>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "phasefrac/output.hpp"
#include "phasefrac/scenario.hpp"

namespace fs = std::filesystem;
using namespace phasefrac;

namespace {

const std::string kScenarios = PHASEFRAC_SCENARIO_DIR;

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(PHASEFRAC_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("phasefrac_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

Json base_scenario() {
  return Json::parse(slurp(kScenarios + "/quiescent_1d.json"));
}

// Minimal legacy-VTK reader: checks the section structure and counts.
struct VtkSummary {
  int points = 0, cells = 0, cell_types = 0, point_data = 0;
  std::map<std::string, int> arrays;  // name -> value rows read
};

VtkSummary read_vtk(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  VtkSummary s;
  std::getline(in, line);
  EXPECT_EQ(line, "# vtk DataFile Version 3.0");
  std::getline(in, line);  // title
  std::getline(in, line);
  EXPECT_EQ(line, "ASCII");
  std::getline(in, line);
  EXPECT_EQ(line, "DATASET UNSTRUCTURED_GRID");
  std::string key;
  while (in >> key) {
    if (key == "POINTS") {
      std::string type;
      in >> s.points >> type;
      for (int i = 0; i < 3 * s.points; ++i) {
        double x;
        EXPECT_TRUE(static_cast<bool>(in >> x));
      }
    } else if (key == "CELLS") {
      int size = 0;
      in >> s.cells >> size;
      int read = 0;
      for (int c = 0; c < s.cells; ++c) {
        int k;
        in >> k;
        ++read;
        for (int a = 0; a < k; ++a) {
          int id;
          in >> id;
          EXPECT_GE(id, 0);
          EXPECT_LT(id, s.points);
          ++read;
        }
      }
      EXPECT_EQ(read, size);
    } else if (key == "CELL_TYPES") {
      in >> s.cell_types;
      for (int c = 0; c < s.cell_types; ++c) {
        int t;
        in >> t;
        EXPECT_TRUE(t == 3 || t == 5);
      }
    } else if (key == "POINT_DATA") {
      in >> s.point_data;
    } else if (key == "SCALARS") {
      std::string name, type, lut, lut_name;
      int comps;
      in >> name >> type >> comps >> lut >> lut_name;
      EXPECT_EQ(lut, "LOOKUP_TABLE");
      for (int i = 0; i < s.point_data; ++i) {
        double x;
        EXPECT_TRUE(static_cast<bool>(in >> x));
      }
      s.arrays[name] = s.point_data;
    } else if (key == "VECTORS") {
      std::string name, type;
      in >> name >> type;
      for (int i = 0; i < 3 * s.point_data; ++i) {
        double x;
        EXPECT_TRUE(static_cast<bool>(in >> x));
      }
      s.arrays[name] = s.point_data;
    } else {
      ADD_FAILURE() << "unexpected VTK section " << key;
      break;
    }
  }
  return s;
}

}  // namespace

TEST(Scenario, AllBundledParse) {
  for (const auto& e : fs::directory_iterator(kScenarios)) {
    if (e.path().extension() != ".json") continue;
    EXPECT_NO_THROW(load_scenario(e.path().string())) << e.path();
  }
}

TEST(Scenario, SchemaErrors) {
  auto expect_error = [](const Json& j, const std::string& fragment) {
    try {
      parse_scenario(j);
      ADD_FAILURE() << "accepted invalid scenario (" << fragment << ")";
    } catch (const ConfigError& e) {
      EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
    }
  };
  Json j = base_scenario();
  j["colour"] = "blue";
  expect_error(j, "unknown key 'colour'");
  j = base_scenario();
  j.erase("time");
  expect_error(j, "missing required key 'time'");
  j = base_scenario();
  j["material"]["mu"] = "soft";
  expect_error(j, "wrong type");
  j = base_scenario();
  j["material"]["mu"] = -1.0;
  expect_error(j, "mu");
  j = base_scenario();
  j["dissipation"] = Json{{"mode", "rate"}, {"k", 1}, {"alphas", {0.0, 1.0}}};
  expect_error(j, "alpha_0");
  j = base_scenario();
  j["mesh"]["boundary"]["left"] = {"D1"};
  expect_error(j, "exactly one of");
  j = base_scenario();
  j["loading"] = Json{{"f", {{{"profile", "uniform"}, {"direction", {1.0}},
                              {"time", {{"kind", "wobble"}}}}}}};
  expect_error(j, "wobble");
  j = base_scenario();
  j["time"]["n"] = 0;
  expect_error(j, "time steps");
  j = base_scenario();
  j["initial"] = Json{{"v0", 1.5}};
  EXPECT_THROW(load_scenario("/nonexistent/file.json"), ConfigError);
  EXPECT_THROW(parse_scenario(j).make_simulation(), ConfigError);
}

TEST(Csv, LocaleIndependentNumbers) {
  const char* previous = std::setlocale(LC_ALL, nullptr);
  const std::string saved = previous ? previous : "C";
  for (const char* loc : {"de_DE.UTF-8", "fr_FR.UTF-8", "C"}) {
    if (!std::setlocale(LC_ALL, loc)) continue;
    EXPECT_EQ(format_number(0.5), "0.5");
    EXPECT_EQ(format_number(-1234.25), "-1234.25");
  }
  std::setlocale(LC_ALL, saved.c_str());
  // shortest round-trip representation
  const double x = 0.1 + 0.2;
  EXPECT_EQ(std::stod(format_number(x)), x);
}

TEST(Cli, QuiescentRunHasConstantRows) {
  const fs::path dir = scratch("quiet");
  ASSERT_EQ(run_cli("simulate " + kScenarios + "/quiescent_1d.json --output " + dir.string(),
                    dir / "log.txt"),
            0)
      << slurp(dir / "log.txt");
  const auto rows = read_csv(dir / "ledger.csv");
  ASSERT_GE(rows.size(), 3u);
  EXPECT_EQ(rows[0], ledger_columns());
  // energies match the initial row; solver columns match from the first step on
  for (std::size_t i = 2; i < rows.size(); ++i) {
    for (std::size_t c = 2; c < rows[i].size(); ++c) EXPECT_EQ(rows[i][c], rows[2][c]);
    for (std::size_t c = 2; c <= 8; ++c) EXPECT_EQ(rows[i][c], rows[1][c]);
  }
}

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch("codes");
  Json j = base_scenario();
  j.erase("material");
  { std::ofstream(dir / "missing.json") << j.dump(); }
  EXPECT_EQ(run_cli("simulate " + (dir / "missing.json").string() + " --output " + dir.string(),
                    dir / "log.txt"),
            2);
  EXPECT_NE(slurp(dir / "log.txt").find("material"), std::string::npos);
  { std::ofstream(dir / "broken.json") << "{ not json"; }
  EXPECT_EQ(run_cli("simulate " + (dir / "broken.json").string(), dir / "log.txt"), 2);
  EXPECT_EQ(run_cli("verify nonsense", dir / "log.txt"), 1);
  EXPECT_EQ(run_cli("", dir / "log.txt"), 1);
  EXPECT_EQ(run_cli("simulate", dir / "log.txt"), 1);
  EXPECT_EQ(run_cli("verify fd", dir / "log.txt"), 0);
  EXPECT_NE(slurp(dir / "log.txt").find("PASS"), std::string::npos);
  // a CG budget of one iteration cannot solve the displacement step
  j = Json::parse(slurp(kScenarios + "/plate_pull_2d.json"));
  j["solver"] = Json{{"cg_max_iter", 1}};
  { std::ofstream(dir / "starved.json") << j.dump(); }
  EXPECT_EQ(run_cli("simulate " + (dir / "starved.json").string() + " --output " + dir.string(),
                    dir / "log.txt"),
            3);
  // a KKT tolerance below what the phase step reaches is reported as an invariant failure
  j = Json::parse(slurp(kScenarios + "/plate_notch_2d.json"));
  j["solver"] = Json{{"vstep_kkt_tol", 1e-30}};
  j["time"]["n"] = 5;
  { std::ofstream(dir / "strict.json") << j.dump(); }
  EXPECT_EQ(run_cli("simulate " + (dir / "strict.json").string() + " --output " + dir.string(),
                    dir / "log.txt"),
            4);
}

TEST(Cli, GoldenLedger) {
  const fs::path dir = scratch("golden");
  ASSERT_EQ(run_cli("simulate " + kScenarios + "/bar_pull_1d.json --output " + dir.string(),
                    dir / "log.txt"),
            0);
  const auto got = read_csv(dir / "ledger.csv");
  const auto want = read_csv(PHASEFRAC_GOLDEN_DIR "/bar_pull_1d.csv");
  ASSERT_EQ(got.size(), want.size());
  EXPECT_EQ(got[0], want[0]);
  for (std::size_t r = 1; r < want.size(); ++r) {
    ASSERT_EQ(got[r].size(), want[r].size());
    for (std::size_t c = 0; c < want[r].size(); ++c)
      EXPECT_NEAR(std::stod(got[r][c]), std::stod(want[r][c]), 1e-9)
          << "row " << r << " column " << want[0][c];
  }
}

TEST(Cli, GoldenFirstStepsByDenseRecomputation) {
  // Rebuild the first two displacement steps of bar_pull_1d from dense
  // matrices and compare the kinetic/elastic columns of the golden file.
  const Scenario sc = load_scenario(kScenarios + "/bar_pull_1d.json");
  Simulation sim = sc.make_simulation();
  const auto want = read_csv(PHASEFRAC_GOLDEN_DIR "/bar_pull_1d.csv");
  const Mesh& m = sim.discretization().mesh;
  const int n = m.node_count();
  const double tau = sim.tau();
  const double h = 1.0 / (n - 1);
  // dense P1 mass and unit stiffness on a uniform grid
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n), S = Eigen::MatrixXd::Zero(n, n);
  for (int e = 0; e + 1 < n; ++e) {
    M(e, e) += h / 3;
    M(e + 1, e + 1) += h / 3;
    M(e, e + 1) += h / 6;
    M(e + 1, e) += h / 6;
    S(e, e) += 1 / h;
    S(e + 1, e + 1) += 1 / h;
    S(e, e + 1) -= 1 / h;
    S(e + 1, e) -= 1 / h;
  }
  const double eta = 1e-3;
  auto stiffness = [&](const Vec& v) {
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n);
    for (int e = 0; e + 1 < n; ++e) {
      auto b = [&](double s) { return std::max(s, 0.0) * std::max(s, 0.0) + eta; };
      const double c = 0.5 * (b(v[e]) + b(v[e + 1])) / h;  // modulus 2 mu + lambda = 1
      K(e, e) += c;
      K(e + 1, e + 1) += c;
      K(e, e + 1) -= c;
      K(e + 1, e) -= c;
    }
    return K;
  };
  Vec x(n);
  for (int i = 0; i < n; ++i) x[i] = i * h;
  // ends follow w1 = 1.5 t x, start at rest in the lifted state
  Vec u = Vec::Zero(n), udot = 1.5 * x, v = Vec::Ones(n);
  for (int step = 1; step <= 2; ++step) {
    const double t = step * tau;
    const Eigen::MatrixXd K = stiffness(v);
    const Eigen::MatrixXd A = M / (tau * tau) + K;
    Vec rhs = M * (u + tau * udot) / (tau * tau);
    Vec next = Vec::Zero(n);
    next[0] = 0.0;
    next[n - 1] = 1.5 * t;
    rhs -= A.col(n - 1) * next[n - 1];
    const Vec inner = A.block(1, 1, n - 2, n - 2).ldlt().solve(rhs.segment(1, n - 2));
    next.segment(1, n - 2) = inner;
    udot = (next - u) / tau;
    u = next;
    sim.step();
    EXPECT_LT((sim.state().u - u).cwiseAbs().maxCoeff(), 1e-10);
    const double kinetic = 0.5 * udot.dot(M * udot);
    const double elastic = 0.5 * u.dot(stiffness(sim.state().v) * u);
    EXPECT_NEAR(std::stod(want[step + 1][2]), kinetic, 1e-9);
    EXPECT_NEAR(std::stod(want[step + 1][3]), elastic, 1e-9);
    v = sim.state().v;
  }
}

TEST(Cli, SnapshotsAreValidVtk) {
  const fs::path dir = scratch("vtk");
  ASSERT_EQ(run_cli("simulate " + kScenarios + "/plate_pull_2d.json --n 10 --snapshots 5 --output " +
                        dir.string(),
                    dir / "log.txt"),
            0);
  for (const char* name : {"fields_0000.vtk", "fields_0001.vtk", "fields_0002.vtk"}) {
    ASSERT_TRUE(fs::exists(dir / name)) << name;
    const VtkSummary s = read_vtk(dir / name);
    EXPECT_EQ(s.points, 81);
    EXPECT_EQ(s.cells, 128);
    EXPECT_EQ(s.cell_types, 128);
    EXPECT_EQ(s.point_data, 81);
    EXPECT_EQ(s.arrays.count("v"), 1u);
    EXPECT_EQ(s.arrays.count("u"), 1u);
    EXPECT_EQ(s.arrays.count("udot"), 1u);
  }
  EXPECT_FALSE(fs::exists(dir / "fields_0003.vtk"));
  const fs::path dir1 = scratch("vtk1d");
  ASSERT_EQ(run_cli("simulate " + kScenarios + "/bar_pull_1d.json --n 4 --snapshots 4 --output " +
                        dir1.string(),
                    dir1 / "log.txt"),
            0);
  const VtkSummary s1 = read_vtk(dir1 / "fields_0001.vtk");
  EXPECT_EQ(s1.points, 41);
  EXPECT_EQ(s1.cells, 40);
}

TEST(Cli, RunsAreByteIdentical) {
  const fs::path a = scratch("idem_a"), b = scratch("idem_b");
  for (const fs::path& d : {a, b})
    ASSERT_EQ(run_cli("simulate " + kScenarios + "/plate_custom_2d.json --snapshots 50 --output " +
                          d.string(),
                      d / "log.txt"),
              0);
  EXPECT_EQ(slurp(a / "ledger.csv"), slurp(b / "ledger.csv"));
  EXPECT_EQ(slurp(a / "fields_0001.vtk"), slurp(b / "fields_0001.vtk"));
}

TEST(Cli, ProbeCommand) {
  const fs::path dir = scratch("probe");
  {
    std::ofstream(dir / "probe.json")
        << R"({"epsilon": 0.05, "speed": {"kind": "constant", "value": 0.5}, "resolution": 64,
              "times": [0.0, 0.5]})";
  }
  ASSERT_EQ(run_cli("probe " + (dir / "probe.json").string(), dir / "out.txt"), 0);
  const std::string out = slurp(dir / "out.txt");
  EXPECT_NE(out.find("t,speed,rate_norm2,predicted,ratio"), std::string::npos);
  { std::ofstream(dir / "bad.json") << R"({"times": [0.0], "colour": 1})"; }
  EXPECT_EQ(run_cli("probe " + (dir / "bad.json").string(), dir / "out.txt"), 2);
}
