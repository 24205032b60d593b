#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "pilotwave/cli.hpp"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace pilotwave;
using namespace pilotwave::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pilotwave_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(PILOTWAVE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

ExperimentConfig config(const std::string& exp, const FlagMap& flags, const fs::path& out) {
  return load_config(std::nullopt, exp, flags, 7, out.string());
}

}  // namespace

TEST_CASE("exit codes per error category") {
  CHECK(exit_code_for(ErrorCategory::config) == exit_invalid_input);
  CHECK(exit_code_for(ErrorCategory::validation) == exit_validation);
  CHECK(exit_code_for(ErrorCategory::physics) == exit_physics);
  CHECK(exit_code_for(ErrorCategory::numerical) == exit_numerical);
  CHECK(exit_code_for(ErrorCategory::io) == exit_io);
}

TEST_CASE("registry lists every experiment") {
  for (const char* n : {"pair-decay", "imaging", "equivariance", "arrival-time", "measurement",
                        "dirac-demo", "dkp-energyflow", "energy-shell", "field-modes"})
    CHECK(find_experiment(n).name == n);
  CHECK_THROWS_AS(find_experiment("teleport"), Error);
}

TEST_CASE("config loading fills defaults and rejects unknown keys") {
  const fs::path d = scratch("config");
  const ExperimentConfig c = config("pair-decay", {{"n", "12"}, {"alpha", "0.5"}}, d);
  CHECK(c.parameters.at("n") == 12);
  CHECK(c.parameters.at("alpha") == 0.5);
  CHECK(c.parameters.at("m1") == 1.0);
  CHECK(c.seed == 7);
  CHECK_THROWS_AS(config("pair-decay", {{"colour", "red"}}, d), Error);
  CHECK_THROWS_AS(config("pair-decay", {{"n", "\"many\""}}, d), Error);

  const fs::path file = d / "c.json";
  std::ofstream(file) << R"({"experiment": "energy-shell", "parameters": {"points": 11}, "seed": 3})";
  const ExperimentConfig f = load_config(file.string(), std::nullopt, {{"points", "21"}}, std::nullopt,
                                         std::nullopt);
  CHECK(f.experiment == "energy-shell");
  CHECK(f.parameters.at("points") == 21);
  CHECK(f.seed == 3);
}

TEST_CASE("validation collects every issue") {
  const fs::path d = scratch("validate");
  const ValidationReport r =
      validate(config("pair-decay", {{"alpha", "-1"}, {"n", "0"}}, d));
  CHECK(r.issues.size() >= 2);
  CHECK(r.exit_code() == exit_validation);

  const ValidationReport off = validate(config(
      "dkp-energyflow",
      {{"terms", R"([{"coef": 1, "p": [0.3, 0, 0], "E": 5.0}])"}}, d));
  REQUIRE_FALSE(off.ok());
  CHECK(off.exit_code() == exit_physics);

  const ValidationReport lens = validate(config("imaging", {{"f", "10"}}, d));
  REQUIRE(lens.ok());
  CHECK(lens.derived.at("S") == doctest::Approx(20.0));
  CHECK(lens.derived.at("Sp") == doctest::Approx(20.0));
  CHECK(lens.derived.at("lens_equation_residual").get<double>() < 1e-12);
}

TEST_CASE("trajectory csv round trip") {
  const fs::path p = scratch("traj") / "t.csv";
  TrajectoryWriter w(p.string());
  w.row(0, 0, 0.0, Vec3(1, 2, 3), "ok");
  w.row(0, 1, 0.5, Vec3(-1.25e-7, 0.1, 1e9), "ok");
  w.row(3, 0, 1.0 / 3, Vec3(0, 0, 0), "node_encounter");
  w.close();
  const auto rows = read_trajectory_csv(p.string());
  REQUIRE(rows.size() == 3);
  CHECK(rows[1].x == -1.25e-7);
  CHECK(rows[1].z == 1e9);
  CHECK(rows[2].t == 1.0 / 3);
  CHECK(rows[2].run_id == 3);
  CHECK(rows[2].status == "node_encounter");
}

TEST_CASE("curve, field and json round trips") {
  const fs::path d = scratch("files");
  Curve c;
  c.header["kind"] = "test";
  c.columns = {"x", "y"};
  c.rows = {{0.1, 1.0 / 7}, {2.0, -3e-300}};
  write_curve_csv((d / "c.csv").string(), c);
  const Curve c2 = read_curve_csv((d / "c.csv").string());
  CHECK(c2.header.at("kind") == "test");
  CHECK(c2.columns == c.columns);
  CHECK(c2.rows == c.rows);

  Field2D f;
  f.quantity = "rho";
  f.nx = 3;
  f.ny = 2;
  f.x_lo = -1;
  f.x_hi = 1;
  f.y_lo = 0;
  f.y_hi = 2;
  f.data = {1, 2, 3, 4, 5, 6.5};
  write_field((d / "f.bin").string(), f);
  const Field2D f2 = read_field((d / "f.bin").string());
  CHECK(f2.quantity == "rho");
  CHECK(f2.nx == 3);
  CHECK(f2.data == f.data);
  CHECK(fs::file_size(d / "f.bin") == 6 * sizeof(double));

  write_json((d / "stats.json").string(), {{"schema_version", kSchemaVersion}, {"experiment", "x"}, {"seed", 1}});
  CHECK(read_stats((d / "stats.json").string()).at("experiment") == "x");
  write_json((d / "bad.json").string(), {{"schema_version", 99}, {"experiment", "x"}, {"seed", 1}});
  CHECK_THROWS_AS(read_stats((d / "bad.json").string()), Error);
}

TEST_CASE("pair-decay run conserves the centre and is deterministic") {
  const fs::path a = scratch("run_a"), b = scratch("run_b");
  const FlagMap flags{{"n", "100"}, {"t_final", "10"}};
  const RunResult ra = run(config("pair-decay", flags, a));
  run(config("pair-decay", flags, b));
  const json m = read_manifest((a / "manifest.json").string());
  CHECK(m.at("summary").at("max_centre_drift_rel_scale").get<double>() < 1e-8);
  CHECK(m.at("summary").at("max_rel_error_vs_closed_form").get<double>() < 1e-6);
  CHECK(m.at("seed") == 7);
  for (const auto& f : ra.files) {
    if (f == "manifest.json") continue;
    CHECK_MESSAGE(slurp(a / f) == slurp(b / f), f);
  }
  const auto rows = read_trajectory_csv((a / "trajectories.csv").string());
  CHECK_FALSE(rows.empty());
}

TEST_CASE("energy-shell run writes the constants into the curve header") {
  const fs::path d = scratch("shell");
  run(config("energy-shell", {{"points", "101"}}, d));
  const Curve c = read_curve_csv((d / "energy_shell.csv").string());
  CHECK(c.header.at("a_plus") == "5.58309");
  CHECK(c.rows.size() == 101);
  CHECK(c.rows[0][0] == 0.0);
}

TEST_CASE("command-line exit codes") {
  const fs::path d = scratch("exe");
  CHECK(run_cli("") == exit_invalid_input);
  CHECK(run_cli("run") == exit_invalid_input);
  CHECK(run_cli("run nonsense") == exit_invalid_input);
  CHECK(run_cli("run pair-decay --colour red") == exit_invalid_input);
  const fs::path empty = d / "empty.json";
  std::ofstream(empty) << "{}";
  CHECK(run_cli("run --config " + empty.string()) == exit_invalid_input);
  CHECK(run_cli("validate pair-decay --alpha -1") == exit_validation);
  CHECK(run_cli("validate dkp-energyflow --terms '[{\"p\": [0.3, 0, 0], \"E\": 5}]'") ==
        exit_physics);
  CHECK(run_cli("validate imaging") == exit_ok);
  CHECK(run_cli("list") == exit_ok);
  CHECK(run_cli("run energy-shell --points 11 --out " + (d / "out").string()) == exit_ok);
  CHECK(fs::exists(d / "out" / "manifest.json"));
  CHECK(run_cli("run energy-shell --points 11 --out /proc/forbidden") == exit_io);
}
